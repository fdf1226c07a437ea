"""Sets of disturbances, closed-loop matrices and next states that agree with
the recorded data and the prior model knowledge."""

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .numerics import DimensionError
from .setops import (
    ConstrainedMatrixZonotope,
    ConstrainedZonotope,
    concat_T,
    cmz_times_cz,
    from_box,
    intersect_cmz,
    interval_matrix_zonotope,
    minkowski_sum,
    point_membership,
)


class ParametrizationError(ValueError):
    """``X0 @ G_K`` is not the identity."""


@dataclass(frozen=True)
class PriorKnowledge:
    """Prior set for ``[A B]`` (``None`` means no model knowledge) and the disturbance set."""

    M_prior: ConstrainedMatrixZonotope
    Zw: ConstrainedZonotope

    def without_model(self):
        return PriorKnowledge(None, self.Zw)

    def with_disturbance(self, Zw):
        return PriorKnowledge(self.M_prior, Zw)

    def to_dict(self):
        return {"M_prior": None if self.M_prior is None else self.M_prior.to_dict(), "Zw": self.Zw.to_dict()}


def box_prior(lower, upper, Zw):
    """Prior knowledge from elementwise bounds on ``[A B]``."""
    return PriorKnowledge(interval_matrix_zonotope(lower, upper), Zw)


def box_disturbance(b, n):
    """``[-b, b]^n`` as a zonotope with one axis generator per coordinate."""
    return from_box(-b * np.ones(n), b * np.ones(n))


def fingerprint(obj):
    """Short content hash of a JSON-serializable object."""
    blob = json.dumps(obj, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _check_shapes(data, prior):
    n, m = data.n, data.m
    if prior.Zw.dim != n:
        raise DimensionError(f"disturbance set has dimension {prior.Zw.dim}, state dimension is {n}")
    if prior.M_prior is not None and prior.M_prior.shape != (n, n + m):
        raise DimensionError(f"prior set has shape {prior.M_prior.shape}, expected {(n, n + m)}")


def data_consistent_set(data, M_prior):
    """``{X1 - theta D0 : theta in M_prior}`` built from first principles
    (generators ``-G_theta_i D0``)."""
    G = -np.einsum("inp,pq->inq", M_prior.G, data.D0) if M_prior.n_gens else np.zeros((0, data.n, data.T))
    return ConstrainedMatrixZonotope(data.X1 - M_prior.C @ data.D0, G, M_prior.A, M_prior.B)


def consistent_disturbances(data, prior):
    """Disturbance sequences explained by the data, the prior model set and ``Zw``.

    Intersection of the T-fold concatenation of ``Zw`` (its factors first)
    with the set of residuals ``X1 - theta D0`` over the prior set. Without
    model knowledge this is the concatenated disturbance set alone.
    """
    _check_shapes(data, prior)
    Mw = concat_T(prior.Zw, data.T)
    if prior.M_prior is None:
        return Mw
    return intersect_cmz(Mw, data_consistent_set(data, prior.M_prior))


def check_parametrization(data, G_K, tol=1e-6):
    G_K = np.atleast_2d(np.asarray(G_K, dtype=float))
    if G_K.shape != (data.T, data.n):
        raise DimensionError(f"G_K has shape {G_K.shape}, expected {(data.T, data.n)}")
    err = np.max(np.abs(data.X0 @ G_K - np.eye(data.n)))
    if err > tol:
        raise ParametrizationError(f"X0 @ G_K deviates from identity by {err:.3g}")
    return G_K


@dataclass(frozen=True)
class ClosedLoopSet:
    M_cl: ConstrainedMatrixZonotope
    M_dp: ConstrainedMatrixZonotope
    provenance: dict = field(default_factory=dict)

    def to_dict(self):
        return {"provenance": self.provenance, "set": self.M_cl.to_dict()}


def closed_loop_set(data, prior, G_K, tol=1e-6, M_dp=None):
    """All ``(X1 - W) G_K`` with ``W`` a consistent disturbance sequence.

    Contains ``A + B K`` for every ``[A B]`` consistent with data and prior
    when ``K = U0 G_K`` and ``X0 G_K = I``.
    """
    G_K = check_parametrization(data, G_K, tol)
    if M_dp is None:
        M_dp = consistent_disturbances(data, prior)
    X1 = data.X1
    G = -np.einsum("inp,pq->inq", M_dp.G, G_K) if M_dp.n_gens else np.zeros((0, data.n, data.n))
    M_cl = ConstrainedMatrixZonotope((X1 - M_dp.C) @ G_K, G, M_dp.A, M_dp.B)
    provenance = {
        "data": fingerprint(data.to_dict()),
        "prior": fingerprint(prior.to_dict()),
        "G_K": fingerprint(G_K.tolist()),
        "uses_model_prior": prior.M_prior is not None,
        "disturbance_refinement": "intersection only",
        "disturbance_set_empty": bool(M_dp.factor_set().is_empty()),
    }
    return ClosedLoopSet(M_cl, M_dp, provenance)


def next_state_set(cl, Cx, Zw):
    """Constrained zonotope holding ``A_K x + w`` for ``A_K`` in the closed-loop
    set, ``x`` in ``Cx`` and ``w`` in ``Zw``."""
    M = cl.M_cl if isinstance(cl, ClosedLoopSet) else cl
    if M.shape != (Cx.dim, Cx.dim) or Zw.dim != Cx.dim:
        raise DimensionError("state dimensions disagree")
    return minkowski_sum(cmz_times_cz(M, Cx), Zw)


def theta_consistent(theta, data, prior, tol=1e-7):
    """Is ``theta = [A B]`` in the prior set and ``X1 - theta D0`` an admissible disturbance record?"""
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    _check_shapes(data, prior)
    if theta.shape != (data.n, data.n + data.m):
        raise DimensionError(f"theta has shape {theta.shape}")
    if prior.M_prior is not None and not point_membership(theta, prior.M_prior, tol).member:
        return False
    return bool(point_membership(data.X1 - theta @ data.D0, concat_T(prior.Zw, data.T), tol).member)
