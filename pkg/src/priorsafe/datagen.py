"""Simulation of the true system and organization of experiment data."""

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .lpcore import LpProblem
from .numerics import DimensionError, as_matrix, null_space, row_rank_full
from .setops import EmptySetError

MAX_RETRIES = 10


class InformativityError(RuntimeError):
    """The recorded states are not rich enough (``X0`` lacks full row rank)."""


@dataclass(frozen=True)
class LinearSystem:
    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = as_matrix(self.A, "A")
        B = as_matrix(self.B, "B")
        if A.shape[0] != A.shape[1] or B.shape[0] != A.shape[0]:
            raise DimensionError(f"incompatible system matrices {A.shape} and {B.shape}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    @property
    def theta(self):
        return np.hstack([self.A, self.B])


@dataclass(frozen=True)
class DataView:
    """What a controller designer is allowed to see."""

    U0: np.ndarray
    X0: np.ndarray
    X1: np.ndarray
    D0: np.ndarray

    @property
    def T(self):
        return self.X0.shape[1]

    @property
    def n(self):
        return self.X0.shape[0]

    @property
    def m(self):
        return self.U0.shape[0]

    def to_dict(self):
        return {k: getattr(self, k).tolist() for k in ("U0", "X0", "X1", "D0")}

    @classmethod
    def from_dict(cls, d):
        return cls(*(np.atleast_2d(np.asarray(d[k], dtype=float)) for k in ("U0", "X0", "X1", "D0")))


@dataclass(frozen=True)
class DataSet:
    """One experiment: inputs ``U0`` (m x T), states ``X`` (n x T+1) and the
    disturbance record ``W0`` (n x T), which is kept for testing only."""

    U0: np.ndarray
    X: np.ndarray
    W0: np.ndarray = None

    @property
    def T(self):
        return self.U0.shape[1]

    @property
    def X0(self):
        return self.X[:, :-1]

    @property
    def X1(self):
        return self.X[:, 1:]

    @property
    def D0(self):
        return np.vstack([self.X0, self.U0])

    def view(self):
        return DataView(self.U0.copy(), self.X0.copy(), self.X1.copy(), self.D0)

    def public_dict(self):
        d = self.view().to_dict()
        d["X"] = self.X.tolist()
        return d

    def hidden_dict(self):
        return {"W0": None if self.W0 is None else self.W0.tolist()}

    @classmethod
    def from_dicts(cls, public, hidden=None):
        W0 = None
        if hidden is not None and hidden.get("W0") is not None:
            W0 = np.atleast_2d(np.asarray(hidden["W0"], dtype=float))
        return cls(np.atleast_2d(np.asarray(public["U0"], dtype=float)), np.atleast_2d(np.asarray(public["X"], dtype=float)), W0)

    def write(self, directory, csv_files=True):
        """Write ``dataset.json`` (public), ``hidden.json`` and, optionally, one
        CSV per matrix with one column per time index."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        (directory / "dataset.json").write_text(json.dumps(self.public_dict(), indent=1) + "\n")
        (directory / "hidden.json").write_text(json.dumps(self.hidden_dict(), indent=1) + "\n")
        if csv_files:
            mats = {"U0": self.U0, "X": self.X, "X0": self.X0, "X1": self.X1, "D0": self.D0}
            if self.W0 is not None:
                mats["W0"] = self.W0
            for name, M in mats.items():
                with open(directory / f"{name}.csv", "w", newline="") as fh:
                    w = csv.writer(fh)
                    w.writerow([f"t{k}" for k in range(M.shape[1])])
                    for row in M:
                        w.writerow([repr(float(v)) for v in row])

    @classmethod
    def read(cls, directory, with_hidden=False):
        directory = Path(directory)
        public = json.loads((directory / "dataset.json").read_text())
        hidden = json.loads((directory / "hidden.json").read_text()) if with_hidden else None
        return cls.from_dicts(public, hidden)


def simulate(sys, x0, u_seq, w_seq):
    """Run ``x(t+1) = A x(t) + B u(t) + w(t)`` for ``T`` steps."""
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    U = np.atleast_2d(np.asarray(u_seq, dtype=float))
    W = np.atleast_2d(np.asarray(w_seq, dtype=float))
    if x0.size != sys.n or U.shape[0] != sys.m or W.shape != (sys.n, U.shape[1]):
        raise DimensionError(f"shapes x0 {x0.shape}, U {U.shape}, W {W.shape} do not fit an (n={sys.n}, m={sys.m}) system")
    T = U.shape[1]
    X = np.empty((sys.n, T + 1))
    X[:, 0] = x0
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(T):
            X[:, t + 1] = sys.A @ X[:, t] + sys.B @ U[:, t] + W[:, t]
    if not np.all(np.isfinite(X)):
        raise OverflowError("state trajectory diverged to non-finite values")
    return DataSet(U.copy(), X, W.copy())


def _interior_factor(A, b, s):
    """A factor vector with ``A z = b`` as deep inside the unit box as possible."""
    prob = LpProblem("chebyshev")
    z = prob.variable("z", s, -1.0, 1.0)
    d = prob.variable("d", 1, 0.0, 1.0)
    prob.add_eq(A @ z, b.reshape(-1, 1))
    ones = np.ones((s, 1))
    prob.add_le(z + ones @ d, ones)
    prob.add_le(-z + ones @ d, ones)
    prob.maximize(d)
    sol = prob.solve()
    if not sol.ok:
        raise EmptySetError("factor polytope is empty")
    return np.clip(sol["z"].ravel(), -1.0, 1.0)


def sample_factors(S, size, rng, burn_in=50, thin=5):
    """Factor vectors from ``{A z = b, |z|_inf <= 1}``.

    Uniform on the cube without constraints; otherwise hit-and-run chains
    started at a deep interior point, one chain per requested sample.
    """
    rng = np.random.default_rng(rng)
    s = S.n_gens
    if S.n_cons == 0:
        return rng.uniform(-1.0, 1.0, size=(size, s))
    z0 = _interior_factor(S.A, S.b, s)
    N = null_space(S.A)
    if N.shape[1] == 0:
        return np.tile(z0, (size, 1))
    Z = np.tile(z0, (size, 1))
    for _ in range(burn_in + thin):
        D = rng.standard_normal((size, N.shape[1])) @ N.T
        with np.errstate(divide="ignore", invalid="ignore"):
            t_hi = np.where(D > 0, (1.0 - Z) / D, np.where(D < 0, (-1.0 - Z) / D, np.inf))
            t_lo = np.where(D > 0, (-1.0 - Z) / D, np.where(D < 0, (1.0 - Z) / D, -np.inf))
        hi = np.minimum(np.min(t_hi, axis=1), 1e6)
        lo = np.maximum(np.max(t_lo, axis=1), -1e6)
        hi, lo = np.maximum(hi, 0.0), np.minimum(lo, 0.0)
        step = lo + (hi - lo) * rng.uniform(size=size)
        Z = np.clip(Z + step[:, None] * D, -1.0, 1.0)
    return Z


def sample_czonotope(S, rng, size=None):
    """Draw points ``G z + c`` of a constrained zonotope (see :func:`sample_factors`)."""
    n = 1 if size is None else size
    pts = S.points(sample_factors(S, n, rng)) if S.n_gens else np.tile(S.c, (n, 1))
    if S.n_gens == 0 and S.n_cons and np.any(np.abs(S.b) > 1e-12):
        raise EmptySetError("factor polytope is empty")
    return pts[0] if size is None else pts


def excite(sys, x0, T, u_range, Zw, seed, max_retries=MAX_RETRIES):
    """Collect ``T`` samples under uniform random inputs and disturbances from ``Zw``.

    Retries with fresh random streams derived from ``seed`` until the state
    data ``X0`` has full row rank.
    """
    if T < sys.n + 1:
        raise ValueError(f"need T >= n + 1 = {sys.n + 1} samples, got T = {T}")
    streams = np.random.SeedSequence(seed).spawn(max_retries)
    for ss in streams:
        rng = np.random.default_rng(ss)
        U = rng.uniform(-u_range, u_range, size=(sys.m, T))
        W = sample_czonotope(Zw, rng, size=T).T
        data = simulate(sys, x0, U, W)
        if row_rank_full(data.X0):
            return data
    raise InformativityError(f"X0 stayed rank deficient after {max_retries} attempts")
