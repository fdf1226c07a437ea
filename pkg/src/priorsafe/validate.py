"""Posterior audits of synthesized controllers and containment certificates.

Everything here uses the true system and brute-force sampling or vertex
enumeration; nothing is shared with the synthesis LPs except the set
classes.
"""

import csv
import itertools
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .datagen import sample_czonotope
from .numerics import as_matrix
from .setops import ConstrainedZonotope, Polytope, halfspaces, point_membership

MARGIN_TOL = 1e-8
MAX_ENUMERATION = 4096  # vertex x disturbance-corner pairs
SAMPLE_CHUNK = 2500  # fixed chunking keeps results independent of the worker count


@dataclass
class ValidationReport:
    method: str
    lam: float
    tested: int = 0
    violations: int = 0
    worst_margin: float = np.inf
    runtime: float = 0.0
    sampling_only: bool = False
    counterexample: list = None
    details: dict = field(default_factory=dict)

    @property
    def passed(self):
        return self.violations == 0

    def merge(self, other):
        """Combine two reports on the same check (counts add, margins take the min)."""
        worse = other if other.worst_margin < self.worst_margin else self
        return ValidationReport(
            self.method,
            self.lam,
            self.tested + other.tested,
            self.violations + other.violations,
            min(self.worst_margin, other.worst_margin),
            self.runtime + other.runtime,
            self.sampling_only or other.sampling_only,
            self.counterexample if self.counterexample is not None else other.counterexample,
            {**self.details, **other.details, "worst_at": worse.details.get("worst_at")},
        )

    def to_dict(self):
        d = asdict(self)
        d["passed"] = self.passed
        d["worst_margin"] = None if not np.isfinite(self.worst_margin) else float(self.worst_margin)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d.pop("passed", None)
        if d.get("worst_margin") is None:
            d["worst_margin"] = np.inf
        return cls(**d)


def as_polytope(S, rng=0):
    """Halfspace form of a polytope or a full-dimensional constrained zonotope."""
    if isinstance(S, Polytope):
        return S
    hs = halfspaces(S, rng)
    if hs is None:
        raise ValueError("set is not full dimensional")
    return Polytope(*hs)


def extreme_points(Zw, limit=MAX_ENUMERATION):
    """Vertices of a disturbance set, or ``None`` when enumeration is too large."""
    if Zw.n_gens == 0:
        return Zw.c.reshape(1, -1)
    if Zw.is_zonotope:
        if 2 ** Zw.n_gens > limit:
            return None
        signs = np.array(list(itertools.product((-1.0, 1.0), repeat=Zw.n_gens)))
        return Zw.points(signs)
    if Zw.dim > 3:
        return None
    verts = as_polytope(Zw).vertices()
    return verts if len(verts) <= limit else None


def _closed_loop(sys, K):
    K = as_matrix(K, "K")
    return sys.A + sys.B @ K


def _score(AK, X, W, H, h, lam, tol):
    Xp = X @ AK.T + W
    margins = lam * h - Xp @ H.T
    worst = margins.min(axis=1)
    bad = worst < -tol
    i = int(np.argmin(worst))
    return len(X), int(bad.sum()), float(worst[i]), (X[i].tolist(), W[i].tolist())


def check_contractive(sys, K, safe, Zw, lam, N=10_000, seed=0, tol=MARGIN_TOL, jobs=1, method="audit"):
    """Test ``H (A K x + w) <= lam h`` on vertex/corner pairs and ``N`` samples.

    ``x`` runs over the safe set and ``w`` over ``Zw``. Enumeration is used
    when the state dimension is at most three and the number of pairs is
    below ``MAX_ENUMERATION``; otherwise the report is flagged as
    sampling-only. Samples come in fixed-size chunks with one seeded stream
    each, so the outcome does not depend on ``jobs``.
    """
    t0 = time.perf_counter()
    safe = as_polytope(safe)
    if safe.is_empty():
        raise ValueError("safe set is empty")
    AK = _closed_loop(sys, K)
    H, h = safe.H, safe.h
    report = ValidationReport(method, float(lam))

    verts = safe.vertices() if safe.dim <= 3 else None
    corners = extreme_points(Zw)
    if verts is None or corners is None or len(verts) * len(corners) > MAX_ENUMERATION:
        report.sampling_only = True
    else:
        X = np.repeat(verts, len(corners), axis=0)
        W = np.tile(corners, (len(verts), 1))
        tested, bad, worst, at = _score(AK, X, W, H, h, lam, tol)
        report = report.merge(ValidationReport(method, lam, tested, bad, worst, details={"worst_at": at, "enumerated": tested}))

    def chunk(ss, size):
        rng = np.random.default_rng(ss)
        X = safe.sample(size, rng)
        W = sample_czonotope(Zw, rng, size)
        tested, bad, worst, at = _score(AK, X, W, H, h, lam, tol)
        return ValidationReport(method, lam, tested, bad, worst, details={"worst_at": at})

    if N > 0:
        jobs = max(1, int(jobs))
        sizes = [min(SAMPLE_CHUNK, N - k) for k in range(0, N, SAMPLE_CHUNK)]
        streams = np.random.SeedSequence(seed).spawn(len(sizes))
        if jobs == 1:
            parts = [chunk(ss, n) for ss, n in zip(streams, sizes)]
        else:
            from concurrent.futures import ThreadPoolExecutor

            with ThreadPoolExecutor(jobs) as pool:
                parts = list(pool.map(chunk, streams, sizes))
        for p in parts:
            report = report.merge(p)
    if report.violations:
        report.counterexample = report.details.get("worst_at")
    report.runtime = time.perf_counter() - t0
    return report


def rollout(sys, K, x0, Zw, horizon, rng):
    """States ``x(1), ..., x(horizon)`` under ``u = K x`` and sampled disturbances."""
    rng = np.random.default_rng(rng)
    AK = _closed_loop(sys, K)
    W = sample_czonotope(Zw, rng, horizon) if horizon else np.zeros((0, sys.n))
    X = np.empty((horizon, sys.n))
    x = np.asarray(x0, dtype=float).reshape(-1)
    for t in range(horizon):
        x = AK @ x + W[t]
        X[t] = x
    return X


def check_ris(sys, K, safe, Zw, horizon, N=100, seed=0, tol=MARGIN_TOL):
    """Roll ``N`` trajectories from random safe states and count exits from the safe set."""
    t0 = time.perf_counter()
    safe = as_polytope(safe)
    report = ValidationReport("ris", 1.0)
    if horizon < 1 or N < 1:
        report.runtime = time.perf_counter() - t0
        return report
    rng = np.random.default_rng(seed)
    X0 = safe.sample(N, rng)
    for k, x0 in enumerate(X0):
        X = rollout(sys, K, x0, Zw, horizon, rng)
        margins = (safe.h - X @ safe.H.T).min(axis=1)
        report.tested += horizon
        bad = margins < -tol
        report.violations += int(bad.sum())
        if margins.min() < report.worst_margin:
            report.worst_margin = float(margins.min())
        if bad.any() and report.counterexample is None:
            report.counterexample = {"run": k, "x0": x0.tolist(), "step": int(np.argmax(bad)) + 1}
    report.runtime = time.perf_counter() - t0
    return report


@dataclass
class OracleResult:
    consistent: bool
    counterexample: np.ndarray = None
    tested: int = 0


def oracle_containment(C1, C2, N=10_000, seed=0, tol=1e-7):
    """Sample ``C1`` and look for a point outside ``C2``.

    Membership in ``C2`` is read from its exact halfspace form when that is
    available (dimension at most four, full dimensional); suspects, and all
    points otherwise, go through the membership LP. A returned
    counterexample is an LP-confirmed non-member.
    """
    rng = np.random.default_rng(seed)
    if C1.is_empty():
        return OracleResult(True, None, 0)
    pts = sample_czonotope(C1, rng, N)
    hs = halfspaces(C2, rng) if isinstance(C2, ConstrainedZonotope) and C2.dim <= 4 else None
    if isinstance(C2, Polytope):
        outside = ~C2.contains(pts, tol)
        return OracleResult(not outside.any(), pts[np.argmax(outside)] if outside.any() else None, N)
    if hs is not None:
        H, h = hs
        slack = pts @ H.T - h
        suspects = np.flatnonzero(slack.max(axis=1) > tol * (1.0 + np.abs(h).max()))
    else:
        suspects = np.arange(N)
    for i in suspects:
        if not point_membership(pts[i], C2, tol).member:
            return OracleResult(False, pts[i], N)
    return OracleResult(True, None, N)


def write_trajectories_csv(path, runs, safe=None):
    """One row per state: ``run, t, x1..xn`` and, given a safe set, ``inside``."""
    n = None
    for X in runs:
        if len(X):
            n = X.shape[1]
            break
    if n is None:
        n = safe.dim if safe is not None else 0
    header = ["run", "t"] + [f"x{i + 1}" for i in range(n)] + (["inside"] if safe is not None else [])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r, X in enumerate(runs):
            inside = safe.contains(X, MARGIN_TOL) if safe is not None and len(X) else []
            for t, x in enumerate(X):
                row = [r, t + 1] + [repr(float(v)) for v in x]
                if safe is not None:
                    row.append(int(bool(inside[t])))
                w.writerow(row)
