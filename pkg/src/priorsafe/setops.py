"""Zonotopes, constrained zonotopes and their matrix-valued counterparts.

Conventions used everywhere downstream:

* Constrained zonotope ``<G, c, A, b> = {G z + c : A z = b, |z|_inf <= 1}``.
* Matrix generators are stored as an ``(s, n, p)`` array; constraint
  generators as ``(s, nc, pc)`` with right-hand side ``(nc, pc)``.
* Generators are never pruned implicitly, so factor ``i`` keeps the same
  index in generator and constraint blocks through every operation.
"""

from collections import namedtuple
from itertools import combinations

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .lpcore import LpProblem, add_abs_bound
from .numerics import DimensionError, vec


class EmptySetError(ValueError):
    """Raised when an operation needs a nonempty set."""


def _vector(x, name):
    x = np.asarray(x, dtype=float).reshape(-1)
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} has non-finite entries")
    return x


def _freeze(*arrays):
    for a in arrays:
        a.setflags(write=False)


class ConstrainedZonotope:
    """``{G z + c : A z = b, |z|_inf <= 1}`` in R^n."""

    def __init__(self, G, c, A=None, b=None):
        c = _vector(c, "center")
        n = c.size
        G = np.asarray(G, dtype=float)
        if G.ndim == 1:
            G = G.reshape(n, -1) if n else G.reshape(0, -1)
        if G.ndim != 2 or G.shape[0] != n:
            raise DimensionError(f"generator matrix has shape {G.shape}, expected ({n}, s)")
        s = G.shape[1]
        if A is None:
            A = np.zeros((0, s))
            b = np.zeros(0)
        A = np.asarray(A, dtype=float)
        if A.ndim == 1:
            A = A.reshape(1, -1) if A.size else A.reshape(0, s)
        b = _vector(b, "constraint vector")
        if A.shape != (b.size, s):
            raise DimensionError(f"constraint matrix has shape {A.shape}, expected ({b.size}, {s})")
        self.G, self.c, self.A, self.b = G.copy(), c.copy(), A.copy(), b.copy()
        _freeze(self.G, self.c, self.A, self.b)

    @property
    def dim(self):
        return self.c.size

    @property
    def n_gens(self):
        return self.G.shape[1]

    @property
    def n_cons(self):
        return self.b.size

    @property
    def is_zonotope(self):
        return self.n_cons == 0

    def points(self, factors):
        """Map factor vectors (rows of ``factors``) to points."""
        factors = np.atleast_2d(factors)
        return factors @ self.G.T + self.c

    def prune_zero_generators(self, tol=0.0):
        """Drop generators that are zero and whose constraint column is zero too."""
        keep = (np.max(np.abs(self.G), axis=0, initial=0.0) > tol) | (np.max(np.abs(self.A), axis=0, initial=0.0) > tol)
        return ConstrainedZonotope(self.G[:, keep], self.c, self.A[:, keep], self.b)

    def is_empty(self, tol=1e-9):
        if self.n_cons == 0:
            return False
        prob = LpProblem("emptiness")
        z = prob.variable("z", self.n_gens, -1.0, 1.0)
        prob.add_eq(self.A @ z, self.b)
        return not prob.solve(tol).ok

    def interval_hull(self):
        """Tight axis-aligned bounds ``(lower, upper)``."""
        if self.is_zonotope:
            r = np.sum(np.abs(self.G), axis=1)
            return self.c - r, self.c + r
        lo, hi = np.empty(self.dim), np.empty(self.dim)
        for k in range(self.dim):
            e = np.zeros(self.dim)
            e[k] = 1.0
            hi[k] = e @ support_point(self, e)
            lo[k] = e @ support_point(self, -e)
        return lo, hi

    def to_dict(self):
        return {
            "type": "constrained_zonotope",
            "dim": self.dim,
            "n_gens": self.n_gens,
            "n_cons": self.n_cons,
            "center": self.c.tolist(),
            "generators": self.G.tolist(),
            "A": self.A.tolist(),
            "b": self.b.tolist(),
        }

    def __repr__(self):
        return f"{type(self).__name__}(dim={self.dim}, gens={self.n_gens}, cons={self.n_cons})"


class Zonotope(ConstrainedZonotope):
    """``{G z + c : |z|_inf <= 1}``."""

    def __init__(self, G, c):
        super().__init__(G, c)

    def to_dict(self):
        d = super().to_dict()
        d["type"] = "zonotope"
        return d


class ConstrainedMatrixZonotope:
    """``{C + sum_i G_i z_i : sum_i A_i z_i = B, |z|_inf <= 1}`` over n x p matrices."""

    def __init__(self, C, G, A=None, B=None):
        C = np.asarray(C, dtype=float)
        if C.ndim != 2:
            raise DimensionError("center must be a matrix")
        n, p = C.shape
        G = np.asarray(G, dtype=float)
        if G.size == 0:
            G = G.reshape(0, n, p)
        if G.ndim != 3 or G.shape[1:] != (n, p):
            raise DimensionError(f"generators have shape {G.shape}, expected (s, {n}, {p})")
        s = G.shape[0]
        if A is None:
            A = np.zeros((s, 0, p))
            B = np.zeros((0, p))
        A = np.asarray(A, dtype=float)
        B = np.asarray(B, dtype=float)
        if B.ndim != 2:
            raise DimensionError("constraint center must be a matrix")
        if A.size == 0:
            A = A.reshape((s,) + B.shape)
        if A.shape != (s,) + B.shape:
            raise DimensionError(f"constraint generators have shape {A.shape}, expected {(s,) + B.shape}")
        if not (np.all(np.isfinite(C)) and np.all(np.isfinite(G)) and np.all(np.isfinite(A)) and np.all(np.isfinite(B))):
            raise ValueError("non-finite entries")
        self.C, self.G, self.A, self.B = C.copy(), G.copy(), A.copy(), B.copy()
        _freeze(self.C, self.G, self.A, self.B)

    @property
    def shape(self):
        return self.C.shape

    @property
    def n_gens(self):
        return self.G.shape[0]

    @property
    def constraint_shape(self):
        return self.B.shape

    @property
    def n_cons(self):
        return self.B.size

    def vec_constraints(self):
        """Constraints as ``(Avec, bvec)`` with ``Avec[:, i] = vec(A_i)``."""
        s = self.n_gens
        Avec = np.zeros((self.n_cons, s))
        for i in range(s):
            Avec[:, i] = vec(self.A[i]).ravel()
        return Avec, vec(self.B).ravel()

    def vec_generators(self):
        """Generators as a ``(n*p, s)`` matrix with columns ``vec(G_i)``."""
        return np.stack([vec(g).ravel() for g in self.G], axis=1) if self.n_gens else np.zeros((self.C.size, 0))

    def evaluate(self, factors):
        factors = np.asarray(factors, dtype=float).reshape(-1)
        return self.C + np.tensordot(factors, self.G, axes=1)

    def factor_set(self):
        """The factor polytope as a constrained zonotope in R^s (identity generators)."""
        Avec, bvec = self.vec_constraints()
        return ConstrainedZonotope(np.eye(self.n_gens), np.zeros(self.n_gens), Avec, bvec)

    def to_dict(self):
        return {
            "type": "constrained_matrix_zonotope",
            "shape": list(self.shape),
            "n_gens": self.n_gens,
            "constraint_shape": list(self.constraint_shape),
            "center": self.C.tolist(),
            "generators": self.G.tolist(),
            "A": self.A.tolist(),
            "b": self.B.tolist(),
        }

    def __repr__(self):
        return f"{type(self).__name__}(shape={self.shape}, gens={self.n_gens}, cons={self.constraint_shape})"


class MatrixZonotope(ConstrainedMatrixZonotope):
    def __init__(self, C, G):
        super().__init__(C, G)

    def to_dict(self):
        d = super().to_dict()
        d["type"] = "matrix_zonotope"
        return d


class Polytope:
    """``{x : H x <= h}``."""

    def __init__(self, H, h):
        H = np.atleast_2d(np.asarray(H, dtype=float))
        h = _vector(h, "h")
        if H.shape[0] != h.size:
            raise DimensionError(f"H has {H.shape[0]} rows but h has {h.size} entries")
        self.H, self.h = H.copy(), h.copy()
        _freeze(self.H, self.h)

    @property
    def dim(self):
        return self.H.shape[1]

    def contains(self, x, tol=1e-9):
        """Vectorized membership; ``x`` is a point or an array of row points."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        vals = np.atleast_2d(x) @ self.H.T - self.h
        out = np.all(vals <= tol, axis=1)
        return bool(out[0]) if single else out

    def _lp_extreme(self, direction):
        prob = LpProblem("polytope-support")
        x = prob.variable("x", self.dim)
        prob.add_le(self.H @ x, self.h)
        prob.maximize(np.atleast_2d(direction) @ x)
        return prob.solve()

    def is_empty(self):
        prob = LpProblem("polytope-feasibility")
        x = prob.variable("x", self.dim)
        prob.add_le(self.H @ x, self.h)
        return not prob.solve().ok

    def bounding_box(self):
        lo, hi = np.empty(self.dim), np.empty(self.dim)
        for k in range(self.dim):
            e = np.zeros(self.dim)
            e[k] = 1.0
            up, down = self._lp_extreme(e), self._lp_extreme(-e)
            if not (up.ok and down.ok):
                raise ValueError("polytope is empty or unbounded")
            hi[k], lo[k] = up.objective_value, -down.objective_value
        return lo, hi

    def inf_radius(self):
        """``max_{x in P} |x|_inf`` from 2n LPs."""
        lo, hi = self.bounding_box()
        return float(max(np.max(np.abs(lo)), np.max(np.abs(hi))))

    def vertices(self, tol=1e-9):
        """Vertices by enumerating n-subsets of active facets (small n only)."""
        n = self.dim
        verts = []
        for rows in combinations(range(self.H.shape[0]), n):
            Hs = self.H[list(rows)]
            if abs(np.linalg.det(Hs)) < 1e-12:
                continue
            v = np.linalg.solve(Hs, self.h[list(rows)])
            if np.all(self.H @ v <= self.h + tol * (1 + np.abs(self.h))):
                if not any(np.allclose(v, w, atol=1e-9) for w in verts):
                    verts.append(v)
        return np.array(verts).reshape(-1, n)

    def sample(self, size, rng, max_rounds=1000):
        """Uniform samples by rejection from the bounding box."""
        rng = np.random.default_rng(rng)
        lo, hi = self.bounding_box()
        out = []
        count = 0
        for _ in range(max_rounds):
            cand = rng.uniform(lo, hi, size=(max(size, 16), self.dim))
            keep = cand[self.contains(cand)]
            out.append(keep)
            count += len(keep)
            if count >= size:
                break
        pts = np.concatenate(out)[:size]
        if len(pts) < size:
            raise EmptySetError("rejection sampling did not collect enough points")
        return pts

    def to_dict(self):
        return {"type": "polytope", "dim": self.dim, "n_halfspaces": self.h.size, "H": self.H.tolist(), "h": self.h.tolist()}

    def __repr__(self):
        return f"Polytope(dim={self.dim}, halfspaces={self.h.size})"


def set_from_dict(d):
    """Inverse of the ``to_dict`` methods."""
    kind = d.get("type")
    if kind == "polytope":
        H = np.asarray(d["H"], dtype=float).reshape(d["n_halfspaces"], d["dim"])
        return Polytope(H, d["h"])
    if kind in ("zonotope", "constrained_zonotope"):
        n, s, q = d["dim"], d["n_gens"], d.get("n_cons", 0)
        G = np.asarray(d["generators"], dtype=float).reshape(n, s)
        if kind == "zonotope":
            return Zonotope(G, d["center"])
        A = np.asarray(d["A"], dtype=float).reshape(q, s)
        return ConstrainedZonotope(G, d["center"], A, d["b"])
    if kind in ("matrix_zonotope", "constrained_matrix_zonotope"):
        n, p = d["shape"]
        s = d["n_gens"]
        G = np.asarray(d["generators"], dtype=float).reshape(s, n, p)
        if kind == "matrix_zonotope":
            return MatrixZonotope(d["center"], G)
        nc, pc = d["constraint_shape"]
        A = np.asarray(d["A"], dtype=float).reshape(s, nc, pc)
        return ConstrainedMatrixZonotope(d["center"], G, A, np.asarray(d["b"], dtype=float).reshape(nc, pc))
    raise ValueError(f"unknown set type {kind!r}")


# ----------------------------------------------------------------------------
# constructors


def from_box(lower, upper):
    """Zonotope of the box ``[lower, upper]``; one axis generator per coordinate."""
    lower, upper = _vector(lower, "lower"), _vector(upper, "upper")
    if lower.shape != upper.shape:
        raise DimensionError("bounds differ in length")
    if np.any(lower > upper):
        raise ValueError("lower bound exceeds upper bound")
    return Zonotope(np.diag((upper - lower) / 2.0), (upper + lower) / 2.0)


def interval_matrix_zonotope(lower, upper):
    """Matrix zonotope of the interval matrix ``[lower, upper]``.

    One generator per entry with nonzero width, in row-major entry order.
    """
    lower, upper = np.atleast_2d(np.asarray(lower, dtype=float)), np.atleast_2d(np.asarray(upper, dtype=float))
    if lower.shape != upper.shape:
        raise DimensionError(f"bound shapes differ: {lower.shape} vs {upper.shape}")
    if np.any(lower > upper):
        raise ValueError("lower bound exceeds upper bound")
    half = (upper - lower) / 2.0
    gens = []
    for i, j in zip(*np.nonzero(half)):  # np.nonzero is row-major
        g = np.zeros_like(half)
        g[i, j] = half[i, j]
        gens.append(g)
    G = np.array(gens).reshape((len(gens),) + half.shape)
    return MatrixZonotope((upper + lower) / 2.0, G)


# ----------------------------------------------------------------------------
# algebra


def minkowski_sum(C1, C2):
    if C1.dim != C2.dim:
        raise DimensionError(f"dimension mismatch: {C1.dim} vs {C2.dim}")
    A = np.block(
        [
            [C1.A, np.zeros((C1.n_cons, C2.n_gens))],
            [np.zeros((C2.n_cons, C1.n_gens)), C2.A],
        ]
    )
    return ConstrainedZonotope(np.hstack([C1.G, C2.G]), C1.c + C2.c, A, np.concatenate([C1.b, C2.b]))


def map_cmz(M, N):
    """``{X N : X in M}`` for a matrix ``N`` (constraints unchanged)."""
    N = np.atleast_2d(np.asarray(N, dtype=float))
    if N.shape[0] != M.shape[1]:
        raise DimensionError(f"cannot right-multiply {M.shape} set by {N.shape} matrix")
    G = np.einsum("inp,pq->inq", M.G, N) if M.n_gens else np.zeros((0, M.shape[0], N.shape[1]))
    return ConstrainedMatrixZonotope(M.C @ N, G, M.A, M.B)


def map_cmz_vec(M, v):
    """``{X v : X in M}`` for a vector ``v``; constraints are vectorized."""
    v = _vector(v, "vector")
    if v.size != M.shape[1]:
        raise DimensionError(f"cannot right-multiply {M.shape} set by vector of length {v.size}")
    G = (M.G @ v).T if M.n_gens else np.zeros((M.shape[0], 0))
    Avec, bvec = M.vec_constraints()
    return ConstrainedZonotope(G, M.C @ v, Avec, bvec)


def concat_T(Zw, T):
    """Set of n x T matrices whose columns are independent members of ``Zw``.

    Generator ``t * s_w + i`` carries column ``i`` of ``Zw.G`` in column
    ``t``; its constraint generator carries column ``i`` of ``Zw.A`` in
    column ``t``. The constraint center repeats ``Zw.b`` in every column.
    """
    T = int(T)
    if T < 1:
        raise ValueError("T must be at least 1")
    n, s = Zw.dim, Zw.n_gens
    q = Zw.n_cons
    G = np.zeros((T * s, n, T))
    A = np.zeros((T * s, q, T))
    for t in range(T):
        for i in range(s):
            G[t * s + i, :, t] = Zw.G[:, i]
            A[t * s + i, :, t] = Zw.A[:, i]
    C = np.tile(Zw.c.reshape(-1, 1), (1, T))
    B = np.tile(Zw.b.reshape(-1, 1), (1, T))
    return ConstrainedMatrixZonotope(C, G, A, B)


def _constraint_blocks(M, width):
    """Constraint generators / center reshaped to a common column count.

    Empty constraint blocks take any width. Nonempty blocks keep their
    layout when the width already matches, otherwise ``None``.
    """
    nc, pc = M.constraint_shape
    if nc == 0 or pc == 0:
        return np.zeros((M.n_gens, 0, width)), np.zeros((0, width))
    if pc == width:
        return M.A, M.B
    return None


def intersect_cmz(M1, M2):
    """Exact intersection of two constrained matrix zonotopes.

    Factors of ``M1`` come first. The coupling rows enforce
    ``sum G1_i z1_i - sum G2_j z2_j = C2 - C1`` beneath the stacked
    constraints of both sets. When the constraint widths of the inputs do
    not both equal the column count, everything is vectorized to width one.
    """
    if M1.shape != M2.shape:
        raise DimensionError(f"shape mismatch: {M1.shape} vs {M2.shape}")
    n, p = M1.shape
    b1, b2 = _constraint_blocks(M1, p), _constraint_blocks(M2, p)
    G1, G2 = M1.G, M2.G
    C1, C2 = M1.C, M2.C
    if b1 is None or b2 is None:
        A1v, B1v = M1.vec_constraints()
        A2v, B2v = M2.vec_constraints()
        b1 = (A1v.T.reshape(M1.n_gens, -1, 1), B1v.reshape(-1, 1))
        b2 = (A2v.T.reshape(M2.n_gens, -1, 1), B2v.reshape(-1, 1))
        G1 = M1.vec_generators().T.reshape(M1.n_gens, -1, 1)
        G2 = M2.vec_generators().T.reshape(M2.n_gens, -1, 1)
        C1, C2 = vec(M1.C), vec(M2.C)
    (A1, B1), (A2, B2) = b1, b2
    s1, s2 = M1.n_gens, M2.n_gens
    nc1, nc2 = B1.shape[0], B2.shape[0]
    w = B1.shape[1]
    rows = nc1 + nc2 + C1.shape[0]
    A = np.zeros((s1 + s2, rows, w))
    A[:s1, :nc1] = A1
    A[:s1, nc1 + nc2 :] = G1
    A[s1:, nc1 : nc1 + nc2] = A2
    A[s1:, nc1 + nc2 :] = -G2
    B = np.vstack([B1, B2, C2 - C1])
    G = np.concatenate([M1.G, np.zeros((s2, n, p))], axis=0)
    return ConstrainedMatrixZonotope(M1.C, G, A, B)


def scale_level_set(C, lam):
    """``<lam G, c, A, lam b>``: the lam-scaled level set about the center.

    Equal to ``c + lam (C - c)`` for unconstrained sets. With constraints
    and ``b != 0`` it can be strictly larger, since the factor box is not
    rescaled; use :func:`scale_about_origin` when the exact scaled set
    is needed.
    """
    if not 0.0 < lam <= 1.0:
        raise ValueError(f"scaling level must lie in (0, 1], got {lam}")
    return ConstrainedZonotope(lam * C.G, C.c, C.A, lam * C.b)


def scale_about_origin(C, lam):
    """``lam * C = <lam G, lam c, A, b>``; exact for constrained sets too."""
    if not 0.0 < lam <= 1.0:
        raise ValueError(f"scaling level must lie in (0, 1], got {lam}")
    return ConstrainedZonotope(lam * C.G, lam * C.c, C.A, C.b)


def cmz_times_cz(M, C):
    """Over-approximation of ``{X x : X in M, x in C}``.

    Generator layout: ``[G_i c]_i | C_M G_x | [G_i G_x[:, j]]_(i, j)`` with the
    cross terms ordered by matrix generator first. Cross-term factors are
    fresh and unconstrained.
    """
    n, p = M.shape
    if p != C.dim:
        raise DimensionError(f"cannot multiply {M.shape} matrix set with a {C.dim}-dimensional set")
    s, sx = M.n_gens, C.n_gens
    first = (M.G @ C.c).T if s else np.zeros((n, 0))
    second = M.C @ C.G
    cross = np.einsum("inp,pj->nij", M.G, C.G).reshape(n, s * sx) if s and sx else np.zeros((n, 0))
    Avec, bvec = M.vec_constraints()
    qm, qx = Avec.shape[0], C.n_cons
    A = np.zeros((qm + qx, s + sx + s * sx))
    A[:qm, :s] = Avec
    A[qm:, s : s + sx] = C.A
    return ConstrainedZonotope(np.hstack([first, second, cross]), M.C @ C.c, A, np.concatenate([bvec, C.b]))


# ----------------------------------------------------------------------------
# membership and containment

Membership = namedtuple("Membership", "member witness residual")
Membership.__bool__ = lambda self: bool(self.member)


def point_membership(x, S, tol=1e-7):
    """Decide ``x in S`` by LP feasibility of the factor equations over the unit box.

    Works for constrained zonotopes (``x`` a vector) and constrained matrix
    zonotopes (``x`` a matrix). Returns ``Membership(member, witness, residual)``.
    """
    if isinstance(S, ConstrainedMatrixZonotope):
        X = np.atleast_2d(np.asarray(x, dtype=float))
        if X.shape != S.shape:
            raise DimensionError(f"matrix of shape {X.shape} tested against set of shape {S.shape}")
        Gm = S.vec_generators()
        target = vec(X - S.C).ravel()
        Am, bm = S.vec_constraints()
    else:
        xv = _vector(x, "point")
        if xv.size != S.dim:
            raise DimensionError(f"point of length {xv.size} tested against {S.dim}-dimensional set")
        Gm, target, Am, bm = S.G, xv - S.c, S.A, S.b
    s = Gm.shape[1]
    M = np.vstack([Gm, Am])
    rhs = np.concatenate([target, bm])
    if s == 0:
        r = float(np.max(np.abs(rhs), initial=0.0))
        return Membership(r <= tol, np.zeros(0), r)
    prob = LpProblem("membership")
    z = prob.variable("z", s, -1.0, 1.0)
    prob.add_eq(M @ z, rhs.reshape(-1, 1))
    sol = prob.solve(tol)
    if sol.status != "optimal":
        return Membership(False, None, float("inf"))
    zeta = np.clip(sol["z"].ravel(), -1.0, 1.0)
    r = float(np.max(np.abs(M @ zeta - rhs), initial=0.0))
    return Membership(r <= tol * (1.0 + np.max(np.abs(rhs), initial=0.0)), zeta, r)


Certificate = namedtuple("Certificate", "Gamma L P")


def containment_residual(C1, C2, cert):
    """Largest violation of the inclusion certificate equations and norm bound."""
    Gamma, L, P = cert
    L = L.reshape(-1)
    parts = [
        np.abs(C2.c - C1.c - C2.G @ L),
        np.abs(C1.G - C2.G @ Gamma).ravel(),
        np.abs(P @ C1.A - C2.A @ Gamma).ravel(),
        np.abs(P @ C1.b - C2.b - C2.A @ L),
        np.maximum(np.sum(np.abs(Gamma), axis=1) + np.abs(L) - 1.0, 0.0),
    ]
    return float(max((np.max(p) for p in parts if p.size), default=0.0))


def contains(C1, C2, tol=1e-7):
    """Search for an inclusion certificate of ``C1`` in ``C2``.

    Looks for ``Gamma, L, P`` with ``c2 - c1 = G2 L``, ``G1 = G2 Gamma``,
    ``P A1 = A2 Gamma``, ``P b1 = b2 + A2 L`` and
    ``|Gamma| 1 + |L| <= 1``. Returns a :class:`Certificate` or ``None``.
    The condition is sufficient only: ``None`` does not prove that ``C1``
    sticks out of ``C2``.
    """
    if C1.dim != C2.dim:
        raise DimensionError(f"dimension mismatch: {C1.dim} vs {C2.dim}")
    s1, s2, q1, q2 = C1.n_gens, C2.n_gens, C1.n_cons, C2.n_cons
    prob = LpProblem("containment")
    Gamma = prob.variable("Gamma", (s2, s1))
    L = prob.variable("L", (s2, 1))
    P = prob.variable("P", (q2, q1))
    prob.add_eq(C2.G @ L, (C2.c - C1.c).reshape(-1, 1))
    if s1:
        prob.add_eq(C2.G @ Gamma, C1.G)
    if q2 and s1:
        PA1 = P @ C1.A if q1 else np.zeros((q2, s1))
        prob.add_eq(C2.A @ Gamma - PA1, 0.0)
    if q2:
        Pb1 = P @ C1.b.reshape(-1, 1) if q1 else np.zeros((q2, 1))
        prob.add_eq(C2.A @ L - Pb1, -C2.b.reshape(-1, 1))
    if s2:
        add_abs_bound(prob, [Gamma, L] if s1 else [L], np.ones((s2, 1)))
    sol = prob.solve(tol)
    if not sol.ok:
        return None
    return Certificate(sol["Gamma"], sol["L"].ravel(), sol["P"])


# ----------------------------------------------------------------------------
# extreme points and halfspace form (low dimension)


def support_point(S, direction):
    """A point of ``S`` maximizing ``direction . x``."""
    d = _vector(direction, "direction")
    if S.is_zonotope:
        return S.c + S.G @ np.sign(S.G.T @ d)
    prob = LpProblem("support")
    z = prob.variable("z", S.n_gens, -1.0, 1.0)
    prob.add_eq(S.A @ z, S.b.reshape(-1, 1))
    prob.maximize((d @ S.G).reshape(1, -1) @ z)
    sol = prob.solve()
    if not sol.ok:
        raise EmptySetError(f"support LP failed: {sol.status}")
    return S.c + S.G @ sol["z"].ravel()


def halfspaces(S, rng=0, tol=1e-9, max_rounds=200):
    """Exact halfspace form ``(H, h)`` of a full-dimensional constrained zonotope.

    Grows an inner vertex hull and adds the support point of every facet
    normal until each facet is confirmed supporting. Returns ``None`` when
    the set is lower dimensional. Intended for dimensions up to four.
    """
    rng = np.random.default_rng(rng)
    n = S.dim
    dirs = np.vstack([np.eye(n), -np.eye(n), rng.standard_normal((2 * n + 2, n))])
    pts = np.array([support_point(S, d) for d in dirs])
    scale = 1.0 + np.max(np.abs(pts))
    if n == 1:
        return np.array([[1.0], [-1.0]]), np.array([pts.max(), -pts.min()])
    # probes can all land on a few vertices; widen along the missing directions
    while True:
        _, sv, Vt = np.linalg.svd(pts - pts.mean(axis=0))
        rank = int(np.sum(sv > 1e-9 * scale))
        if rank == n:
            break
        u = Vt[rank]
        hi, lo = support_point(S, u), support_point(S, -u)
        if u @ (hi - lo) <= 1e-9 * scale:
            return None
        pts = np.vstack([pts, hi, lo])
    confirmed = {}
    for _ in range(max_rounds):
        try:
            hull = ConvexHull(pts)
        except QhullError:
            return None
        added = False
        for eq in hull.equations:
            a, off = eq[:-1], -eq[-1]
            key = tuple(np.round(a, 9)) + (round(off, 9),)
            if key in confirmed:
                continue
            p = support_point(S, a)
            if a @ p > off + tol * scale:
                pts = np.vstack([pts, p])
                added = True
            else:
                confirmed[key] = (a, max(off, a @ p))
        if not added:
            eqs = [confirmed[tuple(np.round(e[:-1], 9)) + (round(-e[-1], 9),)] for e in hull.equations]
            H = np.array([e[0] for e in eqs])
            h = np.array([e[1] for e in eqs])
            return H, h
    raise RuntimeError("halfspace conversion did not converge")
