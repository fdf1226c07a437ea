"""Small linear-programming layer.

Decision variables are declared as named matrix blocks. Affine expressions
in those blocks (:class:`LinExpr`) support the handful of operations the
set-containment and synthesis programs need: addition, scaling, constant
left/right matrix products, stacking and column selection. Matrices are
vectorized column-major throughout, so ``vec(A @ X @ B) = kron(B.T, A) vec(X)``.

Problems are solved with the HiGHS solver shipped with SciPy.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

DEFAULT_TOL = 1e-7

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
FAILURE = "numerical-failure"


def _const_matrix(value, shape=None):
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0 and shape is not None:
        return np.full(shape, float(arr))
    if arr.ndim == 1:
        arr = arr.reshape(shape) if shape is not None and 1 in shape and arr.size == shape[0] * shape[1] else arr.reshape(-1, 1)
    if shape is not None and arr.shape != shape:
        raise ValueError(f"constant of shape {arr.shape} does not match expression shape {shape}")
    return arr


class LinExpr:
    """Affine matrix expression ``sum_k coef_k @ vec(var_k) + vec(const)``."""

    __array_priority__ = 100  # let numpy defer to __rmatmul__ / __radd__

    def __init__(self, shape, terms=None, const=None):
        self.shape = (int(shape[0]), int(shape[1]))
        self.terms = terms or {}
        size = self.shape[0] * self.shape[1]
        if const is None:
            self.const = np.zeros(size)
        else:
            self.const = np.asarray(const, dtype=float).reshape(-1, order="F")
            if self.const.size != size:
                raise ValueError("constant size mismatch")

    @classmethod
    def constant(cls, value):
        value = _const_matrix(value)
        return cls(value.shape, {}, value)

    @property
    def size(self):
        return self.shape[0] * self.shape[1]

    def _map(self, op, new_shape, const):
        return LinExpr(new_shape, {k: op(v) for k, v in self.terms.items()}, const)

    def __neg__(self):
        return self * -1.0

    def __mul__(self, scalar):
        scalar = float(scalar)
        return self._map(lambda c: c * scalar, self.shape, self.const * scalar)

    __rmul__ = __mul__

    def __add__(self, other):
        if not isinstance(other, LinExpr):
            other = LinExpr.constant(_const_matrix(other, self.shape))
        if other.shape != self.shape:
            raise ValueError(f"cannot add expressions of shapes {self.shape} and {other.shape}")
        terms = dict(self.terms)
        for k, v in other.terms.items():
            terms[k] = terms[k] + v if k in terms else v
        return LinExpr(self.shape, terms, self.const + other.const)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-other if isinstance(other, LinExpr) else -_const_matrix(other, self.shape))

    def __rsub__(self, other):
        return (-self) + other

    def __rmatmul__(self, A):
        """Constant ``A`` times this expression."""
        A = _const_matrix(A)
        r, c = self.shape
        if A.shape[1] != r:
            raise ValueError(f"cannot multiply {A.shape} by expression of shape {self.shape}")
        op = sp.csr_matrix(A) if c == 1 else sp.kron(sp.identity(c, format="csr"), sp.csr_matrix(A), format="csr")
        new_const = (A @ self.const.reshape(self.shape, order="F")).reshape(-1, order="F")
        return self._map(lambda m: op @ m, (A.shape[0], c), new_const)

    def __matmul__(self, B):
        """This expression times constant ``B``."""
        B = _const_matrix(B)
        r, c = self.shape
        if B.shape[0] != c:
            raise ValueError(f"cannot multiply expression of shape {self.shape} by {B.shape}")
        op = sp.kron(sp.csr_matrix(B.T), sp.identity(r, format="csr"), format="csr")
        new_const = (self.const.reshape(self.shape, order="F") @ B).reshape(-1, order="F")
        return self._map(lambda m: op @ m, (r, B.shape[1]), new_const)

    def _select(self, index, new_shape):
        sel = sp.csr_matrix((np.ones(len(index)), (np.arange(len(index)), index)), shape=(len(index), self.size))
        return self._map(lambda m: sel @ m, new_shape, self.const[index])

    @property
    def T(self):
        r, c = self.shape
        idx = np.arange(self.size).reshape((r, c), order="F").T.reshape(-1, order="F")
        return self._select(idx, (c, r))

    def column(self, j):
        r, _ = self.shape
        return self._select(np.arange(j * r, (j + 1) * r), (r, 1))

    def flatten(self):
        """Column-major vectorization as an ``(r*c, 1)`` expression."""
        return LinExpr((self.size, 1), dict(self.terms), self.const)

    def row_sums(self):
        return self @ np.ones((self.shape[1], 1))

    def value(self, values):
        """Evaluate with a mapping ``block name -> array``."""
        out = self.const.copy()
        for k, m in self.terms.items():
            out = out + m @ np.asarray(values[k], dtype=float).reshape(-1, order="F")
        return out.reshape(self.shape, order="F")


def hstack(exprs):
    exprs = [e if isinstance(e, LinExpr) else LinExpr.constant(e) for e in exprs]
    rows = exprs[0].shape[0]
    if any(e.shape[0] != rows for e in exprs):
        raise ValueError("hstack needs equal row counts")
    cols = sum(e.shape[1] for e in exprs)
    names = {k for e in exprs for k in e.terms}
    terms = {}
    for k in names:
        width = next(e.terms[k].shape[1] for e in exprs if k in e.terms)
        terms[k] = sp.vstack(
            [e.terms[k] if k in e.terms else sp.csr_matrix((e.size, width)) for e in exprs], format="csr"
        )
    const = np.concatenate([e.const for e in exprs])
    return LinExpr((rows, cols), terms, const)


def vstack(exprs):
    exprs = [e if isinstance(e, LinExpr) else LinExpr.constant(e) for e in exprs]
    return hstack([e.T for e in exprs]).T


@dataclass
class Block:
    name: str
    shape: tuple
    offset: int

    @property
    def size(self):
        return self.shape[0] * self.shape[1]


@dataclass
class LpSolution:
    status: str
    values: dict = field(default_factory=dict)
    objective_value: float = float("nan")
    residuals: dict = field(default_factory=dict)
    message: str = ""

    @property
    def ok(self):
        return self.status == OPTIMAL

    def __getitem__(self, name):
        return self.values[name]


class LpProblem:
    """Linear program over named matrix variable blocks.

    Equalities ``expr == rhs`` and inequalities ``expr <= rhs`` are collected
    row-wise; the objective is minimized (use :meth:`maximize` for the
    opposite sense). Without an objective the problem is a feasibility
    problem.
    """

    def __init__(self, name="lp"):
        self.name = name
        self.blocks = {}
        self.n = 0
        self._lb = []
        self._ub = []
        self._eq = []
        self._le = []
        self._objective = None
        self._sense = 1.0
        self._aux = 0

    def variable(self, name, shape, lb=-np.inf, ub=np.inf):
        if name in self.blocks:
            raise ValueError(f"variable block {name!r} already declared")
        if isinstance(shape, int):
            shape = (shape, 1)
        shape = (int(shape[0]), int(shape[1]))
        block = Block(name, shape, self.n)
        self.blocks[name] = block
        self.n += block.size
        self._lb.append(np.broadcast_to(np.asarray(lb, dtype=float), shape).reshape(-1, order="F"))
        self._ub.append(np.broadcast_to(np.asarray(ub, dtype=float), shape).reshape(-1, order="F"))
        return LinExpr(shape, {name: sp.identity(block.size, format="csr")})

    def aux_name(self, stem):
        self._aux += 1
        return f"{stem}_{self._aux}"

    def _check(self, expr):
        unknown = set(expr.terms) - set(self.blocks)
        if unknown:
            raise KeyError(f"undeclared variable blocks: {sorted(unknown)}")

    def add_eq(self, expr, rhs=0.0):
        if not isinstance(expr, LinExpr):
            expr = LinExpr.constant(expr)
        self._check(expr)
        diff = expr - (rhs if isinstance(rhs, LinExpr) else _const_matrix(rhs, expr.shape))
        if diff.size:
            self._eq.append(diff)

    def add_le(self, expr, rhs=0.0):
        if not isinstance(expr, LinExpr):
            expr = LinExpr.constant(expr)
        self._check(expr)
        diff = expr - (rhs if isinstance(rhs, LinExpr) else _const_matrix(rhs, expr.shape))
        if diff.size:
            self._le.append(diff)

    def minimize(self, expr):
        self._objective, self._sense = expr, 1.0

    def maximize(self, expr):
        self._objective, self._sense = expr, -1.0

    def _assemble(self, rows):
        if not rows:
            return None, None
        mats, rhs = [], []
        for e in rows:
            r, c, d = [], [], []
            for k, coef in e.terms.items():
                coo = coef.tocoo()
                r.append(coo.row)
                c.append(coo.col + self.blocks[k].offset)
                d.append(coo.data)
            if r:
                m = sp.csr_matrix((np.concatenate(d), (np.concatenate(r), np.concatenate(c))), shape=(e.size, self.n))
            else:
                m = sp.csr_matrix((e.size, self.n))
            mats.append(m)
            rhs.append(-e.const)
        return sp.vstack(mats, format="csr"), np.concatenate(rhs)

    def matrices(self):
        """Return ``(c, A_eq, b_eq, A_ub, b_ub, lb, ub)`` in solver form."""
        c = np.zeros(self.n)
        if self._objective is not None:
            obj = self._objective
            if obj.size != 1:
                raise ValueError("objective must be scalar")
            for k, coef in obj.terms.items():
                b = self.blocks[k]
                c[b.offset : b.offset + b.size] += np.asarray(coef.todense()).ravel()
            c = c * self._sense
        A_eq, b_eq = self._assemble(self._eq)
        A_ub, b_ub = self._assemble(self._le)
        lb = np.concatenate(self._lb) if self._lb else np.zeros(0)
        ub = np.concatenate(self._ub) if self._ub else np.zeros(0)
        return c, A_eq, b_eq, A_ub, b_ub, lb, ub

    def solve(self, tol=DEFAULT_TOL):
        c, A_eq, b_eq, A_ub, b_ub, lb, ub = self.matrices()
        if self.n == 0:
            return self._solve_trivial(A_eq, b_eq, A_ub, b_ub, tol)
        bounds = np.column_stack([lb, ub])
        dense = lambda m: m.toarray() if m is not None and m.shape[0] * m.shape[1] <= 50_000 else m  # noqa: E731
        try:
            res = linprog(
                c,
                A_ub=dense(A_ub),
                b_ub=b_ub,
                A_eq=dense(A_eq),
                b_eq=b_eq,
                bounds=bounds,
                method="highs",
                options={"primal_feasibility_tolerance": min(tol, 1e-7), "dual_feasibility_tolerance": min(tol, 1e-7)},
            )
        except ValueError as err:
            return LpSolution(FAILURE, message=str(err))
        status = {0: OPTIMAL, 2: INFEASIBLE, 3: UNBOUNDED}.get(res.status, FAILURE)
        if status != OPTIMAL:
            return LpSolution(status, message=res.message)
        x = res.x
        residuals = {
            "eq": float(np.max(np.abs(A_eq @ x - b_eq))) if A_eq is not None else 0.0,
            "le": float(max(0.0, np.max(A_ub @ x - b_ub))) if A_ub is not None else 0.0,
            "bounds": float(max(0.0, np.max(lb - x), np.max(x - ub))),
        }
        values = {
            name: x[b.offset : b.offset + b.size].reshape(b.shape, order="F") for name, b in self.blocks.items()
        }
        sol = LpSolution(OPTIMAL, values, float(self._sense * res.fun), residuals, res.message)
        scale = 1.0 + max(
            np.max(np.abs(b_eq)) if b_eq is not None and b_eq.size else 0.0,
            np.max(np.abs(b_ub)) if b_ub is not None and b_ub.size else 0.0,
        )
        if max(residuals.values()) > 10 * tol * scale:
            sol.status = FAILURE
            sol.message = f"residual {max(residuals.values()):.3g} exceeds tolerance"
        return sol

    def _solve_trivial(self, A_eq, b_eq, A_ub, b_ub, tol):
        bad = (b_eq is not None and np.any(np.abs(b_eq) > tol)) or (b_ub is not None and np.any(b_ub < -tol))
        if bad:
            return LpSolution(INFEASIBLE)
        return LpSolution(OPTIMAL, {}, 0.0, {"eq": 0.0, "le": 0.0, "bounds": 0.0})

    def to_lp_text(self):
        """Render the problem in CPLEX LP text format (variables ``x<k>``)."""
        c, A_eq, b_eq, A_ub, b_ub, lb, ub = self.matrices()

        def row(coefs):
            coefs = sp.csr_matrix(coefs)
            terms = [f"{v:+.17g} x{j}" for j, v in zip(coefs.indices, coefs.data) if v != 0]
            return " ".join(terms) if terms else "0 x0"

        lines = [f"\\ {self.name}"]
        for name, b in self.blocks.items():
            lines.append(f"\\ block {name} {b.shape[0]}x{b.shape[1]} -> x{b.offset}..x{b.offset + b.size - 1}")
        lines += ["Minimize", f" obj: {row(c.reshape(1, -1))}", "Subject To"]
        if A_eq is not None:
            for i in range(A_eq.shape[0]):
                lines.append(f" e{i}: {row(A_eq[i])} = {b_eq[i]:.17g}")
        if A_ub is not None:
            for i in range(A_ub.shape[0]):
                lines.append(f" u{i}: {row(A_ub[i])} <= {b_ub[i]:.17g}")
        lines.append("Bounds")
        for j in range(self.n):
            lo = "-inf" if np.isinf(lb[j]) else f"{lb[j]:.17g}"
            hi = "+inf" if np.isinf(ub[j]) else f"{ub[j]:.17g}"
            lines.append(f" {lo} <= x{j} <= {hi}")
        lines.append("End")
        return "\n".join(lines) + "\n"


def add_abs_bound(prob, blocks, rhs):
    """Impose ``sum_k |blocks[k]| @ 1 <= rhs`` row by row.

    Each block gets a nonnegative auxiliary ``U`` of its own shape with
    ``-U <= block <= U``; the row sums of all auxiliaries are then bounded
    by ``rhs`` (an array, or an expression of shape ``(r, 1)`` or ``(1, 1)``,
    the latter broadcast over rows). Returns the auxiliaries.
    """
    blocks = [b if isinstance(b, LinExpr) else LinExpr.constant(b) for b in blocks]
    rows = blocks[0].shape[0]
    if any(b.shape[0] != rows for b in blocks):
        raise ValueError("all blocks must share the row count")
    auxes = []
    total = None
    for b in blocks:
        U = prob.variable(prob.aux_name("abs"), b.shape, lb=0.0)
        prob.add_le(b - U, 0.0)
        prob.add_le(-b - U, 0.0)
        auxes.append(U)
        total = U.row_sums() if total is None else total + U.row_sums()
    if isinstance(rhs, LinExpr) and rhs.shape == (1, 1) and rows != 1:
        rhs = np.ones((rows, 1)) @ rhs
    prob.add_le(total, rhs if isinstance(rhs, LinExpr) else _const_matrix(rhs, (rows, 1)))
    return auxes
