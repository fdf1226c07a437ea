"""Safe state-feedback synthesis from data and prior knowledge.

Two sufficient conditions for lam-contractivity of the safe set are
encoded as single linear programs in the controller parametrization
``G_K`` (with ``K = U0 G_K`` and ``X0 G_K = I``):

* :func:`synthesize_czono` for constrained-zonotope safe sets: the set of
  possible next states must sit inside the lam-scaled safe set, certified
  with the ``(Gamma, L, P)`` inclusion multipliers;
* :func:`synthesize_polytope` for polytopic safe sets: a dual-multiplier
  LP minimizing a bound ``rho`` on ``|G_K|_inf``.
"""

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .closedloop import (
    PriorKnowledge,
    box_disturbance,
    closed_loop_set,
    consistent_disturbances,
    next_state_set,
)
from .lpcore import INFEASIBLE, OPTIMAL, LpProblem, add_abs_bound, hstack
from .numerics import inf_norm, right_inverse
from .setops import (
    ConstrainedZonotope,
    Polytope,
    containment_residual,
    contains,
    scale_about_origin,
    scale_level_set,
)

FEASIBLE = "feasible"
FAILURE = "failure"
BOUND_MODES = ("paper", "sound")


@dataclass(frozen=True)
class SynthesisSpec:
    data: object
    prior: PriorKnowledge
    safe_set: object
    lam: float
    use_prior: bool = True
    bound_mode: str = "sound"
    tol: float = 1e-7

    def __post_init__(self):
        if not 0.0 < self.lam < 1.0:
            raise ValueError(f"contraction level must lie in (0, 1), got {self.lam}")
        if self.bound_mode not in BOUND_MODES:
            raise ValueError(f"bound_mode must be one of {BOUND_MODES}")
        if not isinstance(self.safe_set, (Polytope, ConstrainedZonotope)):
            raise TypeError("safe set must be a Polytope or a ConstrainedZonotope")
        if self.data.T < self.data.n + 1:
            raise ValueError("need T >= n + 1 samples")

    @property
    def effective_prior(self):
        return self.prior if self.use_prior else self.prior.without_model()


@dataclass
class SynthesisResult:
    status: str
    method: str
    lam: float
    K: np.ndarray = None
    G_K: np.ndarray = None
    certificate: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    @property
    def feasible(self):
        return self.status == FEASIBLE

    def to_dict(self):
        as_list = lambda a: None if a is None else np.asarray(a).tolist()  # noqa: E731
        return {
            "status": self.status,
            "method": self.method,
            "lam": self.lam,
            "K": as_list(self.K),
            "G_K": as_list(self.G_K),
            "certificate": {k: as_list(v) if isinstance(v, np.ndarray) else v for k, v in self.certificate.items()},
            "diagnostics": self.diagnostics,
        }

    @classmethod
    def from_dict(cls, d):
        arr = lambda a: None if a is None else np.atleast_2d(np.asarray(a, dtype=float))  # noqa: E731
        return cls(d["status"], d["method"], d["lam"], arr(d["K"]), arr(d["G_K"]), d.get("certificate", {}), d.get("diagnostics", {}))


def prior_free_variant(spec):
    """Same problem with the model prior ignored (only data and disturbance bounds)."""
    return replace(spec, use_prior=False)


def _status_from_lp(sol):
    return INFEASIBLE if sol.status == INFEASIBLE else FAILURE


# ----------------------------------------------------------------------------
# constrained-zonotope safe set


def synthesize_czono(spec, M_dp=None):
    """Search ``G_K`` so the next-state set lies in the lam-scaled safe set."""
    t0 = time.perf_counter()
    data, Cx, lam = spec.data, spec.safe_set, spec.lam
    if not isinstance(Cx, ConstrainedZonotope):
        raise TypeError("synthesize_czono needs a constrained-zonotope safe set")
    prior = spec.effective_prior
    Zw = prior.Zw
    if M_dp is None:
        M_dp = consistent_disturbances(data, prior)
    n, T = data.n, data.T
    if M_dp.factor_set().is_empty():
        diag = {"reason": "consistent disturbance set is empty", "solve_time": time.perf_counter() - t0}
        return SynthesisResult(FAILURE, "czono", lam, diagnostics=diag)
    # constraint layout does not depend on G_K; read it off one instance
    seed_cl = closed_loop_set(data, prior, right_inverse(data.X0), M_dp=M_dp)
    layout = next_state_set(seed_cl, Cx, Zw)
    A_cl, b_cl = layout.A, layout.b.reshape(-1, 1)

    prob = LpProblem("czono-synthesis")
    GK = prob.variable("G_K", (T, n))
    prob.add_eq(data.X0 @ GK, np.eye(n))
    center_map = (data.X1 - M_dp.C) @ GK
    cx = Cx.c.reshape(-1, 1)
    blocks = [hstack([(-Gi) @ GK @ cx for Gi in M_dp.G])] if M_dp.n_gens else []
    blocks.append(center_map @ Cx.G)
    if M_dp.n_gens and Cx.n_gens:
        blocks.append(hstack([(-Gi) @ GK @ Cx.G for Gi in M_dp.G]))
    if Zw.n_gens:
        blocks.append(Zw.G)
    G_cl = hstack(blocks)
    c_cl = center_map @ cx + Zw.c.reshape(-1, 1)
    if G_cl.shape[1] != layout.n_gens:
        raise AssertionError("generator layout mismatch with next_state_set")

    # paper mode certifies against the level-set formula, sound mode against lam * Cx
    target = scale_level_set(Cx, lam) if spec.bound_mode == "paper" else scale_about_origin(Cx, lam)
    ct = target.c.reshape(-1, 1)
    sx, s_cl, qx, q_cl = Cx.n_gens, G_cl.shape[1], Cx.n_cons, A_cl.shape[0]
    Gamma = prob.variable("Gamma", (sx, s_cl))
    L = prob.variable("L", (sx, 1))
    P = prob.variable("P", (qx, q_cl))
    prob.add_eq(ct - c_cl - target.G @ L, 0.0)
    prob.add_eq(G_cl - target.G @ Gamma, 0.0)
    if qx:
        PA = P @ A_cl if q_cl else np.zeros((qx, s_cl))
        Pb = P @ b_cl if q_cl else np.zeros((qx, 1))
        prob.add_eq(PA - target.A @ Gamma, 0.0)
        prob.add_eq(Pb - target.A @ L, target.b.reshape(-1, 1))
    add_abs_bound(prob, [Gamma, L], np.ones((sx, 1)))
    sol = prob.solve(spec.tol)
    diag = {
        "generators_next_state": s_cl,
        "constraints_next_state": q_cl,
        "disturbance_generators": M_dp.n_gens,
        "lp_status": sol.status,
        "lp_residuals": sol.residuals,
    }
    if not sol.ok:
        diag["solve_time"] = time.perf_counter() - t0
        return SynthesisResult(_status_from_lp(sol), "czono", lam, diagnostics=diag)

    G_K = sol["G_K"]
    K = data.U0 @ G_K
    cert = {"Gamma": sol["Gamma"], "L": sol["L"].ravel(), "P": sol["P"]}
    # independent re-check on sets assembled by the closed-loop module
    cl = closed_loop_set(data, prior, G_K, M_dp=M_dp)
    C_next = next_state_set(cl, Cx, Zw)
    residual = containment_residual(C_next, target, (cert["Gamma"], cert["L"], cert["P"]))
    diag["certificate_residual"] = residual
    ok = residual <= 1e-6
    if not ok:
        ok = contains(C_next, target) is not None
        diag["recertified"] = ok
    diag["parametrization_error"] = float(np.max(np.abs(data.X0 @ G_K - np.eye(n))))
    diag["solve_time"] = time.perf_counter() - t0
    return SynthesisResult(FEASIBLE if ok else FAILURE, "czono", lam, K, G_K, cert, diag)


# ----------------------------------------------------------------------------
# polytopic safe set


def _factor_constraints(M_dp, Zw):
    """Stacked constraints on ``(beta, eta)`` for the disturbance-set factors
    ``beta`` and the additive-disturbance factors ``eta``."""
    Avec, bvec = M_dp.vec_constraints()
    s, sh = M_dp.n_gens, Zw.n_gens
    A = np.zeros((Avec.shape[0] + Zw.n_cons, s + sh))
    A[: Avec.shape[0], :s] = Avec
    A[Avec.shape[0] :, s:] = Zw.A
    return A, np.concatenate([bvec, Zw.b])


def _beta_lp(A, b, s, sh, objective=None, bounds=(0.0, 1.0), split=False):
    prob = LpProblem("beta")
    if split:
        # beta = bp - bm with bp + bm <= 1; the objective weighs U = bp + bm
        beta = prob.variable("beta", s, -1.0, 1.0)
        (U,) = add_abs_bound(prob, [beta], np.ones((s, 1)))
    else:
        beta = prob.variable("beta", s, *bounds)
    eta = prob.variable("eta", sh, -1.0, 1.0)
    if A.shape[0]:
        prob.add_eq(A[:, :s] @ beta + A[:, s:] @ eta if sh else A[:, :s] @ beta, b.reshape(-1, 1))
    if objective is not None:
        c = np.asarray(objective, dtype=float).reshape(1, -1)
        prob.maximize(c @ U if split else c @ beta)
    return prob.solve()


def disturbance_coefficients(H, h, M_dp, mode, r_P=None):
    """``coef[j, i]`` bounding ``|H_j G_i G_K x| <= coef[j, i] |G_K|_inf`` on the safe set."""
    q, s = H.shape[0], M_dp.n_gens
    coef = np.zeros((q, s))
    if mode == "paper":
        norms = np.array([inf_norm(G) for G in M_dp.G])
        coef = np.abs(h).reshape(-1, 1) * norms.reshape(1, -1)
    else:
        for i, G in enumerate(M_dp.G):
            coef[:, i] = np.sum(np.abs(H @ G), axis=1) * r_P
    return coef


def compute_y_l(H, h, Zw, M_dp, mode="sound", r_P=None):
    """Disturbance offsets ``y`` and uncertainty weights ``l`` per safe-set row.

    ``y_j = sum_i |H_j G_h_i|``. In ``paper`` mode ``l_j`` maximizes
    ``coef_j . beta`` over the factor constraints with ``0 <= beta <= 1``;
    if that program is infeasible a split-sign program (``beta = bp - bm``)
    provides a valid bound and the event is flagged. In ``sound`` mode
    ``l_j = sum_i coef_ji * max |beta_i|`` with each range from two LPs.
    Returns ``(y, l, info)``.
    """
    H = np.atleast_2d(H)
    h = np.asarray(h, dtype=float).ravel()
    if mode == "sound" and r_P is None:
        r_P = Polytope(H, h).inf_radius()
    y = np.sum(np.abs(H @ Zw.G), axis=1) if Zw.n_gens else np.zeros(H.shape[0])
    coef = disturbance_coefficients(H, h, M_dp, mode, r_P)
    A, b = _factor_constraints(M_dp, Zw)
    s, sh = M_dp.n_gens, Zw.n_gens
    info = {"mode": mode, "fallback_rows": [], "r_P": r_P, "empty": False}
    l = np.zeros(H.shape[0])
    if A.shape[0] and _beta_lp(A, b, s, sh, bounds=(-1.0, 1.0)).status != OPTIMAL:
        info["empty"] = True
        return y, None, info
    if s == 0:
        return y, l, info
    if mode == "paper":
        for j in range(H.shape[0]):
            sol = _beta_lp(A, b, s, sh, coef[j])
            if sol.status == INFEASIBLE:
                sol = _beta_lp(A, b, s, sh, coef[j], split=True)
                info["fallback_rows"].append(j)
            if sol.status != OPTIMAL:
                info["empty"] = sol.status == INFEASIBLE
                return y, None, info
            l[j] = max(sol.objective_value, 0.0)
        return y, l, info
    reach = np.zeros(s)
    for i in np.flatnonzero(np.any(coef > 0, axis=0)):
        e = np.zeros(s)
        e[i] = 1.0
        up = _beta_lp(A, b, s, sh, e, bounds=(-1.0, 1.0))
        down = _beta_lp(A, b, s, sh, -e, bounds=(-1.0, 1.0))
        if up.status != OPTIMAL or down.status != OPTIMAL:
            info["empty"] = INFEASIBLE in (up.status, down.status)
            return y, None, info
        reach[i] = min(1.0, max(abs(up.objective_value), abs(down.objective_value)))
    info["factor_reach"] = reach.tolist()
    return y, coef @ reach, info


@dataclass
class PolytopePrep:
    M_dp: object
    y: np.ndarray
    l: np.ndarray
    info: dict


def prepare_polytope(spec):
    """The lam-independent ingredients of :func:`synthesize_polytope`."""
    safe = spec.safe_set
    prior = spec.effective_prior
    M_dp = consistent_disturbances(spec.data, prior)
    r_P = safe.inf_radius() if spec.bound_mode == "sound" else None
    y, l, info = compute_y_l(safe.H, safe.h, prior.Zw, M_dp, spec.bound_mode, r_P)
    return PolytopePrep(M_dp, y, l, info)


def synthesize_polytope(spec, prep=None):
    """Minimize ``rho >= |G_K|_inf`` subject to the dual contractivity conditions."""
    t0 = time.perf_counter()
    safe, lam, data = spec.safe_set, spec.lam, spec.data
    if not isinstance(safe, Polytope):
        raise TypeError("synthesize_polytope needs a polytopic safe set")
    if prep is None:
        prep = prepare_polytope(spec)
    Zw = spec.prior.Zw
    H, h = safe.H, safe.h.reshape(-1, 1)
    q, n, T = H.shape[0], data.n, data.T
    diag = {"y": prep.y.tolist(), "l": None if prep.l is None else prep.l.tolist(), "bound_info": prep.info}
    if prep.l is None:
        diag["reason"] = "consistent disturbance set is empty" if prep.info.get("empty") else "l computation failed"
        return SynthesisResult(FAILURE, "polytope", lam, diagnostics=diag)
    l = prep.l.reshape(-1, 1)
    rhs = lam * h - H @ Zw.c.reshape(-1, 1) - prep.y.reshape(-1, 1)

    prob = LpProblem("polytope-synthesis")
    P = prob.variable("P", (q, q), lb=0.0)
    GK = prob.variable("G_K", (T, n))
    rho = prob.variable("rho", 1, lb=0.0)
    prob.add_le(P @ h + l @ rho, rhs)
    prob.add_eq(P @ H - (H @ (data.X1 - prep.M_dp.C)) @ GK, 0.0)
    add_abs_bound(prob, [GK], rho)
    prob.add_eq(data.X0 @ GK, np.eye(n))
    prob.minimize(rho)
    sol = prob.solve(spec.tol)
    diag.update(lp_status=sol.status, lp_residuals=sol.residuals)
    if not sol.ok:
        diag["solve_time"] = time.perf_counter() - t0
        return SynthesisResult(_status_from_lp(sol), "polytope", lam, diagnostics=diag)
    G_K = sol["G_K"]
    K = data.U0 @ G_K
    cert = {"P": sol["P"], "rho": float(sol["rho"][0, 0])}
    # primal re-check: worst row value with the realized |G_K|
    A_c = (data.X1 - prep.M_dp.C) @ G_K
    rho_real = inf_norm(G_K)
    worst = -np.inf
    for j in range(q):
        lp = LpProblem("row-max")
        x = lp.variable("x", n)
        lp.add_le(H @ x, h)
        lp.maximize((H[j] @ A_c).reshape(1, -1) @ x)
        r = lp.solve()
        if not r.ok:
            diag["reason"] = "safe set LP failed"
            return SynthesisResult(FAILURE, "polytope", lam, diagnostics=diag)
        gap = r.objective_value + H[j] @ Zw.c + prep.l[j] * rho_real + prep.y[j] - lam * h[j, 0]
        worst = max(worst, float(gap))
    diag["primal_worst_gap"] = worst
    diag["parametrization_error"] = float(np.max(np.abs(data.X0 @ G_K - np.eye(n))))
    diag["solve_time"] = time.perf_counter() - t0
    ok = worst <= 1e-6
    return SynthesisResult(FEASIBLE if ok else FAILURE, "polytope", lam, K, G_K, cert, diag)


def synthesize(spec, prep=None):
    if isinstance(spec.safe_set, Polytope):
        return synthesize_polytope(spec, prep)
    return synthesize_czono(spec, prep)


def _prepare(spec):
    if isinstance(spec.safe_set, Polytope):
        return prepare_polytope(spec)
    return consistent_disturbances(spec.data, spec.effective_prior)


# ----------------------------------------------------------------------------
# sweeps


def min_lambda(spec, lam_tol=1e-3, trace=None):
    """Smallest contraction level with a certificate, by bisection on (0, 1).

    Returns ``None`` when even ``1 - lam_tol`` is not certified. Evaluated
    points are appended to ``trace`` as ``(lam, status)`` when given.
    """
    if lam_tol <= 0:
        raise ValueError("lam_tol must be positive")
    prep = _prepare(spec)

    def feasible(lam):
        res = synthesize(replace(spec, lam=lam), prep)
        if trace is not None:
            trace.append((lam, res.status))
        return res.feasible

    hi = 1.0 - lam_tol
    if not feasible(hi):
        return None
    lo = 0.0
    while hi - lo > lam_tol:
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            hi = mid
        else:
            lo = mid
    return hi


def max_disturbance(spec, lam, b_tol=1e-3, b_max=1.0, trace=None, data_for_level=None):
    """Largest box disturbance level ``b`` (``Zw = [-b, b]^n``) certified at ``lam``.

    By default the recorded data stay fixed, which is only meaningful if
    they are consistent with every tested level (e.g. noise-free data).
    ``data_for_level(b)`` may instead return a fresh data view recorded
    under disturbances of level ``b``. Returns ``None`` when ``b = 0`` is
    not certified.
    """
    n = spec.data.n

    def feasible(b):
        data = spec.data if data_for_level is None else data_for_level(b)
        s = replace(spec, data=data, lam=lam, prior=spec.prior.with_disturbance(box_disturbance(b, n)))
        res = synthesize(s)
        if trace is not None:
            trace.append((b, res.status))
        return res.feasible

    if not feasible(0.0):
        return None
    if feasible(b_max):
        return b_max
    lo, hi = 0.0, b_max
    while hi - lo > b_tol:
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    return lo
