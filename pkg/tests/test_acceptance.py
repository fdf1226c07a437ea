"""Acceptance suite: one test and one PASS/FAIL line per criterion.

Each criterion is a ``run_*`` function returning ``(ok, detail, fingerprint)``.
The fingerprint (statuses, gains, frontiers) feeds the determinism rerun.
Run as a script to print the lines without pytest.
"""

import time

import numpy as np
import pytest

from oracles import (
    A_EX,
    B_EX,
    F_DEMO,
    demo_polytope,
    example_data,
    example_prior,
    example_system,
    random_cmz,
    random_czono,
    random_valid_gk,
    unit_box_polytope,
)
from priorsafe.closedloop import PriorKnowledge, box_disturbance, closed_loop_set
from priorsafe.datagen import LinearSystem, excite, sample_czonotope, sample_factors
from priorsafe.numerics import right_inverse
from priorsafe.setops import (
    ConstrainedMatrixZonotope,
    Polytope,
    Zonotope,
    contains,
    interval_matrix_zonotope,
    intersect_cmz,
    map_cmz,
    map_cmz_vec,
    minkowski_sum,
    point_membership,
)
from priorsafe.synthesis import SynthesisSpec, max_disturbance, min_lambda, prior_free_variant, synthesize
from priorsafe.validate import check_contractive, oracle_containment

SEEDS = range(5)
MEMBER_TOL = 1e-7
DEMO_ZONOTOPE = Zonotope(np.linalg.inv(F_DEMO), [0.0, 0.0])


def _timed(limit, fn):
    t0 = time.perf_counter()
    ok, detail, fp = fn()
    dt = time.perf_counter() - t0
    return ok and dt < limit, f"{detail}; {dt:.1f}s (limit {limit:.0f}s)", fp


def _gain(res):
    return None if res.K is None else res.K.copy()


# ----------------------------------------------------------- set algebra


def _factors_ok(S, z, tol=1e-9):
    return np.abs(z).max(initial=0.0) <= 1 + tol and (S.n_cons == 0 or np.abs(S.A @ z - S.b).max() <= tol)


def _minkowski_check(rng, N):
    C1, C2 = random_czono(rng, 3, 4, 1), random_czono(rng, 3, 3, 1)
    S = minkowski_sum(C1, C2)
    pts = sample_czonotope(C1, rng, N) + sample_czonotope(C2, rng, N)
    forward = sum(point_membership(x, S, MEMBER_TOL).member for x in pts)
    # every member of the sum splits into members of the summands
    back = 0
    for z in sample_factors(S, N, rng):
        z1, z2 = z[: C1.n_gens], z[C1.n_gens :]
        x = S.points(z)[0]
        back += bool(
            _factors_ok(C1, z1) and _factors_ok(C2, z2) and np.allclose(x, C1.points(z1)[0] + C2.points(z2)[0], atol=MEMBER_TOL)
        )
    return forward == N and back == N, f"minkowski {forward}/{N} + {back}/{N}"


def _map_check(rng, N):
    M = random_cmz(rng, (2, 4), 8, (1, 4))
    Nmat = rng.standard_normal((4, 2))
    v = rng.standard_normal(4)
    MN, Mv = map_cmz(M, Nmat), map_cmz_vec(M, v)
    Z = sample_factors(M.factor_set(), N, rng)
    Xs = [M.evaluate(z) for z in Z]
    fwd = sum(point_membership(X @ Nmat, MN, MEMBER_TOL).member for X in Xs)
    fwd_v = sum(point_membership(X @ v, Mv, MEMBER_TOL).member for X in Xs[: N // 2])
    fwd_v += sum(point_membership(X @ v, Mv, MEMBER_TOL).member for X in Xs[N // 2 :])
    # members of the image come from members of M through the same factors
    back = 0
    for z in sample_factors(MN.factor_set(), N, rng):
        Y = MN.evaluate(z)
        back += bool(_factors_ok(M.factor_set(), z) and np.allclose(Y, M.evaluate(z) @ Nmat, atol=MEMBER_TOL))
        back_v = np.allclose(Mv.points(z)[0], M.evaluate(z) @ v, atol=MEMBER_TOL)
        back -= not back_v
    ok = fwd == N and fwd_v == N and back == N
    return ok, f"map {fwd}/{N}, vec {fwd_v}/{N}, reverse {back}/{N}"


def _intersection_check(rng, N):
    M1 = random_cmz(rng, (2, 2), 4, (1, 2))
    z2 = rng.uniform(-0.5, 0.5, 4)
    G2 = rng.standard_normal((4, 2, 2))
    # M2 passes through a point of M1 so the intersection is not empty
    z1 = sample_factors(M1.factor_set(), 1, rng)[0]
    M2 = ConstrainedMatrixZonotope(M1.evaluate(z1) - np.einsum("i,ijk->jk", z2, G2), G2)
    I = intersect_cmz(M1, M2)
    both = back = 0
    for zi in sample_factors(I.factor_set(), N, rng):
        X = I.evaluate(zi)
        m1, m2 = point_membership(X, M1, MEMBER_TOL), point_membership(X, M2, MEMBER_TOL)
        both += m1.member and m2.member
        if m1.member and m2.member:
            # the two independent witnesses stacked form a witness for I
            w = np.concatenate([m1.witness, m2.witness])
            back += bool(_factors_ok(I.factor_set(), w, 1e-6) and np.allclose(I.evaluate(w), X, atol=1e-6))
    return both == N and back == N, f"intersection {both}/{N}, stacked witnesses {back}/{N}"


def run_set_algebra(N=1000, seed=0):
    rng = np.random.default_rng(seed)
    results = [_minkowski_check(rng, N), _map_check(rng, N), _intersection_check(rng, N)]
    return all(r[0] for r in results), ", ".join(r[1] for r in results), None


# ------------------------------------------------------- containment soundness


def run_containment(pairs=100, N=10_000, seed=0):
    rng = np.random.default_rng(seed)
    certified = counterexamples = tried = 0
    while certified < pairs and tried < 20 * pairs:
        tried += 1
        n = int(rng.integers(2, 4))
        C2 = random_czono(rng, n, int(rng.integers(n, 7)), int(rng.integers(0, 2)))
        R = rng.uniform(-1, 1, (C2.n_gens, int(rng.integers(1, 5))))
        L = rng.uniform(-1, 1, C2.n_gens)
        scale = (np.abs(R).sum(axis=1) + np.abs(L)).max() * rng.uniform(0.9, 1.5)
        R, L = R / scale, L / scale
        # some pairs are not subsets; only certified ones count
        C1 = Zonotope(C2.G @ R + 0.05 * rng.standard_normal((n, R.shape[1])), C2.c + C2.G @ L)
        if contains(C1, C2) is None:
            continue
        certified += 1
        counterexamples += not oracle_containment(C1, C2, N, seed=certified).consistent
    ok = certified == pairs and counterexamples == 0
    return ok, f"{certified} certified pairs ({tried} tried), {counterexamples} counterexamples", None


# --------------------------------------------------------- membership invariant


def run_membership_invariant(datasets=20, levels=(0.0, 0.03), random_gk=5):
    rng = np.random.default_rng(2024)
    worst, tested, members = 0.0, 0, []
    for b in levels:
        prior = example_prior(b)
        for seed in range(datasets):
            view = example_data(b, seed).view()
            gks = [right_inverse(view.X0)] + [random_valid_gk(view.X0, rng, 0.5) for _ in range(random_gk)]
            for G_K in gks:
                cl = closed_loop_set(view, prior, G_K)
                m = point_membership(A_EX + B_EX @ view.U0 @ G_K, cl.M_cl, MEMBER_TOL)
                tested += 1
                members.append(bool(m.member and m.residual <= 1e-6))
                worst = max(worst, m.residual)
    ok = all(members)
    return ok, f"{sum(members)}/{tested} true closed loops inside, worst residual {worst:.1e}", members


# ------------------------------------------------------------------ 1-D case


def _one_d_spec(w, lam):
    sys = LinearSystem([[0.5]], [[1.0]])
    view = excite(sys, [1.0], 4, 1.0, box_disturbance(0.0, 1), 0).view()
    prior = PriorKnowledge(interval_matrix_zonotope([[0.5, 1.0]], [[0.5, 1.0]]), box_disturbance(w, 1))
    return SynthesisSpec(view, prior, Polytope([[1.0], [-1.0]], [1.0, 1.0]), lam)


def run_one_d():
    res = synthesize(_one_d_spec(0.1, 0.5))
    ok_i = res.feasible and abs(0.5 + res.K[0, 0]) <= 0.4 + 1e-6
    lam0 = min_lambda(_one_d_spec(0.0, 0.5), 1e-3)
    ok_ii = lam0 is not None and lam0 <= 0.01
    bmax = max_disturbance(_one_d_spec(0.0, 0.5), 0.5, 1e-3, 1.0)
    ok_iii = bmax is not None and abs(bmax - 0.5) <= 0.01
    detail = f"(i) {res.status} |a+bK|={abs(0.5 + res.K[0, 0]) if res.K is not None else None:.4g}, (ii) min lam {lam0}, (iii) max b {bmax}"
    return ok_i and ok_ii and ok_iii, detail, [res.status, _gain(res), lam0, bmax]


# ---------------------------------------------------------- posterior audit


def _audit(res, lam, b, safe=None):
    return check_contractive(example_system(), res.K, safe or demo_polytope(), box_disturbance(b, 2), lam, N=10_000, seed=0, tol=1e-8)


def run_audit(b=0.03, lams=(0.9, 0.95, 0.98)):
    controllers = failed = 0
    slowest = 0.0
    fp = []
    for seed in SEEDS:
        view = example_data(b, seed).view()
        for safe in (demo_polytope(), DEMO_ZONOTOPE):
            for mode in ("sound", "paper"):
                for use_prior in (True, False):
                    for lam in lams:
                        res = synthesize(SynthesisSpec(view, example_prior(b), safe, lam, use_prior=use_prior, bound_mode=mode))
                        fp.append((res.status, _gain(res)))
                        if res.feasible:
                            rep = _audit(res, lam, b)
                            controllers += 1
                            failed += not rep.passed
                            slowest = max(slowest, rep.runtime)
        # controllers at the contraction frontier
        view4 = example_data(0.04, seed).view()
        for use_prior in (True, False):
            spec = SynthesisSpec(view4, example_prior(0.04), demo_polytope(), 0.95, use_prior=use_prior)
            lam = min_lambda(spec, 1e-3)
            if lam is None:
                continue
            res = synthesize(SynthesisSpec(view4, example_prior(0.04), demo_polytope(), lam, use_prior=use_prior))
            fp.append((res.status, _gain(res)))
            if res.feasible:
                rep = _audit(res, lam, 0.04)
                controllers += 1
                failed += not rep.passed
                slowest = max(slowest, rep.runtime)
    ok = controllers > 0 and failed == 0 and slowest < 60
    return ok, f"{controllers} feasible controllers audited, {failed} with violations, slowest audit {slowest:.2f}s", fp


# ------------------------------------------------------------- prior benefit


def _prior_comparison(safe, seeds=SEEDS, lam=0.98, b=0.04, tol=1e-3, b_max=0.3):
    """Frontiers with and without the model prior for each data seed."""
    rows = []
    for seed in seeds:

        def level_data(level, seed=seed):
            return example_data(level, seed).view()

        spec_b = SynthesisSpec(level_data(0.0), example_prior(0.0), safe, lam)
        bp = max_disturbance(spec_b, lam, tol, b_max, data_for_level=level_data)
        bn = max_disturbance(prior_free_variant(spec_b), lam, tol, b_max, data_for_level=level_data)
        spec_l = SynthesisSpec(level_data(b), example_prior(b), safe, 0.99)
        lp = min_lambda(spec_l, tol)
        ln = min_lambda(prior_free_variant(spec_l), tol)
        rows.append((seed, bp, bn, lp, ln))
    return rows


def _verdict(rows):
    lo, hi = -np.inf, np.inf
    b_ge = all((bp if bp is not None else lo) >= (bn if bn is not None else lo) for _, bp, bn, _, _ in rows)
    b_gt = any((bp if bp is not None else lo) > (bn if bn is not None else lo) for _, bp, bn, _, _ in rows)
    l_le = all((lp if lp is not None else hi) <= (ln if ln is not None else hi) for _, _, _, lp, ln in rows)
    l_lt = any((lp if lp is not None else hi) < (ln if ln is not None else hi) for _, _, _, lp, ln in rows)
    fmt = "; ".join(f"seed {s}: b {bp}/{bn}, lam {lp}/{ln}" for s, bp, bn, lp, ln in rows)
    return (b_ge and b_gt, l_le and l_lt), fmt


def run_prior_benefit(safe=None):
    rows = _prior_comparison(safe if safe is not None else unit_box_polytope())
    (a, b), fmt = _verdict(rows)
    return a and b, f"(a) {'ok' if a else 'not met'}, (b) {'ok' if b else 'not met'} [with/without prior] {fmt}", rows


# ---------------------------------------------------------- cross-method


def run_cross_method(b=0.03, lams=(0.85, 0.9, 0.95, 0.98)):
    same = oracle_containment(DEMO_ZONOTOPE, demo_polytope(), 10_000).consistent
    same &= oracle_containment(Zonotope(np.eye(2), [0, 0]), demo_polytope(), 1000).consistent is False
    controllers = failed = agree = 0
    fp = []
    for seed in SEEDS:
        view = example_data(b, seed).view()
        for lam in lams:
            statuses = []
            for safe in (DEMO_ZONOTOPE, demo_polytope()):
                res = synthesize(SynthesisSpec(view, example_prior(b), safe, lam))
                fp.append((res.status, _gain(res)))
                statuses.append(res.feasible)
                if res.feasible:
                    controllers += 1
                    failed += not _audit(res, lam, b).passed
            agree += statuses[0] == statuses[1]
    ok = same and controllers > 0 and failed == 0
    detail = f"same set {same}, {controllers} feasible outputs, {failed} audit failures, methods agree on {agree}/{len(SEEDS) * len(lams)} points"
    return ok, detail, fp


# ------------------------------------------------------------- determinism


def _same(a, b):
    if isinstance(a, (list, tuple)):
        return isinstance(b, (list, tuple)) and len(a) == len(b) and all(_same(x, y) for x, y in zip(a, b))
    if a is None or b is None:
        return a is None and b is None
    if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
        return np.shape(a) == np.shape(b) and np.allclose(a, b, rtol=0, atol=1e-9)
    if isinstance(a, float) or isinstance(b, float):
        return abs(a - b) <= 1e-9
    return a == b


FINGERPRINTS = {}
DETERMINISTIC = {
    "membership invariant": run_membership_invariant,
    "one-dimensional synthesis": run_one_d,
    "posterior audit": run_audit,
    "prior benefit (unit box)": run_prior_benefit,
    "cross-method consistency": run_cross_method,
}


# ------------------------------------------------------------------ tests


def test_criterion_1_set_algebra(acceptance):
    ok, detail, _ = _timed(30, run_set_algebra)
    assert acceptance("criterion 1 set-algebra exactness", ok, detail)


def test_criterion_2_containment_soundness(acceptance):
    ok, detail, _ = _timed(60, run_containment)
    assert acceptance("criterion 2 containment soundness", ok, detail)


def test_criterion_3_membership_invariant(acceptance):
    ok, detail, fp = _timed(30, run_membership_invariant)
    FINGERPRINTS["membership invariant"] = fp
    assert acceptance("criterion 3 true closed loop in the closed-loop set", ok, detail)


def test_criterion_4_one_dimensional(acceptance):
    ok, detail, fp = _timed(10, run_one_d)
    FINGERPRINTS["one-dimensional synthesis"] = fp
    assert acceptance("criterion 4 one-dimensional synthesis", ok, detail)


def test_criterion_5_posterior_audit(acceptance):
    ok, detail, fp = run_audit()
    FINGERPRINTS["posterior audit"] = fp
    assert acceptance("criterion 5 posterior safety audit", ok, detail)


def test_criterion_6_prior_benefit_unit_box(acceptance):
    ok, detail, fp = _timed(600, run_prior_benefit)
    FINGERPRINTS["prior benefit (unit box)"] = fp
    assert acceptance("criterion 6 prior benefit, unit-box safe set", ok, detail)


def test_criterion_6_supplement_demo_polytope(acceptance):
    """Same comparison on a safe set that admits contractive controllers."""
    ok, detail, _ = _timed(600, lambda: run_prior_benefit(demo_polytope()))
    assert acceptance("criterion 6 supplement, demo safe set", ok, detail)


def test_criterion_7_cross_method(acceptance):
    ok, detail, fp = _timed(300, run_cross_method)
    FINGERPRINTS["cross-method consistency"] = fp
    assert acceptance("criterion 7 cross-method consistency", ok, detail)


@pytest.mark.slow
def test_criterion_8_determinism(acceptance):
    mismatched = []
    for name, fn in DETERMINISTIC.items():
        first = FINGERPRINTS.get(name)
        if first is None:
            first = fn()[2]
        if not _same(first, fn()[2]):
            mismatched.append(name)
    detail = f"{len(DETERMINISTIC) - len(mismatched)}/{len(DETERMINISTIC)} reruns identical" + (
        f", differing: {', '.join(mismatched)}" if mismatched else ""
    )
    assert acceptance("criterion 8 determinism", not mismatched, detail)


if __name__ == "__main__":
    checks = [
        ("criterion 1", lambda: _timed(30, run_set_algebra)),
        ("criterion 2", lambda: _timed(60, run_containment)),
        ("criterion 3", lambda: _timed(30, run_membership_invariant)),
        ("criterion 4", lambda: _timed(10, run_one_d)),
        ("criterion 5", run_audit),
        ("criterion 6", lambda: _timed(600, run_prior_benefit)),
        ("criterion 6 supplement", lambda: _timed(600, lambda: run_prior_benefit(demo_polytope()))),
        ("criterion 7", lambda: _timed(300, run_cross_method)),
    ]
    for label, fn in checks:
        ok, detail, _ = fn()
        print(f"{'PASS' if ok else 'FAIL'}  {label}: {detail}")
