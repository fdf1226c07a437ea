"""Command-line driver: generate data, synthesize, sweep, audit and roll out.

Exit codes: 0 success, 10 infeasible, 20 audit failure, 30 configuration
or I/O error, 40 numerical failure.
"""

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .closedloop import box_disturbance
from .config import (
    ConfigError,
    build_disturbance,
    build_prior,
    build_safe_set,
    build_system,
    demo_config,
    load_config,
    validate_config,
)
from .datagen import DataSet, InformativityError, excite
from .numerics import numerical_rank
from .synthesis import FEASIBLE, SynthesisResult, SynthesisSpec, max_disturbance, min_lambda, synthesize
from .validate import as_polytope, check_contractive, rollout, write_trajectories_csv

EXIT_OK = 0
EXIT_INFEASIBLE = 10
EXIT_AUDIT = 20
EXIT_CONFIG = 30
EXIT_NUMERICAL = 40
OUTPUT_ENV = "PRIORSAFE_OUTPUT"
AUDIT_FAILED = "audit-failed"

log = logging.getLogger("priorsafe")


def output_dir(cfg, override=None):
    if override:
        return Path(override)
    if cfg.get("output", {}).get("directory"):
        return Path(cfg["output"]["directory"])
    return Path(os.environ.get(OUTPUT_ENV, "priorsafe-out"))


def _write_json(path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def _generate(cfg, level=None):
    sysm = build_system(cfg)
    d = cfg["data"]
    Zw = build_disturbance(cfg, level)
    return excite(sysm, cfg["system"]["x0"], d["T"], d["u_range"], Zw, d["seed"])


def _load_data(out):
    """Public part of the stored data set; the hidden record is never read here."""
    if not (out / "dataset.json").exists():
        raise ConfigError("dataset", f"no dataset.json in {out}; run 'generate' first")
    return DataSet.read(out, with_hidden=False).view()


def _spec(cfg, data, args, use_prior=None, level=None, lam=None):
    syn = cfg["synthesis"]
    return SynthesisSpec(
        data,
        build_prior(cfg, level),
        build_safe_set(cfg),
        syn["lam"] if lam is None else lam,
        use_prior=args.use_prior if use_prior is None else use_prior,
        bound_mode=args.bound_mode or syn.get("bound_mode", "sound"),
        tol=args.tol or syn.get("tol", 1e-7),
    )


def _audit(cfg, result, samples=None, seed=None):
    """Check the controller against the true system held in the config."""
    val = cfg.get("validation", {})
    return check_contractive(
        build_system(cfg),
        result.K,
        as_polytope(build_safe_set(cfg)),
        build_disturbance(cfg),
        result.lam,
        N=val.get("samples", 10_000) if samples is None else samples,
        seed=val.get("seed", 0) if seed is None else seed,
        method=result.method,
    )


def _apply_overrides(cfg, args):
    if getattr(args, "seed", None) is not None:
        cfg["data"]["seed"] = args.seed
    if getattr(args, "lam", None) is not None:
        cfg["synthesis"]["lam"] = args.lam
    if getattr(args, "level", None) is not None:
        if cfg["disturbance"]["family"] != "box":
            raise ConfigError("config.disturbance.family", "--level needs the box family")
        cfg["disturbance"]["level"] = args.level
    return validate_config(cfg)


# ----------------------------------------------------------------------------
# commands


def cmd_generate(cfg, args):
    out = output_dir(cfg, args.out)
    ds = _generate(cfg)
    ds.write(out, csv_files="csv" in cfg.get("output", {}).get("formats", ["json", "csv"]))
    rank = numerical_rank(ds.X0)
    print(f"wrote data set to {out} (T={ds.T}, rank X0 = {rank} of {ds.X0.shape[0]})")
    return EXIT_OK


def cmd_synthesize(cfg, args):
    out = output_dir(cfg, args.out)
    data = _load_data(out)
    spec = _spec(cfg, data, args)
    res = synthesize(spec)
    log.info("%s program solved in %.3f s", res.method, res.diagnostics.get("solve_time", 0.0))
    res.diagnostics["use_prior"] = spec.use_prior
    res.diagnostics["bound_mode"] = spec.bound_mode
    code = EXIT_OK
    if res.feasible:
        report = _audit(cfg, res)
        res.diagnostics["audit"] = report.to_dict()
        if not report.passed:
            res.status = AUDIT_FAILED
            code = EXIT_AUDIT
    elif res.status == "infeasible":
        code = EXIT_INFEASIBLE
    else:
        code = EXIT_NUMERICAL
    path = Path(args.result) if args.result else out / ("result.json" if spec.use_prior else "result_no_prior.json")
    _write_json(path, res.to_dict())
    msg = f"{res.method} synthesis at lam={res.lam}: {res.status}"
    if res.K is not None:
        msg += f", K = {np.array2string(res.K, precision=4)}"
    print(msg + f" -> {path}")
    return code


def _sweep_point(job):
    """One status evaluation (module level so worker processes can run it)."""
    spec, param, value, level_data = job
    if param == "lam":
        s = replace(spec, lam=value)
    else:
        s = replace(spec, data=level_data, prior=spec.prior.with_disturbance(box_disturbance(value, spec.data.n)))
    return synthesize(s).status


def _frontier(job):
    spec, param, tol, b_max, cfg = job
    trace = []
    if param == "lam":
        value = min_lambda(spec, tol, trace)
    else:
        value = max_disturbance(spec, spec.lam, tol, b_max, trace, data_for_level=lambda b: _generate(cfg, b).view())
    return value, trace


def _pool_map(fn, jobs_list, jobs):
    if jobs <= 1 or len(jobs_list) <= 1:
        return [fn(j) for j in jobs_list]
    with ProcessPoolExecutor(min(jobs, len(jobs_list))) as pool:
        return list(pool.map(fn, jobs_list))


def cmd_sweep(cfg, args):
    out = output_dir(cfg, args.out)
    sweep = dict(cfg["synthesis"].get("sweep") or {"param": "lam"})
    if args.sweep:
        sweep["param"] = args.sweep
    param = sweep["param"]
    if param == "b" and cfg["disturbance"]["family"] != "box":
        raise ConfigError("config.disturbance.family", "a disturbance sweep needs the box family")
    modes = {"prior": True, "no-prior": False}
    if args.modes:
        modes = {k: modes[k] for k in args.modes}
    data = _generate(cfg).view()
    specs = {name: _spec(cfg, data, args, use_prior=flag) for name, flag in modes.items()}
    rows, frontier = [], {}
    if sweep.get("values"):
        values = [float(v) for v in sweep["values"]]
        level_data = {v: _generate(cfg, v).view() for v in values} if param == "b" else {}
        jobs_list = [(specs[name], param, v, level_data.get(v)) for name in specs for v in values]
        statuses = _pool_map(_sweep_point, jobs_list, args.jobs)
        for (spec, _, v, _), status in zip(jobs_list, statuses):
            name = "prior" if spec.use_prior else "no-prior"
            rows.append((name, v, status))
        for name in specs:
            ok = [v for n_, v, s in rows if n_ == name and s == FEASIBLE]
            frontier[name] = (min(ok) if param == "lam" else max(ok)) if ok else None
    else:
        tol = sweep.get("tol", 1e-3)
        b_max = sweep.get("b_max", 1.0)
        results = _pool_map(_frontier, [(specs[name], param, tol, b_max, cfg) for name in specs], args.jobs)
        for name, (value, trace) in zip(specs, results):
            frontier[name] = value
            rows.extend((name, v, s) for v, s in trace)
    csv_path = out / f"sweep_{param}.csv"
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["mode", param, "status"])
        for name, v, s in rows:
            w.writerow([name, repr(float(v)), s])
    summary = {
        "param": param,
        "frontier_with_prior": frontier.get("prior"),
        "frontier_without_prior": frontier.get("no-prior"),
        "fixed": {"lam": cfg["synthesis"]["lam"]} if param == "b" else {"disturbance": cfg["disturbance"]},
        "points": len(rows),
    }
    _write_json(out / f"sweep_{param}.json", summary)
    print(f"{param} sweep: with prior {summary['frontier_with_prior']}, without prior {summary['frontier_without_prior']} -> {csv_path}")
    return EXIT_OK


def _load_result(path):
    try:
        return SynthesisResult.from_dict(json.loads(Path(path).read_text()))
    except (OSError, json.JSONDecodeError, KeyError) as err:
        raise ConfigError("result", f"cannot load {path}: {err}") from None


def cmd_trajectory(cfg, args):
    out = output_dir(cfg, args.out)
    res = _load_result(args.result or out / "result.json")
    if res.status != FEASIBLE and not args.force:
        print(f"result status is '{res.status}'; use --force to roll out an uncertified gain", file=sys.stderr)
        return EXIT_INFEASIBLE
    if res.K is None:
        raise ConfigError("result.K", "result carries no gain")
    tcfg = cfg.get("trajectory", {})
    horizon = tcfg.get("horizon", 50) if args.horizon is None else args.horizon
    runs = tcfg.get("runs", 5) if args.runs is None else args.runs
    seed = tcfg.get("seed", 0)
    sysm = build_system(cfg)
    safe = as_polytope(build_safe_set(cfg))
    Zw = build_disturbance(cfg)
    rng = np.random.default_rng(seed)
    x0s = safe.sample(runs, rng) if runs else np.zeros((0, sysm.n))
    trajs = [rollout(sysm, res.K, x0, Zw, horizon, rng) for x0 in x0s]
    path = out / "trajectories.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    write_trajectories_csv(path, trajs, safe)
    outside = sum(int((~safe.contains(X, 1e-8)).sum()) for X in trajs if len(X))
    print(f"wrote {runs} x {horizon} states to {path} ({outside} outside the safe set)")
    return EXIT_OK


def cmd_validate(cfg, args):
    out = output_dir(cfg, args.out)
    res = _load_result(args.result or out / "result.json")
    if res.K is None:
        print(f"result status is '{res.status}' and carries no gain", file=sys.stderr)
        return EXIT_INFEASIBLE
    report = _audit(cfg, res, samples=args.samples)
    _write_json(out / "validation.json", report.to_dict())
    print(f"audit: {report.tested} tested, {report.violations} violations, worst margin {report.worst_margin:.3g}")
    return EXIT_OK if report.passed else EXIT_AUDIT


def cmd_demo_config(args):
    text = json.dumps(demo_config(), indent=1) + "\n"
    if args.path:
        Path(args.path).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "synthesize": cmd_synthesize,
    "sweep": cmd_sweep,
    "trajectory": cmd_trajectory,
    "validate": cmd_validate,
}


def build_parser():
    p = argparse.ArgumentParser(prog="priorsafe", description="Data-driven safe controller synthesis with prior knowledge.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("config", help="experiment configuration (JSON)")
        sp.add_argument("--out", help=f"output directory (default: config, then ${OUTPUT_ENV})")
        sp.add_argument("--seed", type=int, help="override the data seed")
        sp.add_argument("--level", type=float, help="override the box disturbance level")
        sp.add_argument("--tol", type=float, help="LP feasibility tolerance")
        sp.add_argument("--bound-mode", choices=["paper", "sound"])
        sp.add_argument("--jobs", type=int, default=1)
        return sp

    common(sub.add_parser("generate", help="simulate the experiment and store the data set"))
    s = common(sub.add_parser("synthesize", help="synthesize and audit a controller"))
    s.add_argument("--use-prior", dest="use_prior", action="store_true", default=True)
    s.add_argument("--no-prior", dest="use_prior", action="store_false")
    s.add_argument("--lam", type=float, help="override the contraction level")
    s.add_argument("--result", help="result file (default: <out>/result.json)")
    s = common(sub.add_parser("sweep", help="frontiers with and without the prior"))
    s.add_argument("--sweep", choices=["lam", "b"])
    s.add_argument("--modes", nargs="+", choices=["prior", "no-prior"])
    s.add_argument("--lam", type=float, help="contraction level for a disturbance sweep")
    s.set_defaults(use_prior=True)
    s = common(sub.add_parser("trajectory", help="closed-loop rollouts as CSV"))
    s.add_argument("--result")
    s.add_argument("--horizon", type=int)
    s.add_argument("--runs", type=int)
    s.add_argument("--force", action="store_true", help="roll out a gain that is not certified")
    s = common(sub.add_parser("validate", help="audit a stored result against the true system"))
    s.add_argument("--result")
    s.add_argument("--samples", type=int)
    d = sub.add_parser("demo-config", help="print or write the demo configuration")
    d.add_argument("path", nargs="?")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "demo-config":
        return cmd_demo_config(args)
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        return COMMANDS[args.command](cfg, args)
    except ConfigError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as err:
        print(f"I/O error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (InformativityError, OverflowError, np.linalg.LinAlgError) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
