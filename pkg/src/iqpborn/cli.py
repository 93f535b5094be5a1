"""Command-line interface: verify, var-scan, curvature, train, check-target,
sample, graph-info.

Every run writes a manifest.json (resolved config, seeds, version,
timestamps, output paths) sufficient to replay the run: rerunning the
recorded argv with a fresh --out reproduces byte-identical CSV bodies
(wall-time columns and timestamps excluded).

Exit codes: 0 pass, 1 check failure, 2 configuration error, 3 capacity error.
"""

from __future__ import annotations

import argparse
import datetime
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import analysis, correlators, mmd, oracle, train as train_mod
from .datasets import BitDataset, TargetStats, check_assumption1, check_assumption2, covariances
from .errors import CapacityError, ConfigError, DataError, IqpError, TrainingAbort
from .initializers import InitStrategy, center as init_center, draw as init_draw
from .profiles import parse_synth
from .topology import (
    GeneratorIndex,
    QubitSubset,
    anticommuting_generators,
    external_neighborhood,
    light_cone,
    make_graph,
    read_graph,
)


def _parse_graph(spec: str, n: int, graph_seed: int):
    if spec.startswith("file:"):
        return read_graph(spec[5:])
    if spec.startswith("k_regular:"):
        return make_graph("k_regular", n, K=int(spec.split(":")[1]), seed=graph_seed)
    return make_graph(spec, n)


def _parse_sigma(spec: str, n: int) -> mmd.MMDConfig:
    if spec == "sqrt":
        return mmd.MMDConfig.low_body(n)
    if spec.startswith("const:"):
        return mmd.MMDConfig(float(spec.split(":")[1]), n)
    return mmd.MMDConfig(float(spec), n)


def _parse_scales(spec: str) -> list[float]:
    if spec.startswith(("log:", "lin:")):
        kind, _, rest = spec.partition(":")
        bounds, _, count = rest.rpartition(":")
        a, _, b = bounds.partition("..")
        k = int(count)
        if kind == "log":
            return list(np.geomspace(float(a), float(b), k))
        return list(np.linspace(float(a), float(b), k))
    return [float(x) for x in spec.split(",")]


def _target_from_args(args, n: int):
    if getattr(args, "data", None):
        ds = BitDataset.load(args.data)
        if ds.n != n:
            raise ConfigError(f"dataset has n={ds.n}, expected n={n}")
        return TargetStats.empirical(ds), {"data": str(args.data)}
    if getattr(args, "synth", None):
        return parse_synth(args.synth, n, getattr(args, "rows", None),
                           getattr(args, "data_seed", None))
    raise ConfigError("need --data or --synth to define the target")


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _config(args) -> dict:
    return {k: v for k, v in vars(args).items() if k != "func"}


def _write(outdir: Path, name: str, text: str) -> str:
    path = outdir / name
    path.write_text(text, encoding="utf-8")
    return str(path)


def _manifest(outdir: Path, command: str, argv, config: dict, outputs: list[str],
              started: str, seeds: dict) -> None:
    blob = {
        "command": command,
        "argv": list(argv),
        "config": config,
        "seeds": seeds,
        "version": __version__,
        "started": started,
        "ended": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "outputs": outputs,
    }
    (outdir / "manifest.json").write_text(json.dumps(blob, indent=2), encoding="utf-8")


def _now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


# ---------------------------------------------------------------- verify


def _verify_correlators(n_lo, n_hi, trials, seed):
    rng = np.random.default_rng(seed)
    kinds = ["all_to_all", "ring", "edgeless"]
    worst = 0.0
    worst_case = None
    for n in range(n_lo, n_hi + 1):
        for t in range(trials):
            kind = kinds[t % len(kinds)] if n >= 3 else "all_to_all"
            g = make_graph(kind, n)
            idx = GeneratorIndex(g)
            theta = rng.uniform(-np.pi / 2, np.pi / 2, idx.m)
            members = [q for q in range(n) if rng.random() < 0.5]
            A = QubitSubset(n, members)
            dev = abs(
                correlators.z_exact(g, idx, theta, A)
                - oracle.expval_zA(oracle.build_state(g, idx, theta), A)
            )
            if dev > worst:
                worst, worst_case = dev, {"n": n, "kind": kind, "A": members}
    return {"name": "oracle_equivalence", "max_deviation": worst, "tol": 1e-9,
            "passed": worst <= 1e-9, "worst_case": worst_case}


def _verify_mmd(n_lo, n_hi, trials, seed):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for t in range(trials):
        n = int(rng.integers(max(2, n_lo), min(8, n_hi) + 1))
        g = make_graph("all_to_all", n) if t % 2 else make_graph("ring", max(n, 3))
        n = g.n
        idx = GeneratorIndex(g)
        theta = rng.uniform(-np.pi / 2, np.pi / 2, idx.m)
        raw = rng.random(1 << n) + 1e-3
        table = oracle.DistributionTable(raw / raw.sum())
        cfg = mmd.MMDConfig(float(rng.uniform(0.6, 3.0)), n)
        sub = mmd.loss_exact_subsets(g, idx, theta, TargetStats.exact(table), cfg)
        ker = mmd.loss_exact_kernel(
            oracle.model_distribution(oracle.build_state(g, idx, theta)), table, cfg
        )
        worst = max(worst, abs(sub - ker))
    return {"name": "mmd_form_identity", "max_deviation": worst, "tol": 1e-9,
            "passed": worst <= 1e-9}


def _verify_gradients(n_lo, n_hi, trials, seed):
    rng = np.random.default_rng(seed)
    h = 1e-4
    worst = 0.0
    for _ in range(trials):
        n = int(rng.integers(max(2, n_lo), min(8, n_hi) + 1))
        g = make_graph("all_to_all", n)
        idx = GeneratorIndex(g)
        theta = rng.uniform(-np.pi / 2, np.pi / 2, idx.m)
        raw = rng.random(1 << n) + 1e-3
        target = TargetStats.exact(oracle.DistributionTable(raw / raw.sum()))
        cfg = mmd.MMDConfig.low_body(n)
        grad = mmd.loss_gradient(g, idx, theta, target, cfg)
        f0 = mmd.loss_exact_subsets(g, idx, theta, target, cfg)
        for alpha in rng.choice(idx.m, size=min(3, idx.m), replace=False):
            tp, tm = theta.copy(), theta.copy()
            tp[alpha] += h
            tm[alpha] -= h
            fp = mmd.loss_exact_subsets(g, idx, tp, target, cfg)
            fm = mmd.loss_exact_subsets(g, idx, tm, target, cfg)
            worst = max(worst, abs(grad[alpha] - (fp - fm) / (2 * h)))
            rep = mmd.curvature(g, idx, theta, target, cfg, int(alpha))
            worst = max(worst, abs(rep.total - (fp - 2 * f0 + fm) / h**2))
    return {"name": "derivatives_vs_finite_differences", "max_deviation": worst,
            "tol": 1e-5, "passed": worst <= 1e-5}


def _verify_bounds(seed, draws=50_000, se_k=3.0):
    checks = []
    g = make_graph("all_to_all", 8)
    idx = GeneratorIndex(g)
    A = QubitSubset(8, [1, 4])
    est = analysis.var_correlator_empirical(g, idx, A, draws, seed=seed)
    pred = analysis.var_correlator_predicted(g, A)
    checks.append({"name": "correlator_variance_all_to_all", "value": est.variance,
                   "predicted": pred, "k_se": abs(est.variance - pred) / est.se_variance,
                   "passed": abs(est.variance - pred) <= se_k * est.se_variance})
    ring = make_graph("ring", 8)
    ridx = GeneratorIndex(ring)
    A = QubitSubset(8, [2, 3])
    est = analysis.var_correlator_empirical(ring, ridx, A, draws, seed=seed + 1)
    pred = analysis.var_correlator_predicted(ring, A)
    checks.append({"name": "correlator_variance_ring", "value": est.variance,
                   "predicted": pred, "k_se": abs(est.variance - pred) / est.se_variance,
                   "passed": abs(est.variance - pred) <= se_k * est.se_variance})
    # loss concentration ceiling at n=8 under full-angle draws
    n = 8
    target = TargetStats.product([0.0] * n)
    cfg = mmd.MMDConfig.low_body(n)
    strat = InitStrategy("full")
    scan = analysis.variance_scan(strat, g, idx, target, cfg, [1.0], 4000, seed=seed + 2)
    bound = analysis.mmd_concentration_bound(n)
    row = scan.rows[0]
    checks.append({"name": "mmd_concentration_bound", "value": row.var, "bound": bound,
                   "passed": row.var <= bound + se_k * row.se})
    passed = all(c["passed"] for c in checks)
    return {"name": "bounds", "checks": checks, "passed": passed}


def cmd_verify(args, argv) -> int:
    started = _now()
    outdir = _outdir(args)
    scope = args.scope
    report = {"scope": scope, "n_min": args.n_min, "n_max": args.n_max,
              "trials": args.trials, "seed": args.seed, "checks": []}
    if scope in ("correlators", "all"):
        report["checks"].append(_verify_correlators(args.n_min, args.n_max, args.trials, args.seed))
    if scope in ("mmd", "all"):
        report["checks"].append(_verify_mmd(args.n_min, args.n_max, args.trials, args.seed))
    if scope in ("gradients", "all"):
        report["checks"].append(_verify_gradients(args.n_min, args.n_max, args.trials, args.seed))
    if scope in ("bounds", "all"):
        report["checks"].append(_verify_bounds(args.seed, se_k=args.se_k))
    passed = all(c["passed"] for c in report["checks"])
    report["passed"] = passed
    out = _write(outdir, "verify.json", json.dumps(report, indent=2))
    _manifest(outdir, "verify", argv, _config(args) | {"out": str(outdir)}, [out], started,
              {"seed": args.seed})
    print(f"verify[{scope}]: {'PASS' if passed else 'FAIL'} ({out})")
    return 0 if passed else 1


# ---------------------------------------------------------------- var-scan


def cmd_var_scan(args, argv) -> int:
    started = _now()
    outdir = _outdir(args)
    g = _parse_graph(args.graph, args.n, args.graph_seed)
    idx = GeneratorIndex(g)
    cfg = _parse_sigma(args.sigma, g.n)
    target, prov = _target_from_args(args, g.n)
    # the strategy's own scale is unused here: the scan sweeps its grid
    strat = InitStrategy(args.init, 1.0)
    scales = [1.0] if args.init == "full" else _parse_scales(args.scales)
    scan = analysis.variance_scan(
        strat, g, idx, target, cfg, scales, args.draws, seed=args.seed,
        engine=args.engine, mc_subsets=args.subsets, mc_z_samples=args.z_samples,
        limit=args.exact_limit, workers=args.workers,
    )
    csv_path = _write(outdir, "var_scan.csv", scan.to_csv())
    summary = {"argmax_scale": scan.argmax_scale, "max_var": scan.max_var,
               "engine": scan.engine, "target": prov, "sigma": cfg.sigma,
               "p_sigma": cfg.p_sigma}
    json_path = _write(outdir, "var_scan.json", json.dumps(summary, indent=2))
    _manifest(outdir, "var-scan", argv, _config(args) | {"out": str(outdir)},
              [csv_path, json_path], started, {"seed": args.seed})
    print(f"var-scan: argmax_s={scan.argmax_scale:.4g} max_var={scan.max_var:.4g}")
    return 0


# ---------------------------------------------------------------- curvature


def cmd_curvature(args, argv) -> int:
    started = _now()
    outdir = _outdir(args)
    g = _parse_graph(args.graph, args.n, args.graph_seed)
    idx = GeneratorIndex(g)
    cfg = _parse_sigma(args.sigma, g.n)
    target, prov = _target_from_args(args, g.n)
    strat = InitStrategy(args.center if args.center != "full" else "identity", 0.0)
    sweep = analysis.curvature_report_sweep(strat, g, idx, target, cfg)
    csv_path = _write(outdir, "curvature.csv", sweep.to_csv())
    closed_dev = max(
        abs(r.total - c) for r, c in zip(sweep.reports, sweep.closed)
    )
    summary = {"center": sweep.center, "argmax_alpha": sweep.argmax_alpha,
               "max_closed_form_deviation": closed_dev, "target": prov}
    json_path = _write(outdir, "curvature.json", json.dumps(summary, indent=2))
    _manifest(outdir, "curvature", argv, _config(args) | {"out": str(outdir)},
              [csv_path, json_path], started, {})
    print(f"curvature[{args.center}]: argmax alpha={sweep.argmax_alpha} "
          f"closed-form dev={closed_dev:.3g}")
    return 0


# ---------------------------------------------------------------- train


def cmd_train(args, argv) -> int:
    started = _now()
    outdir = _outdir(args)
    g = _parse_graph(args.graph, args.n, args.graph_seed)
    idx = GeneratorIndex(g)
    cfg = _parse_sigma(args.sigma, g.n)
    target, prov = _target_from_args(args, g.n)
    strat = InitStrategy(args.init, args.scale)
    c = init_center(strat, g, idx, target if strat.needs_target else None)
    drawn = init_draw(strat, c, target if strat.variant == "covariance" else None,
                      g, idx, seed=args.seed)
    tcfg = train_mod.TrainConfig(
        steps=args.steps, learning_rate=args.lr, optimizer=args.optimizer,
        engine=args.engine, subsets=args.subsets, z_samples=args.z_samples,
        eval_every=args.eval_every, eval_subsets=args.eval_subsets,
        eval_z_samples=args.eval_z_samples, seed=args.seed, eval_seed=args.eval_seed,
    )
    try:
        trace = train_mod.train(g, idx, drawn, target, cfg, tcfg)
    except TrainingAbort as exc:
        diag = {"error": str(exc), "records": len(exc.trace.records) if exc.trace else 0}
        _write(outdir, "abort.json", json.dumps(diag, indent=2))
        print(f"train: ABORT ({exc})", file=sys.stderr)
        return 1
    csv_path = _write(outdir, "trace.csv", trace.to_csv())
    params_path = _write(outdir, "params.txt", trace.params_text())
    sidecar = {"target": prov, "sigma": cfg.sigma, "p_sigma": cfg.p_sigma,
               "init": args.init, "scale": args.scale, "config": _config(args) | {"out": str(outdir)}}
    json_path = _write(outdir, "train.json", json.dumps(sidecar, indent=2))
    _manifest(outdir, "train", argv, _config(args) | {"out": str(outdir)},
              [csv_path, params_path, json_path], started,
              {"seed": args.seed, "eval_seed": args.eval_seed})
    print(f"train[{args.init}@{args.scale:.4g}]: final loss {trace.records[-1].loss:.6g}")
    return 0


# ---------------------------------------------------------------- check-target


def cmd_check_target(args, argv) -> int:
    started = _now()
    outdir = _outdir(args)
    target, prov = _target_from_args(args, args.n)
    rep1 = check_assumption1(target, C_const=args.c_const, k_max=args.kmax)
    rep2 = check_assumption2(target)
    cov = covariances(target)
    report = {
        "target": prov,
        "assumption1": {
            "C": rep1.C_const, "k_max": rep1.k_max,
            "max_deviation": rep1.max_deviation, "bound": rep1.bound,
            "passed_by_order": rep1.passed_by_order, "passed": rep1.passed,
        },
        "assumption2": {
            "best_qubit": rep2.best_qubit, "max_fluctuation": rep2.max_fluctuation,
        },
        "C_max": cov.C_max,
    }
    out = _write(outdir, "check_target.json", json.dumps(report, indent=2))
    _manifest(outdir, "check-target", argv, _config(args) | {"out": str(outdir)}, [out],
              started, {})
    print(f"check-target: assumption1={'PASS' if rep1.passed else 'FAIL'} "
          f"max_fluct={rep2.max_fluctuation:.4g}")
    return 0 if rep1.passed else 1


# ---------------------------------------------------------------- sample


def cmd_sample(args, argv) -> int:
    started = _now()
    outdir = _outdir(args)
    g = _parse_graph(args.graph, args.n, args.graph_seed)
    idx = GeneratorIndex(g)
    if args.theta == "zeros":
        theta = np.zeros(idx.m)
    elif args.theta.startswith("random:"):
        rng = np.random.default_rng(int(args.theta.split(":")[1]))
        theta = rng.uniform(-np.pi / 2, np.pi / 2, idx.m)
    else:
        theta = np.loadtxt(args.theta.removeprefix("file:")).reshape(-1)
        if len(theta) != idx.m:
            raise ConfigError(f"theta file has {len(theta)} angles, expected {idx.m}")
    dist = oracle.model_distribution(oracle.build_state(g, idx, theta))
    rows = oracle.sample(dist, args.count, seed=args.seed)
    ds = BitDataset(rows, provenance=f"iqpborn sample n={g.n} seed={args.seed}")
    path = outdir / "samples.txt"
    ds.save(path)
    _manifest(outdir, "sample", argv, _config(args) | {"out": str(outdir)}, [str(path)],
              started, {"seed": args.seed})
    print(f"sample: wrote {args.count} rows to {path}")
    return 0


# ---------------------------------------------------------------- graph-info


def cmd_graph_info(args, argv) -> int:
    started = _now()
    outdir = _outdir(args)
    g = _parse_graph(args.graph, args.n, args.graph_seed)
    info = {
        "n": g.n,
        "edges": len(g.edges),
        "max_degree": g.max_degree(),
        "parameters": g.n + len(g.edges),
    }
    if args.subset:
        members = [int(q) for q in args.subset.split(",")]
        A = QubitSubset(g.n, members)
        info["subset"] = {
            "members": members,
            "external_neighborhood": list(external_neighborhood(g, A).members()),
            "light_cone": light_cone(g, A),
            "anticommuting": len(anticommuting_generators(g, A)),
        }
    out = _write(outdir, "graph_info.json", json.dumps(info, indent=2))
    _manifest(outdir, "graph-info", argv, _config(args) | {"out": str(outdir)}, [out],
              started, {})
    print(json.dumps(info))
    return 0


# ---------------------------------------------------------------- parser


def _add_common(p, *, out_default):
    p.add_argument("--out", default=out_default, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--graph-seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1,
                   help="parallel workers; results are worker-count-invariant")


def _add_target(p):
    p.add_argument("--data", help="dataset file path")
    p.add_argument("--synth", help="synthetic target descriptor (see profiles)")
    p.add_argument("--rows", type=int, default=None, help="rows for synthetic data")
    p.add_argument("--data-seed", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="iqpborn",
                                 description="IQP Born machines under the MMD loss")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="run self-check suites")
    p.add_argument("--scope", choices=["correlators", "mmd", "gradients", "bounds", "all"],
                   default="all")
    p.add_argument("--n-min", type=int, default=2)
    p.add_argument("--n-max", type=int, default=10)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--se-k", type=float, default=3.0,
                   help="width of statistical verdicts in SE units")
    _add_common(p, out_default="runs/verify")
    p.set_defaults(seed=1)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("var-scan", help="loss variance vs initialization scale")
    p.add_argument("--init", choices=["full", "identity", "unbiased", "marginal", "covariance"],
                   required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--graph", default="all_to_all")
    p.add_argument("--sigma", default="sqrt")
    p.add_argument("--scales", default="log:1e-3..1:10")
    p.add_argument("--draws", type=int, default=2000)
    p.add_argument("--engine", choices=["exact", "mc"], default="exact")
    p.add_argument("--subsets", type=int, default=256)
    p.add_argument("--z-samples", type=int, default=256)
    p.add_argument("--exact-limit", type=int, default=16)
    _add_target(p)
    _add_common(p, out_default="runs/var_scan")
    p.set_defaults(func=cmd_var_scan)

    p = sub.add_parser("curvature", help="curvature sweep at an initialization center")
    p.add_argument("--center", choices=["identity", "unbiased", "marginal", "covariance"],
                   required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--graph", default="all_to_all")
    p.add_argument("--sigma", default="sqrt")
    _add_target(p)
    _add_common(p, out_default="runs/curvature")
    p.set_defaults(func=cmd_curvature)

    p = sub.add_parser("train", help="train the Born machine")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--graph", default="all_to_all")
    p.add_argument("--sigma", default="sqrt")
    p.add_argument("--init", choices=["full", "identity", "unbiased", "marginal", "covariance"],
                   required=True)
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--steps", type=int, default=300)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--optimizer", choices=["gd", "adam"], default="gd")
    p.add_argument("--engine", choices=["mc", "exact"], default="mc")
    p.add_argument("--subsets", type=int, default=256)
    p.add_argument("--z-samples", type=int, default=256)
    p.add_argument("--eval-every", type=int, default=10)
    p.add_argument("--eval-subsets", type=int, default=2048)
    p.add_argument("--eval-z-samples", type=int, default=512)
    p.add_argument("--eval-seed", type=int, default=987654321)
    _add_target(p)
    _add_common(p, out_default="runs/train")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("check-target", help="assumption checks on a target")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--kmax", type=int, default=3)
    p.add_argument("--c-const", type=float, default=1.0)
    _add_target(p)
    _add_common(p, out_default="runs/check_target")
    p.set_defaults(func=cmd_check_target)

    p = sub.add_parser("sample", help="sample bit strings from a small model")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--graph", default="all_to_all")
    p.add_argument("--theta", default="zeros", help="zeros | random:<seed> | file:<path>")
    p.add_argument("--count", type=int, default=1000)
    _add_common(p, out_default="runs/sample")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("graph-info", help="topology facts and light cones")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--graph", default="all_to_all")
    p.add_argument("--subset", help="comma-separated qubit list")
    _add_common(p, out_default="runs/graph_info")
    p.set_defaults(func=cmd_graph_info)

    return ap


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
        return args.func(args, argv)
    except CapacityError as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, DataError, IqpError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
