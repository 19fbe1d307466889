"""Command-line interface.

Subcommands:
  run       one experiment, from a config file and/or flags
  table     error-comparison sweep over the standard (model, d, n) grid
  coverage  empirical confidence-interval coverage over the standard grid
  slope     mean-model convergence-rate study for the oracle estimator
"""

import argparse
import json
import sys
from pathlib import Path

from .harness import (
    ExperimentConfig,
    config_from_file,
    emit_outputs,
    mean_model_rate_study,
    run_experiment,
    summarize,
)

# Sample sizes per dimension for the error tables; the harness records all
# three as checkpoints of a single run per replication.
TABLE_GRID = {
    5: (15000, 30000, 60000),
    20: (50000, 100000, 200000),
    50: (125000, 250000, 500000),
}

# Coverage study sample sizes; logistic at d=5 converges slowly and uses a
# larger batch constant and smaller n.
COVERAGE_N = {5: 60000, 20: 200000, 50: 500000}
COVERAGE_LOGISTIC_D5_N = 20000
COVERAGE_LOGISTIC_D5_BATCH_C = 4.0


def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", choices=("linear", "logistic", "expectile", "mean"))
    p.add_argument("--d", type=int, help="covariate dimension")
    p.add_argument("--n", type=int, help="total iterations")
    p.add_argument("--reps", type=int, help="replication count (default 100)")
    p.add_argument("--eta", type=float, help="step-size scale (default 0.5)")
    p.add_argument("--alpha", type=float, help="step-size decay exponent (default 0.505)")
    p.add_argument("--batch-c", type=float, dest="batch_c",
                   help="batch scaling constant for the de-biased estimator (default 0.5)")
    p.add_argument("--bm-batch-c", type=float, dest="bm_batch_c",
                   help="batch constant for the batch-means baseline (default 3.0)")
    p.add_argument("--tau", type=float, help="expectile level (default 0.25)")
    p.add_argument("--estimators", help="comma list from {debias,bm,plugin}")
    p.add_argument("--seed", type=int, help="master seed (default 0)")
    p.add_argument("--checkpoints", help="comma list of iterations to record")
    p.add_argument("--level", type=float, dest="nominal_level",
                   help="nominal confidence level (default 0.95)")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--threads", type=int,
                   help="worker threads (env SGDINFER_THREADS overrides)")
    p.add_argument("--save-sigma", action="store_true", dest="save_sigma",
                   help="write every estimated matrix to a text file")


def _overrides_from_args(args) -> dict:
    keys = (
        "model", "d", "n", "reps", "eta", "alpha", "batch_c", "bm_batch_c",
        "tau", "seed", "nominal_level", "threads",
    )
    out = {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}
    if getattr(args, "estimators", None):
        out["estimators"] = tuple(s.strip() for s in args.estimators.split(",") if s.strip())
    if getattr(args, "checkpoints", None):
        out["checkpoints"] = tuple(int(s) for s in args.checkpoints.split(",") if s.strip())
    if getattr(args, "save_sigma", False):
        out["save_sigma"] = True
    return out


def _build_config(args) -> ExperimentConfig:
    overrides = _overrides_from_args(args)
    if args.config:
        base = config_from_file(args.config).to_dict()
        base.update(overrides)
        return ExperimentConfig.from_dict(base)
    if "model" not in overrides or "n" not in overrides:
        raise SystemExit("run: need --config or at least --model and --n")
    overrides.setdefault("d", 5)
    return ExperimentConfig.from_dict(overrides)


def cmd_run(args) -> int:
    cfg = _build_config(args)
    records = run_experiment(cfg)
    paths = emit_outputs(records, cfg, args.out)
    summary = summarize(records, cfg)
    for name, rows in summary["estimators"].items():
        for row in rows:
            print(
                f"{cfg.model} d={cfg.d} {name:>6} n={row['n']}: "
                f"error {row['mean_error']:.4g} (sd {row['sd_error']:.3g}), "
                f"coverage {row['coverage']:.4f} +/- {row['coverage_se']:.4f}"
            )
    print(f"wrote {paths['runs']} and {paths['summary']}")
    return 0


def default_step_scale(model: str, d: int) -> float:
    """Dimension-aware step scale: quadratic-type losses need eta below
    ~2/E||a||^2 to avoid an explosive transient; logistic gradients are
    bounded so the standard 0.5 is safe at any dimension."""
    if model == "logistic":
        return 0.5
    return min(0.5, 2.5 / max(d, 1))


def _cell_config(model: str, d: int, n, overrides: dict, *, checkpoints=None,
                 batch_c=None) -> ExperimentConfig:
    data = {
        "model": model,
        "d": d,
        "n": n if isinstance(n, int) else max(n),
        "estimators": ("debias", "bm"),
        "eta": default_step_scale(model, d),
    }
    if checkpoints is not None:
        data["checkpoints"] = tuple(checkpoints)
    if batch_c is not None:
        data["batch_c"] = batch_c
    data.update(overrides)
    return ExperimentConfig.from_dict(data)


def cmd_table(args) -> int:
    overrides = _overrides_from_args(args)
    overrides.pop("model", None)
    overrides.pop("d", None)
    overrides.pop("n", None)
    models = [args.model] if args.model else ["linear", "logistic", "expectile"]
    dims = [args.d] if args.d else sorted(TABLE_GRID)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for model in models:
        for d in dims:
            grid = (args.n,) if args.n else TABLE_GRID[d]
            cfg = _cell_config(model, d, max(grid), overrides, checkpoints=grid)
            records = run_experiment(cfg)
            emit_outputs(records, cfg, out_dir / f"{model}_d{d}")
            summary = summarize(records, cfg)
            note = "property-checked" if model == "expectile" else ""
            for name, cps in summary["estimators"].items():
                for row in cps:
                    rows.append(
                        {
                            "model": model,
                            "d": d,
                            "estimator": name,
                            "n": row["n"],
                            "mean_error": row["mean_error"],
                            "sd_error": row["sd_error"],
                            "notes": note,
                        }
                    )
                    print(
                        f"{model:>9} d={d:<3} {name:>6} n={row['n']:>6}: "
                        f"{row['mean_error']:.3f} ({row['sd_error']:.3f})"
                        + (f"  [{note}]" if note else "")
                    )
    with open(out_dir / "table.json", "w") as fh:
        json.dump(rows, fh, indent=2)
        fh.write("\n")
    print(f"wrote {out_dir / 'table.json'}")
    return 0


def cmd_coverage(args) -> int:
    overrides = _overrides_from_args(args)
    overrides.pop("model", None)
    overrides.pop("d", None)
    overrides.pop("n", None)
    models = [args.model] if args.model else ["linear", "logistic", "expectile"]
    dims = [args.d] if args.d else sorted(COVERAGE_N)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for model in models:
        for d in dims:
            n = COVERAGE_N[d]
            batch_c = None
            if model == "logistic" and d == 5:
                n = COVERAGE_LOGISTIC_D5_N
                batch_c = COVERAGE_LOGISTIC_D5_BATCH_C
            if args.n:
                n = args.n
            cfg = _cell_config(model, d, n, overrides, batch_c=batch_c)
            records = run_experiment(cfg)
            emit_outputs(records, cfg, out_dir / f"{model}_d{d}")
            summary = summarize(records, cfg)
            for name, cps in summary["estimators"].items():
                row = cps[-1]
                rows.append(
                    {
                        "model": model,
                        "d": d,
                        "estimator": name,
                        "n": row["n"],
                        "coverage": row["coverage"],
                        "coverage_se": row["coverage_se"],
                        "floored": row["floored"],
                    }
                )
                print(
                    f"{model:>9} d={d:<3} {name:>6} n={row['n']:>6}: "
                    f"coverage {row['coverage']:.4f} +/- {row['coverage_se']:.4f}"
                )
    with open(out_dir / "coverage.json", "w") as fh:
        json.dump(rows, fh, indent=2)
        fh.write("\n")
    print(f"wrote {out_dir / 'coverage.json'}")
    return 0


def cmd_slope(args) -> int:
    n_grid = tuple(2 ** k for k in range(args.min_pow, args.max_pow + 1))
    result = mean_model_rate_study(
        n_grid=n_grid,
        seeds=args.reps if args.reps else 200,
        eta=args.eta if args.eta is not None else 0.5,
        alpha=args.alpha if args.alpha is not None else 0.505,
        batch_scale=args.batch_scale,
        master_seed=args.seed if args.seed is not None else 0,
        correct_log=not args.no_log_correction,
    )
    for n, mse in result["points"]:
        print(f"n={n:>7}: mse {mse:.6g}")
    print(f"slope (log mse{'/ln n' if not args.no_log_correction else ''} vs log n): "
          f"{result['slope']:.4f}")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "slope.json", "w") as fh:
        json.dump(result, fh, indent=2)
        fh.write("\n")
    print(f"wrote {out_dir / 'slope.json'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sgdinfer",
        description="Streaming covariance estimation and inference for averaged SGD",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment")
    p_run.add_argument("--config", help="JSON config file mirroring ExperimentConfig")
    _add_common_flags(p_run)
    p_run.set_defaults(func=cmd_run)

    p_table = sub.add_parser("table", help="error tables over the standard grid")
    _add_common_flags(p_table)
    p_table.set_defaults(func=cmd_table)

    p_cov = sub.add_parser("coverage", help="coverage over the standard grid")
    _add_common_flags(p_cov)
    p_cov.set_defaults(func=cmd_coverage)

    p_slope = sub.add_parser("slope", help="mean-model rate study")
    p_slope.add_argument("--min-pow", type=int, default=12, help="smallest n as 2^k")
    p_slope.add_argument("--max-pow", type=int, default=17, help="largest n as 2^k")
    p_slope.add_argument("--reps", type=int, help="seeds per sample size (default 200)")
    p_slope.add_argument("--eta", type=float)
    p_slope.add_argument("--alpha", type=float)
    p_slope.add_argument("--seed", type=int)
    p_slope.add_argument("--batch-scale", type=float, default=2.0, dest="batch_scale",
                         help="batch lengths are ceil(scale * i^alpha * ln i)")
    p_slope.add_argument("--no-log-correction", action="store_true",
                         help="fit log(mse) instead of log(mse / ln n)")
    p_slope.add_argument("--out", default="out")
    p_slope.set_defaults(func=cmd_slope)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
