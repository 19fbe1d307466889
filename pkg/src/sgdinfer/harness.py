"""Experiment orchestration: replications, confidence intervals, coverage,
rate fits and file outputs.

Replications are embarrassingly parallel; each run owns all mutable state and
derives its RNG from (master seed, run index), so results are identical for
any thread count. Estimated wall time per run is recorded but is of course
not deterministic.
"""

import csv
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import models as _models
from .backend import active_backend
from .baselines import bm_finalize_raw, plugin_finalize_raw
from .debias import debias_finalize_raw
from .kernels import (
    bm_trigger_array,
    debias_trigger_array,
    oracle_lengths_array,
    oracle_sigma_hats,
    stream_run,
)

ESTIMATOR_NAMES = ("debias", "bm", "plugin")

THREADS_ENV_VAR = "SGDINFER_THREADS"


@dataclass
class ExperimentConfig:
    model: str
    d: int
    n: int
    reps: int = 100
    eta: float = 0.5
    alpha: float = 0.505
    batch_c: float = 0.5
    bm_batch_c: float = 3.0
    tau: float = 0.25
    noise_sigma: float = 1.0
    estimators: tuple = ("debias", "bm")
    seed: int = 0
    checkpoints: tuple = ()
    nominal_level: float = 0.95
    threads: int = 1
    error_norm: str = "fro"
    save_sigma: bool = False
    x0: tuple = ()

    def __post_init__(self):
        self.estimators = tuple(self.estimators)
        self.checkpoints = tuple(int(c) for c in self.checkpoints) or (self.n,)
        self.x0 = tuple(float(v) for v in self.x0)
        if self.model not in _models.MODEL_NAMES:
            raise ValueError(f"unknown model {self.model!r}")
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        unknown = set(self.estimators) - set(ESTIMATOR_NAMES)
        if unknown:
            raise ValueError(f"unknown estimators: {sorted(unknown)}")
        if not self.estimators:
            raise ValueError("at least one estimator must be enabled")
        if list(self.checkpoints) != sorted(set(self.checkpoints)):
            raise ValueError("checkpoints must be strictly increasing")
        if self.checkpoints[0] < 1 or self.checkpoints[-1] > self.n:
            raise ValueError("checkpoints must lie in [1, n]")
        if not 0.0 < self.nominal_level < 1.0:
            raise ValueError("nominal_level must be in (0, 1)")
        if self.error_norm not in ("fro", "op"):
            raise ValueError("error_norm must be 'fro' or 'op'")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["estimators"] = list(self.estimators)
        out["checkpoints"] = list(self.checkpoints)
        out["x0"] = list(self.x0)
        return out


def config_from_file(path) -> ExperimentConfig:
    with open(path) as fh:
        data = json.load(fh)
    return ExperimentConfig.from_dict(data)


@dataclass
class EstimatorResult:
    error: float
    intervals: np.ndarray  # (p, 2) per-coordinate confidence bounds
    floored: int
    sigma: np.ndarray | None = None


@dataclass
class CheckpointRecord:
    n: int
    x_bar: np.ndarray
    estimates: dict = field(default_factory=dict)  # name -> EstimatorResult


@dataclass
class RunRecord:
    run_index: int
    checkpoints: list
    wall_ms: float = 0.0


def resolve_threads(config_threads: int) -> int:
    env = os.environ.get(THREADS_ENV_VAR, "").strip()
    if env:
        return max(1, int(env))
    return max(1, int(config_threads))


def confidence_interval(x_bar, sigma_hat, n: int, q: float):
    """Per-coordinate normal intervals x_bar_j +/- z * sqrt(Sigma_jj / n).

    Negative diagonal entries (possible for the de-biased estimator) are
    floored at zero; the number of floored coordinates is returned so callers
    can record the event.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 < q < 1.0:
        raise ValueError("q must be in (0, 1)")
    x_bar = np.asarray(x_bar, dtype=np.float64)
    diag = np.diag(np.asarray(sigma_hat, dtype=np.float64)).copy()
    floored = int(np.sum(diag < 0.0))
    diag[diag < 0.0] = 0.0
    z = _models.quantile_std_normal(1.0 - q / 2.0)
    half = z * np.sqrt(diag / n)
    return np.column_stack([x_bar - half, x_bar + half]), floored


def coverage(records, x_star, estimator: str = "debias", checkpoint: int = -1) -> float:
    """Fraction of (run, coordinate) pairs whose interval contains x*_j."""
    if not records:
        raise ValueError("coverage needs at least one run record")
    x_star = np.asarray(x_star, dtype=np.float64)
    hits = 0
    total = 0
    for rec in records:
        cpt = rec.checkpoints[checkpoint]
        iv = cpt.estimates[estimator].intervals
        hits += int(np.sum((iv[:, 0] <= x_star) & (x_star <= iv[:, 1])))
        total += x_star.shape[0]
    return hits / total


def fit_log_slope(points, correct_log: bool = False) -> float:
    """OLS slope of log(value) (optionally log(value / ln n)) against log n."""
    pts = sorted(points)
    if len(pts) < 3:
        raise ValueError("need at least 3 points")
    ns = np.array([p[0] for p in pts], dtype=np.float64)
    vals = np.array([p[1] for p in pts], dtype=np.float64)
    if np.any(np.diff(ns) <= 0):
        raise ValueError("n values must be strictly increasing")
    if np.any(vals <= 0):
        raise ValueError("values must be positive for a log-log fit")
    y = np.log(vals)
    if correct_log:
        y = y - np.log(np.log(ns))
    return float(np.polyfit(np.log(ns), y, 1)[0])


def _finalize_checkpoints(cfg, model, snaps, gt_sigma, q_level):
    records = []
    for k, n_k in enumerate(snaps.checkpoints):
        n_k = int(n_k)
        x_bar = snaps.x_bar[k]
        cpt = CheckpointRecord(n=n_k, x_bar=x_bar.copy())
        for name in cfg.estimators:
            if name == "debias":
                sigma = debias_finalize_raw(
                    snaps.P[k], snaps.W[k], snaps.Q[k], snaps.q[k], n_k, x_bar
                )
            elif name == "bm":
                sigma = bm_finalize_raw(
                    snaps.M2[k], snaps.sw[k], snaps.sum_l[k], snaps.sum_l2[k], x_bar
                )
            else:
                sigma = plugin_finalize_raw(snaps.A_sum[k], snaps.G_sum[k], n_k)
            diff = sigma - gt_sigma
            if cfg.error_norm == "fro":
                err = float(np.linalg.norm(diff))
            else:
                err = float(np.linalg.norm(diff, 2))
            intervals, floored = confidence_interval(x_bar, sigma, n_k, q_level)
            cpt.estimates[name] = EstimatorResult(
                error=err,
                intervals=intervals,
                floored=floored,
                sigma=sigma.copy() if cfg.save_sigma else None,
            )
        records.append(cpt)
    return records


def run_experiment(config: ExperimentConfig):
    """Execute all replications and return one RunRecord per run.

    Deterministic for a given (config, seed) regardless of thread count: each
    run's RNG is derived from (seed, run_index) and aggregation is ordered.
    """
    cfg = config
    model = _models.make_model(cfg.model, cfg.d, cfg.tau, cfg.noise_sigma)
    if "plugin" in cfg.estimators and not model.has_hessian:
        raise ValueError(f"model {cfg.model!r} does not expose a stochastic Hessian")
    gt = _models.ground_truth_sigma(model)
    q_level = 1.0 - cfg.nominal_level
    trig_db = debias_trigger_array(cfg.n, cfg.alpha, cfg.batch_c)
    trig_bm = bm_trigger_array(cfg.n, cfg.alpha, cfg.bm_batch_c)
    checkpoints = np.asarray(cfg.checkpoints, dtype=np.int64)
    if cfg.x0:
        if len(cfg.x0) != model.p:
            raise ValueError(f"x0 has length {len(cfg.x0)}, model needs {model.p}")
        x0 = np.asarray(cfg.x0, dtype=np.float64)
    else:
        x0 = np.zeros(model.p)
    wants = tuple(name in cfg.estimators for name in ESTIMATOR_NAMES)

    def one_run(r: int) -> RunRecord:
        rng = np.random.default_rng([cfg.seed, r])
        t0 = time.perf_counter()
        snaps = stream_run(
            rng, model, x0, cfg.eta, cfg.alpha, trig_db, trig_bm,
            cfg.n, checkpoints, wants[0], wants[1], wants[2],
        )
        wall_ms = (time.perf_counter() - t0) * 1e3
        cpts = _finalize_checkpoints(cfg, model, snaps, gt.sigma, q_level)
        return RunRecord(run_index=r, checkpoints=cpts, wall_ms=wall_ms)

    threads = resolve_threads(cfg.threads)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(one_run, range(cfg.reps)))
    else:
        records = [one_run(r) for r in range(cfg.reps)]
    return records


def summarize(records, config: ExperimentConfig) -> dict:
    """Aggregate per-estimator, per-checkpoint statistics."""
    model = _models.make_model(config.model, config.d, config.tau, config.noise_sigma)
    x_star = model.x_star
    per_estimator = {}
    for name in config.estimators:
        rows = []
        for k, n_k in enumerate(config.checkpoints):
            errors = np.array(
                [rec.checkpoints[k].estimates[name].error for rec in records]
            )
            floored = int(
                sum(rec.checkpoints[k].estimates[name].floored for rec in records)
            )
            if records:
                cov = coverage(records, x_star, estimator=name, checkpoint=k)
                pairs = len(records) * model.p
                cov_se = math.sqrt(max(cov * (1.0 - cov), 0.0) / pairs)
            else:
                cov, cov_se = float("nan"), float("nan")
            rows.append(
                {
                    "n": int(n_k),
                    "mean_error": float(errors.mean()) if len(errors) else float("nan"),
                    "sd_error": float(errors.std(ddof=1)) if len(errors) > 1 else 0.0,
                    "coverage": cov,
                    "coverage_se": cov_se,
                    "floored": floored,
                }
            )
        per_estimator[name] = rows
    return {
        "config": config.to_dict(),
        "reps": len(records),
        "estimators": per_estimator,
        "rng": {
            "bit_generator": "PCG64",
            "seed_scheme": "default_rng([seed, run_index])",
            "normal_sampling": "ziggurat via Generator.standard_normal",
            "backend": active_backend(),
        },
        "schema_version": 1,
    }


def write_matrix(path, matrix) -> None:
    """Row-major text format: a 'rows cols' header line, then one row per line."""
    m = np.asarray(matrix, dtype=np.float64)
    with open(path, "w") as fh:
        fh.write(f"{m.shape[0]} {m.shape[1]}\n")
        for row in m:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def read_matrix(path) -> np.ndarray:
    with open(path) as fh:
        rows, cols = (int(t) for t in fh.readline().split())
        m = np.array(
            [[float(t) for t in fh.readline().split()] for _ in range(rows)]
        )
    if m.shape != (rows, cols):
        raise ValueError(f"matrix file {path} is inconsistent with its header")
    return m


CSV_COLUMNS = ("run_index", "n", "estimator", "frob_error", "coverage_hits", "wall_ms")


def emit_outputs(records, config: ExperimentConfig, out_dir) -> dict:
    """Write runs.csv, summary.json and (optionally) estimate matrices.

    Returns the paths written. runs.csv has one row per
    (run, checkpoint, estimator); coverage_hits counts covered coordinates.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        model = _models.make_model(config.model, config.d, config.tau, config.noise_sigma)
        x_star = model.x_star
        runs_path = out / "runs.csv"
        with open(runs_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for rec in records:
                for cpt in rec.checkpoints:
                    for name in config.estimators:
                        est = cpt.estimates[name]
                        hits = int(
                            np.sum(
                                (est.intervals[:, 0] <= x_star)
                                & (x_star <= est.intervals[:, 1])
                            )
                        )
                        writer.writerow(
                            [
                                rec.run_index,
                                cpt.n,
                                name,
                                repr(est.error),
                                hits,
                                repr(rec.wall_ms),
                            ]
                        )
        summary_path = out / "summary.json"
        with open(summary_path, "w") as fh:
            json.dump(summarize(records, config), fh, indent=2)
            fh.write("\n")
        paths = {"runs": str(runs_path), "summary": str(summary_path), "matrices": []}
        if config.save_sigma:
            for rec in records:
                for cpt in rec.checkpoints:
                    for name in config.estimators:
                        est = cpt.estimates[name]
                        if est.sigma is None:
                            continue
                        mpath = out / f"sigma_{name}_run{rec.run_index:04d}_n{cpt.n}.txt"
                        write_matrix(mpath, est.sigma)
                        paths["matrices"].append(str(mpath))
        return paths
    except OSError as exc:
        raise OSError(f"failed writing outputs under {out}: {exc}") from exc


def mean_model_rate_study(
    n_grid=(4096, 8192, 16384, 32768, 65536, 131072),
    seeds: int = 200,
    eta: float = 0.5,
    alpha: float = 0.505,
    noise_var: float = 1.0,
    batch_scale: float = 2.0,
    master_seed: int = 0,
    correct_log: bool = True,
) -> dict:
    """MSE of the oracle variance estimator across sample sizes, plus the
    log-log slope (with the log-factor divided out by default)."""
    points = []
    per_n = {}
    for n in n_grid:
        lengths = oracle_lengths_array(n, alpha, batch_scale)
        hats = oracle_sigma_hats(master_seed, n, seeds, eta, alpha, noise_var, lengths)
        mse = float(np.mean((hats - noise_var) ** 2))
        points.append((n, mse))
        per_n[int(n)] = {
            "mse": mse,
            "mean_estimate": float(np.mean(hats)),
            "sd_estimate": float(np.std(hats, ddof=1)),
        }
    slope = fit_log_slope(points, correct_log=correct_log)
    return {"points": points, "per_n": per_n, "slope": slope, "seeds": seeds}
