"""Benchmark the two compute lanes against each other.

Usage: python -m sgdinfer.bench [--n N] [--d D] [--reps R]

Runs the same replications on the numba lane and the pure numpy lane, checks
that the finalized estimates agree, and prints per-lane wall times.
"""

import argparse
import time

import numpy as np

from .backend import HAS_NUMBA
from .debias import debias_finalize_raw
from .kernels import (
    bm_trigger_array,
    debias_trigger_array,
    stream_run_numba,
    stream_run_numpy,
)
from .models import make_model


def bench(n: int = 20000, d: int = 5, reps: int = 3) -> None:
    model = make_model("linear", d)
    trig_db = debias_trigger_array(n, 0.505, 0.5)
    trig_bm = bm_trigger_array(n, 0.505, 3.0)
    checkpoints = np.array([n], dtype=np.int64)
    x0 = np.zeros(model.p)

    def drive(fn, label):
        # warm-up run compiles the numba kernel outside the timed region
        fn(np.random.default_rng([0, 0]), model, x0, 0.5, 0.505,
           trig_db, trig_bm, min(n, 50), np.array([min(n, 50)], dtype=np.int64),
           True, True, False)
        t0 = time.perf_counter()
        sigmas = []
        for r in range(reps):
            rng = np.random.default_rng([0, r])
            snaps = fn(rng, model, x0, 0.5, 0.505, trig_db, trig_bm, n,
                       checkpoints, True, True, False)
            sigmas.append(
                debias_finalize_raw(
                    snaps.P[0], snaps.W[0], snaps.Q[0], snaps.q[0], n, snaps.x_bar[0]
                )
            )
        dt = time.perf_counter() - t0
        per_iter = dt / (reps * n) * 1e6
        print(f"{label:>6}: {dt:.3f}s total, {per_iter:.3f} us/iteration")
        return dt, sigmas

    t_np, s_np = drive(stream_run_numpy, "numpy")
    if not HAS_NUMBA:
        print("numba unavailable; only the numpy lane was timed")
        return
    t_nb, s_nb = drive(stream_run_numba, "numba")
    worst = max(
        float(np.max(np.abs(a - b)) / max(np.max(np.abs(a)), 1e-30))
        for a, b in zip(s_np, s_nb)
    )
    print(f"speedup: {t_np / t_nb:.1f}x, max relative disagreement {worst:.2e}")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=20000)
    parser.add_argument("--d", type=int, default=5)
    parser.add_argument("--reps", type=int, default=3)
    args = parser.parse_args(argv)
    bench(args.n, args.d, args.reps)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
