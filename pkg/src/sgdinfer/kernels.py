"""Streaming kernels for whole replications, in two interchangeable lanes.

A replication is one pass: sample -> gradient -> SGD step -> batching ->
estimator accumulation, with raw accumulator snapshots taken at checkpoints.
The numba lane jit-compiles the loop; the numpy lane drives the plain module
classes. Both consume the per-run np.random.Generator in exactly the same
order, so results agree up to floating-point reassociation in dot products.

Block triggers are precomputed into int64 arrays (one entry per iteration)
and shared by both lanes, which keeps the block structure identical across
lanes and avoids per-iteration pow/log calls in the hot loop.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import models as _models
from .backend import HAS_NUMBA, active_backend
from .baselines import BatchMeansCovariance, PluginCovariance
from .batching import BlockBatcher, bm_trigger, scaled_trigger
from .debias import DebiasCovariance
from .sgd import AveragedSgd, StepSchedule

MODEL_IDS = {"linear": 0, "logistic": 1, "expectile": 2, "mean": 3}


@dataclass
class StreamSnapshots:
    """Raw accumulator states captured at each checkpoint of one run."""

    checkpoints: np.ndarray  # (ncp,) iteration numbers
    x_bar: np.ndarray        # (ncp, p)
    P: np.ndarray            # (ncp, p, p)
    W: np.ndarray            # (ncp, p)
    Q: np.ndarray            # (ncp, p, p)
    q: np.ndarray            # (ncp,)
    M2: np.ndarray           # (ncp, p, p)
    sw: np.ndarray           # (ncp, p)
    sum_l: np.ndarray        # (ncp,)
    sum_l2: np.ndarray       # (ncp,)
    A_sum: np.ndarray        # (ncp, p, p)
    G_sum: np.ndarray        # (ncp, p, p)


def debias_trigger_array(n: int, alpha: float, scale: float) -> np.ndarray:
    """Block trigger for the de-biased batching at every i in 1..n."""
    return np.array(
        [scaled_trigger(i, alpha, scale) for i in range(1, n + 1)], dtype=np.int64
    )


def bm_trigger_array(n: int, alpha: float, scale: float) -> np.ndarray:
    """Block trigger for the batch-means batching at every i in 1..n."""
    return np.array(
        [bm_trigger(i, alpha, scale) for i in range(1, n + 1)], dtype=np.int64
    )


def oracle_lengths_array(n: int, alpha: float, scale: float) -> np.ndarray:
    """Batch lengths ceil(scale * i^alpha * ln i), clipped to [1, i]."""
    out = np.empty(n, dtype=np.int64)
    for i in range(1, n + 1):
        v = math.ceil(scale * float(i) ** alpha * math.log(i))
        out[i - 1] = max(1, min(i, v))
    return out


# ---------------------------------------------------------------------------
# numpy lane
# ---------------------------------------------------------------------------


def stream_run_numpy(
    rng,
    model: "_models.ModelSpec",
    x0,
    eta: float,
    alpha: float,
    trig_debias: np.ndarray,
    trig_bm: np.ndarray,
    n: int,
    checkpoints: np.ndarray,
    want_debias: bool,
    want_bm: bool,
    want_plugin: bool,
) -> StreamSnapshots:
    p = model.p
    sgd = AveragedSgd(StepSchedule(eta, alpha), x0)
    batcher = BlockBatcher(p, trigger=lambda i: int(trig_debias[i - 1]))
    bm_batcher = BlockBatcher(p, trigger=lambda i: int(trig_bm[i - 1]))
    debias = DebiasCovariance(p)
    bm = BatchMeansCovariance(p)
    plugin = PluginCovariance(p)
    ncp = len(checkpoints)
    out = _empty_snapshots(ncp, p, checkpoints)
    cp = 0
    for i in range(1, n + 1):
        xi = _models.sample(model, rng)
        g = _models.gradient(model, sgd.x, xi)
        if want_plugin:
            H = _models.hessian(model, sgd.x, xi)
            plugin.update(g, H)
        sgd.step(g)
        snap = batcher.update(i, sgd.x)
        if want_debias:
            debias.update(sgd.x, snap.batch_sum, snap.length)
        if want_bm:
            bsnap = bm_batcher.update(i, sgd.x)
            bm.update(bsnap.block_sum, bsnap.block_length)
        if cp < ncp and i == checkpoints[cp]:
            out.x_bar[cp] = sgd.x_bar
            out.P[cp] = debias.P
            out.W[cp] = debias.W
            out.Q[cp] = debias.Q
            out.q[cp] = debias.q
            out.M2[cp] = bm.M2
            out.sw[cp] = bm.sw
            out.sum_l[cp] = bm.sum_l
            out.sum_l2[cp] = bm.sum_l2
            out.A_sum[cp] = plugin.A_sum
            out.G_sum[cp] = plugin.G_sum
            cp += 1
    return out


def _empty_snapshots(ncp: int, p: int, checkpoints) -> StreamSnapshots:
    return StreamSnapshots(
        checkpoints=np.asarray(checkpoints, dtype=np.int64),
        x_bar=np.zeros((ncp, p)),
        P=np.zeros((ncp, p, p)),
        W=np.zeros((ncp, p)),
        Q=np.zeros((ncp, p, p)),
        q=np.zeros(ncp),
        M2=np.zeros((ncp, p, p)),
        sw=np.zeros((ncp, p)),
        sum_l=np.zeros(ncp),
        sum_l2=np.zeros(ncp),
        A_sum=np.zeros((ncp, p, p)),
        G_sum=np.zeros((ncp, p, p)),
    )


def oracle_sigma_hats_numpy(
    master_seed: int,
    n: int,
    n_seeds: int,
    eta: float,
    alpha: float,
    noise_var: float,
    lengths: np.ndarray,
) -> np.ndarray:
    """Oracle variance estimates for the zero-mean location model, one per
    seed, vectorized across seeds."""
    scale = math.sqrt(noise_var)
    z = np.stack(
        [
            np.random.default_rng([master_seed, n, s]).standard_normal(n)
            for s in range(n_seeds)
        ]
    ) * scale
    etas = eta * np.arange(1, n + 1, dtype=np.float64) ** (-alpha)
    xs = np.empty((n_seeds, n))
    cur = np.zeros(n_seeds)
    for i in range(n):
        cur = cur - etas[i] * (cur - z[:, i])
        xs[:, i] = cur
    prefix = np.concatenate([np.zeros((n_seeds, 1)), np.cumsum(xs, axis=1)], axis=1)
    idx = np.arange(1, n + 1)
    batch = prefix[:, idx] - prefix[:, idx - lengths]
    return np.sum(2.0 * xs * batch - xs * xs, axis=1) / n


# ---------------------------------------------------------------------------
# numba lane
# ---------------------------------------------------------------------------

if HAS_NUMBA:
    from numba import njit

    @njit(cache=True, nogil=True)
    def _stream_kernel(
        rng,
        model_id,
        d,
        p,
        x_star,
        tau,
        noise_var,
        x0,
        eta,
        alpha,
        trig_debias,
        trig_bm,
        n,
        checkpoints,
        want_debias,
        want_bm,
        want_plugin,
        out_xbar,
        out_P,
        out_W,
        out_Q,
        out_q,
        out_M2,
        out_sw,
        out_sl,
        out_sl2,
        out_A,
        out_G,
    ):
        x = x0.copy()
        xbar = np.zeros(p)
        # de-biased batching state
        a1 = 1
        prev_len = 0
        S0 = np.zeros(p)
        S1 = np.zeros(p)
        Sbuf = np.empty(p)
        # batch-means batching state
        a2 = 1
        T1 = np.zeros(p)
        # accumulators
        P = np.zeros((p, p))
        W = np.zeros(p)
        Q = np.zeros((p, p))
        q = 0.0
        M2 = np.zeros((p, p))
        sw = np.zeros(p)
        sum_l = 0.0
        sum_l2 = 0.0
        A_sum = np.zeros((p, p))
        G_sum = np.zeros((p, p))
        av = np.empty(d)
        g = np.empty(p)
        noise_sd = math.sqrt(noise_var)
        ncp = checkpoints.shape[0]
        cp = 0
        for i in range(1, n + 1):
            # --- sample and gradient (same RNG order as models.sample) ---
            hw = 0.0  # hessian weight for rank-one models
            if model_id == 3:  # mean
                xi = x_star[0] + noise_sd * rng.standard_normal()
                g[0] = x[0] - xi
                hw = 1.0
            else:
                for j in range(d):
                    av[j] = rng.standard_normal()
                t = 0.0
                for j in range(d):
                    t += av[j] * x_star[j]
                if model_id == 0:  # linear
                    b = t + rng.standard_normal()
                    r = -b
                    for j in range(d):
                        r += av[j] * x[j]
                    for j in range(d):
                        g[j] = r * av[j]
                    hw = 1.0
                elif model_id == 1:  # logistic
                    if t >= 0.0:
                        s_true = 1.0 / (1.0 + math.exp(-t))
                    else:
                        zz = math.exp(t)
                        s_true = zz / (1.0 + zz)
                    b = 1.0 if rng.random() < s_true else -1.0
                    tx = 0.0
                    for j in range(d):
                        tx += av[j] * x[j]
                    bt = -b * tx
                    if bt >= 0.0:
                        sb = 1.0 / (1.0 + math.exp(-bt))
                    else:
                        zz = math.exp(bt)
                        sb = zz / (1.0 + zz)
                    gw = -b * sb
                    for j in range(d):
                        g[j] = gw * av[j]
                    if tx >= 0.0:
                        sx = 1.0 / (1.0 + math.exp(-tx))
                    else:
                        zz = math.exp(tx)
                        sx = zz / (1.0 + zz)
                    hw = sx * (1.0 - sx)
                else:  # expectile
                    b = t + rng.standard_normal()
                    r = b - x[d]
                    for j in range(d):
                        r -= av[j] * x[j]
                    w = (1.0 - tau) if r < 0.0 else tau
                    gw = -2.0 * w * r
                    for j in range(d):
                        g[j] = gw * av[j]
                    g[d] = gw
                    hw = 2.0 * w
            if want_plugin:
                if model_id == 3:
                    A_sum[0, 0] += hw
                    G_sum[0, 0] += g[0] * g[0]
                else:
                    # rank-one stochastic Hessian hw * v v^T with v the
                    # covariate direction (augmented with 1 for the
                    # expectile intercept)
                    for j in range(p):
                        vj = 1.0 if j >= d else av[j]
                        for k in range(p):
                            vk = 1.0 if k >= d else av[k]
                            A_sum[j, k] += hw * vj * vk
                            G_sum[j, k] += g[j] * g[k]
            # --- SGD step and running average ---
            step = eta * float(i) ** (-alpha)
            for j in range(p):
                x[j] = x[j] - step * g[j]
            inv = 1.0 / i
            for j in range(p):
                xbar[j] = ((i - 1) * xbar[j] + x[j]) * inv
            # --- de-biased batching (two most recent blocks) ---
            if i - a1 + 1 >= trig_debias[i - 1]:
                prev_len = i - a1
                a1 = i
                for j in range(p):
                    S0[j] = S1[j]
                    S1[j] = x[j]
            else:
                for j in range(p):
                    S1[j] += x[j]
            L = (i - a1 + 1) + prev_len
            if want_debias:
                for j in range(p):
                    Sbuf[j] = S0[j] + S1[j]
                q += 2.0 * L + 1.0
                for j in range(p):
                    xj = x[j]
                    W[j] += L * xj + Sbuf[j]
                    for k in range(p):
                        P[j, k] += xj * Sbuf[k]
                        Q[j, k] += xj * x[k]
            # --- batch-means batching (current block only) ---
            if want_bm:
                if i - a2 + 1 >= trig_bm[i - 1]:
                    a2 = i
                    for j in range(p):
                        T1[j] = x[j]
                else:
                    for j in range(p):
                        T1[j] += x[j]
                Lb = i - a2 + 1
                sum_l += Lb
                sum_l2 += float(Lb) * Lb
                for j in range(p):
                    sw[j] += Lb * T1[j]
                    for k in range(p):
                        M2[j, k] += T1[j] * T1[k]
            # --- checkpoint capture ---
            if cp < ncp and i == checkpoints[cp]:
                for j in range(p):
                    out_xbar[cp, j] = xbar[j]
                    out_W[cp, j] = W[j]
                    out_sw[cp, j] = sw[j]
                    for k in range(p):
                        out_P[cp, j, k] = P[j, k]
                        out_Q[cp, j, k] = Q[j, k]
                        out_M2[cp, j, k] = M2[j, k]
                        out_A[cp, j, k] = A_sum[j, k]
                        out_G[cp, j, k] = G_sum[j, k]
                out_q[cp] = q
                out_sl[cp] = sum_l
                out_sl2[cp] = sum_l2
                cp += 1

    @njit(cache=True, nogil=True)
    def _oracle_kernel(rng, n, eta, alpha, noise_sd, lengths):
        xs = np.empty(n)
        cur = 0.0
        for i in range(1, n + 1):
            xi = noise_sd * rng.standard_normal()
            cur = cur - eta * float(i) ** (-alpha) * (cur - xi)
            xs[i - 1] = cur
        prefix = np.empty(n + 1)
        prefix[0] = 0.0
        for i in range(n):
            prefix[i + 1] = prefix[i] + xs[i]
        acc = 0.0
        for i in range(1, n + 1):
            batch = prefix[i] - prefix[i - lengths[i - 1]]
            acc += 2.0 * xs[i - 1] * batch - xs[i - 1] * xs[i - 1]
        return acc / n


def stream_run_numba(
    rng,
    model: "_models.ModelSpec",
    x0,
    eta: float,
    alpha: float,
    trig_debias: np.ndarray,
    trig_bm: np.ndarray,
    n: int,
    checkpoints: np.ndarray,
    want_debias: bool,
    want_bm: bool,
    want_plugin: bool,
) -> StreamSnapshots:
    if not HAS_NUMBA:
        raise RuntimeError("numba backend requested but numba is unavailable")
    p = model.p
    d = model.d if model.name != "mean" else 1
    ncp = len(checkpoints)
    out = _empty_snapshots(ncp, p, checkpoints)
    _stream_kernel(
        rng,
        MODEL_IDS[model.name],
        d,
        p,
        np.ascontiguousarray(model.x_star, dtype=np.float64),
        float(model.tau),
        float(model.noise_sigma),
        np.ascontiguousarray(x0, dtype=np.float64),
        float(eta),
        float(alpha),
        trig_debias,
        trig_bm,
        n,
        np.asarray(checkpoints, dtype=np.int64),
        want_debias,
        want_bm,
        want_plugin,
        out.x_bar,
        out.P,
        out.W,
        out.Q,
        out.q,
        out.M2,
        out.sw,
        out.sum_l,
        out.sum_l2,
        out.A_sum,
        out.G_sum,
    )
    return out


def stream_run(rng, model, x0, eta, alpha, trig_debias, trig_bm, n, checkpoints,
               want_debias, want_bm, want_plugin) -> StreamSnapshots:
    """Run one replication on the active lane."""
    fn = stream_run_numba if active_backend() == "numba" else stream_run_numpy
    return fn(
        rng, model, x0, eta, alpha, trig_debias, trig_bm, n,
        checkpoints, want_debias, want_bm, want_plugin,
    )


def oracle_sigma_hats(
    master_seed: int,
    n: int,
    n_seeds: int,
    eta: float,
    alpha: float,
    noise_var: float,
    lengths: np.ndarray,
) -> np.ndarray:
    """Per-seed oracle variance estimates on the active lane."""
    if active_backend() == "numba":
        out = np.empty(n_seeds)
        noise_sd = math.sqrt(noise_var)
        for s in range(n_seeds):
            rng = np.random.default_rng([master_seed, n, s])
            out[s] = _oracle_kernel(rng, n, eta, alpha, noise_sd, lengths)
        return out
    return oracle_sigma_hats_numpy(master_seed, n, n_seeds, eta, alpha, noise_var, lengths)
