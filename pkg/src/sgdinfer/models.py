"""Experiment models: linear, logistic and expectile regression plus a scalar
location (mean) model.

Each model provides a data generator, the per-sample loss, its gradient, the
stochastic Hessian (a.e. for expectile), the true parameter and the limiting
covariance of the averaged iterates. Covariates are standard normal; responses
follow the respective regression model. Gradients are taken with respect to
the full parameter vector (slope plus intercept for expectile).
"""

import math
from dataclasses import dataclass

import numpy as np

MODEL_NAMES = ("linear", "logistic", "expectile", "mean")

# Seed used for Monte-Carlo ground truths; fixed so that the reference
# covariance does not depend on the experiment's master seed.
GROUND_TRUTH_SEED = 20240915

SQRT2 = math.sqrt(2.0)
INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def normal_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / SQRT2)


def normal_pdf(x: float) -> float:
    return INV_SQRT_2PI * math.exp(-0.5 * x * x)


# Acklam's rational approximation to the standard normal quantile, accurate to
# ~1e-9; one Newton step on the CDF brings it to full double precision.
_ACK_A = (
    -3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
    1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00,
)
_ACK_B = (
    -5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
    6.680131188771972e01, -1.328068155288572e01,
)
_ACK_C = (
    -7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
    -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00,
)
_ACK_D = (
    7.784695709041462e-03, 3.224671290700398e-01,
    2.445134137142996e00, 3.754408661907416e00,
)


def quantile_std_normal(p: float) -> float:
    """Inverse standard normal CDF with |Phi(result) - p| <= 1e-12."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must be in (0, 1), got {p}")
    a, b, c, d = _ACK_A, _ACK_B, _ACK_C, _ACK_D
    p_low, p_high = 0.02425, 1 - 0.02425
    if p < p_low:
        t = math.sqrt(-2.0 * math.log(p))
        x = (((((c[0] * t + c[1]) * t + c[2]) * t + c[3]) * t + c[4]) * t + c[5]) / (
            (((d[0] * t + d[1]) * t + d[2]) * t + d[3]) * t + 1.0
        )
    elif p <= p_high:
        t = p - 0.5
        r = t * t
        x = (
            (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5])
            * t
            / (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0)
        )
    else:
        t = math.sqrt(-2.0 * math.log(1.0 - p))
        x = -(((((c[0] * t + c[1]) * t + c[2]) * t + c[3]) * t + c[4]) * t + c[5]) / (
            (((d[0] * t + d[1]) * t + d[2]) * t + d[3]) * t + 1.0
        )
    # Newton refinement on Phi
    err = normal_cdf(x) - p
    x -= err / max(normal_pdf(x), 1e-300)
    return x


def gaussian_expectile(tau: float) -> float:
    """The tau-th expectile of the standard normal distribution.

    Root of tau * E[(eps - c)+] = (1 - tau) * E[(c - eps)+], found by
    bisection on the strictly decreasing residual to |residual| <= 1e-12.
    """
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must be in (0, 1), got {tau}")

    def residual(c: float) -> float:
        up = normal_pdf(c) - c * normal_cdf(-c)   # E[(eps - c)+]
        down = c * normal_cdf(c) + normal_pdf(c)  # E[(c - eps)+]
        return tau * up - (1.0 - tau) * down

    lo, hi = -1.0, 1.0
    while residual(lo) < 0:
        lo *= 2.0
    while residual(hi) > 0:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        r = residual(mid)
        if abs(r) <= 1e-12:
            return mid
        if r > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class ModelSpec:
    """One regression model: name, dimensions, true parameter, noise scale.

    ``d`` counts covariates; the parameter dimension ``p`` is d for linear and
    logistic, d + 1 for expectile (slope plus intercept) and 1 for the mean
    model. ``noise_sigma`` is the noise *variance* of the mean model; the
    regression responses use unit-variance Gaussian noise.
    """

    name: str
    d: int
    p: int
    tau: float
    x_star: np.ndarray
    noise_sigma: float
    has_hessian: bool = True

    def __post_init__(self):
        if self.name not in MODEL_NAMES:
            raise ValueError(f"unknown model {self.name!r}")
        if not 0.0 < self.tau < 1.0:
            raise ValueError(f"tau must be in (0, 1), got {self.tau}")
        if self.noise_sigma <= 0:
            raise ValueError(f"noise_sigma must be positive, got {self.noise_sigma}")


@dataclass(frozen=True)
class GroundTruth:
    """Limiting covariance of sqrt(n) * (xbar - x*) and how it was obtained."""

    sigma: np.ndarray
    provenance: str  # "analytic" or "monte_carlo"


def make_model(
    name: str,
    d: int = 1,
    tau: float = 0.25,
    noise_sigma: float = 1.0,
    mean_value: float = 0.0,
) -> ModelSpec:
    """Build a ModelSpec with the standard true parameter.

    Regression slopes form the arithmetic sequence from 0 to 1 of length d;
    the expectile true parameter additionally carries the Gaussian expectile
    intercept. The mean model's target defaults to 0.
    """
    if name == "mean":
        x_star = np.array([mean_value], dtype=np.float64)
        return ModelSpec(name, d=1, p=1, tau=tau, x_star=x_star, noise_sigma=noise_sigma)
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    slope = np.linspace(0.0, 1.0, d) if d > 1 else np.zeros(1)
    if name in ("linear", "logistic"):
        return ModelSpec(name, d=d, p=d, tau=tau, x_star=slope, noise_sigma=noise_sigma)
    if name == "expectile":
        x_star = np.concatenate([slope, [gaussian_expectile(tau)]])
        return ModelSpec(name, d=d, p=d + 1, tau=tau, x_star=x_star, noise_sigma=noise_sigma)
    raise ValueError(f"unknown model {name!r}")


def sample(model: ModelSpec, rng: np.random.Generator):
    """Draw one observation.

    Regressions return (a, b) with a ~ N(0, I_d); the mean model returns the
    scalar observation. The RNG consumption order here is the contract the
    jitted kernels replicate draw-for-draw.
    """
    if model.name == "mean":
        e = rng.standard_normal() * math.sqrt(model.noise_sigma)
        return float(model.x_star[0]) + e
    a = rng.standard_normal(model.d)
    if model.name == "linear":
        b = float(a @ model.x_star) + rng.standard_normal()
    elif model.name == "expectile":
        b = float(a @ model.x_star[: model.d]) + rng.standard_normal()
    else:  # logistic
        t = float(a @ model.x_star)
        u = rng.random()
        b = 1.0 if u < _sigmoid(t) else -1.0
    return a, b


def _sigmoid(t: float) -> float:
    if t >= 0:
        return 1.0 / (1.0 + math.exp(-t))
    z = math.exp(t)
    return z / (1.0 + z)


def loss(model: ModelSpec, x, xi) -> float:
    x = np.asarray(x, dtype=np.float64)
    if model.name == "mean":
        return 0.5 * (float(xi) - float(x[0])) ** 2
    a, b = xi
    if model.name == "linear":
        r = float(a @ x) - b
        return 0.5 * r * r
    if model.name == "logistic":
        t = -b * float(a @ x)
        # log(1 + exp(t)) computed stably
        return float(np.logaddexp(0.0, t))
    # expectile: asymmetric squared loss over (slope, intercept)
    r = b - float(a @ x[:-1]) - float(x[-1])
    w = (1.0 - model.tau) if r < 0 else model.tau
    return w * r * r


def gradient(model: ModelSpec, x, xi) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.p,):
        raise ValueError(f"parameter has shape {x.shape}, model has p={model.p}")
    if model.name == "mean":
        return np.array([float(x[0]) - float(xi)])
    a, b = xi
    if model.name == "linear":
        return (float(a @ x) - b) * a
    if model.name == "logistic":
        t = float(a @ x)
        return (-b * _sigmoid(-b * t)) * a
    r = b - float(a @ x[:-1]) - float(x[-1])
    w = (1.0 - model.tau) if r < 0 else model.tau
    g = np.empty(model.p)
    g[:-1] = (-2.0 * w * r) * a
    g[-1] = -2.0 * w * r
    return g


def hessian(model: ModelSpec, x, xi) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if model.name == "mean":
        return np.array([[1.0]])
    a, b = xi
    if model.name == "linear":
        return np.outer(a, a)
    if model.name == "logistic":
        s = _sigmoid(float(a @ x))
        return (s * (1.0 - s)) * np.outer(a, a)
    r = b - float(a @ x[:-1]) - float(x[-1])
    w = (1.0 - model.tau) if r < 0 else model.tau
    za = np.concatenate([a, [1.0]])
    return (2.0 * w) * np.outer(za, za)


def mc_moment_matrices(model: ModelSpec, draws: int, seed: int, chunk: int = 100_000):
    """Monte-Carlo estimates of A = E[hessian] and S = E[grad grad^T] at x*.

    Vectorized over draws; used both as the logistic ground-truth route and as
    an independent check of the analytic expectile covariance.
    """
    rng = np.random.default_rng(seed)
    p = model.p
    A = np.zeros((p, p))
    S = np.zeros((p, p))
    left = draws
    while left > 0:
        m = min(chunk, left)
        left -= m
        if model.name == "mean":
            A += m * np.eye(1)
            e = rng.standard_normal(m) * math.sqrt(model.noise_sigma)
            S += np.array([[float(e @ e)]])
            continue
        a = rng.standard_normal((m, model.d))
        if model.name == "linear":
            eps = rng.standard_normal(m)
            A += a.T @ a
            S += (a * (eps * eps)[:, None]).T @ a
        elif model.name == "logistic":
            t = a @ model.x_star
            s = 1.0 / (1.0 + np.exp(-t))
            w = s * (1.0 - s)
            A += (a * w[:, None]).T @ a
            # gradient outer products share the same weight in expectation,
            # but are sampled honestly here
            u = rng.random(m)
            b = np.where(u < s, 1.0, -1.0)
            gw = -b / (1.0 + np.exp(b * t))
            S += (a * (gw * gw)[:, None]).T @ a
        else:  # expectile, parameters (slope, intercept)
            eps = rng.standard_normal(m)
            # residual at the optimum: b - a.x_slope - x0 = eps - x0
            r = eps - model.x_star[-1]
            w = np.where(r < 0, 1.0 - model.tau, model.tau)
            za = np.concatenate([a, np.ones((m, 1))], axis=1)
            A += (za * (2.0 * w)[:, None]).T @ za
            gw = 4.0 * w * w * r * r
            S += (za * gw[:, None]).T @ za
    A /= draws
    S /= draws
    A = (A + A.T) / 2.0
    S = (S + S.T) / 2.0
    return A, S


def mc_sandwich_sigma(model: ModelSpec, draws: int, seed: int) -> np.ndarray:
    """Monte-Carlo sandwich A^{-1} S A^{-1} at the true parameter."""
    A, S = mc_moment_matrices(model, draws, seed)
    inner = np.linalg.solve(A, S)
    sigma = np.linalg.solve(A, inner.T)
    return (sigma + sigma.T) / 2.0


def expectile_sandwich_scalars(tau: float):
    """Analytic scalars (A, S) of the expectile sandwich; Sigma = S/A^2 * I."""
    x0 = gaussian_expectile(tau)
    phi = normal_pdf(x0)
    Phi = normal_cdf(x0)
    A = 2.0 * ((1.0 - tau) + (2.0 * tau - 1.0) * (1.0 - Phi))
    alpha_plus = (1.0 - Phi) * (1.0 + x0 * x0) - x0 * phi
    alpha_minus = Phi * (1.0 + x0 * x0) + x0 * phi
    S = 4.0 * (tau * tau * alpha_plus + (1.0 - tau) ** 2 * alpha_minus)
    return A, S


def ground_truth_sigma(
    model: ModelSpec, mc_draws: int = 1_000_000, seed: int = GROUND_TRUTH_SEED
) -> GroundTruth:
    """Limiting covariance of the averaged iterates for the given model.

    Linear: identity (unit-variance noise, standard normal covariates).
    Mean: the noise variance. Expectile: analytic sandwich scalars times the
    identity. Logistic: the inverse of a Monte-Carlo averaged Hessian at x*
    (well-specified likelihood, so the sandwich collapses to A^{-1}).
    """
    if model.name == "linear":
        return GroundTruth(sigma=np.eye(model.d), provenance="analytic")
    if model.name == "mean":
        return GroundTruth(
            sigma=np.array([[model.noise_sigma]]), provenance="analytic"
        )
    if model.name == "expectile":
        A, S = expectile_sandwich_scalars(model.tau)
        return GroundTruth(
            sigma=(S / (A * A)) * np.eye(model.p), provenance="analytic"
        )
    # logistic
    rng = np.random.default_rng(seed)
    p = model.p
    A = np.zeros((p, p))
    left = mc_draws
    while left > 0:
        m = min(100_000, left)
        left -= m
        a = rng.standard_normal((m, model.d))
        t = a @ model.x_star
        s = 1.0 / (1.0 + np.exp(-t))
        w = s * (1.0 - s)
        A += (a * w[:, None]).T @ a
    A /= mc_draws
    A = (A + A.T) / 2.0
    sigma = np.linalg.inv(A)
    return GroundTruth(sigma=(sigma + sigma.T) / 2.0, provenance="monte_carlo")
