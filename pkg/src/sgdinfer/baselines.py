"""Baseline covariance estimators: online batch means and plug-in.

The batch-means estimator averages outer products of centered batch sums,

    Sigma_bm = sum_i (S_i - l_i xbar)(S_i - l_i xbar)^T / sum_i l_i,

accumulated in expanded form so centering can be applied at finalize without
history. It is positive semidefinite by construction.

The plug-in estimator keeps running means of stochastic Hessians and gradient
outer products and returns A_hat^{-1} S_hat A_hat^{-1} through linear solves.
"""

import numpy as np

from .debias import CovEstimate


class NearSingularHessian(RuntimeError):
    """Raised when the averaged Hessian is too ill-conditioned to invert."""


def bm_finalize_raw(M2, sw, sum_l, sum_l2, x_bar) -> np.ndarray:
    # grouped as G + G^T (halving M2 is exact) so the result is bitwise
    # symmetric despite the asymmetric rounding of the two cross terms
    G = 0.5 * M2 - np.outer(sw, x_bar)
    num = (G + G.T) + sum_l2 * np.outer(x_bar, x_bar)
    return num / sum_l


class BatchMeansCovariance:
    """Streaming accumulator for the batch-means estimator."""

    def __init__(self, dim: int):
        self.dim = dim
        self.M2 = np.zeros((dim, dim))  # sum of S S^T
        self.sw = np.zeros(dim)         # sum of l * S
        self.sum_l = 0.0
        self.sum_l2 = 0.0
        self.n = 0

    def update(self, batch_sum, length: int) -> None:
        s = np.asarray(batch_sum, dtype=np.float64)
        if s.shape != (self.dim,):
            raise ValueError(f"expected vector of dim {self.dim}, got {s.shape}")
        self.M2 += np.outer(s, s)
        self.sw += length * s
        self.sum_l += length
        self.sum_l2 += length * length
        self.n += 1

    def finalize(self, x_bar) -> CovEstimate:
        if self.n < 1 or self.sum_l <= 0:
            raise ValueError("cannot finalize an empty batch-means accumulator")
        x_bar = np.asarray(x_bar, dtype=np.float64)
        sigma = bm_finalize_raw(self.M2, self.sw, self.sum_l, self.sum_l2, x_bar)
        return CovEstimate(sigma=sigma, n=self.n)


def plugin_finalize_raw(A_sum, G_sum, n) -> np.ndarray:
    A = A_sum / n
    S = G_sum / n
    svals = np.linalg.svd(A, compute_uv=False)
    if svals[-1] <= 0 or svals[0] / svals[-1] > 1e12:
        raise NearSingularHessian(
            "averaged Hessian is near-singular "
            f"(condition number {np.inf if svals[-1] <= 0 else svals[0] / svals[-1]:.3e})"
        )
    inner = np.linalg.solve(A, S)
    sigma = np.linalg.solve(A, inner.T)
    return (sigma + sigma.T) / 2.0


class PluginCovariance:
    """Running means of stochastic Hessians and gradient outer products."""

    def __init__(self, dim: int):
        self.dim = dim
        self.A_sum = np.zeros((dim, dim))
        self.G_sum = np.zeros((dim, dim))
        self.n = 0

    def update(self, gradient, hessian) -> None:
        g = np.asarray(gradient, dtype=np.float64)
        H = np.asarray(hessian, dtype=np.float64)
        if g.shape != (self.dim,) or H.shape != (self.dim, self.dim):
            raise ValueError(
                f"expected dim {self.dim}, got gradient {g.shape}, hessian {H.shape}"
            )
        self.A_sum += H
        self.G_sum += np.outer(g, g)
        self.n += 1

    @property
    def A_hat(self) -> np.ndarray:
        return self.A_sum / max(self.n, 1)

    @property
    def S_hat(self) -> np.ndarray:
        return self.G_sum / max(self.n, 1)

    def finalize(self) -> CovEstimate:
        if self.n < 1:
            raise ValueError("cannot finalize an empty plug-in accumulator")
        sigma = plugin_finalize_raw(self.A_sum, self.G_sum, self.n)
        return CovEstimate(sigma=sigma, n=self.n)
