"""De-biased covariance estimator for averaged SGD.

The estimator at step n is

    Sigma_hat = (1/n) * sum_i [ (x_i - xbar)(S_i - l_i xbar)^T
                              + (S_i - l_i xbar)(x_i - xbar)^T
                              - (x_i - xbar)(x_i - xbar)^T ],

where S_i is the batch sum over the l_i most recent iterates. Expanding the
centering terms shows that only four accumulators are needed for a recursive
O(p^2)-per-step update:

    P = sum_i x_i S_i^T          W = sum_i (l_i x_i + S_i)
    Q = sum_i x_i x_i^T          q = sum_i (2 l_i + 1)

and Sigma_hat = V/n with V = P + P^T - W xbar^T - xbar W^T + q xbar xbar^T - Q.
V is symmetric by construction, so the emitted matrix is exactly symmetric.
The finite-sample estimate is not guaranteed positive semidefinite and is not
projected; downstream consumers floor negative diagonals where needed.
"""

from dataclasses import dataclass

import numpy as np


@dataclass
class CovEstimate:
    """A covariance estimate and the number of iterates it was built from."""

    sigma: np.ndarray
    n: int


def debias_finalize_raw(P, W, Q, q, n, x_bar) -> np.ndarray:
    """Assemble Sigma_hat = V/n from the raw accumulator values.

    V = P + P^T - W xbar^T - xbar W^T + q xbar xbar^T - Q, grouped as
    M + M^T with M = P - W xbar^T so the result is bitwise symmetric.
    """
    M = P - np.outer(W, x_bar)
    V = (M + M.T) + (q * np.outer(x_bar, x_bar) - Q)
    return V / n


class DebiasCovariance:
    """Streaming accumulator for the de-biased estimator.

    ``update`` takes the iterate, its batch sum and the batch length; the
    batch length must count exactly the iterates inside the batch sum,
    otherwise the centering is wrong and translation invariance is lost.
    """

    def __init__(self, dim: int):
        self.dim = dim
        self.P = np.zeros((dim, dim))
        self.W = np.zeros(dim)
        self.Q = np.zeros((dim, dim))
        self.q = 0.0
        self.n = 0

    def update(self, x, batch_sum, length: int) -> None:
        x = np.asarray(x, dtype=np.float64)
        s = np.asarray(batch_sum, dtype=np.float64)
        if x.shape != (self.dim,) or s.shape != (self.dim,):
            raise ValueError(
                f"expected vectors of dim {self.dim}, got {x.shape} and {s.shape}"
            )
        self.P += np.outer(x, s)
        self.W += length * x + s
        self.Q += np.outer(x, x)
        self.q += 2 * length + 1
        self.n += 1

    def finalize(self, x_bar) -> CovEstimate:
        if self.n < 1:
            raise ValueError("cannot finalize an empty accumulator")
        x_bar = np.asarray(x_bar, dtype=np.float64)
        sigma = debias_finalize_raw(self.P, self.W, self.Q, self.q, self.n, x_bar)
        return CovEstimate(sigma=sigma, n=self.n)


def direct_estimate(history, lengths, batch_sums) -> CovEstimate:
    """Two-pass evaluation of the de-biased estimator from stored history.

    Serves as the reference the recursive accumulator is checked against;
    both use the same batch-length convention (length = iterates in the
    batch sum).
    """
    X = np.asarray(history, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    S = np.asarray(batch_sums, dtype=np.float64)
    if S.ndim == 1:
        S = S[:, None]
    ell = np.asarray(lengths, dtype=np.float64)
    n = X.shape[0]
    if n == 0:
        raise ValueError("empty history")
    if S.shape != X.shape or ell.shape != (n,):
        raise ValueError("history, lengths and batch_sums must be consistent")
    x_bar = X.mean(axis=0)
    A = X - x_bar
    B = S - ell[:, None] * x_bar
    sigma = (A.T @ B + B.T @ A - A.T @ A) / n
    return CovEstimate(sigma=sigma, n=n)


def oracle_mean_estimator(history, lengths) -> float:
    """Uncentered scalar variance estimator for the zero-mean location model:

        (1/n) * sum_i [ 2 x_i * sum_{k=i-l_i+1}^{i} x_k - x_i^2 ].

    Batch sums are taken over the l_i most recent iterates (1 <= l_i <= i).
    """
    x = np.asarray(history, dtype=np.float64).reshape(-1)
    ell = np.asarray(lengths, dtype=np.int64).reshape(-1)
    n = x.shape[0]
    if n == 0:
        raise ValueError("empty history")
    if ell.shape[0] != n:
        raise ValueError("lengths must match history")
    if np.any(ell < 1) or np.any(ell > np.arange(1, n + 1)):
        raise ValueError("lengths must satisfy 1 <= l_i <= i")
    prefix = np.concatenate(([0.0], np.cumsum(x)))
    idx = np.arange(1, n + 1)
    batch = prefix[idx] - prefix[idx - ell]
    return float(np.sum(2.0 * x * batch - x * x) / n)
