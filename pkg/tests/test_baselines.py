import numpy as np
import pytest

from conftest import stream_batches
from sgdinfer.baselines import (
    BatchMeansCovariance,
    NearSingularHessian,
    PluginCovariance,
)
from sgdinfer.batching import bm_trigger


def run_bm(xs, alpha=0.505, scale=0.15):
    xs = np.asarray(xs, dtype=np.float64)
    if xs.ndim == 1:
        xs = xs[:, None]
    _, _, block_sums, block_lengths = stream_batches(
        xs, lambda i: bm_trigger(i, alpha, scale)
    )
    acc = BatchMeansCovariance(xs.shape[1])
    for i in range(xs.shape[0]):
        acc.update(block_sums[i], int(block_lengths[i]))
    return acc, xs.mean(axis=0), block_sums, block_lengths


def direct_bm(batch_sums, lengths, x_bar):
    """Two-pass evaluation of the batch-means formula."""
    centered = batch_sums - lengths[:, None] * x_bar
    return centered.T @ centered / lengths.sum()


def test_constant_stream_gives_zero():
    xs = np.tile(np.array([1.5, -0.5]), (80, 1))
    acc, xb, _, _ = run_bm(xs)
    np.testing.assert_allclose(acc.finalize(xb).sigma, 0.0, atol=1e-12)


def test_zero_stream_gives_zero():
    acc, xb, _, _ = run_bm(np.zeros((50, 2)))
    np.testing.assert_allclose(acc.finalize(xb).sigma, 0.0, atol=1e-15)


def test_matches_direct_formula(rng):
    for _ in range(10):
        n = int(rng.integers(10, 2000))
        xs = rng.standard_normal((n, 3)) + 2.0
        acc, xb, sums, lengths = run_bm(xs)
        expected = direct_bm(sums, lengths.astype(float), xb)
        got = acc.finalize(xb).sigma
        assert np.linalg.norm(got - expected) / max(np.linalg.norm(expected), 1e-12) <= 1e-10


def test_weight_sum_is_exact(rng):
    xs = rng.standard_normal((500, 1))
    acc, _, _, lengths = run_bm(xs)
    assert acc.sum_l == float(lengths.sum())
    assert acc.sum_l2 == float((lengths.astype(np.int64) ** 2).sum())


def test_psd_by_construction(rng):
    for seed in range(5):
        xs = np.random.default_rng(seed).standard_normal((800, 4))
        acc, xb, _, _ = run_bm(xs)
        eigvals = np.linalg.eigvalsh(acc.finalize(xb).sigma)
        assert eigvals.min() >= -1e-9


def test_translation_invariance_and_scale(rng):
    xs = rng.standard_normal((400, 2))
    acc0, xb0, _, _ = run_bm(xs)
    acc1, xb1, _, _ = run_bm(xs + np.array([5.0, -7.0]))
    s0 = acc0.finalize(xb0).sigma
    s1 = acc1.finalize(xb1).sigma
    assert np.linalg.norm(s1 - s0) / np.linalg.norm(s0) <= 1e-9
    acc2, xb2, _, _ = run_bm(2.0 * xs)
    np.testing.assert_allclose(acc2.finalize(xb2).sigma, 4.0 * s0, rtol=1e-12)


def test_bm_symmetry_exact(rng):
    xs = rng.standard_normal((321, 3))
    acc, xb, _, _ = run_bm(xs)
    sigma = acc.finalize(xb).sigma
    assert np.array_equal(sigma, sigma.T)


def test_bm_empty_finalize_raises():
    with pytest.raises(ValueError):
        BatchMeansCovariance(2).finalize(np.zeros(2))


# --- plug-in estimator ---


def test_plugin_single_sample():
    acc = PluginCovariance(2)
    g = np.array([1.0, 2.0])
    H = np.array([[2.0, 0.5], [0.5, 1.0]])
    acc.update(g, H)
    np.testing.assert_array_equal(acc.A_hat, H)
    np.testing.assert_array_equal(acc.S_hat, np.outer(g, g))


def test_plugin_identity_sandwich():
    acc = PluginCovariance(2)
    acc.update(np.array([1.0, 0.0]), np.eye(2))
    acc.update(np.array([0.0, 1.0]), np.eye(2))
    np.testing.assert_allclose(acc.finalize().sigma, 0.5 * np.eye(2), rtol=1e-14)


def test_plugin_scaled_identity():
    # A = 2I, S = I -> A^-1 S A^-1 = 0.25 I
    acc = PluginCovariance(2)
    acc.A_sum = 2.0 * np.eye(2)
    acc.G_sum = np.eye(2)
    acc.n = 1
    np.testing.assert_allclose(acc.finalize().sigma, 0.25 * np.eye(2), rtol=1e-14)


def test_plugin_zero_gradients():
    acc = PluginCovariance(2)
    for _ in range(10):
        acc.update(np.zeros(2), np.eye(2))
    assert np.all(acc.S_hat == 0.0)


def test_plugin_near_singular_raises():
    acc = PluginCovariance(2)
    acc.update(np.ones(2), np.array([[1.0, 0.0], [0.0, 1e-14]]))
    with pytest.raises(NearSingularHessian):
        acc.finalize()


def test_plugin_symmetry_exact(rng):
    acc = PluginCovariance(3)
    for _ in range(50):
        a = rng.standard_normal(3)
        acc.update(rng.standard_normal(3), np.outer(a, a) + np.eye(3))
    sigma = acc.finalize().sigma
    assert np.array_equal(sigma, sigma.T)


def test_plugin_hessian_mean_converges_identity():
    # linear-model Hessians are a a^T with standard normal a, so A_hat -> I
    rng = np.random.default_rng(5)
    acc = PluginCovariance(5)
    for _ in range(20000):
        a = rng.standard_normal(5)
        acc.update(np.zeros(5), np.outer(a, a))
    assert np.linalg.norm(acc.A_hat - np.eye(5)) < 0.12
