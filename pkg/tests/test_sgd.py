import math

import numpy as np
import pytest

from sgdinfer.sgd import AveragedSgd, StepSchedule, sgd_step, step_size

# 0.5 * 10000**-0.505 evaluated with 50-digit arithmetic
STEP_10000 = 0.004774962930107180


def test_step_size_examples():
    assert step_size(StepSchedule(0.5, 0.505), 1) == 0.5
    assert step_size(StepSchedule(1.0, 0.75), 1) == 1.0
    assert math.isclose(
        step_size(StepSchedule(0.5, 0.505), 10000), STEP_10000, rel_tol=1e-14
    )


def test_step_size_rejects_zero():
    with pytest.raises(ValueError):
        StepSchedule(0.5, 0.505).step_size(0)


@pytest.mark.parametrize("eta,alpha", [(0.0, 0.6), (-1.0, 0.6), (1.0, 0.5), (1.0, 1.0), (1.0, 0.3)])
def test_schedule_validation(eta, alpha):
    with pytest.raises(ValueError):
        StepSchedule(eta, alpha)


def test_zero_gradient_keeps_iterate():
    sgd = AveragedSgd(StepSchedule(0.5, 0.505), np.array([1.0, -2.0]))
    sgd.step(np.zeros(2))
    assert np.array_equal(sgd.x, [1.0, -2.0])
    assert np.array_equal(sgd.x_bar, [1.0, -2.0])


def test_mean_model_first_step():
    # squared loss (xi - x)^2 / 2 with xi = 1 gives gradient x - xi = -1 at x0 = 0
    sgd = AveragedSgd(StepSchedule(0.5, 0.505), [0.0])
    sgd.step(np.array([0.0 - 1.0]))
    assert sgd.x[0] == pytest.approx(0.5, abs=0)
    assert sgd.x_bar[0] == pytest.approx(0.5, abs=0)


def test_injected_iterates_average():
    # choose gradients so the iterates are exactly 1, 2, 3
    sched = StepSchedule(1.0, 0.75)
    sgd = AveragedSgd(sched, [0.0])
    targets = [1.0, 2.0, 3.0]
    for i, t in enumerate(targets, start=1):
        g = (sgd.x[0] - t) / sched.step_size(i)
        sgd.step(np.array([g]))
        assert sgd.x[0] == pytest.approx(t, rel=1e-12)
    assert sgd.x_bar[0] == pytest.approx(2.0, rel=1e-12)


@pytest.mark.parametrize("n,p", [(100, 3), (5000, 2), (100_000, 1)])
def test_running_average_matches_two_pass(rng, n, p):
    sched = StepSchedule(0.5, 0.505)
    sgd = AveragedSgd(sched, np.zeros(p))
    total = np.zeros(p)
    history = np.empty((n, p))
    for i in range(n):
        g = rng.standard_normal(p)
        sgd.step(g)
        history[i] = sgd.x
    total = history.sum(axis=0)
    np.testing.assert_allclose(sgd.x_bar, total / n, rtol=1e-12)


def test_update_is_bitwise_deterministic(rng):
    grads = rng.standard_normal((500, 4))
    runs = []
    for _ in range(2):
        sgd = AveragedSgd(StepSchedule(0.5, 0.505), np.zeros(4))
        for g in grads:
            sgd_step(sgd, g)
        runs.append((sgd.x.copy(), sgd.x_bar.copy()))
    assert np.array_equal(runs[0][0], runs[1][0])
    assert np.array_equal(runs[0][1], runs[1][1])


def test_dimension_mismatch_raises():
    sgd = AveragedSgd(StepSchedule(0.5, 0.505), np.zeros(3))
    with pytest.raises(ValueError):
        sgd.step(np.zeros(4))
