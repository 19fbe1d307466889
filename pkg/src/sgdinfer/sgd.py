"""Averaged SGD recursion with polynomially decaying step sizes.

The iterate update is x_i = x_{i-1} - eta_i * g_i with eta_i = eta * i^(-alpha),
and the running average tracks the arithmetic mean of x_1..x_i (the initial
point x_0 is excluded from the average).
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class StepSchedule:
    """Polynomial step-size rule eta_i = eta * i^(-alpha).

    eta must be positive and alpha must lie in (0.5, 1), the regime where the
    averaged iterates are asymptotically normal.
    """

    eta: float
    alpha: float

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError(f"eta must be positive, got {self.eta}")
        if not 0.5 < self.alpha < 1.0:
            raise ValueError(f"alpha must be in (0.5, 1), got {self.alpha}")

    def step_size(self, i: int) -> float:
        """Step size at iteration i >= 1; undefined at i = 0."""
        if i < 1:
            raise ValueError(f"step size undefined for i < 1, got i={i}")
        return self.eta * float(i) ** (-self.alpha)


def step_size(schedule: StepSchedule, i: int) -> float:
    return schedule.step_size(i)


class AveragedSgd:
    """Owns the SGD iterate, the running average and the iteration counter.

    One instance per run; not safe for concurrent mutation but fine to hand
    off between threads.
    """

    def __init__(self, schedule: StepSchedule, x0):
        self.schedule = schedule
        self.x = np.array(x0, dtype=np.float64).reshape(-1).copy()
        self.x_bar = np.zeros_like(self.x)
        self.i = 0

    @property
    def dim(self) -> int:
        return self.x.shape[0]

    def step(self, gradient) -> None:
        """Apply one update x <- x - eta_i * gradient and refresh the average."""
        g = np.asarray(gradient, dtype=np.float64)
        if g.shape != self.x.shape:
            raise ValueError(
                f"gradient has shape {g.shape}, state has shape {self.x.shape}"
            )
        self.i += 1
        self.x = self.x - self.schedule.step_size(self.i) * g
        self.x_bar = ((self.i - 1) * self.x_bar + self.x) / self.i


def sgd_step(state: AveragedSgd, gradient) -> AveragedSgd:
    state.step(gradient)
    return state
