"""
Homotopy parameter and learning-rate schedules.

t grows linearly from 0 to t_max over the run and the learning rate moves
linearly from alpha_start to alpha_end. Both are pure functions of the
step counter; HomotopySchedule tracks them across a training loop.
"""

import logging
from dataclasses import dataclass

from ..utils.exceptions import ConfigurationError, UsageError

logger = logging.getLogger(__name__)


def _check_step(step: int, total: int) -> None:
    if total < 1:
        raise ConfigurationError(f"total steps must be >= 1, got {total}")
    if not 0 <= step <= total:
        raise UsageError(f"step {step} outside [0, {total}]")


def homotopy_t(step: int, total: int, t_max: float = 1.0) -> float:
    """t_max * step / T.

    Step 0 is the initial value t = 0 before any update.
    """
    _check_step(step, total)
    if not 0.0 <= t_max <= 1.0:
        raise ConfigurationError(f"t_max must lie in [0, 1], got {t_max}")
    return t_max * (step / total)


def linear_lr(alpha_start: float, alpha_end: float, total: int, step: int) -> float:
    """alpha_start + (alpha_end - alpha_start) * step / T."""
    _check_step(step, total)
    if step == total:
        return alpha_end
    return alpha_start + (alpha_end - alpha_start) * (step / total)


@dataclass
class HomotopyState:
    """Step bookkeeping of a homotopy training run."""

    total: int
    alpha_start: float
    alpha_end: float
    t_max: float = 1.0
    step: int = 0
    t: float = 0.0
    alpha: float = 0.0

    def __post_init__(self):
        if self.total < 1:
            raise ConfigurationError(f"total steps must be >= 1, got {self.total}")
        if not (self.alpha_start > 0.0 and self.alpha_end > 0.0):
            raise ConfigurationError("learning rates must be > 0")
        if not 0.0 <= self.t_max <= 1.0:
            raise ConfigurationError(f"t_max must lie in [0, 1], got {self.t_max}")
        self.alpha = linear_lr(self.alpha_start, self.alpha_end, self.total, self.step)
        self.t = homotopy_t(self.step, self.total, self.t_max)


class HomotopySchedule:
    """Advances t and alpha after each optimizer step.

    With granularity "step" t follows step / T; with "epoch" it follows
    completed_epochs / epochs and changes only at epoch boundaries. The
    learning rate always follows the step counter. ``frozen`` pins t at 0.
    """

    def __init__(self, epochs: int, steps_per_epoch: int, alpha_start: float,
                 alpha_end: float, t_max: float = 1.0, granularity: str = "step",
                 frozen: bool = False):
        if epochs < 1 or steps_per_epoch < 1:
            raise ConfigurationError("epochs and steps_per_epoch must be >= 1")
        if granularity not in ("step", "epoch"):
            raise ConfigurationError(f"unknown t granularity {granularity!r}")
        self.epochs = epochs
        self.steps_per_epoch = steps_per_epoch
        self.granularity = granularity
        self.frozen = frozen
        self.state = HomotopyState(
            total=epochs * steps_per_epoch,
            alpha_start=alpha_start,
            alpha_end=alpha_end,
            t_max=t_max,
        )

    @property
    def total_steps(self) -> int:
        return self.state.total

    @property
    def t(self) -> float:
        return self.state.t

    @property
    def alpha(self) -> float:
        return self.state.alpha

    def advance(self) -> HomotopyState:
        """Record one finished optimizer step and update alpha and t."""
        state = self.state
        if state.step >= state.total:
            raise UsageError("schedule already reached its final step")
        state.step += 1
        state.alpha = linear_lr(state.alpha_start, state.alpha_end, state.total, state.step)
        if self.frozen:
            state.t = 0.0
        elif self.granularity == "step":
            state.t = homotopy_t(state.step, state.total, state.t_max)
        elif state.step % self.steps_per_epoch == 0:
            completed = state.step // self.steps_per_epoch
            state.t = homotopy_t(completed, self.epochs, state.t_max)
        return state


__all__ = [
    "homotopy_t",
    "linear_lr",
    "HomotopyState",
    "HomotopySchedule",
]
