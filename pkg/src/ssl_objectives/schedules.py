"""
Ramp schedules for loss coefficients and the learning rate.

The multiplier at step t is

    up(t)   = exp(-5 (1 - x)^2),    x = min(t / t_ru, 1)
    down(t) = 1 - exp(-12.5 x^2),   x = (T - t) / t_rd, inside the last t_rd steps
    value   = peak * up(t) * down(t)

so a coefficient starts at peak * e^-5, reaches its peak at t_ru and decays
to 0 at step T.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.utils.errors import UsageError


@dataclass
class ScheduleSpec:
    peak: float
    t_ru: int
    t_rd: int
    total_steps: int

    def __post_init__(self):
        problems = []
        if self.peak < 0:
            problems.append(f"peak must be non-negative, got {self.peak}")
        if self.t_ru < 0 or self.t_rd < 0:
            problems.append("ramp lengths must be non-negative")
        if self.total_steps <= 0:
            problems.append("total steps must be positive")
        if self.t_ru + self.t_rd > self.total_steps:
            problems.append(f"t_ru + t_rd ({self.t_ru} + {self.t_rd}) exceeds total steps {self.total_steps}")
        if problems:
            raise UsageError("; ".join(problems))

    def value(self, t: int) -> float:
        return ramp_value(self, t)


def ramp_up_multiplier(t: int, t_ru: int) -> float:
    if t_ru == 0:
        return 1.0
    x = min(t / t_ru, 1.0)
    return float(np.exp(-5.0 * (1.0 - x) ** 2))


def ramp_down_multiplier(t: int, t_rd: int, total_steps: int) -> float:
    if t_rd == 0 or t <= total_steps - t_rd:
        return 1.0
    x = (total_steps - t) / t_rd
    return float(1.0 - np.exp(-12.5 * x ** 2))


def ramp_value(spec: ScheduleSpec, t: int) -> float:
    """
    Scheduled value at step t.

    Raises:
        UsageError: t is outside [0, T].
    """
    if not 0 <= t <= spec.total_steps:
        raise UsageError(f"step {t} outside schedule range [0, {spec.total_steps}]")
    if spec.peak == 0.0:
        return 0.0
    return spec.peak * ramp_up_multiplier(t, spec.t_ru) * ramp_down_multiplier(t, spec.t_rd, spec.total_steps)


def ema_momentum_at(t: int, base: float, late: Optional[float] = None,
                    switch_step: Optional[int] = None) -> float:
    """Teacher momentum with an optional single step switch to `late` at `switch_step`."""
    if late is None or switch_step is None or t < switch_step:
        return base
    return late
