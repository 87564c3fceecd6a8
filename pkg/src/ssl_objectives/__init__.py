"""Semi-supervised training objectives, schedules, EMA teacher and optimizer."""

from src.ssl_objectives.combined import (
    LossBreakdown,
    LossGraph,
    LossSchedules,
    LossWeights,
    Method,
    ObjectiveSettings,
    build_combined_loss,
    combined_loss,
    evaluate_loss,
    mut_loss,
)
from src.ssl_objectives.losses import ict_consistency, mt_consistency, pi_consistency, xent_loss
from src.ssl_objectives.optimizer import NesterovSGD
from src.ssl_objectives.schedules import ScheduleSpec, ema_momentum_at, ramp_value
from src.ssl_objectives.teacher import TeacherState, ema_update

__all__ = [
    "LossBreakdown",
    "LossGraph",
    "LossSchedules",
    "LossWeights",
    "Method",
    "NesterovSGD",
    "ObjectiveSettings",
    "ScheduleSpec",
    "TeacherState",
    "build_combined_loss",
    "combined_loss",
    "ema_momentum_at",
    "ema_update",
    "evaluate_loss",
    "ict_consistency",
    "mt_consistency",
    "mut_loss",
    "pi_consistency",
    "ramp_value",
    "xent_loss",
]
