"""
Exponential-moving-average teacher.

    theta_bar_t = alpha * theta_bar_{t-1} + (1 - alpha) * theta_t

The teacher holds frozen (Constant) leaves, so it never receives gradients.
"""

from dataclasses import dataclass
from typing import Optional

from src.classifiers.mlp import ParamSet
from src.utils.errors import ShapeError, UsageError


@dataclass
class TeacherState:
    params: ParamSet
    momentum: float

    def __post_init__(self):
        if not 0.0 <= self.momentum <= 1.0:
            raise UsageError(f"EMA momentum must be in [0, 1], got {self.momentum}")

    @classmethod
    def from_student(cls, student: ParamSet, momentum: float) -> "TeacherState":
        return cls(params=student.copy(trainable=False), momentum=momentum)


def ema_update(teacher: TeacherState, student: ParamSet,
               momentum: Optional[float] = None) -> TeacherState:
    """
    One EMA step; call once per training step after the optimizer step.

    Args:
        teacher: Current teacher.
        student: Student parameters after the step.
        momentum: Overrides the teacher's momentum for this step (schedules).

    Returns:
        A new TeacherState; the input teacher is left unchanged.
    """
    alpha = teacher.momentum if momentum is None else float(momentum)
    if not 0.0 <= alpha <= 1.0:
        raise UsageError(f"EMA momentum must be in [0, 1], got {alpha}")

    teacher_leaves = list(teacher.params.named_leaves())
    student_leaves = list(student.named_leaves())
    if [name for name, _ in teacher_leaves] != [name for name, _ in student_leaves]:
        raise ShapeError("ema_update", (len(teacher_leaves),), (len(student_leaves),),
                         detail="teacher and student parameter lists differ")

    updated = teacher.params.copy(trainable=False)
    for (name, new_leaf), (_, student_leaf) in zip(updated.named_leaves(), student_leaves):
        if new_leaf.data.shape != student_leaf.data.shape:
            raise ShapeError(f"ema_update {name}", new_leaf.data.shape, student_leaf.data.shape)
        new_leaf.data = alpha * new_leaf.data + (1.0 - alpha) * student_leaf.data

    return TeacherState(params=updated, momentum=teacher.momentum)
