"""
Individual loss terms. Every consistency term has the form

    (1/n) sum_i (1/K) sum_k (p_student(k|.) - p_target(k|.))^2

with the target branch behind stop-gradient.
"""

from typing import Callable, Union

import numpy as np

from src.autodiff import ops
from src.autodiff.functional import masked_nll, squared_gap
from src.autodiff.graph import Constant, Node
from src.utils.errors import ShapeError, UsageError


def xent_loss(log_probs: Node, labels: np.ndarray, labeled_mask: np.ndarray,
              n_classes: int) -> Node:
    """
    Mean negative log-probability of the true class over labeled rows.

    Raises:
        UsageError: No labeled row in the batch.
    """
    labels = np.asarray(labels)
    labeled_mask = np.asarray(labeled_mask, dtype=bool)
    n_labeled = int(np.count_nonzero(labeled_mask))
    if n_labeled == 0:
        raise UsageError("cross-entropy needs at least one labeled example")
    one_hot = np.zeros((labels.shape[0], n_classes))
    rows = np.flatnonzero(labeled_mask)
    one_hot[rows, labels[rows]] = 1.0
    return masked_nll(log_probs, one_hot, n_labeled)


def pi_consistency(probs_a: Node, probs_b: Node) -> Node:
    """Two stochastic passes of the same network; branch b is the target."""
    return squared_gap(probs_a, ops.stop_gradient(probs_b))


def mt_consistency(student_probs: Node, teacher_probs: Union[Node, np.ndarray]) -> Node:
    """Student against EMA-teacher predictions."""
    return squared_gap(student_probs, ops.stop_gradient(teacher_probs))


def mix_inputs(x_i: np.ndarray, x_j: np.ndarray, mix: Union[float, np.ndarray]) -> np.ndarray:
    mix = np.asarray(mix, dtype=np.float64)
    if mix.ndim == 1:
        mix = mix[:, None]
    return mix * x_i + (1.0 - mix) * x_j


def ict_consistency(student_fn: Callable[[np.ndarray], Node],
                    teacher_fn: Callable[[np.ndarray], np.ndarray],
                    x_i: np.ndarray, x_j: np.ndarray, mix: Union[float, np.ndarray]) -> Node:
    """
    Interpolation consistency.

    The student at mix * x_i + (1 - mix) * x_j is pulled toward
    mix * teacher(x_i) + (1 - mix) * teacher(x_j). `mix` is a scalar or
    one coefficient per row in [0, 1].
    """
    x_i = np.atleast_2d(np.asarray(x_i, dtype=np.float64))
    x_j = np.atleast_2d(np.asarray(x_j, dtype=np.float64))
    if x_i.shape != x_j.shape:
        raise ShapeError("ict_consistency", x_i.shape, x_j.shape)
    mix_arr = np.asarray(mix, dtype=np.float64)
    if np.any(mix_arr < 0) or np.any(mix_arr > 1):
        raise UsageError("mixing coefficients must lie in [0, 1]")

    target = mix_inputs(teacher_fn(x_i), teacher_fn(x_j), mix_arr)
    student = student_fn(mix_inputs(x_i, x_j, mix_arr))
    return squared_gap(student, ops.stop_gradient(Constant(target)))
