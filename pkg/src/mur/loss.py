"""MUR loss: squared probability gap between the virtual point and the real point."""

from src.autodiff import ops
from src.autodiff.functional import squared_gap
from src.autodiff.graph import Node


def mur_loss(student_probs_at_x_star, target_probs_at_x0) -> Node:
    """
    (1/n) sum_i (1/K) sum_k (p(k|x*_i) - p(k|x0_i)_sg)^2

    The target branch is wrapped in stop-gradient here, so callers may pass
    a live subgraph.
    """
    return squared_gap(student_probs_at_x_star, ops.stop_gradient(target_probs_at_x0))
