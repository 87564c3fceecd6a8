"""
Composite graph builders shared by the loss and solver modules.
"""

import numpy as np

from src.autodiff import ops
from src.autodiff.graph import Constant, Node, as_node


def row_entropy(logits: Node) -> Node:
    """Shannon entropy (nats) of softmax(logits), one value per row."""
    probs = ops.softmax(logits)
    log_probs = ops.log_softmax(logits)
    return ops.scale(ops.sum(ops.mul(probs, log_probs), axis=-1), -1.0)


def squared_gap(a, b) -> Node:
    """
    Batch mean of the per-row class-averaged squared difference.

    For (n, K) inputs this is (1/n) sum_i (1/K) sum_k (a_ik - b_ik)^2, which is
    the mean over all n*K entries.
    """
    return ops.mean(ops.square(ops.sub(as_node(a), as_node(b))))


def masked_nll(log_probs: Node, one_hot: np.ndarray, n_labeled: int) -> Node:
    """Negative log-likelihood summed over one-hot rows, divided by n_labeled."""
    picked = ops.sum(ops.mul(log_probs, Constant(one_hot)))
    return ops.scale(picked, -1.0 / float(n_labeled))
