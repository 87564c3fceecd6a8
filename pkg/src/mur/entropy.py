"""
Predictive entropy H(p(y|x)) and its input gradient.
"""

from typing import Tuple

import numpy as np

from src.autodiff import ops
from src.autodiff.functional import row_entropy
from src.autodiff.graph import Parameter, backward, evaluate

PROB_FLOOR = 1e-12


def predictive_entropy(probs: np.ndarray) -> np.ndarray:
    """
    Shannon entropy in nats of one probability row or of each row of a batch.

    Probabilities are clamped at 1e-12 so one-hot rows give exactly 0.
    """
    probs = np.asarray(probs, dtype=np.float64)
    clamped = np.clip(probs, PROB_FLOOR, 1.0)
    entropy = -np.sum(np.where(probs > PROB_FLOOR, probs * np.log(clamped), 0.0), axis=-1)
    return entropy if entropy.ndim else float(entropy)


def entropy_and_gradient(model, params, x0: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Entropy at each row of x0 and its gradient with respect to that row.

    The network runs with noise off and mean weights. Rows are independent,
    so differentiating the summed entropy gives every row's gradient in one
    backward pass.

    Returns:
        (entropies with shape (n,), gradients with shape (n, d)).
    """
    x0 = np.atleast_2d(np.asarray(x0, dtype=np.float64))
    x = Parameter(x0, name="x0")
    logits = model.build(params, x, noise_on=False, sample_weights=False).logits
    per_row = row_entropy(logits)
    total = ops.sum(per_row)
    evaluate(total)
    grads = backward(total)
    return per_row.value.copy(), grads[x]


def entropy_gradient(model, params, x0: np.ndarray) -> np.ndarray:
    """g0 = dH(p(y|x))/dx at x0; a single example gives a 1-D gradient."""
    x0 = np.asarray(x0, dtype=np.float64)
    _, grads = entropy_and_gradient(model, params, x0)
    return grads[0] if x0.ndim == 1 else grads
