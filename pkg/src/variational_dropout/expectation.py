"""
Monte-Carlo estimate of an expected loss under the weight posterior.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict

import numpy as np

from src.autodiff.graph import Node, Parameter, backward, evaluate
from src.utils.errors import UsageError
from src.utils.helpers import derive_seed

logger = logging.getLogger(__name__)

LossBuilder = Callable[[int], Node]


@dataclass
class McEstimate:
    value: float
    gradients: Dict[Parameter, np.ndarray]
    samples: np.ndarray


def expected_loss_mc(builder: LossBuilder, n_samples: int, seed: int,
                     with_gradients: bool = True) -> McEstimate:
    """
    Average n independent stochastic evaluations of a scalar loss.

    Args:
        builder: Called with a per-sample seed; returns the scalar loss node.
            Parameter leaves must be shared across calls so gradients add up.
        n_samples: Number of weight samples (>= 1).
        seed: Base seed; sample i uses derive_seed(seed, "mc", i).
        with_gradients: Also run backward on every sample.

    Returns:
        McEstimate with the mean value and the mean gradient per Parameter.
    """
    if n_samples < 1:
        raise UsageError(f"expected_loss_mc needs n_samples >= 1, got {n_samples}")

    # n == 1 keeps the caller's seed so single-sample training matches the plain path
    seeds = [seed] if n_samples == 1 else [derive_seed(seed, "mc", i) for i in range(n_samples)]
    values = np.empty(n_samples)
    totals: Dict[Parameter, np.ndarray] = {}
    for i, sample_seed in enumerate(seeds):
        loss = builder(sample_seed)
        values[i] = float(evaluate(loss))
        if not with_gradients:
            continue
        for param, grad in backward(loss).items():
            if param in totals:
                totals[param] = totals[param] + grad
            else:
                totals[param] = grad.copy()

    gradients = {param: grad / n_samples for param, grad in totals.items()}
    return McEstimate(value=float(np.mean(values)), gradients=gradients, samples=values)
