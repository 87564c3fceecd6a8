"""
Nesterov momentum SGD with L2 weight decay on the mean weights only.
"""

import logging
from typing import Dict, List

import numpy as np

from src.autodiff.graph import Leaf
from src.utils.errors import NumericalError, UsageError


class NesterovSGD:
    """
    SGD with Nesterov momentum, in the usual deep-learning form:

        d = g + wd * p          (wd = 0 for log sigma^2 leaves)
        v = mu * v + d
        p = p - lr * (d + mu * v)
    """

    def __init__(self, params: List[Leaf], momentum: float = 0.9, weight_decay: float = 1e-4):
        if not 0.0 <= momentum < 1.0:
            raise UsageError(f"momentum must be in [0, 1), got {momentum}")
        if weight_decay < 0:
            raise UsageError(f"weight decay must be non-negative, got {weight_decay}")
        self.params = list(params)
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.velocity: Dict[int, np.ndarray] = {id(p): np.zeros_like(p.data) for p in self.params}
        self.logger = logging.getLogger(__name__)

    @staticmethod
    def _decays(param: Leaf) -> bool:
        return not (param.name or "").endswith("log_sigma2")

    def step(self, grads: Dict[Leaf, np.ndarray], lr: float):
        """Apply one update; parameters missing from `grads` get a zero gradient."""
        for param in self.params:
            grad = grads.get(param)
            d = np.zeros_like(param.data) if grad is None else np.asarray(grad, dtype=np.float64)
            if d.shape != param.data.shape:
                raise UsageError(f"gradient shape {d.shape} does not match {param.label} {param.data.shape}")
            if self.weight_decay and self._decays(param):
                d = d + self.weight_decay * param.data
            v = self.momentum * self.velocity[id(param)] + d
            self.velocity[id(param)] = v
            param.data = param.data - lr * (d + self.momentum * v)
            if not np.all(np.isfinite(param.data)):
                raise NumericalError(f"non-finite parameter {param.label} after optimizer step")
