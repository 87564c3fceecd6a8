"""
Sparsity accounting for variational dropout.

A weight is pruned when its learned dropout rate is high: log alpha >= 3,
i.e. keep probability 1 / (1 + alpha) <= 0.05.
"""

from dataclasses import dataclass
from typing import TYPE_CHECKING, List

import numpy as np

from src.utils.errors import UsageError

if TYPE_CHECKING:
    from src.classifiers.mlp import ParamSet

DEFAULT_LOG_ALPHA_THRESHOLD = 3.0


@dataclass
class SparsityReport:
    fraction_pruned: float
    n_pruned: int
    n_weights: int
    masks: List[np.ndarray]  # True where the weight is kept

    def masked_weights(self, thetas: List[np.ndarray]) -> List[np.ndarray]:
        return [theta * mask for theta, mask in zip(thetas, self.masks)]


def sparsity_report(params: "ParamSet", threshold: float = DEFAULT_LOG_ALPHA_THRESHOLD) -> SparsityReport:
    """
    Count weights whose log alpha reaches the threshold.

    Args:
        params: Variational parameter set.
        threshold: Pruning threshold on log alpha.

    Returns:
        SparsityReport with the pruned fraction and one keep-mask per layer.

    Raises:
        UsageError: The parameter set is deterministic.
    """
    if not params.variational:
        raise UsageError("sparsity_report needs a variational parameter set")

    masks = []
    n_pruned = 0
    n_weights = 0
    for layer in params.variational_layers():
        keep = layer.log_alpha < threshold
        masks.append(keep)
        n_pruned += int(keep.size - np.count_nonzero(keep))
        n_weights += int(keep.size)

    fraction = n_pruned / n_weights if n_weights else 0.0
    return SparsityReport(fraction_pruned=fraction, n_pruned=n_pruned,
                          n_weights=n_weights, masks=masks)
