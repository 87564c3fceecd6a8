"""
KL divergence between the factorized Gaussian posterior and the log-uniform prior.

The per-weight KL depends on log alpha alone. We use the sigmoid/softplus
approximation with constants k1, k2, k3 fitted by Molchanov et al. (2017),
normalized so that KL -> 0 as alpha -> infinity. The closed form is checked
at runtime against a Monte-Carlo estimate by `validate_kl_approximation`.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Sequence, Union

import numpy as np
from scipy import special

from src.autodiff import ops
from src.autodiff.graph import Node
from src.utils.errors import UsageError
from src.variational_dropout.layers import VariationalLayerParams, log_alpha_node

KL_K1 = 0.63576
KL_K2 = 1.87320
KL_K3 = 1.48695

# E[log|eps|] for eps ~ N(0, 1) is -(gamma + log 2) / 2
_LOG_ABS_NORMAL_MEAN = -(np.euler_gamma + np.log(2.0)) / 2.0

KL_NORMALIZATIONS = ("dataset", "per_weight")

logger = logging.getLogger(__name__)


@dataclass
class KlTerm:
    """Summed KL value with its per-layer breakdown."""

    value: float
    per_layer: List[float] = field(default_factory=list)

    def __post_init__(self):
        if self.per_layer and abs(self.value - float(np.sum(self.per_layer))) > 1e-9 * max(1.0, abs(self.value)):
            raise ValueError("KlTerm value must equal the sum of its per-layer entries")


def kl_per_weight(log_alpha: np.ndarray) -> np.ndarray:
    """Closed-form per-weight KL as a function of log alpha (numpy)."""
    log_alpha = np.asarray(log_alpha, dtype=np.float64)
    sig = special.expit(KL_K2 + KL_K3 * log_alpha)
    return KL_K1 - KL_K1 * sig + 0.5 * np.logaddexp(0.0, -log_alpha)


def kl_per_weight_node(log_alpha: Node) -> Node:
    """Graph version of `kl_per_weight`, differentiable in log alpha."""
    sig_term = ops.scale(ops.sigmoid(ops.shift(ops.scale(log_alpha, KL_K3), KL_K2)), -KL_K1)
    softplus_term = ops.scale(ops.softplus(ops.scale(log_alpha, -1.0)), 0.5)
    return ops.shift(ops.add(sig_term, softplus_term), KL_K1)


def kl_layer_node(theta: Node, log_sigma2: Node) -> Node:
    """Summed KL of one layer as a scalar node."""
    return ops.sum(kl_per_weight_node(log_alpha_node(theta, log_sigma2)))


def kl_graph(layers: Sequence[Sequence[Node]]):
    """
    Build the summed KL over several layers.

    Args:
        layers: (theta, log_sigma2) node pairs.

    Returns:
        (total node, list of per-layer nodes).
    """
    if not layers:
        raise UsageError("kl_graph needs at least one variational layer")
    per_layer = [kl_layer_node(theta, log_sigma2) for theta, log_sigma2 in layers]
    total = per_layer[0]
    for node in per_layer[1:]:
        total = ops.add(total, node)
    return total, per_layer


def kl_log_uniform(layers: Union[VariationalLayerParams, Sequence[VariationalLayerParams]]) -> KlTerm:
    """
    KL(q(w) || p(w)) summed over every weight of the given layer(s).

    Args:
        layers: One variational layer or a sequence of them.

    Returns:
        KlTerm with the total and one entry per layer.
    """
    if isinstance(layers, VariationalLayerParams):
        layers = [layers]
    per_layer = [float(np.sum(kl_per_weight(layer.log_alpha))) for layer in layers]
    return KlTerm(value=float(np.sum(per_layer)), per_layer=per_layer)


def kl_normalizer(normalization: str, dataset_size: int, n_weights: int) -> float:
    """Divisor applied to the summed KL before it enters the loss."""
    if normalization == "dataset":
        if dataset_size <= 0:
            raise UsageError("dataset KL normalization needs a positive dataset size")
        return float(dataset_size)
    if normalization == "per_weight":
        if n_weights <= 0:
            raise UsageError("per_weight KL normalization needs at least one weight")
        return float(n_weights)
    raise UsageError(f"unknown KL normalization '{normalization}', expected one of {KL_NORMALIZATIONS}")


# -- Monte-Carlo oracle --------------------------------------------------

def kl_monte_carlo(log_alphas: Sequence[float], n_draws: int = 1_000_000,
                   seed: int = 0) -> np.ndarray:
    """
    Monte-Carlo per-weight KL against the log-uniform prior.

    Up to an additive constant, KL(alpha) = E log|alpha^{-1/2} + eps|. The
    constant is fixed by the alpha -> infinity limit, where the expectation
    tends to E log|eps|, so the returned values are KL(alpha) - KL(infinity).
    The same eps draws are reused for every alpha (common random numbers).
    """
    eps = np.random.default_rng(seed).standard_normal(n_draws)
    values = []
    for la in np.asarray(log_alphas, dtype=np.float64):
        offset = np.exp(-0.5 * la)
        values.append(np.mean(np.log(np.abs(offset + eps))) - _LOG_ABS_NORMAL_MEAN)
    return np.asarray(values)


@dataclass
class KlValidation:
    log_alphas: np.ndarray
    closed_form: np.ndarray
    monte_carlo: np.ndarray
    max_deviation: float
    monotone: bool

    def passed(self, tolerance: float = 0.02) -> bool:
        return self.max_deviation <= tolerance and self.monotone


def validate_kl_approximation(low: float = -4.0, high: float = 4.0, n_points: int = 17,
                              n_draws: int = 1_000_000, seed: int = 0) -> KlValidation:
    """
    Compare the closed-form KL with the Monte-Carlo oracle on a log alpha grid.

    Both sides are measured relative to the prior-matching limit, so the
    comparison is a KL difference and the improper prior's constant cancels.
    """
    grid = np.linspace(low, high, n_points)
    closed = kl_per_weight(grid)
    mc = kl_monte_carlo(grid, n_draws=n_draws, seed=seed)
    deviation = float(np.max(np.abs(closed - mc)))
    monotone = bool(np.all(np.diff(closed) <= 0.0))
    logger.debug(f"KL approximation check: max deviation {deviation:.4f} nats over {n_points} points")
    return KlValidation(grid, closed, mc, deviation, monotone)
