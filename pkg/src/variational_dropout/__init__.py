"""Variational dropout: local reparameterization, KL regularizer and sparsity."""

from src.variational_dropout.expectation import McEstimate, expected_loss_mc
from src.variational_dropout.kl import (
    KlTerm,
    kl_graph,
    kl_log_uniform,
    kl_normalizer,
    kl_per_weight,
    validate_kl_approximation,
)
from src.variational_dropout.layers import (
    DEFAULT_LOG_SIGMA2,
    VariationalLayerParams,
    local_reparam_forward,
    local_reparam_moments,
    local_reparam_node,
)
from src.variational_dropout.sparsity import SparsityReport, sparsity_report

__all__ = [
    "DEFAULT_LOG_SIGMA2",
    "KlTerm",
    "McEstimate",
    "SparsityReport",
    "VariationalLayerParams",
    "expected_loss_mc",
    "kl_graph",
    "kl_log_uniform",
    "kl_normalizer",
    "kl_per_weight",
    "local_reparam_forward",
    "local_reparam_moments",
    "local_reparam_node",
    "sparsity_report",
    "validate_kl_approximation",
]
