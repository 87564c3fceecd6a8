"""Reverse-mode automatic differentiation over float64 numpy arrays."""

from src.autodiff.graph import (
    Constant,
    Node,
    Parameter,
    as_node,
    backward,
    evaluate,
    topological_order,
)
from src.autodiff.gradcheck import grad_check

__all__ = [
    "Constant",
    "Node",
    "Parameter",
    "as_node",
    "backward",
    "evaluate",
    "grad_check",
    "topological_order",
]
