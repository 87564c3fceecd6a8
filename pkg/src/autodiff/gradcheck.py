"""
Finite-difference gradient checking.
"""

from typing import Callable

import numpy as np

from src.autodiff.graph import Node, Parameter, backward, evaluate
from src.utils.errors import UsageError


def grad_check(output: Node, leaf: Parameter, epsilon: float = 1e-6) -> float:
    """
    Compare the analytic gradient of a scalar graph with central differences.

    Args:
        output: Root of a scalar-valued graph that depends on `leaf`.
        leaf: Parameter whose gradient is checked; its data is restored afterwards.
        epsilon: Central-difference step.

    Returns:
        max over components of |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
    """
    value = evaluate(output)
    if value.size != 1:
        raise UsageError(f"grad_check needs a scalar output, got shape {value.shape}")

    analytic = backward(output).get(leaf)
    if analytic is None:
        analytic = np.zeros_like(leaf.data)
    analytic = analytic.copy()

    numeric = np.zeros_like(leaf.data)
    original = leaf.data.copy()
    try:
        flat = leaf.data.reshape(-1)
        for i in range(flat.size):
            saved = flat[i]
            flat[i] = saved + epsilon
            plus = float(evaluate(output))
            flat[i] = saved - epsilon
            minus = float(evaluate(output))
            flat[i] = saved
            numeric.reshape(-1)[i] = (plus - minus) / (2.0 * epsilon)
    finally:
        leaf.data[...] = original
        evaluate(output)

    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return float(np.max(np.abs(analytic - numeric) / scale)) if analytic.size else 0.0


def numerical_gradient(fn: Callable[[np.ndarray], float], x: np.ndarray,
                       epsilon: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of a scalar numpy function."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat_x = x.reshape(-1)
    for i in range(flat_x.size):
        step = np.zeros_like(flat_x)
        step[i] = epsilon
        grad.reshape(-1)[i] = (fn((flat_x + step).reshape(x.shape))
                               - fn((flat_x - step).reshape(x.shape))) / (2.0 * epsilon)
    return grad


def numerical_jacobian(fn: Callable[[np.ndarray], np.ndarray], x: np.ndarray,
                       epsilon: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of a vector-valued numpy function of a vector."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    columns = []
    for i in range(x.size):
        step = np.zeros_like(x)
        step[i] = epsilon
        columns.append((np.asarray(fn(x + step)) - np.asarray(fn(x - step))) / (2.0 * epsilon))
    return np.stack(columns, axis=-1)
