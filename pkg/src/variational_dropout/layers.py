"""
Variational dropout layers with the local reparameterization trick.

Instead of sampling a weight matrix w ~ N(theta, sigma^2) per example, the
pre-activation of each unit is sampled directly from the Gaussian it induces:

    nu_j      = sum_i theta_ij x_i
    omega_j^2 = sum_i sigma_ij^2 x_i^2
    z_j       = nu_j + omega_j * eps_j,   eps_j ~ N(0, 1)

Gradients reach theta through nu and log sigma^2 through omega.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.autodiff import ops
from src.autodiff.graph import Constant, Node, as_node, evaluate
from src.utils.errors import ShapeError

DEFAULT_LOG_SIGMA2 = -10.0
LOG_THETA2_EPS = 1e-16


@dataclass
class VariationalLayerParams:
    """Mean weights theta and log-variances log sigma^2 of one M x N layer."""

    theta: np.ndarray
    log_sigma2: np.ndarray

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=np.float64)
        self.log_sigma2 = np.asarray(self.log_sigma2, dtype=np.float64)
        if self.theta.shape != self.log_sigma2.shape:
            raise ShapeError("variational_layer", self.theta.shape, self.log_sigma2.shape)
        if not np.all(np.isfinite(self.log_sigma2)):
            raise ValueError("log sigma^2 entries must be finite")

    @property
    def log_alpha(self) -> np.ndarray:
        """log alpha_ij = log sigma_ij^2 - log theta_ij^2."""
        return log_alpha(self.theta, self.log_sigma2)

    @classmethod
    def initialize(cls, theta: np.ndarray, log_sigma2: float = DEFAULT_LOG_SIGMA2):
        theta = np.asarray(theta, dtype=np.float64)
        return cls(theta=theta, log_sigma2=np.full_like(theta, log_sigma2))


def log_alpha(theta: np.ndarray, log_sigma2: np.ndarray) -> np.ndarray:
    return np.asarray(log_sigma2) - np.log(np.square(theta) + LOG_THETA2_EPS)


def log_alpha_node(theta: Node, log_sigma2: Node) -> Node:
    """Graph version of log alpha; the epsilon keeps theta = 0 finite."""
    log_theta2 = ops.log(ops.shift(ops.square(theta), LOG_THETA2_EPS))
    return ops.sub(log_sigma2, log_theta2)


def local_reparam_node(x: Node, theta: Node, log_sigma2: Node, seed: int) -> Node:
    """Sampled pre-activations z for a batch x (n x M) through an M x N layer."""
    x = as_node(x)
    mean = ops.matmul(x, theta)
    variance = ops.matmul(ops.square(x), ops.exp(log_sigma2))
    std = ops.sqrt(variance)
    return ops.add(mean, ops.mul(std, ops.normal_like(mean, seed)))


def local_reparam_moments(layer: VariationalLayerParams, x: np.ndarray):
    """Analytic mean nu and variance omega^2 of z for inputs x."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    nu = x @ layer.theta
    omega2 = np.square(x) @ np.exp(layer.log_sigma2)
    return nu, omega2


def local_reparam_forward(layer: VariationalLayerParams, x: np.ndarray,
                          seed: int) -> np.ndarray:
    """
    Sample z = nu + omega * eps for inputs x.

    Args:
        layer: Variational layer parameters (M x N).
        x: Inputs, shape (M,) or (n, M).
        seed: Seed of the eps draw.

    Returns:
        Samples with shape (N,) or (n, N) matching x.
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    batch = np.atleast_2d(x)
    if batch.shape[1] != layer.theta.shape[0]:
        raise ShapeError("local_reparam_forward", batch.shape, layer.theta.shape)
    z = evaluate(local_reparam_node(
        Constant(batch), Constant(layer.theta), Constant(layer.log_sigma2), seed
    ))
    return z[0] if single else z


def sample_weights_directly(layer: VariationalLayerParams, x: np.ndarray,
                            n_draws: int, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """
    Reference sampler: draw full weight matrices and compute w^T x per draw.

    Used as the Monte-Carlo oracle for the local reparameterization moments.
    Returns an array of shape (n_draws, N).
    """
    rng = rng or np.random.default_rng(0)
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    sigma = np.exp(0.5 * layer.log_sigma2)
    draws = np.empty((n_draws, layer.theta.shape[1]))
    # Chunked so that 1e5 draws of a modest layer stay small in memory
    chunk = 2048
    for start in range(0, n_draws, chunk):
        stop = min(start + chunk, n_draws)
        noise = rng.standard_normal((stop - start,) + layer.theta.shape)
        weights = layer.theta[None] + sigma[None] * noise
        draws[start:stop] = np.einsum("i,kij->kj", x, weights)
    return draws
