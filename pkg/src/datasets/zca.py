"""
ZCA whitening.

    W = E (Lambda + eps I)^{-1/2} E^T,   x_white = (x - mean) W

from the eigendecomposition of the (population) covariance of the fitting data.
"""

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from src.utils.errors import ShapeError, UsageError

DEFAULT_ZCA_EPSILON = 1e-5


@dataclass
class ZcaTransform:
    mean: np.ndarray
    whitening: np.ndarray
    epsilon: float

    def apply(self, x: np.ndarray) -> np.ndarray:
        return apply_zca(self, x)


def fit_zca(x: np.ndarray, epsilon: float = DEFAULT_ZCA_EPSILON) -> ZcaTransform:
    """
    Fit a ZCA transform.

    Raises:
        UsageError: epsilon <= 0, or fewer rows than features.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    n, d = x.shape
    if epsilon <= 0:
        raise UsageError("ZCA needs epsilon > 0 to handle rank-deficient covariances")
    if n < d:
        raise UsageError(f"ZCA needs at least as many rows as features ({n} < {d})")

    mean = x.mean(axis=0)
    centered = x - mean
    covariance = centered.T @ centered / n
    eigvals, eigvecs = linalg.eigh(covariance)
    eigvals = np.clip(eigvals, 0.0, None)
    whitening = eigvecs @ np.diag(1.0 / np.sqrt(eigvals + epsilon)) @ eigvecs.T
    # Exact symmetry despite round-off in the products above
    whitening = 0.5 * (whitening + whitening.T)
    return ZcaTransform(mean=mean, whitening=whitening, epsilon=float(epsilon))


def apply_zca(transform: ZcaTransform, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != transform.mean.shape[0]:
        raise ShapeError("apply_zca", x.shape, transform.mean.shape)
    return (x - transform.mean) @ transform.whitening
