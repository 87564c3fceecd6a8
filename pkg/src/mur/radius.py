"""
Data-scaled default radius for virtual-point search.
"""

import logging

import numpy as np
from scipy.spatial import cKDTree

from src.utils.errors import UsageError

DEFAULT_RADIUS_SCALE = 0.5

logger = logging.getLogger(__name__)


def median_nn_distance(points: np.ndarray) -> float:
    """Median Euclidean distance from each point to its nearest other point."""
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if len(points) < 2:
        raise UsageError("nearest-neighbour distance needs at least two points")
    distances, _ = cKDTree(points).query(points, k=2)
    return float(np.median(distances[:, 1]))


def default_radius(unlabeled: np.ndarray, scale: float = DEFAULT_RADIUS_SCALE) -> float:
    """
    `scale` times the median nearest-neighbour distance of the unlabeled set.

    Raises:
        UsageError: The median distance is zero (duplicated points).
    """
    median = median_nn_distance(unlabeled)
    if median <= 0:
        raise UsageError("median nearest-neighbour distance is zero; set the radius explicitly")
    radius = scale * median
    logger.debug(f"Data-scaled radius {radius:.4f} (median NN distance {median:.4f}, scale {scale})")
    return radius
