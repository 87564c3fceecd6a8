"""
Deterministic synthetic semi-supervised datasets.

Both generators return an SSLDataset with a class-balanced labeled subset,
the remaining training points as unlabeled data (label -1) and a separately
drawn test set. Points come from scikit-learn's moons and circles generators
seeded through derive_seed.
"""

import logging
from typing import Callable, Optional, Tuple

import numpy as np
from sklearn.datasets import make_circles, make_moons

from src.datasets.batch import UNLABELED, Batch, SSLDataset
from src.utils.errors import UsageError
from src.utils.helpers import derive_seed, make_rng

logger = logging.getLogger(__name__)

N_CLASSES = 2
RING_RADII = (1.0, 2.0)

# (per-class counts, noise sigma, random_state) -> shuffled points and labels
Sampler = Callable[[Tuple[int, int], float, int], Tuple[np.ndarray, np.ndarray]]


def _moons(counts: Tuple[int, int], noise: float, random_state: int) -> Tuple[np.ndarray, np.ndarray]:
    return make_moons(n_samples=counts, noise=noise or None, random_state=random_state)


def _rings(counts: Tuple[int, int], noise: float, random_state: int) -> Tuple[np.ndarray, np.ndarray]:
    # make_circles labels the outer circle 0; here class 0 is the inner ring
    inner, outer = RING_RADII
    points, labels = make_circles(n_samples=(counts[1], counts[0]), factor=inner / outer,
                                  noise=(noise / outer) or None, random_state=random_state)
    return outer * points, 1 - labels


def _check_split(n: int, n_labeled: int):
    if n_labeled < 2 or n_labeled % 2 != 0:
        raise UsageError(f"n_labeled must be even and at least 2, got {n_labeled}")
    if n_labeled > n:
        raise UsageError(f"n_labeled ({n_labeled}) exceeds n ({n})")


def _draw(sampler: Sampler, random_state: int, n: int, noise: float) -> Tuple[np.ndarray, np.ndarray]:
    """n points split as evenly as possible between the two classes."""
    points, labels = sampler((n - n // 2, n // 2), noise, random_state)
    return points.astype(np.float64), labels.astype(np.int64)


def _build(name: str, sampler: Sampler, n: int, noise: float, n_labeled: int, seed: int,
           n_test: int) -> SSLDataset:
    _check_split(n, n_labeled)
    if noise < 0:
        raise UsageError(f"noise sigma must be non-negative, got {noise}")

    train_x, train_y = _draw(sampler, derive_seed(seed, name, "train"), n, noise)
    test_x, test_y = _draw(sampler, derive_seed(seed, name, "test"), n_test, noise)

    # Stratified labeled subset: n_labeled / 2 per class
    rng = make_rng(seed, name, "labels")
    per_class = n_labeled // 2
    labeled_idx = np.sort(np.concatenate([
        rng.choice(np.flatnonzero(train_y == k), size=per_class, replace=False)
        for k in range(N_CLASSES)
    ]))
    unlabeled_idx = np.setdiff1d(np.arange(n), labeled_idx)

    dataset = SSLDataset(
        labeled=Batch(train_x[labeled_idx], train_y[labeled_idx], indices=labeled_idx),
        unlabeled=Batch(train_x[unlabeled_idx], np.full(len(unlabeled_idx), UNLABELED), indices=unlabeled_idx),
        test=Batch(test_x, test_y),
        name=name,
        n_classes=N_CLASSES,
        metadata={"seed": seed, "noise": noise, "unlabeled_true_labels": train_y[unlabeled_idx]},
    )
    logger.debug(f"{name}: {len(labeled_idx)} labeled, {len(unlabeled_idx)} unlabeled, {n_test} test")
    return dataset


def make_two_moons(n: int, noise: float, n_labeled: int, seed: int, n_test: Optional[int] = None) -> SSLDataset:
    """
    Two interleaving half circles.

    Class 0 lies on (cos t, sin t) and class 1 on (1 - cos t, 0.5 - sin t)
    for t in [0, pi], before Gaussian noise.

    Args:
        n: Training set size (labeled + unlabeled).
        noise: Standard deviation of the isotropic Gaussian noise.
        n_labeled: Even number of labeled examples, half per class.
        seed: Generation seed.
        n_test: Test set size; defaults to n.

    Returns:
        SSLDataset with labeled, unlabeled and test splits.

    Raises:
        UsageError: n_labeled is odd, below 2 or above n.
    """
    return _build("two_moons", _moons, n, noise, n_labeled, seed, n if n_test is None else n_test)


def make_rings(n: int, noise: float, n_labeled: int, seed: int, n_test: Optional[int] = None) -> SSLDataset:
    """Two concentric circles: class 0 at radius 1, class 1 at radius 2."""
    return _build("rings", _rings, n, noise, n_labeled, seed, n if n_test is None else n_test)


GENERATORS = {
    "two_moons": make_two_moons,
    "rings": make_rings,
}
