"""Gaussian-noise augmentation of inputs and batches."""

import numpy as np

from src.datasets.batch import Batch
from src.utils.errors import UsageError


def gaussian_noise_inputs(inputs: np.ndarray, sigma: float, seed: int) -> np.ndarray:
    """
    inputs + sigma * N(0, I) drawn from `seed`.

    Same draw as ops.gaussian_noise for the same seed and shape, so the
    classifier's input noise is this function whether or not it runs in a graph.
    """
    if sigma < 0:
        raise UsageError(f"noise sigma must be non-negative, got {sigma}")
    inputs = np.asarray(inputs, dtype=np.float64)
    if sigma == 0:
        return inputs.copy()
    return inputs + sigma * np.random.default_rng(seed).standard_normal(inputs.shape)


def augment_gaussian(batch: Batch, sigma: float, seed: int) -> Batch:
    """Return a copy of the batch with noisy inputs; labels and indices are kept."""
    return batch.with_inputs(gaussian_noise_inputs(batch.inputs, sigma, seed))
