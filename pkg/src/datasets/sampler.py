"""
Training batch sampler with a fixed labeled:unlabeled composition.
"""

import logging
from typing import Iterator

import numpy as np

from src.datasets.batch import Batch, SSLDataset
from src.utils.errors import UsageError
from src.utils.helpers import make_rng


class _Cycler:
    """Endless stream of indices from reshuffled permutations of range(n)."""

    def __init__(self, n: int, rng: np.random.Generator):
        self.n = n
        self.rng = rng
        self.order = rng.permutation(n)
        self.position = 0
        self.epochs = 0

    def take(self, k: int) -> np.ndarray:
        out = []
        while k > 0:
            if self.position == self.n:
                self.order = self.rng.permutation(self.n)
                self.position = 0
                self.epochs += 1
            chunk = min(k, self.n - self.position)
            out.append(self.order[self.position:self.position + chunk])
            self.position += chunk
            k -= chunk
        return np.concatenate(out)


class SSLBatchSampler:
    """
    Draws batches with exactly `n_labeled` labeled rows followed by
    `n_unlabeled` unlabeled rows.

    Batch indices refer to the training set with labeled examples first:
    labeled row i has index i, unlabeled row j has index n_l + j.
    """

    def __init__(self, dataset: SSLDataset, n_labeled: int = 5, n_unlabeled: int = 15, seed: int = 0):
        if n_labeled < 1:
            raise UsageError("every training batch needs at least one labeled example")
        if n_unlabeled < 0:
            raise UsageError("unlabeled batch count must be non-negative")
        if n_unlabeled > 0 and len(dataset.unlabeled) == 0:
            raise UsageError("dataset has no unlabeled examples")
        self.dataset = dataset
        self.n_labeled = n_labeled
        self.n_unlabeled = n_unlabeled
        self._labeled = _Cycler(len(dataset.labeled), make_rng(seed, "sampler", "labeled"))
        self._unlabeled = _Cycler(max(len(dataset.unlabeled), 1), make_rng(seed, "sampler", "unlabeled"))
        self.logger = logging.getLogger(__name__)

    def next_batch(self) -> Batch:
        li = self._labeled.take(self.n_labeled)
        ui = self._unlabeled.take(self.n_unlabeled) if self.n_unlabeled else np.zeros(0, dtype=int)
        inputs = np.vstack([self.dataset.labeled.inputs[li], self.dataset.unlabeled.inputs[ui]])
        labels = np.concatenate([self.dataset.labeled.labels[li], self.dataset.unlabeled.labels[ui]])
        indices = np.concatenate([li, len(self.dataset.labeled) + ui])
        return Batch(inputs=inputs, labels=labels, indices=indices)

    def __iter__(self) -> Iterator[Batch]:
        while True:
            yield self.next_batch()
