"""
Batch and dataset containers.

Unlabeled examples carry the label -1; the labeled mask is derived from
the labels so the two can never disagree.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from src.utils.errors import ShapeError, UsageError

UNLABELED = -1


@dataclass
class Batch:
    inputs: np.ndarray
    labels: np.ndarray
    indices: Optional[np.ndarray] = None

    def __post_init__(self):
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=np.float64))
        self.labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if self.labels.shape[0] != self.inputs.shape[0]:
            raise ShapeError("batch", self.inputs.shape, self.labels.shape, detail="labels per row")
        if np.any(self.labels < UNLABELED):
            raise UsageError("labels must be -1 (unlabeled) or a class index")

    @property
    def labeled_mask(self) -> np.ndarray:
        return self.labels >= 0

    @property
    def n_labeled(self) -> int:
        return int(np.count_nonzero(self.labeled_mask))

    def __len__(self) -> int:
        return self.inputs.shape[0]

    def with_inputs(self, inputs: np.ndarray) -> "Batch":
        return Batch(inputs=inputs, labels=self.labels.copy(),
                     indices=None if self.indices is None else self.indices.copy())

    def check_classes(self, n_classes: int):
        if np.any(self.labels >= n_classes):
            raise UsageError(f"label outside [0, {n_classes})")


@dataclass
class SSLDataset:
    """Labeled, unlabeled and test splits of one synthetic problem."""

    labeled: Batch
    unlabeled: Batch
    test: Batch
    name: str = "dataset"
    n_classes: int = 2
    metadata: dict = field(default_factory=dict)

    @property
    def n_features(self) -> int:
        return self.labeled.inputs.shape[1]

    @property
    def train_size(self) -> int:
        """|D| = |D_l| + |D_u|."""
        return len(self.labeled) + len(self.unlabeled)

    def train_inputs(self) -> np.ndarray:
        return np.vstack([self.labeled.inputs, self.unlabeled.inputs])

    def map_inputs(self, fn) -> "SSLDataset":
        """Apply an input transform to every split."""
        return SSLDataset(
            labeled=self.labeled.with_inputs(fn(self.labeled.inputs)),
            unlabeled=self.unlabeled.with_inputs(fn(self.unlabeled.inputs)),
            test=self.test.with_inputs(fn(self.test.inputs)),
            name=self.name,
            n_classes=self.n_classes,
            metadata=dict(self.metadata),
        )
