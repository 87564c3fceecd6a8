"""
Dataset dump/load as CSV.

Header: x0..x{d-1}, label, split. Rows are written labeled, unlabeled, test,
each in stored order; unlabeled rows carry label -1.
"""

import csv
from pathlib import Path
from typing import Union

import numpy as np

from src.datasets.batch import Batch, SSLDataset
from src.utils.errors import UsageError

SPLITS = ("labeled", "unlabeled", "test")


def write_dataset_csv(path: Union[str, Path], dataset: SSLDataset) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    features = [f"x{j}" for j in range(dataset.n_features)]
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=features + ["label", "split"], lineterminator="\n")
        writer.writeheader()
        for split in SPLITS:
            batch: Batch = getattr(dataset, split)
            for x, y in zip(batch.inputs, batch.labels):
                row = {name: repr(float(v)) for name, v in zip(features, x)}
                row.update(label=int(y), split=split)
                writer.writerow(row)
    return path


def read_dataset_csv(path: Union[str, Path], n_classes: int = 2) -> SSLDataset:
    with open(path, "r", newline="") as f:
        reader = csv.DictReader(f)
        features = [name for name in reader.fieldnames if name not in ("label", "split")]
        rows = {split: ([], []) for split in SPLITS}
        for row in reader:
            if row["split"] not in rows:
                raise UsageError(f"unknown split '{row['split']}' in {path}")
            xs, ys = rows[row["split"]]
            xs.append([float(row[name]) for name in features])
            ys.append(int(row["label"]))

    def batch(split: str) -> Batch:
        xs, ys = rows[split]
        inputs = np.asarray(xs, dtype=np.float64).reshape(-1, len(features))
        return Batch(inputs=inputs, labels=np.asarray(ys, dtype=np.int64))

    return SSLDataset(labeled=batch("labeled"), unlabeled=batch("unlabeled"), test=batch("test"),
                      name=Path(path).stem, n_classes=n_classes)
