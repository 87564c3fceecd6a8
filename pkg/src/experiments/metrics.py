"""
Metrics records and the per-run metrics stream (metrics.csv).

The column order is fixed; every stream starts with a header row and holds
one row per evaluation step.
"""

import csv
import logging
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import List, Union

import numpy as np

from src.ssl_objectives.combined import LossBreakdown
from src.utils.errors import NumericalError

METRIC_COLUMNS = (
    "step",
    "xent",
    "consistency",
    "kl",
    "mur",
    "total",
    "lambda_consistency",
    "lambda_kl",
    "lambda_mur",
    "learning_rate",
    "test_error",
    "mean_sensitivity",
    "fraction_pruned",
    "mean_g0_norm",
    "wall_clock_ms",
)

# Everything except timing is a pure function of (config, seed)
DETERMINISTIC_COLUMNS = tuple(c for c in METRIC_COLUMNS if c != "wall_clock_ms")


@dataclass
class MetricsRecord:
    step: int
    xent: float
    consistency: float
    kl: float
    mur: float
    total: float
    lambda_consistency: float
    lambda_kl: float
    lambda_mur: float
    learning_rate: float
    test_error: float
    mean_sensitivity: float
    fraction_pruned: float
    mean_g0_norm: float
    wall_clock_ms: float

    def __post_init__(self):
        for f in fields(self):
            value = int(getattr(self, f.name)) if f.name == "step" else float(getattr(self, f.name))
            setattr(self, f.name, value)
            if not np.isfinite(value):
                raise NumericalError(f"metric '{f.name}' at step {self.step} is not finite ({value})")
        if not 0.0 <= self.test_error <= 100.0:
            raise NumericalError(f"test error {self.test_error} outside [0, 100]")

    @classmethod
    def from_breakdown(cls, step: int, loss: LossBreakdown, **metrics) -> "MetricsRecord":
        return cls(step=step, **asdict(loss), **metrics)

    def as_row(self) -> dict:
        row = asdict(self)
        row["step"] = int(self.step)
        return row

    def deterministic_values(self) -> tuple:
        return tuple(getattr(self, c) for c in DETERMINISTIC_COLUMNS)

    @classmethod
    def from_row(cls, row: dict) -> "MetricsRecord":
        values = {c: float(row[c]) for c in METRIC_COLUMNS}
        values["step"] = int(values["step"])
        return cls(**values)


class MetricsWriter:
    """
    Append-only metrics.csv writer; one instance per run.

    Floats are written with repr so reading the file back gives the exact
    values that were recorded.
    """

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._file = open(self.path, "w", newline="")
        self._writer = csv.DictWriter(self._file, fieldnames=list(METRIC_COLUMNS), lineterminator="\n")
        self._writer.writeheader()
        self.rows_written = 0
        self.logger = logging.getLogger(__name__)

    def write(self, record: MetricsRecord):
        row = {k: (v if k == "step" else repr(float(v))) for k, v in record.as_row().items()}
        self._writer.writerow(row)
        self._file.flush()
        self.rows_written += 1

    def close(self):
        if not self._file.closed:
            self._file.close()
            self.logger.debug(f"Closed {self.path} after {self.rows_written} rows")

    def __enter__(self) -> "MetricsWriter":
        return self

    def __exit__(self, exc_type, exc, tb):
        self.close()


def read_metrics(path: Union[str, Path]) -> List[MetricsRecord]:
    with open(path, "r", newline="") as f:
        reader = csv.DictReader(f)
        if tuple(reader.fieldnames or ()) != METRIC_COLUMNS:
            raise ValueError(f"{path} does not have the metrics column layout")
        return [MetricsRecord.from_row(row) for row in reader]
