"""
Virtual-point dumps for 2-D plotting.

Columns: example_id, x0_0..x0_{d-1}, x_star_0..x_star_{d-1}, entropy_x0, entropy_x_star.
"""

import csv
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from src.mur.solvers import VirtualPointBatch
from src.utils.errors import ShapeError

logger = logging.getLogger(__name__)


def virtual_point_fieldnames(n_features: int) -> List[str]:
    return (["example_id"]
            + [f"x0_{j}" for j in range(n_features)]
            + [f"x_star_{j}" for j in range(n_features)]
            + ["entropy_x0", "entropy_x_star"])


def write_virtual_points(path: Union[str, Path], x0: np.ndarray, result: VirtualPointBatch,
                         example_ids: Optional[Sequence[int]] = None) -> Path:
    """Write one row per example; returns the path written."""
    x0 = np.atleast_2d(x0)
    if result.x_star.shape != x0.shape:
        raise ShapeError("write_virtual_points", x0.shape, result.x_star.shape)
    if example_ids is None:
        example_ids = range(len(x0))

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fieldnames = virtual_point_fieldnames(x0.shape[1])
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=fieldnames, lineterminator="\n")
        writer.writeheader()
        for i, example_id in enumerate(example_ids):
            row: Dict[str, object] = {"example_id": int(example_id)}
            row.update({f"x0_{j}": repr(float(v)) for j, v in enumerate(x0[i])})
            row.update({f"x_star_{j}": repr(float(v)) for j, v in enumerate(result.x_star[i])})
            row["entropy_x0"] = repr(float(result.entropy_x0[i]))
            row["entropy_x_star"] = repr(float(result.entropy_star[i]))
            writer.writerow(row)

    logger.info(f"📝 Wrote {len(x0)} virtual points to {path}")
    return path


def read_virtual_points(path: Union[str, Path]) -> Dict[str, np.ndarray]:
    """Load a dump back into arrays keyed by 'example_id', 'x0', 'x_star' and the entropy columns."""
    with open(path, "r", newline="") as f:
        rows = list(csv.DictReader(f))
    if not rows:
        return {"example_id": np.zeros(0, dtype=int), "x0": np.zeros((0, 0)), "x_star": np.zeros((0, 0)),
                "entropy_x0": np.zeros(0), "entropy_x_star": np.zeros(0)}
    n_features = sum(1 for key in rows[0] if key.startswith("x0_"))
    return {
        "example_id": np.array([int(r["example_id"]) for r in rows]),
        "x0": np.array([[float(r[f"x0_{j}"]) for j in range(n_features)] for r in rows]),
        "x_star": np.array([[float(r[f"x_star_{j}"]) for j in range(n_features)] for r in rows]),
        "entropy_x0": np.array([float(r["entropy_x0"]) for r in rows]),
        "entropy_x_star": np.array([float(r["entropy_x_star"]) for r in rows]),
    }
