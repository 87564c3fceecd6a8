"""
Offline figures rendered from the CSVs the harness emits.
"""

import csv
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt
import numpy as np

from src.experiments.metrics import read_metrics
from src.mur.virtual_points import read_virtual_points

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def _read_columns(path: PathLike) -> Dict[str, List[str]]:
    with open(path, "r", newline="") as f:
        reader = csv.DictReader(f)
        columns: Dict[str, List[str]] = {name: [] for name in reader.fieldnames or []}
        for row in reader:
            for name, value in row.items():
                columns[name].append(value)
    return columns


def _save(fig, out: PathLike) -> Path:
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=150, bbox_inches='tight')
    plt.close(fig)
    logger.info(f"📝 Figure saved to {out}")
    return out


def plot_virtual_points(csv_path: PathLike, out: PathLike, data_csv: Optional[PathLike] = None) -> Path:
    """Scatter of x0 and x* with one segment per example (2-D inputs only)."""
    points = read_virtual_points(csv_path)
    x0, x_star = points["x0"], points["x_star"]
    if x0.shape[1] != 2:
        raise ValueError(f"virtual point plots need 2-D inputs, got {x0.shape[1]}")

    fig, ax = plt.subplots(figsize=(6, 6))
    if data_csv is not None:
        data = _read_columns(data_csv)
        labeled = np.array([s == "labeled" for s in data["split"]])
        xy = np.column_stack([np.asarray(data["x0"], float), np.asarray(data["x1"], float)])
        labels = np.asarray(data["label"], int)
        ax.scatter(xy[labeled, 0], xy[labeled, 1], c=labels[labeled], cmap='coolwarm',
                   marker='*', s=160, edgecolors='k', label='labeled', zorder=3)
    for a, b in zip(x0, x_star):
        ax.plot([a[0], b[0]], [a[1], b[1]], color='0.6', linewidth=0.6)
    ax.scatter(x0[:, 0], x0[:, 1], s=10, color='tab:blue', label='x0')
    ax.scatter(x_star[:, 0], x_star[:, 1], s=10, c=points["entropy_x_star"], cmap='viridis',
               label='virtual point')
    ax.set_aspect('equal')
    ax.set_title('Virtual points')
    ax.legend(loc='best')
    return _save(fig, out)


def plot_sensitivity_histogram(hist_csv: PathLike, out: PathLike, label: str = "") -> Path:
    hist = _read_columns(hist_csv)
    low = np.asarray(hist["bin_low"], float)
    high = np.asarray(hist["bin_high"], float)
    counts = np.asarray(hist["count"], float)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(low, counts, width=high - low, align='edge', edgecolor='k')
    ax.set_xlabel('Jacobian Frobenius norm')
    ax.set_ylabel('Examples')
    ax.set_title(f'Sensitivity {label}'.strip())
    return _save(fig, out)


def plot_metrics(metrics_csvs: Sequence[PathLike], out: PathLike,
                 columns: Sequence[str] = ("test_error", "total", "mean_g0_norm", "fraction_pruned")) -> Path:
    """One panel per column, one curve per metrics.csv."""
    fig, axes = plt.subplots(1, len(columns), figsize=(4 * len(columns), 3.5), squeeze=False)
    for path in metrics_csvs:
        records = read_metrics(path)
        steps = [r.step for r in records]
        for ax, column in zip(axes[0], columns):
            ax.plot(steps, [getattr(r, column) for r in records], label=Path(path).parent.name)
    for ax, column in zip(axes[0], columns):
        ax.set_xlabel('step')
        ax.set_title(column)
    axes[0][0].legend(loc='best', fontsize='small')
    return _save(fig, out)


def plot_sweep(grid_csv: PathLike, out: PathLike, x: str, metric: str = "test_error",
               group: Optional[str] = None) -> Path:
    """Mean ± std of `metric` against column `x`, one line per value of `group`."""
    grid = _read_columns(grid_csv)
    xs = np.asarray(grid[x], float)
    means = np.asarray(grid[f"mean_{metric}"], float)
    stds = np.asarray(grid[f"std_{metric}"], float)
    groups = grid[group] if group else ["all"] * len(xs)

    fig, ax = plt.subplots(figsize=(6, 4))
    for name in dict.fromkeys(groups):
        mask = np.array([g == name for g in groups])
        order = np.argsort(xs[mask])
        ax.errorbar(xs[mask][order], means[mask][order], yerr=stds[mask][order], marker='o',
                    capsize=3, label=name)
    ax.set_xlabel(x)
    ax.set_ylabel(metric)
    if group:
        ax.legend(loc='best')
    return _save(fig, out)
