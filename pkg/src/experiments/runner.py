"""
Experiment runner: multi-seed runs, sweeps, summaries and analysis artifacts.

Every run writes into its own directory (`<output_dir>/seed_<k>`), so seeds
executed in parallel never share a writer.
"""

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import yaml

from config.config_loader import ExperimentConfig, apply_overrides, config_to_dict, validate_config
from src.classifiers.checkpoint import load_checkpoint
from src.classifiers.mlp import MLPClassifier
from src.datasets.batch import Batch, SSLDataset
from src.experiments.metrics import METRIC_COLUMNS, MetricsRecord
from src.experiments.trainer import RunResult, train_seed
from src.mur.solvers import MurConfig, find_virtual_points
from src.mur.virtual_points import write_virtual_points
from src.utils.errors import ShapeError, UsageError
from src.utils.helpers import config_hash, mean_and_std
from src.variational_dropout.kl import KlValidation, validate_kl_approximation

logger = logging.getLogger(__name__)

SUMMARY_METRICS = ("test_error", "mean_sensitivity", "fraction_pruned", "mean_g0_norm", "total")
DEFAULT_RADIUS_MULTIPLES = (0.1, 0.5, 1.0, 4.0)
DEFAULT_KL_PEAKS = (0.005, 0.05, 0.5)
DEFAULT_SOLVER_GRID = {"step_size": (0.03, 0.1, 0.3), "steps": (1, 5, 10)}


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    runs: List[RunResult]
    summary: Dict[str, Any]
    summary_path: Optional[Path] = None

    def finals(self) -> List[Tuple[int, MetricsRecord]]:
        return [(run.seed, run.final) for run in self.runs]

    def final_values(self, metric: str) -> List[float]:
        return [getattr(run.final, metric) for run in self.runs]


def _write_rows(path: Path, fieldnames: Sequence[str], rows: Sequence[Dict[str, Any]]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(fieldnames), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
    return path


# =============================================================================
# Summaries
# =============================================================================

def build_summary(finals: Sequence[Tuple[int, MetricsRecord]], config_dict: Optional[Dict[str, Any]] = None,
                  extra: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """
    Per-seed final values plus mean and sample standard deviation per metric.

    Raises:
        UsageError: No records.
    """
    if not finals:
        raise UsageError("a summary needs at least one record")

    per_seed = {int(seed): {c: getattr(record, c) for c in METRIC_COLUMNS} for seed, record in finals}
    aggregates = {}
    for metric in SUMMARY_METRICS:
        mean, std = mean_and_std(getattr(record, metric) for _, record in finals)
        aggregates[metric] = {"mean": mean, "std": std}

    summary = {
        "config_hash": config_hash(config_dict) if config_dict is not None else None,
        "n_seeds": len(finals),
        "seeds": [int(seed) for seed, _ in finals],
        "aggregates": aggregates,
        "per_seed": per_seed,
    }
    if extra:
        summary.update(extra)
    return summary


def emit_summary(finals: Sequence[Tuple[int, MetricsRecord]], path: Union[str, Path],
                 config_dict: Optional[Dict[str, Any]] = None,
                 extra: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """Write the run summary as YAML and return it."""
    summary = build_summary(finals, config_dict, extra)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        yaml.safe_dump(summary, f, default_flow_style=False, sort_keys=False)
    logger.info(f"📝 Summary written to {path}")
    return summary


# =============================================================================
# Runs
# =============================================================================

def run_experiment(config: ExperimentConfig, output_dir: Optional[Union[str, Path]] = None,
                   write_files: bool = True) -> ExperimentResult:
    """
    Train every configured seed and summarize the final records.

    Raises:
        ConfigError: Before any training when the configuration is invalid.
    """
    validate_config(config)
    out = Path(output_dir if output_dir is not None else config.experiment.output_dir)
    seeds = list(config.experiment.seeds)

    def run_dir(seed: int) -> Optional[Path]:
        return out / f"seed_{seed}" if write_files else None

    if config.experiment.workers > 1 and len(seeds) > 1:
        logger.info(f"🔧 Running {len(seeds)} seeds on {config.experiment.workers} workers")
        with ProcessPoolExecutor(max_workers=config.experiment.workers) as pool:
            futures = [pool.submit(train_seed, config, seed, run_dir(seed)) for seed in seeds]
            runs = [future.result() for future in futures]
    else:
        runs = [train_seed(config, seed, run_dir(seed)) for seed in seeds]

    config_dict = config_to_dict(config)
    extra = {"name": config.experiment.name, "method": config.experiment.method}
    radii = {run.seed: run.radius for run in runs if run.radius is not None}
    if radii:
        extra["radius"] = radii
    diagnostics = {run.seed: run.diagnostics for run in runs if run.diagnostics}
    if diagnostics:
        extra["diagnostics"] = diagnostics

    finals = [(run.seed, run.final) for run in runs]
    summary_path = out / "summary.yaml" if write_files else None
    if summary_path is not None:
        summary = emit_summary(finals, summary_path, config_dict, extra)
    else:
        summary = build_summary(finals, config_dict, extra)

    test_error = summary["aggregates"]["test_error"]
    logger.info(f"✅ {config.experiment.name}: test error {test_error['mean']:.2f} ± {test_error['std']:.2f}% "
                f"over {len(runs)} seeds")
    return ExperimentResult(config=config, runs=runs, summary=summary, summary_path=summary_path)


@dataclass
class SweepPoint:
    """One cell of a sweep grid: label columns and the config overrides that realize it."""

    labels: Dict[str, Any]
    overrides: Dict[str, Any] = field(default_factory=dict)

    @property
    def slug(self) -> str:
        return "_".join(f"{k}-{v}" for k, v in self.labels.items())


@dataclass
class SweepResult:
    points: List[SweepPoint]
    results: List[ExperimentResult]
    rows: List[Dict[str, Any]]
    grid: List[Dict[str, Any]]
    rows_path: Optional[Path] = None
    grid_path: Optional[Path] = None


def run_sweep(config: ExperimentConfig, points: Sequence[SweepPoint], name: str,
              output_dir: Optional[Union[str, Path]] = None, metrics: Sequence[str] = ("test_error",),
              write_files: bool = True) -> SweepResult:
    """
    Run every sweep point over the configured seeds.

    Writes `<name>.csv` (one row per point and seed) and `<name>_grid.csv`
    (mean and sample std per point).
    """
    out = Path(output_dir if output_dir is not None else config.experiment.output_dir)
    label_names = list(points[0].labels) if points else []
    rows, grid, results = [], [], []
    for point in points:
        point_config = apply_overrides(config, point.overrides)
        logger.info(f"🔧 {name}: {point.labels}")
        result = run_experiment(point_config, out / name / point.slug, write_files=write_files)
        results.append(result)
        for run in result.runs:
            row = dict(point.labels, seed=run.seed)
            row.update({m: getattr(run.final, m) for m in metrics})
            rows.append(row)
        cell = dict(point.labels, n_seeds=len(result.runs))
        for m in metrics:
            mean, std = mean_and_std(result.final_values(m))
            cell[f"mean_{m}"] = mean
            cell[f"std_{m}"] = std
        grid.append(cell)

    rows_path = grid_path = None
    if write_files:
        rows_path = _write_rows(out / f"{name}.csv", label_names + ["seed"] + list(metrics), rows)
        grid_path = _write_rows(out / f"{name}_grid.csv",
                                label_names + ["n_seeds"]
                                + [f"{s}_{m}" for m in metrics for s in ("mean", "std")], grid)
    return SweepResult(points=list(points), results=results, rows=rows, grid=grid,
                       rows_path=rows_path, grid_path=grid_path)


def compare_rr(config: ExperimentConfig, radii: Sequence[float],
               output_dir: Optional[Union[str, Path]] = None, write_files: bool = True) -> SweepResult:
    """
    MUR (direct solver) against random regularization over a list of radii.

    At r = 0 the virtual point is x0 itself, so both entries run the MUR-free
    objective with identical seeds.
    """
    points = []
    for radius in radii:
        for method, solver in (("mur", "direct"), ("rr", "random")):
            if radius == 0:
                overrides = {"schedules.mur_peak": 0.0}
            else:
                overrides = {"mur.enabled": True, "mur.radius": float(radius), "mur.solver": solver}
            points.append(SweepPoint(labels={"radius": radius, "method": method}, overrides=overrides))
    return run_sweep(config, points, "compare_rr", output_dir, write_files=write_files)


def sweep_radius(config: ExperimentConfig, multiples: Sequence[float] = DEFAULT_RADIUS_MULTIPLES,
                 output_dir: Optional[Union[str, Path]] = None, write_files: bool = True) -> SweepResult:
    """Test error over multiples of the data-scaled default radius."""
    base = config.mur.radius_scale
    points = [SweepPoint(labels={"multiple": m, "radius_scale": base * m},
                         overrides={"mur.enabled": True, "mur.radius": None, "mur.radius_scale": base * m})
              for m in multiples]
    return run_sweep(config, points, "sweep_radius", output_dir, write_files=write_files)


def sweep_kl(config: ExperimentConfig, peaks: Sequence[float] = DEFAULT_KL_PEAKS,
             output_dir: Optional[Union[str, Path]] = None, write_files: bool = True) -> SweepResult:
    """Test error and pruned fraction over KL coefficient peaks (VBI forced on)."""
    points = [SweepPoint(labels={"kl_peak": peak}, overrides={"vbi.enabled": True, "schedules.kl_peak": peak})
              for peak in peaks]
    return run_sweep(config, points, "sweep_kl", output_dir, metrics=("test_error", "fraction_pruned"),
                     write_files=write_files)


def sweep_solver(config: ExperimentConfig, solvers: Sequence[str] = ("pga", "lagrangian-ga"),
                 step_sizes: Sequence[float] = DEFAULT_SOLVER_GRID["step_size"],
                 steps: Sequence[int] = DEFAULT_SOLVER_GRID["steps"],
                 output_dir: Optional[Union[str, Path]] = None, write_files: bool = True) -> SweepResult:
    """Test error and mean entropy-gradient norm over (solver, step size, steps)."""
    points = [
        SweepPoint(labels={"solver": solver, "step_size": alpha, "steps": s},
                   overrides={"mur.enabled": True, "mur.solver": solver, "mur.step_size": alpha, "mur.steps": s})
        for solver in solvers for alpha in step_sizes for s in steps
    ]
    return run_sweep(config, points, "sweep_solver", output_dir, metrics=("test_error", "mean_g0_norm"),
                     write_files=write_files)


# =============================================================================
# Checkpoint analysis
# =============================================================================

@dataclass
class SensitivityResult:
    values: np.ndarray
    edges: np.ndarray
    counts: np.ndarray

    @property
    def mean(self) -> float:
        return float(np.mean(self.values)) if self.values.size else 0.0


def histogram_edges(values: np.ndarray, bin_width: float) -> np.ndarray:
    """Fixed-width edges from 0 covering max(values); at least one bin."""
    if bin_width <= 0:
        raise UsageError(f"bin width must be positive, got {bin_width}")
    top = float(np.max(values)) if values.size else 0.0
    n_bins = max(1, int(math.ceil(top / bin_width)))
    if n_bins * bin_width < top:
        n_bins += 1
    return bin_width * np.arange(n_bins + 1)


def sensitivity_sweep(checkpoint: Union[str, Path], test: Union[Batch, np.ndarray], bin_width: float = 0.05,
                      output_dir: Optional[Union[str, Path]] = None) -> SensitivityResult:
    """
    Per-example Jacobian Frobenius norms of a checkpoint on a test set.

    Writes `sensitivity.csv` (example_id, sensitivity) and
    `sensitivity_hist.csv` (bin_low, bin_high, count) when output_dir is given.

    Raises:
        ShapeError: Test inputs do not match the checkpoint's input width.
    """
    spec, params, _ = load_checkpoint(checkpoint)
    inputs = test.inputs if isinstance(test, Batch) else np.atleast_2d(np.asarray(test, dtype=np.float64))
    if inputs.shape[1] != spec.n_inputs:
        raise ShapeError("sensitivity_sweep", inputs.shape, (spec.n_inputs,),
                         detail="test inputs do not match the checkpoint input width")

    values = MLPClassifier(spec).sensitivities(params, inputs)
    edges = histogram_edges(values, bin_width)
    counts, _ = np.histogram(values, bins=edges)
    result = SensitivityResult(values=values, edges=edges, counts=counts)

    if output_dir is not None:
        out = Path(output_dir)
        _write_rows(out / "sensitivity.csv", ["example_id", "sensitivity"],
                    [{"example_id": i, "sensitivity": repr(float(v))} for i, v in enumerate(values)])
        _write_rows(out / "sensitivity_hist.csv", ["bin_low", "bin_high", "count"],
                    [{"bin_low": repr(float(lo)), "bin_high": repr(float(hi)), "count": int(c)}
                     for lo, hi, c in zip(edges[:-1], edges[1:], counts)])
    logger.info(f"📊 Sensitivity over {len(values)} examples: mean {result.mean:.4f}")
    return result


def dump_virtual_points(checkpoint: Union[str, Path], dataset: SSLDataset, mur_cfg: MurConfig,
                        path: Union[str, Path], seed: int = 0, split: str = "unlabeled") -> Path:
    """Virtual points of a checkpoint on one split of a dataset."""
    spec, params, _ = load_checkpoint(checkpoint)
    batch: Batch = getattr(dataset, split)
    if batch.inputs.shape[1] != spec.n_inputs:
        raise ShapeError("dump_virtual_points", batch.inputs.shape, (spec.n_inputs,))
    result = find_virtual_points(MLPClassifier(spec), params, batch.inputs, mur_cfg, seed)
    return write_virtual_points(path, batch.inputs, result)


def check_kl(n_draws: int = 1_000_000, seed: int = 0, tolerance: float = 0.02,
             path: Optional[Union[str, Path]] = None) -> KlValidation:
    """Compare the closed-form KL against the Monte-Carlo estimate over log alpha in [-4, 4]."""
    validation = validate_kl_approximation(n_draws=n_draws, seed=seed)
    if path is not None:
        _write_rows(Path(path), ["log_alpha", "closed_form", "monte_carlo"],
                    [{"log_alpha": repr(float(a)), "closed_form": repr(float(c)), "monte_carlo": repr(float(m))}
                     for a, c, m in zip(validation.log_alphas, validation.closed_form, validation.monte_carlo)])
    status = "passed" if validation.passed(tolerance) else "FAILED"
    logger.info(f"📊 KL check {status}: max deviation {validation.max_deviation:.4f} nats, "
                f"monotone {validation.monotone}")
    return validation
