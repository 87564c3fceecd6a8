"""Training loop, multi-seed runner, sweeps and analysis artifacts."""

from src.experiments.metrics import DETERMINISTIC_COLUMNS, METRIC_COLUMNS, MetricsRecord, MetricsWriter, read_metrics
from src.experiments.runner import (
    ExperimentResult,
    SensitivityResult,
    SweepPoint,
    SweepResult,
    build_summary,
    check_kl,
    compare_rr,
    dump_virtual_points,
    emit_summary,
    run_experiment,
    run_sweep,
    sensitivity_sweep,
    sweep_kl,
    sweep_radius,
    sweep_solver,
)
from src.experiments.trainer import RunResult, Trainer, prepare_dataset, resolve_mur_config, train_seed

__all__ = [
    "DETERMINISTIC_COLUMNS",
    "METRIC_COLUMNS",
    "ExperimentResult",
    "MetricsRecord",
    "MetricsWriter",
    "RunResult",
    "SensitivityResult",
    "SweepPoint",
    "SweepResult",
    "Trainer",
    "build_summary",
    "check_kl",
    "compare_rr",
    "dump_virtual_points",
    "emit_summary",
    "prepare_dataset",
    "read_metrics",
    "resolve_mur_config",
    "run_experiment",
    "run_sweep",
    "sensitivity_sweep",
    "sweep_kl",
    "sweep_radius",
    "sweep_solver",
    "train_seed",
]
