"""
Single-seed training loop.

One step: sample a batch, build the combined loss (averaged over VBI weight
samples when configured), backpropagate, take a Nesterov step with the
scheduled learning rate, then move the EMA teacher. Every eval_interval
steps the evaluation network is scored on the test set and one metrics row
is written.
"""

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from config.config_loader import ExperimentConfig
from src.classifiers.checkpoint import save_checkpoint
from src.classifiers.mlp import MLPClassifier, ModelSpec, ParamSet
from src.datasets.batch import SSLDataset
from src.datasets.io import write_dataset_csv
from src.datasets.sampler import SSLBatchSampler
from src.datasets.synthetic import GENERATORS
from src.datasets.zca import fit_zca
from src.experiments.metrics import MetricsRecord, MetricsWriter
from src.mur.diagnostics import linearization_lower_bound, monotone_trace_fraction
from src.mur.entropy import entropy_and_gradient
from src.mur.radius import default_radius
from src.mur.solvers import MurConfig, canonical_solver, find_virtual_points
from src.mur.virtual_points import write_virtual_points
from src.ssl_objectives.combined import (
    LossBreakdown,
    LossGraph,
    LossSchedules,
    Method,
    ObjectiveSettings,
    build_combined_loss,
)
from src.ssl_objectives.optimizer import NesterovSGD
from src.ssl_objectives.schedules import ScheduleSpec, ema_momentum_at, ramp_value
from src.ssl_objectives.teacher import TeacherState, ema_update
from src.utils.helpers import derive_seed
from src.variational_dropout.expectation import expected_loss_mc
from src.variational_dropout.sparsity import sparsity_report


def prepare_dataset(config: ExperimentConfig, seed: int) -> SSLDataset:
    """Generate the configured dataset for `seed`, ZCA-whitened on the training inputs if enabled."""
    ds = config.dataset
    dataset = GENERATORS[ds.name](ds.n_train, ds.noise, ds.n_labeled, seed, n_test=ds.n_test)
    if ds.zca:
        transform = fit_zca(dataset.train_inputs(), epsilon=ds.zca_epsilon)
        dataset = dataset.map_inputs(transform.apply)
    return dataset


def model_spec_for(config: ExperimentConfig, dataset: SSLDataset) -> ModelSpec:
    return ModelSpec(
        widths=[dataset.n_features] + list(config.model.hidden) + [dataset.n_classes],
        leaky_slope=config.model.leaky_slope,
        input_noise=config.model.input_noise,
        dropout_rate=config.model.dropout_rate,
        weight_mode="variational" if config.vbi.enabled else "deterministic",
    )


def resolve_mur_config(config: ExperimentConfig, dataset: SSLDataset) -> Optional[MurConfig]:
    """
    MurConfig for the run, or None when MUR is off.

    Without a fixed radius, r = radius_scale * median nearest-neighbour
    distance of the unlabeled training inputs.
    """
    mur = config.mur
    if not mur.enabled:
        return None
    radius = mur.radius
    if radius is None:
        radius = default_radius(dataset.unlabeled.inputs, scale=mur.radius_scale)
    return MurConfig(radius=radius, solver=canonical_solver(mur.solver), step_size=mur.step_size,
                     steps=mur.steps, laga_init=mur.laga_init)


def loss_schedules(config: ExperimentConfig) -> LossSchedules:
    sch, total = config.schedules, config.experiment.total_steps
    # MUT has no consistency term, so its coefficient stays at 0
    consistency_peak = 0.0 if config.experiment.method == Method.MUT.value else sch.consistency_peak
    return LossSchedules(
        consistency=ScheduleSpec(consistency_peak, sch.t_ru, sch.t_rd, total),
        kl=ScheduleSpec(sch.kl_peak if config.vbi.enabled else 0.0, sch.t_ru, sch.t_rd, total),
        mur=ScheduleSpec(sch.mur_peak if config.mur.enabled else 0.0, sch.t_ru, sch.t_rd, total),
    )


def _mean_breakdown(breakdowns: List[LossBreakdown]) -> LossBreakdown:
    if len(breakdowns) == 1:
        return breakdowns[0]
    n = len(breakdowns)
    return LossBreakdown(
        xent=sum(b.xent for b in breakdowns) / n,
        consistency=sum(b.consistency for b in breakdowns) / n,
        kl=sum(b.kl for b in breakdowns) / n,
        mur=sum(b.mur for b in breakdowns) / n,
        total=sum(b.total for b in breakdowns) / n,
        lambda_consistency=breakdowns[0].lambda_consistency,
        lambda_kl=breakdowns[0].lambda_kl,
        lambda_mur=breakdowns[0].lambda_mur,
    )


@dataclass
class RunResult:
    """Outcome of one seed."""

    seed: int
    records: List[MetricsRecord]
    run_dir: Optional[Path] = None
    radius: Optional[float] = None
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    @property
    def final(self) -> MetricsRecord:
        return self.records[-1]


class Trainer:
    """
    Trains one student (and its EMA teacher for MT/ICT) for one seed.

    All randomness derives from the seed: dataset, initialization, batch
    order and every per-step stochastic role.
    """

    def __init__(self, config: ExperimentConfig, seed: int, run_dir: Optional[Path] = None):
        self.config = config
        self.seed = int(seed)
        self.run_dir = Path(run_dir) if run_dir is not None else None
        self.logger = logging.getLogger(__name__)

        self.dataset = prepare_dataset(config, self.seed)
        self.model = MLPClassifier(model_spec_for(config, self.dataset))
        self.params: ParamSet = self.model.init_params(self.seed, log_sigma2=config.vbi.init_log_sigma2)
        self.method = Method(config.experiment.method)
        self.mur_cfg = resolve_mur_config(config, self.dataset)
        self.settings = ObjectiveSettings(
            method=self.method,
            vbi=config.vbi.enabled,
            mur=self.mur_cfg,
            kl_normalization=config.vbi.kl_normalization,
            dataset_size=self.dataset.train_size,
            ict_alpha=config.ict.alpha,
        )
        self.schedules = loss_schedules(config)
        sch = config.schedules
        self.lr_schedule = ScheduleSpec(sch.learning_rate_peak, sch.t_ru, sch.t_rd,
                                        config.experiment.total_steps)

        self.teacher: Optional[TeacherState] = None
        if self.method.needs_teacher:
            self.teacher = TeacherState.from_student(self.params, config.teacher.ema_momentum)

        self.optimizer = NesterovSGD(self.params.parameters(), momentum=config.optimizer.momentum,
                                     weight_decay=config.optimizer.weight_decay)
        self.sampler = SSLBatchSampler(self.dataset, config.batch.labeled, config.batch.unlabeled, self.seed)
        self.train_inputs = self.dataset.train_inputs()

    @property
    def eval_params(self) -> ParamSet:
        """Teacher weights for MT/ICT, student mean weights otherwise."""
        return self.teacher.params if self.teacher is not None else self.params

    def train_step(self, t: int) -> LossBreakdown:
        batch = self.sampler.next_batch()
        weights = self.schedules.weights_at(t)
        graphs: List[LossGraph] = []

        def build(sample_seed: int):
            graph = build_combined_loss(self.model, self.params, batch, weights, self.settings,
                                        sample_seed, teacher=self.teacher)
            graphs.append(graph)
            return graph.total

        n_samples = self.config.vbi.n_samples if self.config.vbi.enabled else 1
        estimate = expected_loss_mc(build, n_samples, derive_seed(self.seed, "step", t))
        loss = _mean_breakdown([g.breakdown() for g in graphs])

        self.optimizer.step(estimate.gradients, self.learning_rate(t))

        if self.teacher is not None:
            momentum = ema_momentum_at(t, self.config.teacher.ema_momentum, self.config.teacher.late_momentum,
                                       switch_step=self.config.schedules.t_ru)
            self.teacher = ema_update(self.teacher, self.params, momentum)

        self.logger.debug(f"step {t}: total={loss.total:.5f} xent={loss.xent:.5f} "
                          f"cons={loss.consistency:.5f} kl={loss.kl:.5f} mur={loss.mur:.5f}")
        return loss

    def learning_rate(self, t: int) -> float:
        return ramp_value(self.lr_schedule, t)

    def evaluate(self, step: int, loss: LossBreakdown, learning_rate: float, started: float) -> MetricsRecord:
        params = self.eval_params
        test = self.dataset.test
        fraction_pruned = 0.0
        if self.params.variational:
            fraction_pruned = sparsity_report(self.params, self.config.vbi.sparsity_threshold).fraction_pruned
        _, g0 = entropy_and_gradient(self.model, self.params, self.train_inputs)
        return MetricsRecord.from_breakdown(
            step,
            loss,
            learning_rate=learning_rate,
            test_error=self.model.error_rate(params, test.inputs, test.labels),
            mean_sensitivity=float(np.mean(self.model.sensitivities(params, test.inputs))),
            fraction_pruned=fraction_pruned,
            mean_g0_norm=float(np.mean(np.linalg.norm(g0, axis=1))),
            wall_clock_ms=1000.0 * (time.perf_counter() - started),
        )

    def run(self) -> RunResult:
        """Train for total_steps and return the metrics stream."""
        total_steps = self.config.experiment.total_steps
        interval = self.config.experiment.eval_interval
        records: List[MetricsRecord] = []
        writer = MetricsWriter(self.run_dir / "metrics.csv") if self.run_dir is not None else None
        self.logger.info(f"🚀 Training {self.method.value} (seed {self.seed}, vbi "
                         f"{'on' if self.settings.vbi else 'off'}, MUR "
                         f"{self.mur_cfg.solver if self.mur_cfg else 'off'}) for {total_steps} steps")

        started = time.perf_counter()
        try:
            for t in range(total_steps):
                lr = self.learning_rate(t)
                loss = self.train_step(t)
                step = t + 1
                if step % interval == 0 or step == total_steps:
                    record = self.evaluate(step, loss, lr, started)
                    records.append(record)
                    if writer is not None:
                        writer.write(record)
                    self.logger.info(f"📊 seed {self.seed} step {step}/{total_steps}: "
                                     f"loss {record.total:.4f}, test error {record.test_error:.2f}%")
        finally:
            if writer is not None:
                writer.close()

        result = RunResult(seed=self.seed, records=records, run_dir=self.run_dir,
                           radius=self.mur_cfg.radius if self.mur_cfg else None,
                           diagnostics=self.diagnostics())
        if self.run_dir is not None:
            self.save_artifacts()
        self.logger.info(f"✅ seed {self.seed} done: test error {result.final.test_error:.2f}%")
        return result

    def diagnostics(self) -> Dict[str, Any]:
        """Lower-bound and monotone-trace fractions of the trained student (MUR runs only)."""
        if self.mur_cfg is None:
            return {}
        bound = linearization_lower_bound(self.model, self.params, self.train_inputs, self.mur_cfg.radius)
        monotone = monotone_trace_fraction(self.model, self.params, self.train_inputs, self.mur_cfg.radius,
                                           step_size=self.mur_cfg.step_size, steps=self.mur_cfg.steps)
        return {
            "lower_bound_fraction": bound.fraction,
            "lower_bound_mean_gap": bound.mean_gap,
            "monotone_trace_fraction": monotone,
        }

    def save_artifacts(self):
        """Checkpoint, dataset dump and (MUR runs) virtual points of the unlabeled set."""
        self.run_dir.mkdir(parents=True, exist_ok=True)
        write_dataset_csv(self.run_dir / "dataset.csv", self.dataset)
        if self.config.experiment.save_checkpoint:
            network = "teacher" if self.teacher is not None else "student"
            save_checkpoint(self.run_dir / "model", self.model.spec, self.eval_params, self.seed,
                            self.config.experiment.total_steps, network=network)
            if self.teacher is not None:
                save_checkpoint(self.run_dir / "student", self.model.spec, self.params, self.seed,
                                self.config.experiment.total_steps, network="student")
        if self.mur_cfg is not None:
            unlabeled = self.dataset.unlabeled
            result = find_virtual_points(self.model, self.params, unlabeled.inputs, self.mur_cfg,
                                         derive_seed(self.seed, "virtual_point_dump"))
            write_virtual_points(self.run_dir / "virtual_points.csv", unlabeled.inputs, result,
                                 example_ids=unlabeled.indices)


def train_seed(config: ExperimentConfig, seed: int, run_dir: Optional[Path] = None) -> RunResult:
    """Module-level entry so process pools can pickle the call."""
    return Trainer(config, seed, run_dir).run()
