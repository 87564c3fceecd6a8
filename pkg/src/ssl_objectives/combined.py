"""
The combined semi-supervised objective

    L = E_w[xent] + l1(t) E_w[consistency] + l2(t) KL(q(w) || p(w)) / Z + l3(t) E_w[MUR]

for the Pi-model, Mean Teacher, ICT and MUT (xent + MUR only). With VBI on,
every expectation uses one local-reparameterization weight sample; Z is the
KL normalizer (dataset size or weight count).

Each stochastic role (student pass, second Pi pass, teacher pass, MUR pass,
ICT mixing) draws from its own seed derived from the step seed, so adding or
removing a term never changes the randomness of the others. Terms whose
coefficient is exactly 0 are not built and report 0.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from src.autodiff import ops
from src.autodiff.graph import Constant, Node, evaluate
from src.classifiers.mlp import MLPClassifier, ParamSet
from src.datasets.batch import Batch
from src.mur.loss import mur_loss
from src.mur.solvers import MurConfig, VirtualPointBatch, find_virtual_points
from src.ssl_objectives.losses import ict_consistency, mt_consistency, pi_consistency, xent_loss
from src.ssl_objectives.schedules import ScheduleSpec, ramp_value
from src.ssl_objectives.teacher import TeacherState
from src.utils.errors import UsageError
from src.utils.helpers import derive_seed, make_rng
from src.variational_dropout.kl import kl_graph, kl_normalizer

logger = logging.getLogger(__name__)


class Method(str, Enum):
    PI = "pi"
    MT = "mt"
    ICT = "ict"
    MUT = "mut"

    @property
    def needs_teacher(self) -> bool:
        return self in (Method.MT, Method.ICT)


@dataclass
class LossWeights:
    """Coefficients lambda_1..3 at one step."""

    consistency: float = 0.0
    kl: float = 0.0
    mur: float = 0.0


@dataclass
class LossSchedules:
    consistency: ScheduleSpec
    kl: ScheduleSpec
    mur: ScheduleSpec

    def weights_at(self, t: int) -> LossWeights:
        return LossWeights(
            consistency=ramp_value(self.consistency, t),
            kl=ramp_value(self.kl, t),
            mur=ramp_value(self.mur, t),
        )


@dataclass
class LossBreakdown:
    xent: float
    consistency: float
    kl: float
    mur: float
    total: float
    lambda_consistency: float
    lambda_kl: float
    lambda_mur: float

    def reconstructed_total(self) -> float:
        return (self.xent + self.lambda_consistency * self.consistency
                + self.lambda_kl * self.kl + self.lambda_mur * self.mur)


@dataclass
class ObjectiveSettings:
    """Static settings of the objective for a run."""

    method: Method
    vbi: bool = False
    mur: Optional[MurConfig] = None
    kl_normalization: str = "dataset"
    dataset_size: int = 1
    ict_alpha: float = 1.0

    def __post_init__(self):
        self.method = Method(self.method)
        if self.ict_alpha <= 0:
            raise UsageError(f"ICT Beta parameter must be positive, got {self.ict_alpha}")


@dataclass
class LossGraph:
    """Nodes of one combined loss; call `breakdown` after evaluating `total`."""

    total: Node
    xent: Node
    consistency: Optional[Node]
    kl: Optional[Node]
    mur: Optional[Node]
    weights: LossWeights
    virtual_points: Optional[VirtualPointBatch] = None

    @staticmethod
    def _value(node: Optional[Node]) -> float:
        if node is None:
            return 0.0
        if node.value is None:
            raise UsageError(f"{node.label} has not been evaluated")
        return float(node.value)

    def breakdown(self) -> LossBreakdown:
        return LossBreakdown(
            xent=self._value(self.xent),
            consistency=self._value(self.consistency),
            kl=self._value(self.kl),
            mur=self._value(self.mur),
            total=self._value(self.total),
            lambda_consistency=self.weights.consistency,
            lambda_kl=self.weights.kl,
            lambda_mur=self.weights.mur,
        )


def _teacher_probs(model: MLPClassifier, teacher: TeacherState, inputs: np.ndarray, seed: int) -> np.ndarray:
    nodes = model.build(teacher.params, Constant(inputs), noise_on=True, seed=seed, sample_weights=False)
    return evaluate(nodes.probs)


def _consistency_term(model: MLPClassifier, params: ParamSet, teacher: Optional[TeacherState],
                      batch: Batch, student_probs: Node, settings: ObjectiveSettings,
                      seed: int) -> Node:
    method = settings.method
    if method == Method.PI:
        second = model.build(params, Constant(batch.inputs), noise_on=True,
                             seed=derive_seed(seed, "pi_target"), sample_weights=settings.vbi)
        return pi_consistency(student_probs, second.probs)

    if method == Method.MT:
        target = _teacher_probs(model, teacher, batch.inputs, derive_seed(seed, "teacher"))
        return mt_consistency(student_probs, Constant(target))

    # ICT: mixup of the batch with a shuffled copy of itself
    rng = make_rng(seed, "ict_mix")
    mix = rng.beta(settings.ict_alpha, settings.ict_alpha, size=len(batch))
    partner = rng.permutation(len(batch))
    teacher_seed = derive_seed(seed, "teacher")

    def student_fn(x):
        return model.build(params, Constant(x), noise_on=True, seed=derive_seed(seed, "ict_student"),
                           sample_weights=settings.vbi).probs

    return ict_consistency(
        student_fn,
        lambda x: _teacher_probs(model, teacher, x, teacher_seed),
        batch.inputs,
        batch.inputs[partner],
        mix,
    )


def _mur_term(model: MLPClassifier, params: ParamSet, batch: Batch, settings: ObjectiveSettings,
              seed: int):
    """MUR at every batch row: virtual points and targets come from the mean network."""
    result = find_virtual_points(model, params, batch.inputs, settings.mur, derive_seed(seed, "mur"))
    target = model.build(params, Constant(batch.inputs), noise_on=False, sample_weights=False).probs
    at_virtual = model.build(params, Constant(result.x_star), noise_on=False,
                             seed=derive_seed(seed, "mur_student"), sample_weights=settings.vbi).probs
    return mur_loss(at_virtual, target), result


def build_combined_loss(model: MLPClassifier, params: ParamSet, batch: Batch, weights: LossWeights,
                        settings: ObjectiveSettings, seed: int,
                        teacher: Optional[TeacherState] = None) -> LossGraph:
    """
    Build (but do not evaluate) the combined loss for one batch.

    Raises:
        UsageError: MT/ICT without a teacher, or no labeled example.
    """
    if settings.method.needs_teacher and teacher is None:
        raise UsageError(f"method '{settings.method.value}' needs a teacher state")
    if settings.vbi and not params.variational:
        raise UsageError("VBI objective needs variational parameters")

    student = model.build(params, Constant(batch.inputs), noise_on=True,
                          seed=derive_seed(seed, "student"), sample_weights=settings.vbi)
    xent = xent_loss(student.log_probs, batch.labels, batch.labeled_mask, model.spec.n_classes)
    total = xent

    consistency = None
    if settings.method != Method.MUT and weights.consistency != 0.0:
        consistency = _consistency_term(model, params, teacher, batch, student.probs, settings, seed)
        total = ops.add(total, ops.scale(consistency, weights.consistency))

    kl = None
    if settings.vbi and weights.kl != 0.0:
        kl_sum, _ = kl_graph(params.kl_pairs())
        divisor = kl_normalizer(settings.kl_normalization, settings.dataset_size, params.n_weights)
        kl = ops.scale(kl_sum, 1.0 / divisor)
        total = ops.add(total, ops.scale(kl, weights.kl))

    mur = None
    virtual_points = None
    if settings.mur is not None and weights.mur != 0.0:
        mur, virtual_points = _mur_term(model, params, batch, settings, seed)
        total = ops.add(total, ops.scale(mur, weights.mur))

    return LossGraph(total=total, xent=xent, consistency=consistency, kl=kl, mur=mur,
                     weights=weights, virtual_points=virtual_points)


def evaluate_loss(graph: LossGraph) -> LossBreakdown:
    evaluate(graph.total)
    return graph.breakdown()


def combined_loss(method, model: MLPClassifier, params: ParamSet, teacher: Optional[TeacherState],
                  batch: Batch, schedules: LossSchedules, mur_cfg: Optional[MurConfig], vbi_on: bool,
                  seed: int, step: int, dataset_size: int = 1, kl_normalization: str = "dataset",
                  ict_alpha: float = 1.0) -> LossBreakdown:
    """Evaluate the combined loss at training step `step` and return its breakdown."""
    settings = ObjectiveSettings(method=Method(method), vbi=vbi_on, mur=mur_cfg,
                                 kl_normalization=kl_normalization, dataset_size=dataset_size,
                                 ict_alpha=ict_alpha)
    graph = build_combined_loss(model, params, batch, schedules.weights_at(step), settings, seed, teacher)
    return evaluate_loss(graph)


def mut_loss(model: MLPClassifier, params: ParamSet, batch: Batch, mur_cfg: MurConfig,
             lam: float, seed: int, vbi_on: bool = False) -> LossBreakdown:
    """Maximum-uncertainty training: xent + lambda * MUR, no other consistency term."""
    settings = ObjectiveSettings(method=Method.MUT, vbi=vbi_on, mur=mur_cfg)
    graph = build_combined_loss(model, params, batch, LossWeights(mur=lam), settings, seed)
    return evaluate_loss(graph)
