"""
Tests for the semi-supervised objectives, ramp schedules, EMA teacher and optimizer.
"""

import itertools
import unittest

import numpy as np

from src.autodiff.gradcheck import grad_check
from src.autodiff.graph import Constant, Parameter, backward, evaluate, topological_order
from src.classifiers.mlp import MLPClassifier, ModelSpec, ParamSet
from src.datasets.batch import Batch
from src.mur.solvers import MurConfig
from src.ssl_objectives import (
    LossSchedules,
    LossWeights,
    Method,
    NesterovSGD,
    ObjectiveSettings,
    ScheduleSpec,
    TeacherState,
    build_combined_loss,
    combined_loss,
    ema_momentum_at,
    ema_update,
    evaluate_loss,
    ict_consistency,
    mt_consistency,
    mut_loss,
    pi_consistency,
    ramp_value,
    xent_loss,
)
from src.utils.errors import ShapeError, UsageError
from src.utils.helpers import derive_seed

TOLERANCE = 1e-4


def small_batch(seed=0, n=8, n_labeled=3):
    rng = np.random.default_rng(seed)
    labels = np.full(n, -1)
    labels[:n_labeled] = rng.integers(0, 2, n_labeled)
    return Batch(rng.standard_normal((n, 2)), labels)


def freeze_targets(root):
    """Hold every stop-gradient value fixed so finite differences see targets as constants."""
    evaluate(root)
    for node in topological_order(root):
        if node.kind == "stop_gradient":
            frozen = node.value.copy()
            node.compute = lambda *_, value=frozen: value


class TestCrossEntropy(unittest.TestCase):

    def test_perfect_prediction(self):
        log_probs = Constant(np.log([[1.0, 1e-300], [1e-300, 1.0]]))
        self.assertEqual(float(evaluate(xent_loss(log_probs, [0, 1], [True, True], 2))), 0.0)

    def test_uniform_prediction(self):
        log_probs = Constant(np.full((4, 10), -np.log(10.0)))
        loss = xent_loss(log_probs, [3, 1, -1, -1], [True, True, False, False], 10)
        self.assertAlmostEqual(float(evaluate(loss)), np.log(10.0), places=12)

    def test_unlabeled_rows_do_not_count(self):
        log_probs = Constant(np.log(np.random.default_rng(0).dirichlet(np.ones(3), size=5)))
        mask = [True, True, False, False, False]
        a = evaluate(xent_loss(log_probs, [0, 2, 1, 0, 2], mask, 3))
        b = evaluate(xent_loss(log_probs, [0, 2, 2, 1, 0], mask, 3))
        self.assertEqual(float(a), float(b))

    def test_needs_labeled_rows(self):
        with self.assertRaises(UsageError):
            xent_loss(Constant(np.zeros((2, 2))), [-1, -1], [False, False], 2)


class TestConsistency(unittest.TestCase):

    def test_pi_values(self):
        a = Constant([[0.5, 0.5]])
        self.assertAlmostEqual(float(evaluate(pi_consistency(a, Constant([[1.0, 0.0]])))), 0.25)
        self.assertEqual(float(evaluate(pi_consistency(a, Constant([[0.5, 0.5]])))), 0.0)

    def test_pi_target_branch_has_zero_adjoint(self):
        a, b = Parameter([[0.2, 0.8]]), Parameter([[0.6, 0.4]])
        loss = pi_consistency(a, b)
        evaluate(loss)
        grads = backward(loss)
        np.testing.assert_array_equal(grads[b], np.zeros((1, 2)))
        np.testing.assert_allclose(grads[a], [[-0.4, 0.4]])

    def test_mt_value(self):
        loss = mt_consistency(Constant([[0.9, 0.1]]), np.array([[0.7, 0.3]]))
        self.assertAlmostEqual(float(evaluate(loss)), 0.04)

    def test_mt_identical_networks(self):
        model = MLPClassifier(ModelSpec(widths=[2, 5, 2], input_noise=0.1))
        params = model.init_params(seed=0)
        teacher = TeacherState.from_student(params, 0.99)
        x = Constant(small_batch().inputs)
        student = model.build(params, x, noise_on=True, seed=3).probs
        target = model.build(teacher.params, x, noise_on=True, seed=3).probs
        loss = mt_consistency(student, target)
        self.assertEqual(float(evaluate(loss)), 0.0)
        self.assertTrue(all(isinstance(leaf, Constant) for leaf in teacher.params.parameters()))

    def test_ict_degenerate_mixing(self):
        model = MLPClassifier(ModelSpec(widths=[2, 4, 2]))
        student = model.init_params(seed=1)
        teacher = model.init_params(seed=2).copy(trainable=False)
        x_i, x_j = small_batch(0).inputs, small_batch(1).inputs

        def student_fn(x):
            return model.build(student, Constant(x)).probs

        def teacher_fn(x):
            return model.forward(teacher, x).probs

        for mix, x in ((1.0, x_i), (0.0, x_j)):
            ict = evaluate(ict_consistency(student_fn, teacher_fn, x_i, x_j, mix))
            mt = evaluate(mt_consistency(student_fn(x), teacher_fn(x)))
            self.assertAlmostEqual(float(ict), float(mt), places=12)

    def test_ict_gradients(self):
        model = MLPClassifier(ModelSpec(widths=[2, 4, 2]))
        student = model.init_params(seed=1)
        teacher = model.init_params(seed=2).copy(trainable=False)
        rng = np.random.default_rng(4)
        mix = rng.beta(1.0, 1.0, size=8)
        loss = ict_consistency(lambda x: model.build(student, Constant(x)).probs,
                               lambda x: model.forward(teacher, x).probs,
                               small_batch(0).inputs, small_batch(1).inputs, mix)
        for name, leaf in student.named_leaves():
            self.assertLess(grad_check(loss, leaf), TOLERANCE, msg=name)

    def test_ict_validation(self):
        fn = lambda x: Constant(np.full((len(x), 2), 0.5))  # noqa: E731
        with self.assertRaises(UsageError):
            ict_consistency(fn, lambda x: np.full((len(x), 2), 0.5), np.zeros((2, 2)), np.zeros((2, 2)), 1.5)
        with self.assertRaises(ShapeError):
            ict_consistency(fn, lambda x: np.full((len(x), 2), 0.5), np.zeros((2, 2)), np.zeros((3, 2)), 0.5)


class TestSchedules(unittest.TestCase):

    def setUp(self):
        self.spec = ScheduleSpec(peak=10.0, t_ru=400, t_rd=800, total_steps=4000)

    def test_landmarks(self):
        self.assertAlmostEqual(ramp_value(self.spec, 400), 10.0)
        self.assertAlmostEqual(ramp_value(self.spec, 0), 10.0 * np.exp(-5.0))
        self.assertAlmostEqual(ramp_value(self.spec, 0) / 10.0, 0.006738, places=6)
        self.assertEqual(ramp_value(self.spec, 4000), 0.0)
        self.assertAlmostEqual(self.spec.value(2000), 10.0)

    def test_monotone_ramps(self):
        up = [ramp_value(self.spec, t) for t in range(0, 401)]
        down = [ramp_value(self.spec, t) for t in range(3200, 4001)]
        self.assertTrue(np.all(np.diff(up) >= 0.0))
        self.assertTrue(np.all(np.diff(down) <= 0.0))

    def test_validation(self):
        with self.assertRaises(UsageError):
            ScheduleSpec(peak=1.0, t_ru=300, t_rd=800, total_steps=1000)
        with self.assertRaises(UsageError):
            ScheduleSpec(peak=-1.0, t_ru=0, t_rd=0, total_steps=10)
        with self.assertRaises(UsageError):
            ramp_value(self.spec, 4001)

    def test_zero_ramps(self):
        flat = ScheduleSpec(peak=2.0, t_ru=0, t_rd=0, total_steps=10)
        self.assertEqual([ramp_value(flat, t) for t in (0, 5, 10)], [2.0, 2.0, 2.0])

    def test_momentum_switch(self):
        self.assertEqual(ema_momentum_at(10, 0.99, 0.999, switch_step=400), 0.99)
        self.assertEqual(ema_momentum_at(400, 0.99, 0.999, switch_step=400), 0.999)
        self.assertEqual(ema_momentum_at(4000, 0.99), 0.99)

    def test_loss_schedules(self):
        schedules = LossSchedules(
            consistency=ScheduleSpec(10.0, 10, 10, 100),
            kl=ScheduleSpec(0.0, 10, 10, 100),
            mur=ScheduleSpec(4.0, 10, 10, 100),
        )
        weights = schedules.weights_at(50)
        self.assertEqual((weights.consistency, weights.kl, weights.mur), (10.0, 0.0, 4.0))


class TestTeacher(unittest.TestCase):

    def params_with(self, value):
        return ParamSet.from_arrays([np.full((2, 2), value)], [np.full(2, value)])

    def test_momentum_extremes(self):
        teacher = TeacherState.from_student(self.params_with(0.0), 0.5)
        student = self.params_with(1.0)
        copied = ema_update(teacher, student, momentum=0.0)
        frozen = ema_update(teacher, student, momentum=1.0)
        np.testing.assert_array_equal(copied.params.layers[0].weight.data, np.ones((2, 2)))
        np.testing.assert_array_equal(frozen.params.layers[0].weight.data, np.zeros((2, 2)))

    def test_convex_combination(self):
        teacher = TeacherState.from_student(self.params_with(0.0), 0.99)
        updated = ema_update(teacher, self.params_with(1.0))
        np.testing.assert_allclose(updated.params.layers[0].bias.data, [0.01, 0.01])
        np.testing.assert_array_equal(teacher.params.layers[0].bias.data, [0.0, 0.0])
        self.assertEqual(updated.momentum, 0.99)

    def test_shape_mismatch(self):
        teacher = TeacherState.from_student(self.params_with(0.0), 0.99)
        other = ParamSet.from_arrays([np.zeros((2, 3))], [np.zeros(3)])
        with self.assertRaises(ShapeError):
            ema_update(teacher, other)

    def test_momentum_range(self):
        with self.assertRaises(UsageError):
            TeacherState.from_student(self.params_with(0.0), 1.5)


class TestOptimizer(unittest.TestCase):

    def test_nesterov_update(self):
        w = Parameter([1.0, -2.0], name="layer0.weight")
        opt = NesterovSGD([w], momentum=0.9, weight_decay=0.0)
        opt.step({w: np.array([0.5, 0.5])}, lr=0.1)
        # v = g, p -= lr * (g + mu * v)
        np.testing.assert_allclose(w.data, [1.0 - 0.1 * 0.95, -2.0 - 0.1 * 0.95])
        opt.step({w: np.array([0.5, 0.5])}, lr=0.1)
        v = 0.9 * 0.5 + 0.5
        np.testing.assert_allclose(w.data, [1.0 - 0.095 - 0.1 * (0.5 + 0.9 * v),
                                            -2.0 - 0.095 - 0.1 * (0.5 + 0.9 * v)])

    def test_weight_decay_skips_log_variance(self):
        w = Parameter([1.0], name="layer0.weight")
        s = Parameter([-10.0], name="layer0.log_sigma2")
        opt = NesterovSGD([w, s], momentum=0.0, weight_decay=0.1)
        opt.step({}, lr=1.0)
        np.testing.assert_allclose(w.data, [0.9])
        np.testing.assert_allclose(s.data, [-10.0])

    def test_validation(self):
        with self.assertRaises(UsageError):
            NesterovSGD([], momentum=1.0)
        w = Parameter([1.0, 2.0])
        with self.assertRaises(UsageError):
            NesterovSGD([w]).step({w: np.zeros(3)}, lr=0.1)


class TestCombinedLoss(unittest.TestCase):

    def setUp(self):
        self.spec = ModelSpec(widths=[2, 4, 2], input_noise=0.1, dropout_rate=0.1)
        self.model = MLPClassifier(self.spec)
        self.vbi_model = MLPClassifier(ModelSpec(widths=[2, 4, 2], input_noise=0.1, dropout_rate=0.1,
                                                 weight_mode="variational"))
        self.batch = small_batch()
        self.mur_cfg = MurConfig(radius=0.3)

    def settings(self, method, vbi=False, mur=True):
        return ObjectiveSettings(method=method, vbi=vbi, mur=self.mur_cfg if mur else None,
                                 dataset_size=20)

    def test_gradient_checks_across_configurations(self):
        weights = LossWeights(consistency=2.0, kl=0.05, mur=3.0)
        configs = list(itertools.product(Method, (False, True), (0, 1, 2)))
        self.assertGreaterEqual(len(configs), 20)
        for method, vbi, seed in configs:
            model = self.vbi_model if vbi else self.model
            params = model.init_params(seed=seed, log_sigma2=-4.0)
            teacher = TeacherState.from_student(model.init_params(seed=seed + 10, log_sigma2=-4.0), 0.99)
            graph = build_combined_loss(model, params, small_batch(seed), weights,
                                        self.settings(method, vbi), seed=seed, teacher=teacher)
            freeze_targets(graph.total)
            for name, leaf in params.named_leaves():
                self.assertLess(grad_check(graph.total, leaf, epsilon=1e-5), TOLERANCE,
                                msg=f"{method.value} vbi={vbi} seed={seed} {name}")

    def test_all_weights_zero_is_cross_entropy(self):
        params = self.model.init_params(seed=0)
        graph = build_combined_loss(self.model, params, self.batch, LossWeights(),
                                    self.settings(Method.PI), seed=5)
        breakdown = evaluate_loss(graph)
        self.assertIsNone(graph.consistency)
        self.assertIsNone(graph.mur)
        self.assertEqual(breakdown.total, breakdown.xent)

        student = self.model.build(params, Constant(self.batch.inputs), noise_on=True,
                                   seed=derive_seed(5, "student"))
        expected = xent_loss(student.log_probs, self.batch.labels, self.batch.labeled_mask, 2)
        self.assertEqual(breakdown.xent, float(evaluate(expected)))

    def test_breakdown_reconstructs_total(self):
        for method in Method:
            params = self.vbi_model.init_params(seed=1, log_sigma2=-4.0)
            teacher = TeacherState.from_student(params, 0.99)
            graph = build_combined_loss(self.vbi_model, params, self.batch,
                                        LossWeights(consistency=10.0, kl=0.05, mur=4.0),
                                        self.settings(method, vbi=True), seed=2, teacher=teacher)
            breakdown = evaluate_loss(graph)
            self.assertAlmostEqual(breakdown.total, breakdown.reconstructed_total(), delta=1e-10)
            self.assertGreater(breakdown.kl, 0.0)

    def test_teacher_required(self):
        params = self.model.init_params(seed=0)
        for method in (Method.MT, Method.ICT):
            with self.assertRaises(UsageError):
                build_combined_loss(self.model, params, self.batch, LossWeights(consistency=1.0),
                                    self.settings(method), seed=0)

    def test_vbi_needs_variational_params(self):
        with self.assertRaises(UsageError):
            build_combined_loss(self.model, self.model.init_params(seed=0), self.batch,
                                LossWeights(), self.settings(Method.PI, vbi=True), seed=0)

    def test_mut_has_no_consistency_term(self):
        params = self.model.init_params(seed=0)
        graph = build_combined_loss(self.model, params, self.batch, LossWeights(consistency=10.0, mur=1.0),
                                    self.settings(Method.MUT), seed=0)
        self.assertIsNone(graph.consistency)
        self.assertIsNotNone(graph.mur)
        self.assertEqual(evaluate_loss(graph).consistency, 0.0)

    def test_vanishing_variance_matches_deterministic(self):
        vbi_params = self.vbi_model.init_params(seed=3, log_sigma2=-40.0)
        det_params = ParamSet.from_arrays([layer.weight.data for layer in vbi_params.layers],
                                          [layer.bias.data for layer in vbi_params.layers])
        weights = LossWeights(consistency=10.0, mur=4.0)
        vbi = evaluate_loss(build_combined_loss(self.vbi_model, vbi_params, self.batch, weights,
                                                self.settings(Method.PI, vbi=True), seed=7))
        det = evaluate_loss(build_combined_loss(self.model, det_params, self.batch, weights,
                                                self.settings(Method.PI), seed=7))
        self.assertAlmostEqual(vbi.total, det.total, delta=1e-6)

    def test_combined_loss_uses_schedules(self):
        params = self.model.init_params(seed=0)
        teacher = TeacherState.from_student(params, 0.99)
        schedules = LossSchedules(
            consistency=ScheduleSpec(10.0, 10, 10, 100),
            kl=ScheduleSpec(0.0, 10, 10, 100),
            mur=ScheduleSpec(4.0, 10, 10, 100),
        )
        breakdown = combined_loss("mt", self.model, params, teacher, self.batch, schedules,
                                  self.mur_cfg, vbi_on=False, seed=0, step=0)
        self.assertAlmostEqual(breakdown.lambda_consistency, 10.0 * np.exp(-5.0))
        self.assertAlmostEqual(breakdown.lambda_mur, 4.0 * np.exp(-5.0))
        self.assertEqual(breakdown.kl, 0.0)


class TestMutLoss(unittest.TestCase):

    def setUp(self):
        self.model = MLPClassifier(ModelSpec(widths=[2, 6, 2]))
        self.params = self.model.init_params(seed=2)
        self.batch = small_batch(3)

    def test_zero_coefficient_is_cross_entropy(self):
        breakdown = mut_loss(self.model, self.params, self.batch, MurConfig(radius=0.5), lam=0.0, seed=1)
        self.assertEqual(breakdown.total, breakdown.xent)
        self.assertEqual(breakdown.mur, 0.0)

    def test_tiny_radius_vanishes(self):
        breakdown = mut_loss(self.model, self.params, self.batch, MurConfig(radius=1e-9), lam=4.0, seed=1)
        self.assertLess(breakdown.mur, 1e-12)
        self.assertAlmostEqual(breakdown.total, breakdown.xent, delta=1e-10)

    def test_gradients(self):
        for solver in ("direct", "pga", "lagrangian-ga", "random"):
            settings = ObjectiveSettings(method=Method.MUT, mur=MurConfig(radius=0.4, solver=solver))
            graph = build_combined_loss(self.model, self.params, self.batch, LossWeights(mur=4.0),
                                        settings, seed=0)
            freeze_targets(graph.total)
            for name, leaf in self.params.named_leaves():
                self.assertLess(grad_check(graph.total, leaf, epsilon=1e-5), TOLERANCE, msg=f"{solver} {name}")


if __name__ == '__main__':
    unittest.main()
