"""
Tests for maximum uncertainty regularization: entropy, virtual-point solvers,
radius selection and the MUR loss.
"""

import tempfile
import unittest
from pathlib import Path

import numpy as np

from src.autodiff import ops
from src.autodiff.gradcheck import numerical_gradient
from src.autodiff.graph import Constant, Parameter, backward, evaluate
from src.classifiers.mlp import MLPClassifier, ModelSpec, ParamSet
from src.mur import (
    MurConfig,
    default_radius,
    entropy_and_gradient,
    entropy_gradient,
    find_virtual_points,
    grid_search_maximum,
    lagrange_multiplier,
    lagrangian_gradient,
    linearization_lower_bound,
    median_nn_distance,
    model_entropy_at,
    monotone_trace_fraction,
    mur_loss,
    predictive_entropy,
    project_to_ball,
    random_point_on_sphere,
    read_virtual_points,
    virtual_point_direct,
    virtual_point_lagrangian_ga,
    virtual_point_pga,
    write_virtual_points,
)
from src.utils.errors import DegenerateGradientError, ShapeError, UsageError

X0 = np.array([0.5, 0.0])
RADIUS = 1.0


def logistic_model():
    """2-D logistic classifier whose entropy peaks on the line x_0 = 0."""
    model = MLPClassifier(ModelSpec(widths=[2, 2]))
    params = ParamSet.from_arrays([np.array([[1.0, -1.0], [0.0, 0.0]])], [np.zeros(2)], trainable=False)
    return model, params


def flat_model():
    model = MLPClassifier(ModelSpec(widths=[2, 2]))
    params = ParamSet.from_arrays([np.zeros((2, 2))], [np.zeros(2)], trainable=False)
    return model, params


class TestEntropy(unittest.TestCase):

    def test_uniform_and_one_hot(self):
        self.assertAlmostEqual(predictive_entropy([0.5, 0.5]), np.log(2.0))
        self.assertEqual(predictive_entropy([1.0, 0.0]), 0.0)
        np.testing.assert_allclose(predictive_entropy(np.full((3, 4), 0.25)), np.log(4.0))

    def test_gradient_matches_finite_differences(self):
        model = MLPClassifier(ModelSpec(widths=[2, 6, 3]))
        params = model.init_params(seed=5)
        x0 = np.array([0.3, -0.7])
        entropy_at = model_entropy_at(model, params)
        expected = numerical_gradient(lambda v: float(entropy_at(v[None, :])[0]), x0)
        np.testing.assert_allclose(entropy_gradient(model, params, x0), expected, atol=1e-6)

    def test_batch_rows_are_independent(self):
        model = MLPClassifier(ModelSpec(widths=[2, 4, 2]))
        params = model.init_params(seed=1)
        xs = np.random.default_rng(0).standard_normal((4, 2))
        h, g = entropy_and_gradient(model, params, xs)
        for i in range(4):
            np.testing.assert_allclose(entropy_gradient(model, params, xs[i]), g[i], atol=1e-12)
        np.testing.assert_allclose(h, predictive_entropy(model.forward(params, xs).probs))


class TestDirectSolver(unittest.TestCase):

    def test_point_on_sphere_along_gradient(self):
        g0 = np.array([3.0, -4.0])
        result = virtual_point_direct(X0, g0, RADIUS)
        self.assertAlmostEqual(np.linalg.norm(result.x_star - X0), RADIUS, places=12)
        self.assertAlmostEqual(result.g0_norm, 5.0)
        np.testing.assert_allclose(result.x_star, X0 + np.array([0.6, -0.8]))

    def test_maximizes_linear_term_over_ball(self):
        rng = np.random.default_rng(2)
        g0 = rng.standard_normal(2)
        best = float(g0 @ (virtual_point_direct(X0, g0, RADIUS).x_star - X0))
        directions = rng.standard_normal((1000, 2))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        points = X0 + directions * RADIUS * np.sqrt(rng.uniform(size=(1000, 1)))
        self.assertTrue(np.all((points - X0) @ g0 <= best + 1e-12))

    def test_degenerate_gradient(self):
        with self.assertRaises(DegenerateGradientError):
            virtual_point_direct(X0, np.zeros(2), RADIUS)

    def test_logistic_model_value(self):
        model, params = logistic_model()
        batch = find_virtual_points(model, params, X0[None, :], MurConfig(radius=RADIUS), seed=0)
        np.testing.assert_allclose(batch.x_star[0], [-0.5, 0.0], atol=1e-12)
        self.assertAlmostEqual(batch.entropy_star[0], 0.582, places=3)
        self.assertEqual(batch.fallback_rows, [])


class TestIterativeSolvers(unittest.TestCase):

    def setUp(self):
        self.model, self.params = logistic_model()
        _, self.grid_max = grid_search_maximum(model_entropy_at(self.model, self.params), X0, RADIUS)

    def test_grid_maximum(self):
        self.assertAlmostEqual(self.grid_max, np.log(2.0), places=2)

    def test_pga_near_grid_maximum(self):
        cfg = MurConfig(radius=RADIUS, solver="pga", step_size=0.3, steps=5)
        result = virtual_point_pga(self.model, self.params, X0, cfg)
        self.assertEqual(len(result.trace), 6)
        np.testing.assert_array_equal(result.trace[0].x, X0)
        self.assertGreaterEqual(result.entropies[-1], 0.95 * self.grid_max)
        self.assertTrue(np.all(result.distances <= RADIUS + 1e-9))
        self.assertTrue(np.all(np.diff(result.entropies) >= 0.0))

    def test_laga_near_grid_maximum(self):
        cfg = MurConfig(radius=RADIUS, solver="laga", step_size=0.1, steps=8)
        result = virtual_point_lagrangian_ga(self.model, self.params, X0, cfg)
        self.assertEqual(result.solver, "lagrangian-ga")
        self.assertEqual(len(result.trace), 9)
        self.assertAlmostEqual(result.distances[0], 1e-3 * RADIUS, places=12)
        self.assertGreaterEqual(result.entropies[-1], 0.95 * self.grid_max)

    def test_pga_stays_in_ball_on_random_networks(self):
        for seed in range(5):
            model = MLPClassifier(ModelSpec(widths=[2, 8, 3]))
            params = model.init_params(seed=seed)
            x0 = np.random.default_rng(seed).standard_normal((6, 2))
            cfg = MurConfig(radius=0.4, solver="pga", step_size=2.0, steps=7)
            batch = find_virtual_points(model, params, x0, cfg, seed=seed)
            self.assertTrue(np.all(np.linalg.norm(batch.x_star - x0, axis=1) <= 0.4 + 1e-9))
            self.assertEqual(batch.entropy_trace.shape, (8, 6))

    def test_monotone_trace_for_small_steps(self):
        self.assertEqual(monotone_trace_fraction(self.model, self.params, X0[None, :], RADIUS), 1.0)


class TestRandomAndFallback(unittest.TestCase):

    def test_random_solver_lands_on_sphere(self):
        model, params = logistic_model()
        x0 = np.random.default_rng(0).standard_normal((20, 2))
        batch = find_virtual_points(model, params, x0, MurConfig(radius=0.7, solver="rr"), seed=3)
        np.testing.assert_allclose(np.linalg.norm(batch.x_star - x0, axis=1), 0.7)
        again = find_virtual_points(model, params, x0, MurConfig(radius=0.7, solver="random"), seed=3)
        np.testing.assert_array_equal(batch.x_star, again.x_star)

    def test_random_point_on_sphere_single(self):
        point = random_point_on_sphere(X0, 2.0, seed=1)
        self.assertAlmostEqual(np.linalg.norm(point - X0), 2.0, places=12)
        with self.assertRaises(UsageError):
            random_point_on_sphere(X0, -1.0, seed=1)

    def test_degenerate_rows_fall_back(self):
        model, params = flat_model()
        x0 = np.zeros((3, 2))
        for solver in ("direct", "pga"):
            batch = find_virtual_points(model, params, x0, MurConfig(radius=0.5, solver=solver), seed=0)
            self.assertEqual(batch.fallback_rows, [0, 1, 2], msg=solver)
            np.testing.assert_allclose(np.linalg.norm(batch.x_star - x0, axis=1), 0.5)

    def test_pga_fallback_trace_describes_returned_point(self):
        def bowl(x):
            return np.sum(x ** 2, axis=1), 2.0 * x

        x0 = np.array([[0.0, 0.0], [1.0, 0.0]])
        cfg = MurConfig(radius=0.5, solver="pga", step_size=0.1, steps=3)
        batch = find_virtual_points(None, None, x0, cfg, seed=2, entropy_fn=bowl)
        self.assertEqual(batch.fallback_rows, [0])
        np.testing.assert_allclose(batch.distance_trace[-1], np.linalg.norm(batch.x_star - x0, axis=1))
        self.assertAlmostEqual(batch.distance_trace[-1, 0], 0.5, places=9)
        np.testing.assert_allclose(batch.entropy_star, bowl(batch.x_star)[0])
        self.assertAlmostEqual(batch.entropy_star[0], 0.25, places=9)

    def test_laga_handles_degenerate_gradient(self):
        model, params = flat_model()
        cfg = MurConfig(radius=0.5, solver="lagrangian-ga", step_size=0.1, steps=3)
        batch = find_virtual_points(model, params, np.zeros((2, 2)), cfg, seed=0)
        self.assertTrue(np.all(np.isfinite(batch.x_star)))


class TestGeometry(unittest.TestCase):

    def test_project_to_ball(self):
        x0 = np.zeros((2, 2))
        x = np.array([[3.0, 4.0], [0.1, 0.1]])
        projected = project_to_ball(x, x0, 1.0)
        np.testing.assert_allclose(projected, [[0.6, 0.8], [0.1, 0.1]])

    def test_lagrange_multiplier(self):
        self.assertAlmostEqual(float(lagrange_multiplier(np.array([3.0, 4.0]), np.zeros(2), 2.0, 1.0)), 10.0)

    def test_lagrangian_gradient_matches_relaxed_objective(self):
        rng = np.random.default_rng(4)
        x0, radius, g0_norm = rng.standard_normal(2), 0.8, 1.7

        def penalty(x):
            distance = np.linalg.norm(x - x0)
            return -distance * g0_norm / radius * (distance - radius)

        for _ in range(5):
            x = x0 + rng.standard_normal(2)
            expected = numerical_gradient(penalty, x)
            actual = lagrangian_gradient(np.zeros((1, 2)), x[None, :], x0[None, :], g0_norm, radius)[0]
            np.testing.assert_allclose(actual, expected, atol=1e-6)

    def test_config_validation(self):
        self.assertEqual(MurConfig(radius=1.0, solver="laga").solver, "lagrangian-ga")
        with self.assertRaises(UsageError):
            MurConfig(radius=0.0)
        with self.assertRaises(UsageError):
            MurConfig(radius=1.0, solver="newton")
        with self.assertRaises(UsageError):
            MurConfig(radius=1.0, steps=0)

    def test_grid_search_needs_2d(self):
        with self.assertRaises(UsageError):
            grid_search_maximum(lambda p: np.zeros(len(p)), np.zeros(3), 1.0)


class TestRadius(unittest.TestCase):

    def test_median_nearest_neighbour(self):
        points = np.array([[0.0, 0.0], [1.0, 0.0], [3.0, 0.0]])
        self.assertAlmostEqual(median_nn_distance(points), 1.0)
        self.assertAlmostEqual(default_radius(points, scale=0.5), 0.5)

    def test_duplicates_rejected(self):
        with self.assertRaises(UsageError):
            default_radius(np.zeros((4, 2)))
        with self.assertRaises(UsageError):
            median_nn_distance(np.zeros((1, 2)))


class TestMurLoss(unittest.TestCase):

    def test_value(self):
        a = np.array([[0.9, 0.1], [0.5, 0.5]])
        b = np.array([[0.6, 0.4], [0.5, 0.5]])
        loss = mur_loss(Constant(a), Constant(b))
        self.assertAlmostEqual(float(evaluate(loss)), np.mean(np.sum((a - b) ** 2, axis=1) / 2.0))

    def test_target_branch_gets_no_gradient(self):
        student = Parameter([[0.9, 0.1]])
        target = Parameter([[0.6, 0.4]])
        loss = mur_loss(ops.softmax(student), ops.softmax(target))
        evaluate(loss)
        grads = backward(loss)
        np.testing.assert_array_equal(grads[target], np.zeros((1, 2)))
        self.assertGreater(np.abs(grads[student]).sum(), 0.0)


class TestDiagnostics(unittest.TestCase):

    def test_lower_bound_report(self):
        model, params = logistic_model()
        report = linearization_lower_bound(model, params, np.array([[0.5, 0.0], [-1.0, 2.0]]), RADIUS)
        self.assertEqual(report.n_points, 2)
        self.assertTrue(0.0 <= report.fraction <= 1.0)
        flat, flat_params = flat_model()
        self.assertEqual(linearization_lower_bound(flat, flat_params, np.zeros((2, 2)), RADIUS).n_points, 0)


class TestVirtualPointDump(unittest.TestCase):

    def test_write_and_read(self):
        model, params = logistic_model()
        x0 = np.array([[0.5, 0.0], [-0.3, 1.0]])
        batch = find_virtual_points(model, params, x0, MurConfig(radius=0.2), seed=0)
        with tempfile.TemporaryDirectory() as tmp:
            path = write_virtual_points(Path(tmp) / "vp.csv", x0, batch, example_ids=[7, 9])
            header = path.read_text().splitlines()[0]
            self.assertEqual(header, "example_id,x0_0,x0_1,x_star_0,x_star_1,entropy_x0,entropy_x_star")
            loaded = read_virtual_points(path)
        np.testing.assert_array_equal(loaded["example_id"], [7, 9])
        np.testing.assert_array_equal(loaded["x0"], x0)
        np.testing.assert_array_equal(loaded["x_star"], batch.x_star)
        np.testing.assert_array_equal(loaded["entropy_x_star"], batch.entropy_star)

    def test_shape_mismatch(self):
        model, params = logistic_model()
        batch = find_virtual_points(model, params, np.zeros((2, 2)) + 0.1, MurConfig(radius=0.2), seed=0)
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(ShapeError):
                write_virtual_points(Path(tmp) / "vp.csv", np.zeros((3, 2)), batch)


if __name__ == '__main__':
    unittest.main()
