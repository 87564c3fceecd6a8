"""
Tests for the autodiff core.
"""

import unittest

import numpy as np

from src.autodiff import ops
from src.autodiff.functional import row_entropy, squared_gap
from src.autodiff.gradcheck import grad_check, numerical_gradient
from src.autodiff.graph import Constant, Parameter, backward, evaluate
from src.utils.errors import NumericalError, ShapeError, UsageError

TOLERANCE = 1e-4


def weighted_sum(node, rng):
    """Scalar readout with random weights so every output entry matters."""
    weights = Constant(rng.standard_normal(evaluate(node).shape))
    return ops.sum(ops.mul(node, weights))


class TestEvaluate(unittest.TestCase):

    def test_affine_with_bias(self):
        x = Constant([[1.0, 2.0], [3.0, 4.0]])
        w = Parameter([[1.0, 0.0, 1.0], [0.0, 1.0, 1.0]])
        b = Parameter([0.5, -0.5, 0.0])
        out = evaluate(ops.add(ops.matmul(x, w), b))
        np.testing.assert_allclose(out, [[1.5, 1.5, 3.0], [3.5, 3.5, 7.0]])

    def test_scalar_sugar(self):
        x = Parameter([1.0, 2.0])
        out = 1.0 - x * 2.0 + 3.0
        np.testing.assert_allclose(evaluate(out), [2.0, 0.0])
        total = ops.sum(out)
        evaluate(total)
        grads = backward(total)
        np.testing.assert_allclose(grads[x], [-2.0, -2.0])

    def test_reevaluation_sees_new_data(self):
        x = Parameter([1.0, 2.0])
        total = ops.sum(ops.square(x))
        self.assertEqual(float(evaluate(total)), 5.0)
        x.data[...] = [3.0, 0.0]
        self.assertEqual(float(evaluate(total)), 9.0)

    def test_shape_mismatch_names_both_shapes(self):
        with self.assertRaises(ShapeError) as ctx:
            evaluate(ops.add(Constant(np.zeros((2, 3))), Constant(np.zeros((3, 2)))))
        self.assertIn("(2, 3)", str(ctx.exception))
        self.assertIn("(3, 2)", str(ctx.exception))

    def test_matmul_shape_error(self):
        with self.assertRaises(ShapeError):
            evaluate(ops.matmul(Constant(np.zeros((2, 3))), Constant(np.zeros((2, 3)))))

    def test_log_of_zero_is_numerical_error(self):
        with self.assertRaises(NumericalError):
            evaluate(ops.log(Constant([1.0, 0.0])))

    def test_sqrt_of_negative_is_numerical_error(self):
        with self.assertRaises(NumericalError):
            evaluate(ops.sqrt(Constant([-1.0])))


class TestBackward(unittest.TestCase):

    def test_square_gradient(self):
        x = Parameter([1.0, -2.0, 3.0])
        total = ops.sum(ops.square(x))
        evaluate(total)
        np.testing.assert_allclose(backward(total)[x], [2.0, -4.0, 6.0])

    def test_shared_subexpression_accumulates(self):
        x = Parameter([0.5, 2.0])
        total = ops.sum(ops.add(ops.mul(x, x), x))
        evaluate(total)
        np.testing.assert_allclose(backward(total)[x], 2.0 * x.data + 1.0)

    def test_bias_gradient_sums_rows(self):
        h = Constant(np.ones((4, 3)))
        b = Parameter(np.zeros(3))
        total = ops.sum(ops.add(h, b))
        evaluate(total)
        np.testing.assert_allclose(backward(total)[b], [4.0, 4.0, 4.0])

    def test_stop_gradient_blocks(self):
        x = Parameter([1.0, 2.0])
        total = ops.sum(ops.mul(ops.stop_gradient(x), x))
        evaluate(total)
        np.testing.assert_allclose(backward(total)[x], [1.0, 2.0])

    def test_fully_stopped_parameter_gets_zeros(self):
        x = Parameter([1.0, 2.0])
        total = ops.sum(ops.stop_gradient(ops.square(x)))
        evaluate(total)
        np.testing.assert_allclose(backward(total)[x], [0.0, 0.0])

    def test_constants_get_no_gradient(self):
        c = Constant([1.0, 2.0])
        x = Parameter([3.0, 4.0])
        total = ops.sum(ops.mul(c, x))
        evaluate(total)
        grads = backward(total)
        self.assertNotIn(c, grads)
        np.testing.assert_allclose(grads[x], [1.0, 2.0])

    def test_backward_before_evaluate(self):
        x = Parameter([1.0])
        with self.assertRaises(UsageError):
            backward(ops.sum(x))

    def test_non_scalar_root_needs_output_grad(self):
        x = Parameter([1.0, 2.0])
        y = ops.square(x)
        evaluate(y)
        with self.assertRaises(UsageError):
            backward(y)
        np.testing.assert_allclose(backward(y, output_grad=[1.0, 0.0])[x], [2.0, 0.0])


class TestGradientChecks(unittest.TestCase):
    """Every differentiable op against central differences on random inputs."""

    def setUp(self):
        self.rng = np.random.default_rng(7)

    def check(self, build, shape, positive=False, away_from_zero=False):
        for trial in range(3):
            data = self.rng.standard_normal(shape)
            if positive:
                data = np.abs(data) + 0.5
            if away_from_zero:
                data = np.sign(data) * (np.abs(data) + 0.1)
            x = Parameter(data)
            output = weighted_sum(build(x), self.rng)
            self.assertLess(grad_check(output, x), TOLERANCE, msg=f"trial {trial}")

    def test_elementwise_ops(self):
        self.check(ops.exp, (3, 4))
        self.check(ops.log, (3, 4), positive=True)
        self.check(ops.sqrt, (3, 4), positive=True)
        self.check(ops.square, (3, 4))
        self.check(ops.sigmoid, (3, 4))
        self.check(ops.softplus, (3, 4))
        self.check(lambda x: ops.leaky_relu(x, 0.1), (3, 4), away_from_zero=True)

    def test_row_ops(self):
        self.check(ops.softmax, (4, 3))
        self.check(ops.log_softmax, (4, 3))
        self.check(row_entropy, (5, 3))
        self.check(lambda x: ops.mean(x, axis=0), (4, 3))
        self.check(lambda x: ops.sum(x, axis=1), (4, 3))

    def test_structural_ops(self):
        other = Constant(self.rng.standard_normal((2, 3)))
        self.check(lambda x: ops.concat([x, other], axis=0), (4, 3))
        self.check(lambda x: ops.reshape(x, (2, 6)), (4, 3))
        w = Constant(self.rng.standard_normal((3, 5)))
        self.check(lambda x: ops.matmul(x, w), (4, 3))

    def test_matmul_weight_gradient(self):
        x = Constant(self.rng.standard_normal((4, 3)))
        w = Parameter(self.rng.standard_normal((3, 2)))
        b = Parameter(self.rng.standard_normal(2))
        output = weighted_sum(ops.softmax(ops.add(ops.matmul(x, w), b)), self.rng)
        self.assertLess(grad_check(output, w), TOLERANCE)
        self.assertLess(grad_check(output, b), TOLERANCE)

    def test_squared_gap(self):
        target = self.rng.standard_normal((4, 3))
        x = Parameter(self.rng.standard_normal((4, 3)))
        self.assertLess(grad_check(squared_gap(x, Constant(target)), x), TOLERANCE)

    def test_grad_check_restores_data(self):
        data = self.rng.standard_normal((2, 2))
        x = Parameter(data)
        grad_check(ops.sum(ops.exp(x)), x)
        np.testing.assert_array_equal(x.data, data)

    def test_numerical_gradient_helper(self):
        grad = numerical_gradient(lambda v: float(np.sum(v ** 3)), np.array([1.0, -2.0]))
        np.testing.assert_allclose(grad, [3.0, 12.0], rtol=1e-6)


class TestStochasticOps(unittest.TestCase):

    def test_noise_is_a_function_of_the_seed(self):
        x = Constant(np.zeros((3, 2)))
        a = evaluate(ops.gaussian_noise(x, 0.5, seed=11))
        b = evaluate(ops.gaussian_noise(x, 0.5, seed=11))
        c = evaluate(ops.gaussian_noise(x, 0.5, seed=12))
        np.testing.assert_array_equal(a, b)
        self.assertFalse(np.array_equal(a, c))

    def test_zero_noise_is_identity(self):
        x = Constant(np.ones((2, 2)))
        self.assertIs(ops.gaussian_noise(x, 0.0, seed=1), x)
        self.assertIs(ops.dropout(x, 0.0, seed=1), x)

    def test_dropout_scales_kept_units(self):
        x = Parameter(np.ones((50, 4)))
        y = ops.dropout(x, 0.5, seed=3)
        out = evaluate(y)
        self.assertTrue(set(np.unique(out)).issubset({0.0, 2.0}))
        total = ops.sum(y)
        evaluate(total)
        grads = backward(total)
        np.testing.assert_array_equal(grads[x], out)

    def test_dropout_drops_rate_fraction(self):
        rate, n = 0.3, 100_000
        out = evaluate(ops.dropout(Constant(np.ones((1000, 100))), rate, seed=8))
        bound = 3.0 * np.sqrt(rate * (1.0 - rate) / n)
        self.assertLess(abs(np.mean(out == 0.0) - rate), bound)
        np.testing.assert_allclose(out[out != 0.0], 1.0 / (1.0 - rate))
        self.assertAlmostEqual(float(out.mean()), 1.0, delta=0.01)

    def test_dropout_rate_validation(self):
        with self.assertRaises(UsageError):
            ops.dropout(Constant([1.0]), 1.0, seed=0)


if __name__ == '__main__':
    unittest.main()
