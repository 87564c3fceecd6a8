"""
Operation nodes for the autodiff graph.

Broadcasting is deliberately narrow: elementwise binary ops need equal
shapes, except that `add`/`sub` accept a 1-D bias matching the last axis of
a 2-D operand. Everything else requires an explicit `reshape`.
"""

from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import special

from src.autodiff.graph import Node, as_node
from src.utils.errors import NumericalError, ShapeError, UsageError

LEAKY_RELU_SLOPE = 0.1


def _is_bias(full: np.ndarray, bias: np.ndarray) -> bool:
    return full.ndim == 2 and bias.ndim == 1 and bias.shape[0] == full.shape[1]


class Add(Node):
    kind = "add"

    def compute(self, a, b):
        if a.shape != b.shape and not _is_bias(a, b):
            raise ShapeError(self.kind, a.shape, b.shape)
        return a + b

    def vjp(self, grad, a, b):
        grad_b = grad if b.shape == grad.shape else grad.sum(axis=0)
        return grad, grad_b


class Sub(Node):
    kind = "sub"

    def compute(self, a, b):
        if a.shape != b.shape and not _is_bias(a, b):
            raise ShapeError(self.kind, a.shape, b.shape)
        return a - b

    def vjp(self, grad, a, b):
        grad_b = -grad if b.shape == grad.shape else -grad.sum(axis=0)
        return grad, grad_b


class Mul(Node):
    kind = "mul"

    def compute(self, a, b):
        if a.shape != b.shape:
            raise ShapeError(self.kind, a.shape, b.shape)
        return a * b

    def vjp(self, grad, a, b):
        return grad * b, grad * a


class Scale(Node):
    kind = "scale"

    def __init__(self, x, factor: float, name=None):
        super().__init__(x, name=name)
        self.factor = float(factor)

    def compute(self, x):
        return self.factor * x

    def vjp(self, grad, x):
        return (self.factor * grad,)


class Shift(Node):
    """Adds a Python scalar to every entry."""

    kind = "shift"

    def __init__(self, x, offset: float, name=None):
        super().__init__(x, name=name)
        self.offset = float(offset)

    def compute(self, x):
        return x + self.offset

    def vjp(self, grad, x):
        return (grad,)


class MatMul(Node):
    kind = "matmul"

    def compute(self, a, b):
        if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
            raise ShapeError(self.kind, a.shape, b.shape)
        return a @ b

    def vjp(self, grad, a, b):
        return grad @ b.T, a.T @ grad


class Exp(Node):
    kind = "exp"

    def compute(self, x):
        return np.exp(x)

    def vjp(self, grad, x):
        return (grad * self.value,)


class Log(Node):
    kind = "log"

    def compute(self, x):
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.log(x)

    def vjp(self, grad, x):
        return (grad / x,)


class Sqrt(Node):
    kind = "sqrt"

    def compute(self, x):
        if np.any(x < 0):
            raise NumericalError(f"{self.label}: negative operand {float(np.min(x)):.3e}")
        return np.sqrt(x)

    def vjp(self, grad, x):
        out = self.value
        # Subgradient 0 at the origin keeps sqrt(0) differentiable in practice
        safe = np.where(out > 0, out, 1.0)
        return (np.where(out > 0, grad / (2.0 * safe), 0.0),)


class Square(Node):
    kind = "square"

    def compute(self, x):
        return x * x

    def vjp(self, grad, x):
        return (2.0 * x * grad,)


class LeakyRelu(Node):
    kind = "leaky_relu"

    def __init__(self, x, slope: float = LEAKY_RELU_SLOPE, name=None):
        super().__init__(x, name=name)
        self.slope = float(slope)

    def compute(self, x):
        return np.where(x > 0, x, self.slope * x)

    def vjp(self, grad, x):
        return (np.where(x > 0, grad, self.slope * grad),)


class Sigmoid(Node):
    kind = "sigmoid"

    def compute(self, x):
        return special.expit(x)

    def vjp(self, grad, x):
        s = self.value
        return (grad * s * (1.0 - s),)


class Softplus(Node):
    kind = "softplus"

    def compute(self, x):
        return np.logaddexp(0.0, x)

    def vjp(self, grad, x):
        return (grad * special.expit(x),)


class Softmax(Node):
    """Row-wise softmax over the last axis."""

    kind = "softmax"

    def compute(self, x):
        return special.softmax(x, axis=-1)

    def vjp(self, grad, x):
        s = self.value
        return (s * (grad - np.sum(grad * s, axis=-1, keepdims=True)),)


class LogSoftmax(Node):
    """Fused log-softmax; never takes log of a rounded-to-zero probability."""

    kind = "log_softmax"

    def compute(self, x):
        return special.log_softmax(x, axis=-1)

    def vjp(self, grad, x):
        s = np.exp(self.value)
        return (grad - s * np.sum(grad, axis=-1, keepdims=True),)


class Sum(Node):
    kind = "sum"

    def __init__(self, x, axis: Optional[int] = None, name=None):
        super().__init__(x, name=name)
        self.axis = axis

    def compute(self, x):
        if self.axis is not None and not -x.ndim <= self.axis < x.ndim:
            raise ShapeError(self.kind, x.shape, detail=f"axis {self.axis}")
        return np.sum(x, axis=self.axis)

    def vjp(self, grad, x):
        if self.axis is None:
            return (np.broadcast_to(grad, x.shape).copy(),)
        return (np.broadcast_to(np.expand_dims(grad, self.axis), x.shape).copy(),)


class Mean(Sum):
    kind = "mean"

    def compute(self, x):
        total = super().compute(x)
        count = x.size if self.axis is None else x.shape[self.axis]
        if count == 0:
            raise ShapeError(self.kind, x.shape, detail="mean of empty axis")
        return total / count

    def vjp(self, grad, x):
        count = x.size if self.axis is None else x.shape[self.axis]
        (expanded,) = super().vjp(grad, x)
        return (expanded / count,)


class Concat(Node):
    kind = "concat"

    def __init__(self, *inputs, axis: int = 0, name=None):
        super().__init__(*inputs, name=name)
        self.axis = axis

    def compute(self, *values):
        reference = values[0]
        for other in values[1:]:
            mismatch = other.ndim != reference.ndim or any(
                a != b for i, (a, b) in enumerate(zip(reference.shape, other.shape))
                if i != self.axis % reference.ndim
            )
            if mismatch:
                raise ShapeError(self.kind, reference.shape, other.shape)
        return np.concatenate(values, axis=self.axis)

    def vjp(self, grad, *values):
        splits = np.cumsum([v.shape[self.axis] for v in values])[:-1]
        return tuple(np.split(grad, splits, axis=self.axis))


class Reshape(Node):
    kind = "reshape"

    def __init__(self, x, shape: Sequence[int], name=None):
        super().__init__(x, name=name)
        self.target = tuple(shape)

    def compute(self, x):
        if int(np.prod(self.target)) != x.size:
            raise ShapeError(self.kind, x.shape, self.target)
        return x.reshape(self.target)

    def vjp(self, grad, x):
        return (grad.reshape(x.shape),)


class StandardNormalLike(Node):
    """
    Standard-normal draws shaped like the input; the input only supplies the shape.

    The draw is a pure function of the seed, so re-evaluation reproduces it.
    """

    kind = "normal_like"

    def __init__(self, x, seed: int, name=None):
        super().__init__(x, name=name)
        self.seed = int(seed)

    def compute(self, x):
        return np.random.default_rng(self.seed).standard_normal(x.shape)

    def vjp(self, grad, x):
        return (None,)


class Dropout(Node):
    """Inverted binary dropout: kept activations are divided by 1 - rate."""

    kind = "dropout"

    def __init__(self, x, rate: float, seed: int, name=None):
        super().__init__(x, name=name)
        if not 0.0 <= rate < 1.0:
            raise UsageError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = float(rate)
        self.seed = int(seed)

    def _mask(self, shape: Tuple[int, ...]) -> np.ndarray:
        keep = np.random.default_rng(self.seed).random(shape) >= self.rate
        return keep.astype(np.float64) / (1.0 - self.rate)

    def compute(self, x):
        return x * self._mask(x.shape)

    def vjp(self, grad, x):
        return (grad * self._mask(x.shape),)


class StopGradient(Node):
    """Identity forward, zero adjoint backward."""

    kind = "stop_gradient"

    def compute(self, x):
        return x

    def vjp(self, grad, x):
        return (np.zeros_like(x),)


# -- functional API ------------------------------------------------------

def add(a, b) -> Node:
    return Add(as_node(a), as_node(b))


def sub(a, b) -> Node:
    return Sub(as_node(a), as_node(b))


def mul(a, b) -> Node:
    return Mul(as_node(a), as_node(b))


def scale(x, factor: float) -> Node:
    return Scale(as_node(x), factor)


def shift(x, offset: float) -> Node:
    return Shift(as_node(x), offset)


def matmul(a, b) -> Node:
    return MatMul(as_node(a), as_node(b))


def exp(x) -> Node:
    return Exp(as_node(x))


def log(x) -> Node:
    return Log(as_node(x))


def sqrt(x) -> Node:
    return Sqrt(as_node(x))


def square(x) -> Node:
    return Square(as_node(x))


def leaky_relu(x, slope: float = LEAKY_RELU_SLOPE) -> Node:
    return LeakyRelu(as_node(x), slope)


def sigmoid(x) -> Node:
    return Sigmoid(as_node(x))


def softplus(x) -> Node:
    return Softplus(as_node(x))


def softmax(x) -> Node:
    return Softmax(as_node(x))


def log_softmax(x) -> Node:
    return LogSoftmax(as_node(x))


def sum(x, axis: Optional[int] = None) -> Node:  # noqa: A001 - mirrors numpy naming
    return Sum(as_node(x), axis=axis)


def mean(x, axis: Optional[int] = None) -> Node:
    return Mean(as_node(x), axis=axis)


def concat(nodes: Sequence, axis: int = 0) -> Node:
    return Concat(*[as_node(n) for n in nodes], axis=axis)


def reshape(x, shape: Sequence[int]) -> Node:
    return Reshape(as_node(x), shape)


def normal_like(x, seed: int) -> Node:
    return StandardNormalLike(as_node(x), seed)


def gaussian_noise(x, sigma: float, seed: int) -> Node:
    """x + sigma * eps with eps ~ N(0, I) drawn from `seed`."""
    x = as_node(x)
    if sigma == 0.0:
        return x
    return Add(x, Scale(StandardNormalLike(x, seed), sigma))


def dropout(x, rate: float, seed: int) -> Node:
    x = as_node(x)
    if rate == 0.0:
        return x
    return Dropout(x, rate, seed)


def stop_gradient(x) -> Node:
    return StopGradient(as_node(x))
