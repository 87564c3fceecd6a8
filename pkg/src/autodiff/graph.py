"""
Computation graph for reverse-mode automatic differentiation.

Graphs are built lazily: constructing a node records the operation and its
inputs, `evaluate` computes values in topological order, and `backward`
propagates adjoints from a scalar root down to every Parameter leaf.

Values are float64 numpy arrays. Nodes are re-evaluated from scratch on
every `evaluate` call, so changing a Parameter's data and evaluating again
gives the new value (this is what the finite-difference checker relies on).
"""

import itertools
import logging
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.utils.errors import NumericalError, UsageError

ArrayLike = Union[np.ndarray, float, int, Sequence[float]]

_node_ids = itertools.count()
logger = logging.getLogger(__name__)


def as_array(value: ArrayLike) -> np.ndarray:
    """Convert to a float64 array (copying only when needed)."""
    return np.asarray(value, dtype=np.float64)


class Node:
    """
    A vertex of the computation graph.

    Subclasses implement `compute` (forward value from input values) and
    `vjp` (vector-Jacobian product: input adjoints from the output adjoint).
    """

    kind = "node"

    def __init__(self, *inputs: "Node", name: Optional[str] = None):
        self.inputs: Tuple["Node", ...] = tuple(as_node(i) for i in inputs)
        self.name = name
        self.id = next(_node_ids)
        self.value: Optional[np.ndarray] = None
        self.grad: Optional[np.ndarray] = None

    # -- subclass hooks -------------------------------------------------
    def compute(self, *values: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def vjp(self, grad: np.ndarray, *values: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        raise NotImplementedError

    # -- helpers --------------------------------------------------------
    @property
    def label(self) -> str:
        suffix = f" '{self.name}'" if self.name else ""
        return f"{self.kind}#{self.id}{suffix}"

    @property
    def shape(self) -> Tuple[int, ...]:
        if self.value is None:
            raise UsageError(f"{self.label} has not been evaluated")
        return self.value.shape

    def __repr__(self) -> str:
        shape = self.value.shape if self.value is not None else "?"
        return f"<{self.label} shape={shape}>"

    # Operator sugar; the op classes live in ops.py
    def __add__(self, other):
        from src.autodiff import ops
        if isinstance(other, (int, float)):
            return ops.shift(self, float(other))
        return ops.add(self, other)

    def __radd__(self, other):
        return self.__add__(other)

    def __sub__(self, other):
        from src.autodiff import ops
        if isinstance(other, (int, float)):
            return ops.shift(self, -float(other))
        return ops.sub(self, other)

    def __rsub__(self, other):
        from src.autodiff import ops
        if isinstance(other, (int, float)):
            return ops.shift(ops.scale(self, -1.0), float(other))
        return ops.sub(other, self)

    def __mul__(self, other):
        from src.autodiff import ops
        if isinstance(other, (int, float)):
            return ops.scale(self, float(other))
        return ops.mul(self, other)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __truediv__(self, other):
        from src.autodiff import ops
        if not isinstance(other, (int, float)):
            raise UsageError("only division by a Python scalar is supported")
        return ops.scale(self, 1.0 / float(other))

    def __neg__(self):
        from src.autodiff import ops
        return ops.scale(self, -1.0)

    def __matmul__(self, other):
        from src.autodiff import ops
        return ops.matmul(self, other)


class Leaf(Node):
    """A node without inputs whose value is held in `data`."""

    kind = "leaf"
    requires_grad = False

    def __init__(self, data: ArrayLike, name: Optional[str] = None):
        super().__init__(name=name)
        self.data = as_array(data).copy()

    def compute(self) -> np.ndarray:
        return self.data

    def vjp(self, grad: np.ndarray) -> Tuple[()]:
        return ()


class Constant(Leaf):
    """A leaf that never receives a gradient."""

    kind = "constant"


class Parameter(Leaf):
    """A differentiable leaf; `backward` reports its gradient."""

    kind = "parameter"
    requires_grad = True


def as_node(value: Union[Node, ArrayLike]) -> Node:
    """Wrap arrays and scalars as Constants; pass nodes through."""
    if isinstance(value, Node):
        return value
    return Constant(value)


def topological_order(root: Node) -> List[Node]:
    """Inputs-first ordering of every node reachable from root (iterative DFS)."""
    order: List[Node] = []
    visited = set()
    stack: List[Tuple[Node, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if node.id in visited:
            continue
        visited.add(node.id)
        stack.append((node, True))
        for child in reversed(node.inputs):
            if child.id not in visited:
                stack.append((child, False))
    return order


def evaluate(root: Node) -> np.ndarray:
    """
    Evaluate the graph rooted at `root`.

    Returns:
        The root value (float64 array).

    Raises:
        ShapeError: An op received incompatible operand shapes.
        NumericalError: An intermediate value contains NaN or Inf.
    """
    for node in topological_order(root):
        node.grad = None
        value = node.compute(*[child.value for child in node.inputs])
        value = np.asarray(value, dtype=np.float64)
        if not np.all(np.isfinite(value)):
            raise NumericalError(f"non-finite value produced by {node.label}")
        node.value = value
    return root.value


def backward(root: Node, output_grad: Optional[ArrayLike] = None) -> Dict[Parameter, np.ndarray]:
    """
    Propagate adjoints from root to every reachable Parameter.

    Args:
        root: An evaluated node. Must be scalar unless output_grad is given.
        output_grad: Seed adjoint with the root's shape.

    Returns:
        Mapping from each Parameter leaf to its gradient (zeros when the
        parameter only reaches the root through stop-gradient).
    """
    order = topological_order(root)
    if any(node.value is None for node in order):
        raise UsageError(f"backward called before evaluate on {root.label}")

    if output_grad is None:
        if root.value.size != 1:
            raise UsageError(
                f"backward needs a scalar root or an explicit output_grad; {root.label} "
                f"has shape {root.value.shape}"
            )
        seed = np.ones_like(root.value)
    else:
        seed = as_array(output_grad)
        if seed.shape != root.value.shape:
            raise UsageError(f"output_grad shape {seed.shape} does not match {root.value.shape}")

    adjoints: Dict[int, np.ndarray] = {root.id: seed}
    for node in reversed(order):
        grad = adjoints.get(node.id)
        if grad is None:
            grad = np.zeros_like(node.value)
        node.grad = grad
        if not node.inputs:
            continue
        input_grads = node.vjp(grad, *[child.value for child in node.inputs])
        for child, child_grad in zip(node.inputs, input_grads):
            if child_grad is None:
                continue
            if child.id in adjoints:
                adjoints[child.id] = adjoints[child.id] + child_grad
            else:
                adjoints[child.id] = child_grad

    return {node: node.grad for node in order if isinstance(node, Parameter)}
