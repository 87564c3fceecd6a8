"""
Multi-layer perceptron classifier f(x) -> p(y|x) with pluggable stochastic layers.

Perturbations, when `noise_on` is set:
- Gaussian input noise with standard deviation `input_noise`
- inverted binary dropout after every hidden activation
- weight sampling through local reparameterization in variational mode

With noise off and mean weights the forward pass is a pure function of
(params, inputs).
"""

import logging
from dataclasses import asdict, dataclass, field
from typing import Dict, Iterator, List, Optional, Tuple, Union

import numpy as np

from src.autodiff import ops
from src.autodiff.graph import Constant, Leaf, Node, Parameter, backward, evaluate
from src.datasets.augment import gaussian_noise_inputs
from src.utils.errors import ConfigError, ShapeError
from src.utils.helpers import derive_seed, make_rng
from src.variational_dropout.layers import (
    DEFAULT_LOG_SIGMA2,
    VariationalLayerParams,
    local_reparam_node,
)

WEIGHT_MODES = ("deterministic", "variational")


@dataclass
class ModelSpec:
    """Architecture and perturbation settings of an MLP classifier."""

    widths: List[int] = field(default_factory=lambda: [2, 64, 64, 2])
    leaky_slope: float = 0.1
    input_noise: float = 0.0
    dropout_rate: float = 0.0
    weight_mode: str = "deterministic"

    def __post_init__(self):
        self.widths = [int(w) for w in self.widths]
        problems = []
        if len(self.widths) < 2:
            problems.append("model needs at least an input and an output width")
        if any(w <= 0 for w in self.widths):
            problems.append(f"layer widths must be positive, got {self.widths}")
        if self.widths and self.widths[-1] < 2:
            problems.append("final width (class count) must be at least 2")
        if self.input_noise < 0:
            problems.append("input noise sigma must be non-negative")
        if not 0.0 <= self.dropout_rate < 1.0:
            problems.append("dropout rate must be in [0, 1)")
        if self.weight_mode not in WEIGHT_MODES:
            problems.append(f"weight mode must be one of {WEIGHT_MODES}")
        if problems:
            raise ConfigError(problems)

    @property
    def n_inputs(self) -> int:
        return self.widths[0]

    @property
    def n_classes(self) -> int:
        return self.widths[-1]

    @property
    def variational(self) -> bool:
        return self.weight_mode == "variational"

    def to_dict(self) -> Dict:
        return asdict(self)


@dataclass
class LayerParams:
    weight: Leaf
    bias: Leaf
    log_sigma2: Optional[Leaf] = None


@dataclass
class ParamSet:
    """
    Per-layer leaves of one network.

    Trainable sets hold Parameter leaves; frozen sets (EMA teacher, loaded
    checkpoints used for evaluation) hold Constants, so no gradient can reach them.
    """

    layers: List[LayerParams]
    variational: bool = False

    def __post_init__(self):
        for i, layer in enumerate(self.layers):
            if layer.bias.data.shape != (layer.weight.data.shape[1],):
                raise ShapeError(f"layer{i}.bias", layer.weight.data.shape, layer.bias.data.shape)
            if self.variational:
                if layer.log_sigma2 is None:
                    raise ShapeError(f"layer{i}.log_sigma2", layer.weight.data.shape, (),
                                     detail="missing in variational mode")
                if layer.log_sigma2.data.shape != layer.weight.data.shape:
                    raise ShapeError(f"layer{i}.log_sigma2", layer.weight.data.shape,
                                     layer.log_sigma2.data.shape)
                if not np.all(np.isfinite(layer.log_sigma2.data)):
                    raise ValueError(f"layer{i}.log_sigma2 contains non-finite entries")

    @property
    def trainable(self) -> bool:
        return all(leaf.requires_grad for _, leaf in self.named_leaves())

    @property
    def n_weights(self) -> int:
        return int(sum(layer.weight.data.size for layer in self.layers))

    @property
    def input_width(self) -> int:
        return self.layers[0].weight.data.shape[0]

    def named_leaves(self) -> Iterator[Tuple[str, Leaf]]:
        for i, layer in enumerate(self.layers):
            yield f"layer{i}.weight", layer.weight
            yield f"layer{i}.bias", layer.bias
            if layer.log_sigma2 is not None:
                yield f"layer{i}.log_sigma2", layer.log_sigma2

    def parameters(self) -> List[Leaf]:
        return [leaf for _, leaf in self.named_leaves()]

    def arrays(self) -> Dict[str, np.ndarray]:
        return {name: leaf.data.copy() for name, leaf in self.named_leaves()}

    def copy(self, trainable: Optional[bool] = None) -> "ParamSet":
        """Deep copy with fresh leaves; `trainable` defaults to the current kind."""
        if trainable is None:
            trainable = self.trainable
        leaf_cls = Parameter if trainable else Constant
        layers = [
            LayerParams(
                weight=leaf_cls(layer.weight.data, name=layer.weight.name),
                bias=leaf_cls(layer.bias.data, name=layer.bias.name),
                log_sigma2=(leaf_cls(layer.log_sigma2.data, name=layer.log_sigma2.name)
                            if layer.log_sigma2 is not None else None),
            )
            for layer in self.layers
        ]
        return ParamSet(layers=layers, variational=self.variational)

    def kl_pairs(self) -> List[Tuple[Leaf, Leaf]]:
        return [(layer.weight, layer.log_sigma2) for layer in self.layers
                if layer.log_sigma2 is not None]

    def variational_layers(self) -> List[VariationalLayerParams]:
        return [VariationalLayerParams(theta=w.data, log_sigma2=s.data) for w, s in self.kl_pairs()]

    @classmethod
    def from_arrays(cls, weights: List[np.ndarray], biases: List[np.ndarray],
                    log_sigma2: Optional[List[np.ndarray]] = None,
                    trainable: bool = True) -> "ParamSet":
        leaf_cls = Parameter if trainable else Constant
        layers = []
        for i, (w, b) in enumerate(zip(weights, biases)):
            layers.append(LayerParams(
                weight=leaf_cls(w, name=f"layer{i}.weight"),
                bias=leaf_cls(b, name=f"layer{i}.bias"),
                log_sigma2=(leaf_cls(log_sigma2[i], name=f"layer{i}.log_sigma2")
                            if log_sigma2 is not None else None),
            ))
        return cls(layers=layers, variational=log_sigma2 is not None)


@dataclass
class PredictiveOutput:
    """Evaluated class probabilities and log-probabilities, one row per example."""

    probs: np.ndarray
    log_probs: np.ndarray

    def __post_init__(self):
        if self.probs.shape != self.log_probs.shape:
            raise ShapeError("predictive_output", self.probs.shape, self.log_probs.shape)


@dataclass
class PredictiveNodes:
    """Graph nodes of one forward pass."""

    logits: Node
    probs: Node
    log_probs: Node


def _inputs_of(batch) -> np.ndarray:
    return np.atleast_2d(np.asarray(getattr(batch, "inputs", batch), dtype=np.float64))


class MLPClassifier:
    """Fully connected classifier with leaky-ReLU hidden layers and softmax output."""

    def __init__(self, spec: ModelSpec):
        self.spec = spec
        self.logger = logging.getLogger(__name__)

    def init_params(self, seed: int, log_sigma2: float = DEFAULT_LOG_SIGMA2) -> ParamSet:
        """
        Draw initial parameters.

        Weights use He initialization adjusted for the leaky-ReLU slope, biases
        start at zero and log sigma^2 starts at `log_sigma2` in variational mode.
        """
        rng = make_rng(seed, "init")
        gain = np.sqrt(2.0 / (1.0 + self.spec.leaky_slope ** 2))
        weights, biases, log_vars = [], [], []
        for fan_in, fan_out in zip(self.spec.widths[:-1], self.spec.widths[1:]):
            weights.append(rng.standard_normal((fan_in, fan_out)) * gain / np.sqrt(fan_in))
            biases.append(np.zeros(fan_out))
            log_vars.append(np.full((fan_in, fan_out), float(log_sigma2)))
        params = ParamSet.from_arrays(weights, biases, log_vars if self.spec.variational else None)
        self.logger.debug(f"Initialized {len(weights)} layers ({params.n_weights} weights), "
                          f"mode={self.spec.weight_mode}")
        return params

    def build(self, params: ParamSet, x: Union[Node, np.ndarray], noise_on: bool = False,
              seed: int = 0, sample_weights: Optional[bool] = None) -> PredictiveNodes:
        """
        Build the forward graph for inputs x (n x d).

        Args:
            params: Network parameters.
            x: Input node or array.
            noise_on: Apply input noise and dropout per ModelSpec.
            seed: Seed for every stochastic node of this pass.
            sample_weights: Sample weights by local reparameterization. Defaults
                to `noise_on` for variational parameter sets.

        Returns:
            PredictiveNodes for logits, probabilities and log-probabilities.
        """
        if sample_weights is None:
            sample_weights = noise_on
        sample_weights = sample_weights and params.variational

        h = x if isinstance(x, Node) else Constant(_inputs_of(x))
        if h.value is not None and h.value.shape[-1] != params.input_width:
            raise ShapeError("forward", h.value.shape, (params.input_width,),
                             detail="input width differs from first layer width")
        if noise_on and self.spec.input_noise > 0:
            noise_seed = derive_seed(seed, "input_noise")
            if isinstance(h, Constant):
                h = Constant(gaussian_noise_inputs(h.data, self.spec.input_noise, noise_seed))
            else:
                h = ops.gaussian_noise(h, self.spec.input_noise, noise_seed)

        last = len(params.layers) - 1
        for i, layer in enumerate(params.layers):
            if sample_weights:
                z = local_reparam_node(h, layer.weight, layer.log_sigma2, derive_seed(seed, "weights", i))
            else:
                z = ops.matmul(h, layer.weight)
            z = ops.add(z, layer.bias)
            if i == last:
                h = z
                break
            h = ops.leaky_relu(z, self.spec.leaky_slope)
            if noise_on and self.spec.dropout_rate > 0:
                h = ops.dropout(h, self.spec.dropout_rate, derive_seed(seed, "dropout", i))

        return PredictiveNodes(logits=h, probs=ops.softmax(h), log_probs=ops.log_softmax(h))

    def forward(self, params: ParamSet, batch, noise_on: bool = False, seed: int = 0,
                sample_weights: Optional[bool] = None) -> PredictiveOutput:
        """Evaluate the forward pass on a Batch or input array."""
        inputs = _inputs_of(batch)
        if inputs.shape[1] != params.input_width:
            raise ShapeError("forward", inputs.shape, (params.input_width,),
                             detail="input width differs from first layer width")
        nodes = self.build(params, Constant(inputs), noise_on, seed, sample_weights)
        probs = evaluate(nodes.probs)
        log_probs = evaluate(nodes.log_probs)
        return PredictiveOutput(probs=probs, log_probs=log_probs)

    def predict(self, params: ParamSet, inputs: np.ndarray) -> np.ndarray:
        return np.argmax(self.forward(params, inputs).probs, axis=1)

    def error_rate(self, params: ParamSet, inputs: np.ndarray, labels: np.ndarray) -> float:
        """Test error in percent with noise off and mean weights."""
        labels = np.asarray(labels)
        if labels.size == 0:
            return 0.0
        return float(100.0 * np.mean(self.predict(params, inputs) != labels))

    def sensitivities(self, params: ParamSet, inputs: np.ndarray) -> np.ndarray:
        """
        Frobenius norm of d p(y|x) / d x for every row of inputs.

        Rows do not interact in the forward pass, so one backward pass per
        class yields that class's Jacobian row for every example at once.
        """
        inputs = _inputs_of(inputs)
        if inputs.shape[1] != params.input_width:
            raise ShapeError("sensitivity", inputs.shape, (params.input_width,))
        x = Parameter(inputs, name="x")
        probs = self.build(params, x, noise_on=False, sample_weights=False).probs
        evaluate(probs)

        squared = np.zeros(inputs.shape[0])
        for k in range(self.spec.n_classes):
            seed_grad = np.zeros_like(probs.value)
            seed_grad[:, k] = 1.0
            grad_x = backward(probs, output_grad=seed_grad)[x]
            squared += np.sum(grad_x ** 2, axis=1)
        return np.sqrt(squared)

    def sensitivity(self, params: ParamSet, x: np.ndarray) -> float:
        """Jacobian Frobenius norm at a single example."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 1:
            raise ShapeError("sensitivity", x.shape, detail="expected a single example")
        return float(self.sensitivities(params, x[None, :])[0])
