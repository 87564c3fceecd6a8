"""
Parameter checkpoints.

Binary layout (`<stem>.bin`), all little-endian:
    int64  layer count L
    int64  variational flag (0 or 1)
    int64  fan_in, fan_out for each of the L layers
    float64 data, per layer: weight (row-major), bias, log sigma^2 if variational

A YAML sidecar (`<stem>.yaml`) records the ModelSpec, seed, step and which
network (student or teacher) was saved.
"""

import logging
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np
import yaml

from src.classifiers.mlp import ModelSpec, ParamSet
from src.utils.errors import ShapeError, UsageError

HEADER_DTYPE = np.dtype("<i8")
DATA_DTYPE = np.dtype("<f8")
FORMAT_VERSION = 1

logger = logging.getLogger(__name__)


def _paths(path: Union[str, Path]) -> Tuple[Path, Path]:
    path = Path(path)
    stem = path.with_suffix("") if path.suffix in (".bin", ".yaml") else path
    return stem.with_suffix(".bin"), stem.with_suffix(".yaml")


def save_checkpoint(path: Union[str, Path], spec: ModelSpec, params: ParamSet,
                    seed: int, step: int, network: str = "student",
                    extra: Optional[Dict[str, Any]] = None) -> Path:
    """
    Write parameters and their metadata sidecar.

    Returns:
        Path of the binary file.
    """
    bin_path, meta_path = _paths(path)
    bin_path.parent.mkdir(parents=True, exist_ok=True)

    header = [len(params.layers), int(params.variational)]
    chunks = []
    for layer in params.layers:
        header.extend(layer.weight.data.shape)
        chunks.append(layer.weight.data.ravel())
        chunks.append(layer.bias.data.ravel())
        if params.variational:
            chunks.append(layer.log_sigma2.data.ravel())

    with open(bin_path, "wb") as f:
        f.write(np.asarray(header, dtype=HEADER_DTYPE).tobytes())
        f.write(np.concatenate(chunks).astype(DATA_DTYPE).tobytes())

    metadata = {
        "format_version": FORMAT_VERSION,
        "model_spec": spec.to_dict(),
        "seed": int(seed),
        "step": int(step),
        "network": network,
    }
    if extra:
        metadata.update(extra)
    with open(meta_path, "w") as f:
        yaml.safe_dump(metadata, f, default_flow_style=False, sort_keys=True)

    logger.debug(f"Saved checkpoint {bin_path} (step {step}, {network})")
    return bin_path


def load_checkpoint(path: Union[str, Path], trainable: bool = False) -> Tuple[ModelSpec, ParamSet, Dict[str, Any]]:
    """
    Read a checkpoint written by `save_checkpoint`.

    Returns:
        (ModelSpec, ParamSet, metadata dict).

    Raises:
        FileNotFoundError: Either file is missing.
        ShapeError: Header and ModelSpec or data length disagree.
    """
    bin_path, meta_path = _paths(path)
    if not bin_path.exists():
        raise FileNotFoundError(f"Checkpoint not found: {bin_path}")
    if not meta_path.exists():
        raise FileNotFoundError(f"Checkpoint metadata not found: {meta_path}")

    with open(meta_path, "r") as f:
        metadata = yaml.safe_load(f) or {}
    if metadata.get("format_version") != FORMAT_VERSION:
        raise UsageError(f"unsupported checkpoint format {metadata.get('format_version')}")
    spec = ModelSpec(**metadata["model_spec"])

    raw = bin_path.read_bytes()
    n_layers, variational = np.frombuffer(raw[:16], dtype=HEADER_DTYPE)
    header_len = 2 + 2 * int(n_layers)
    dims = np.frombuffer(raw[:8 * header_len], dtype=HEADER_DTYPE)[2:].reshape(-1, 2)
    data = np.frombuffer(raw[8 * header_len:], dtype=DATA_DTYPE).astype(np.float64)

    expected_widths = [int(dims[0, 0])] + [int(d) for d in dims[:, 1]]
    if expected_widths != spec.widths:
        raise ShapeError("load_checkpoint", spec.widths, expected_widths, detail="header vs model spec")

    per_layer = 3 if variational else 2
    expected = sum(int(m) * int(n) * (per_layer - 1) + int(n) for m, n in dims)
    if data.size != expected:
        raise ShapeError("load_checkpoint", (data.size,), (expected,), detail="data length")

    weights, biases, log_vars = [], [], []
    offset = 0
    for m, n in dims:
        m, n = int(m), int(n)
        weights.append(data[offset:offset + m * n].reshape(m, n))
        offset += m * n
        biases.append(data[offset:offset + n].copy())
        offset += n
        if variational:
            log_vars.append(data[offset:offset + m * n].reshape(m, n))
            offset += m * n

    params = ParamSet.from_arrays(weights, biases, log_vars if variational else None, trainable=trainable)
    return spec, params, metadata
