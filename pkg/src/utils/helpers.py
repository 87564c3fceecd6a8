"""
General helper functions: seed derivation, config hashing, summary statistics.
"""

import hashlib
import json
import zlib
from typing import Any, Dict, Iterable, Tuple, Union

import numpy as np

SeedKey = Union[int, str]


def _key_to_int(key: SeedKey) -> int:
    if isinstance(key, str):
        # crc32 is stable across interpreter runs, unlike hash()
        return zlib.crc32(key.encode("utf-8"))
    return int(key) & 0xFFFFFFFF


def derive_seed(base_seed: int, *keys: SeedKey) -> int:
    """
    Derive an independent 32-bit seed from a base seed and a path of keys.

    The same (base_seed, keys) always produces the same seed, and different
    key paths produce statistically independent streams.
    """
    entropy = [int(base_seed) & 0xFFFFFFFF] + [_key_to_int(k) for k in keys]
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])


def make_rng(base_seed: int, *keys: SeedKey) -> np.random.Generator:
    """Create a numpy Generator seeded by derive_seed."""
    return np.random.default_rng(derive_seed(base_seed, *keys))


def canonical_json(data: Any) -> str:
    """Serialize data with sorted keys so that field order never matters."""
    return json.dumps(data, sort_keys=True, separators=(",", ":"), default=_json_default)


def _json_default(value: Any):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, tuple):
        return list(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def config_hash(config_dict: Dict[str, Any], length: int = 12) -> str:
    """Short sha256 digest of a canonicalized configuration dictionary."""
    digest = hashlib.sha256(canonical_json(config_dict).encode("utf-8")).hexdigest()
    return digest[:length]


def mean_and_std(values: Iterable[float]) -> Tuple[float, float]:
    """
    Mean and sample standard deviation (ddof=1).

    A single value has standard deviation 0.
    """
    arr = np.asarray(list(values), dtype=np.float64)
    if arr.size == 0:
        raise ValueError("mean_and_std needs at least one value")
    mean = float(np.mean(arr))
    std = float(np.std(arr, ddof=1)) if arr.size > 1 else 0.0
    return mean, std


def row_norms(x: np.ndarray) -> np.ndarray:
    """Euclidean norm along the last axis, keeping that axis for broadcasting."""
    return np.linalg.norm(x, axis=-1, keepdims=True)
