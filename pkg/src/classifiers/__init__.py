"""Probabilistic MLP classifiers and their checkpoint format."""

from src.classifiers.checkpoint import load_checkpoint, save_checkpoint
from src.classifiers.mlp import (
    LayerParams,
    MLPClassifier,
    ModelSpec,
    ParamSet,
    PredictiveNodes,
    PredictiveOutput,
)

__all__ = [
    "LayerParams",
    "MLPClassifier",
    "ModelSpec",
    "ParamSet",
    "PredictiveNodes",
    "PredictiveOutput",
    "load_checkpoint",
    "save_checkpoint",
]
