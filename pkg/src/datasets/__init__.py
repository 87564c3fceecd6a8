"""Synthetic datasets, preprocessing and batch sampling."""

from src.datasets.augment import augment_gaussian, gaussian_noise_inputs
from src.datasets.batch import UNLABELED, Batch, SSLDataset
from src.datasets.io import read_dataset_csv, write_dataset_csv
from src.datasets.sampler import SSLBatchSampler
from src.datasets.synthetic import GENERATORS, make_rings, make_two_moons
from src.datasets.zca import DEFAULT_ZCA_EPSILON, ZcaTransform, apply_zca, fit_zca

__all__ = [
    "DEFAULT_ZCA_EPSILON",
    "GENERATORS",
    "UNLABELED",
    "Batch",
    "SSLBatchSampler",
    "SSLDataset",
    "ZcaTransform",
    "apply_zca",
    "augment_gaussian",
    "fit_zca",
    "gaussian_noise_inputs",
    "make_rings",
    "make_two_moons",
    "read_dataset_csv",
    "write_dataset_csv",
]
