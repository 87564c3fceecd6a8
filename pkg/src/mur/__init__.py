"""Maximum uncertainty regularization: virtual-point solvers and the MUR loss."""

from src.mur.diagnostics import LowerBoundReport, linearization_lower_bound, monotone_trace_fraction
from src.mur.entropy import entropy_and_gradient, entropy_gradient, predictive_entropy
from src.mur.loss import mur_loss
from src.mur.radius import default_radius, median_nn_distance
from src.mur.solvers import (
    SOLVERS,
    MurConfig,
    TraceStep,
    VirtualPointBatch,
    VirtualPointResult,
    find_virtual_points,
    grid_search_maximum,
    lagrange_multiplier,
    lagrangian_gradient,
    model_entropy_at,
    project_to_ball,
    random_point_on_sphere,
    virtual_point_direct,
    virtual_point_lagrangian_ga,
    virtual_point_pga,
)
from src.mur.virtual_points import read_virtual_points, write_virtual_points

__all__ = [
    "SOLVERS",
    "LowerBoundReport",
    "MurConfig",
    "TraceStep",
    "VirtualPointBatch",
    "VirtualPointResult",
    "default_radius",
    "entropy_and_gradient",
    "entropy_gradient",
    "find_virtual_points",
    "grid_search_maximum",
    "lagrange_multiplier",
    "lagrangian_gradient",
    "linearization_lower_bound",
    "median_nn_distance",
    "model_entropy_at",
    "monotone_trace_fraction",
    "mur_loss",
    "predictive_entropy",
    "project_to_ball",
    "random_point_on_sphere",
    "read_virtual_points",
    "virtual_point_direct",
    "virtual_point_lagrangian_ga",
    "virtual_point_pga",
    "write_virtual_points",
]
