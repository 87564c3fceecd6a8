"""
Empirical checks on the virtual-point approximation.

- lower-bound fraction: how often the linearization f(x0) + g0^T (x - x0)
  underestimates the true entropy at the direct virtual point
- monotone fraction: how often a PGA entropy trace never decreases
"""

import logging
from dataclasses import dataclass

import numpy as np

from src.mur.entropy import entropy_and_gradient
from src.mur.solvers import DEGENERATE_NORM, pga_batch

logger = logging.getLogger(__name__)


@dataclass
class LowerBoundReport:
    fraction: float
    n_points: int
    mean_gap: float


def linearization_lower_bound(model, params, x0: np.ndarray, radius: float) -> LowerBoundReport:
    """
    Fraction of rows where H(x*) >= H(x0) + g0^T (x* - x0) at the direct point.

    At the direct point the linear term equals r * ||g0||. Rows with a
    degenerate gradient are skipped.
    """
    x0 = np.atleast_2d(np.asarray(x0, dtype=np.float64))
    h0, g0 = entropy_and_gradient(model, params, x0)
    norms = np.linalg.norm(g0, axis=1)
    usable = norms >= DEGENERATE_NORM
    if not np.any(usable):
        return LowerBoundReport(fraction=0.0, n_points=0, mean_gap=0.0)

    x0, h0, g0, norms = x0[usable], h0[usable], g0[usable], norms[usable]
    x_star = x0 + radius * g0 / norms[:, None]
    h_star, _ = entropy_and_gradient(model, params, x_star)
    linear = h0 + radius * norms
    gap = h_star - linear
    return LowerBoundReport(fraction=float(np.mean(gap >= 0.0)), n_points=int(len(x0)),
                            mean_gap=float(np.mean(gap)))


def monotone_trace_fraction(model, params, x0: np.ndarray, radius: float,
                            step_size: float = 0.01, steps: int = 5, tolerance: float = 1e-12) -> float:
    """Fraction of rows whose PGA entropy trace is non-decreasing."""
    trace = pga_batch(lambda x: entropy_and_gradient(model, params, x),
                      x0, radius, step_size, steps)
    increments = np.diff(trace.entropies, axis=0)
    monotone = np.all(increments >= -tolerance, axis=0)
    return float(np.mean(monotone))
