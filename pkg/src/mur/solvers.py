"""
Solvers for the most-uncertain virtual point

    x* = argmax_{||x - x0|| <= r} H(p(y|x))

Four strategies are available:
- direct: one linearization step, x0 + r * g0 / ||g0||
- pga: projected gradient ascent on H starting from x0
- lagrangian-ga: gradient ascent on the relaxed objective
  F(x) = H(x) - lambda*(x) (||x - x0|| - r) with lambda*(x) = ||x - x0|| ||g0|| / r
- random: a uniform point on the radius-r sphere (regularization baseline)

Every solver works on the mean network with noise off.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

from src.mur.entropy import entropy_and_gradient, predictive_entropy
from src.utils.errors import DegenerateGradientError, NumericalError, UsageError
from src.utils.helpers import derive_seed, row_norms

SOLVERS = ("direct", "pga", "lagrangian-ga", "random")
SOLVER_ALIASES = {"laga": "lagrangian-ga", "rr": "random"}

DEGENERATE_NORM = 1e-12
LAGA_INIT_FRACTION = 1e-3

EntropyFn = Callable[[np.ndarray], Tuple[np.ndarray, np.ndarray]]

logger = logging.getLogger(__name__)


def canonical_solver(name: str) -> str:
    name = SOLVER_ALIASES.get(name, name)
    if name not in SOLVERS:
        raise UsageError(f"unknown MUR solver '{name}', expected one of {SOLVERS} or {sorted(SOLVER_ALIASES)}")
    return name


@dataclass
class MurConfig:
    """Radius and solver settings for virtual-point search."""

    radius: float
    solver: str = "direct"
    step_size: float = 0.3
    steps: int = 5
    laga_init: str = "gradient"

    def __post_init__(self):
        self.solver = canonical_solver(self.solver)
        if not self.radius > 0:
            raise UsageError(f"MUR radius must be positive, got {self.radius}")
        if not self.step_size > 0:
            raise UsageError(f"MUR step size must be positive, got {self.step_size}")
        if int(self.steps) < 1:
            raise UsageError(f"MUR steps must be at least 1, got {self.steps}")
        self.steps = int(self.steps)
        if self.laga_init not in ("gradient", "random"):
            raise UsageError(f"laga_init must be 'gradient' or 'random', got {self.laga_init}")


@dataclass
class TraceStep:
    x: np.ndarray
    entropy: float
    distance: float


@dataclass
class VirtualPointResult:
    """Solver output for one example."""

    x_star: np.ndarray
    trace: List[TraceStep] = field(default_factory=list)
    g0_norm: float = 0.0
    solver: str = "direct"

    @property
    def entropies(self) -> np.ndarray:
        return np.array([step.entropy for step in self.trace])

    @property
    def distances(self) -> np.ndarray:
        return np.array([step.distance for step in self.trace])


@dataclass
class VirtualPointBatch:
    """Solver output for a batch of examples."""

    x_star: np.ndarray
    g0_norms: np.ndarray
    entropy_x0: np.ndarray
    entropy_trace: np.ndarray  # (n_recorded_steps, n)
    distance_trace: np.ndarray
    fallback_rows: List[int] = field(default_factory=list)

    @property
    def entropy_star(self) -> np.ndarray:
        return self.entropy_trace[-1]


# -- geometric building blocks -------------------------------------------

def project_to_ball(x: np.ndarray, x0: np.ndarray, radius: float) -> np.ndarray:
    """Row-wise projection onto the ball of the given radius around x0."""
    x = np.asarray(x, dtype=np.float64)
    x0 = np.asarray(x0, dtype=np.float64)
    delta = x - x0
    norms = row_norms(delta)
    outside = norms > radius
    safe = np.where(outside, norms, 1.0)
    return np.where(outside, x0 + radius * delta / safe, x)


def random_point_on_sphere(x0: np.ndarray, radius: float, seed: int) -> np.ndarray:
    """
    x0 + r * u / ||u|| with u drawn from a standard normal.

    Works on a single example or row-wise on a batch.
    """
    if radius < 0:
        raise UsageError(f"radius must be non-negative, got {radius}")
    x0 = np.asarray(x0, dtype=np.float64)
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(x0.shape)
    norms = row_norms(u)
    # Probability of a tiny norm is ~0 but redraw to keep the direction defined
    while np.any(norms < 1e-150):
        bad = (norms < 1e-150).reshape(-1)
        if u.ndim == 1:
            u = rng.standard_normal(x0.shape)
        else:
            u[bad] = rng.standard_normal((int(bad.sum()), x0.shape[-1]))
        norms = row_norms(u)
    return x0 + radius * u / norms


def virtual_point_direct(x0: np.ndarray, g0: np.ndarray, radius: float) -> VirtualPointResult:
    """
    Closed-form approximation x0 + r * g0 / ||g0||.

    Raises:
        DegenerateGradientError: ||g0|| < 1e-12, the direction is undefined.
    """
    if not radius > 0:
        raise UsageError(f"radius must be positive, got {radius}")
    x0 = np.asarray(x0, dtype=np.float64)
    g0 = np.asarray(g0, dtype=np.float64)
    norm = float(np.linalg.norm(g0))
    if norm < DEGENERATE_NORM:
        raise DegenerateGradientError(norm)
    return VirtualPointResult(x_star=x0 + radius * g0 / norm, g0_norm=norm, solver="direct")


def lagrange_multiplier(x: np.ndarray, x0: np.ndarray, g0_norm: float, radius: float) -> np.ndarray:
    """lambda*(x) = ||x - x0|| ||g0|| / r, row-wise."""
    distance = np.linalg.norm(np.asarray(x) - np.asarray(x0), axis=-1)
    return distance * g0_norm / radius


def lagrangian_gradient(entropy_grad: np.ndarray, x: np.ndarray, x0: np.ndarray,
                        g0_norm, radius: float) -> np.ndarray:
    """
    Gradient of the relaxed objective:

        dF/dx = dH/dx - ||g0|| (x - x0) / r * (2 - r / ||x - x0||)

    `g0_norm` may be a scalar or one value per row.
    """
    delta = np.asarray(x, dtype=np.float64) - np.asarray(x0, dtype=np.float64)
    distance = row_norms(delta)
    if np.any(distance <= 0):
        raise NumericalError("lagrangian gradient is singular at x = x0")
    g0_norm = np.asarray(g0_norm, dtype=np.float64)
    if g0_norm.ndim == 1:
        g0_norm = g0_norm[:, None]
    penalty = g0_norm * delta / radius * (2.0 - radius / distance)
    return entropy_grad - penalty


# -- iterative solvers on batches ----------------------------------------

@dataclass
class SolverTrace:
    """Iterates of a batched solver; index 0 of each trace is the start point."""

    x: np.ndarray
    iterates: np.ndarray  # (n_recorded, n, d)
    entropies: np.ndarray  # (n_recorded, n)
    distances: np.ndarray  # (n_recorded, n)

    def row(self, i: int) -> List[TraceStep]:
        return [TraceStep(x=self.iterates[t, i].copy(), entropy=float(self.entropies[t, i]),
                          distance=float(self.distances[t, i]))
                for t in range(len(self.entropies))]


def _check_finite(x: np.ndarray, solver: str, step: int):
    if not np.all(np.isfinite(x)):
        raise NumericalError(f"{solver}: non-finite iterate at step {step}")


def _trace(iterates, entropies, x0) -> SolverTrace:
    stacked = np.stack(iterates)
    return SolverTrace(
        x=stacked[-1],
        iterates=stacked,
        entropies=np.vstack(entropies),
        distances=np.linalg.norm(stacked - x0[None], axis=2),
    )


def pga_batch(entropy_fn: EntropyFn, x0: np.ndarray, radius: float, step_size: float,
              steps: int) -> SolverTrace:
    """
    Projected gradient ascent from x0 for every row.

    Each step moves along the entropy gradient and projects back onto the
    ball. The trace holds x0 and the s iterates after it.
    """
    x0 = np.atleast_2d(np.asarray(x0, dtype=np.float64))
    x = x0.copy()
    h, g = entropy_fn(x)
    iterates, entropies = [x], [h]
    for t in range(steps):
        x = project_to_ball(x + step_size * g, x0, radius)
        _check_finite(x, "pga", t + 1)
        h, g = entropy_fn(x)
        iterates.append(x)
        entropies.append(h)
    return _trace(iterates, entropies, x0)


def laga_batch(entropy_fn: EntropyFn, x0: np.ndarray, g0: np.ndarray, radius: float,
               step_size: float, steps: int, init: str = "gradient",
               seed: int = 0) -> SolverTrace:
    """
    Lagrangian gradient ascent from a small in-ball seed point.

    The seed x1 = x0 + 1e-3 * r * u / ||u|| follows the entropy gradient
    (init="gradient") or a random direction (init="random"); rows with a
    degenerate gradient always use a random direction. The trace holds x1
    and the s iterates after it; the final point may leave the ball.
    """
    x0 = np.atleast_2d(np.asarray(x0, dtype=np.float64))
    g0 = np.atleast_2d(np.asarray(g0, dtype=np.float64))
    g0_norms = np.linalg.norm(g0, axis=1)

    directions = random_point_on_sphere(np.zeros_like(x0), 1.0, derive_seed(seed, "laga_init"))
    if init == "gradient":
        usable = g0_norms >= DEGENERATE_NORM
        safe = np.where(usable, g0_norms, 1.0)[:, None]
        directions = np.where(usable[:, None], g0 / safe, directions)
    x = x0 + LAGA_INIT_FRACTION * radius * directions

    h, g = entropy_fn(x)
    iterates, entropies = [x], [h]
    for t in range(steps):
        x = x + step_size * lagrangian_gradient(g, x, x0, g0_norms, radius)
        _check_finite(x, "lagrangian-ga", t + 1)
        h, g = entropy_fn(x)
        iterates.append(x)
        entropies.append(h)
    return _trace(iterates, entropies, x0)


def _model_entropy_fn(model, params) -> EntropyFn:
    return lambda x: entropy_and_gradient(model, params, x)


def virtual_point_pga(model, params, x0: np.ndarray, cfg: MurConfig) -> VirtualPointResult:
    """Projected gradient ascent for a single example, s steps starting at x0."""
    x0 = np.asarray(x0, dtype=np.float64)
    entropy_fn = _model_entropy_fn(model, params)
    _, g0 = entropy_fn(x0[None, :])
    trace = pga_batch(entropy_fn, x0[None, :], cfg.radius, cfg.step_size, cfg.steps)
    return VirtualPointResult(x_star=trace.x[0], trace=trace.row(0),
                              g0_norm=float(np.linalg.norm(g0)), solver="pga")


def virtual_point_lagrangian_ga(model, params, x0: np.ndarray, cfg: MurConfig,
                                seed: int = 0) -> VirtualPointResult:
    """Lagrangian gradient ascent for a single example."""
    x0 = np.asarray(x0, dtype=np.float64)
    entropy_fn = _model_entropy_fn(model, params)
    _, g0 = entropy_fn(x0[None, :])
    trace = laga_batch(entropy_fn, x0[None, :], g0, cfg.radius, cfg.step_size,
                       cfg.steps, cfg.laga_init, seed)
    return VirtualPointResult(x_star=trace.x[0], trace=trace.row(0),
                              g0_norm=float(np.linalg.norm(g0)), solver="lagrangian-ga")


def find_virtual_points(model, params, x0: np.ndarray, cfg: MurConfig, seed: int,
                        entropy_fn: Optional[EntropyFn] = None) -> VirtualPointBatch:
    """
    Virtual points for every row of x0 with the configured solver.

    Rows whose entropy gradient is degenerate fall back to a random point on
    the sphere (direct and pga solvers).
    """
    x0 = np.atleast_2d(np.asarray(x0, dtype=np.float64))
    entropy_fn = entropy_fn or _model_entropy_fn(model, params)
    h0, g0 = entropy_fn(x0)
    g0_norms = np.linalg.norm(g0, axis=1)
    degenerate = g0_norms < DEGENERATE_NORM
    fallback_rows: List[int] = []

    if cfg.solver in ("random", "direct"):
        if cfg.solver == "random":
            x_star = random_point_on_sphere(x0, cfg.radius, derive_seed(seed, "random_point"))
        else:
            safe = np.where(degenerate, 1.0, g0_norms)[:, None]
            x_star = x0 + cfg.radius * g0 / safe
            if np.any(degenerate):
                fallback = random_point_on_sphere(x0, cfg.radius, derive_seed(seed, "fallback"))
                x_star = np.where(degenerate[:, None], fallback, x_star)
                fallback_rows = [int(i) for i in np.flatnonzero(degenerate)]
        h_star, _ = entropy_fn(x_star)
        entropy_trace = np.vstack([h0, h_star])
        distance_trace = np.vstack([np.zeros(len(x0)), np.linalg.norm(x_star - x0, axis=1)])
    else:
        if cfg.solver == "pga":
            trace = pga_batch(entropy_fn, x0, cfg.radius, cfg.step_size, cfg.steps)
        else:
            trace = laga_batch(entropy_fn, x0, g0, cfg.radius, cfg.step_size,
                               cfg.steps, cfg.laga_init, seed)
        x_star = trace.x
        entropy_trace, distance_trace = trace.entropies, trace.distances
        # PGA never leaves x0 when the gradient there vanishes
        if cfg.solver == "pga" and np.any(degenerate):
            fallback = random_point_on_sphere(x0, cfg.radius, derive_seed(seed, "fallback"))
            x_star = np.where(degenerate[:, None], fallback, x_star)
            fallback_rows = [int(i) for i in np.flatnonzero(degenerate)]
            # Last trace row describes the point actually used
            h_star, _ = entropy_fn(x_star)
            entropy_trace, distance_trace = entropy_trace.copy(), distance_trace.copy()
            entropy_trace[-1, degenerate] = h_star[degenerate]
            distance_trace[-1, degenerate] = np.linalg.norm(x_star - x0, axis=1)[degenerate]

    if fallback_rows:
        logger.debug(f"{cfg.solver}: random fallback for degenerate rows {fallback_rows}")

    return VirtualPointBatch(x_star, g0_norms, h0, entropy_trace, distance_trace, fallback_rows)


def grid_search_maximum(entropy_at: Callable[[np.ndarray], np.ndarray], x0: np.ndarray,
                        radius: float, n_points: int = 10_000) -> Tuple[np.ndarray, float]:
    """
    Dense polar-grid search of the entropy maximum over a 2-D ball.

    Args:
        entropy_at: Maps an (m, 2) array of points to m entropies.
        x0: Ball centre (2-D).
        radius: Ball radius.
        n_points: Approximate number of grid points.

    Returns:
        (best point, best entropy).
    """
    x0 = np.asarray(x0, dtype=np.float64)
    if x0.shape != (2,):
        raise UsageError("grid search is only defined for 2-D inputs")
    n_side = int(np.ceil(np.sqrt(n_points)))
    radii = np.linspace(0.0, radius, n_side)
    angles = np.linspace(0.0, 2.0 * np.pi, n_side, endpoint=False)
    rr, aa = np.meshgrid(radii, angles)
    points = x0 + np.stack([rr.ravel() * np.cos(aa.ravel()), rr.ravel() * np.sin(aa.ravel())], axis=1)
    values = np.asarray(entropy_at(points))
    best = int(np.argmax(values))
    return points[best], float(values[best])


def model_entropy_at(model, params) -> Callable[[np.ndarray], np.ndarray]:
    """Entropy of the mean network at each row of a point array."""
    return lambda points: predictive_entropy(model.forward(params, points).probs)
