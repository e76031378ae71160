"""
Coverage-aware ABS placement.

Grid points carry SIR-gap weights w_i = max(0, gamma_TBS - gamma_i) measured on
the terrestrial-only network. Centers are chosen to maximize the weighted
average success probability

    J = sum_i w_i K(||x_i - mu_a(i)|| / L) / sum_i w_i,
    K(d) = (1 + d^alpha / m)^(-m)    (exp(-d^alpha) as m -> inf),

by alternating kernel-based assignment and kernel-weighted centroid updates.
The classical weighted K-means objective sum_i w_i ||x_i - mu_a(i)||² is the
baseline.

Example:
    samples = WeightedSamples(points, weights)
    init = weighted_kmeanspp(samples, 4, RngStream(7))
    state = fading_aware_kmeans(samples, 4, alpha=2, m=2, init=init, length_scale=200)
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.spatial.distance import cdist

from .model import NetworkConfig, db_to_linear, linear_to_db
from .numerics import RngStream, as_generator
from .sim import Deployment, sir_map
from .types import FloatArray, Strategy

logger = logging.getLogger(__name__)

ASSIGN_TOL = 1e-12
CENTROID_TOL = 1e-9
SIR_FLOOR_DB = -100.0

type Extent = tuple[float, float, float, float]


@dataclass(frozen=True)
class WeightedSamples:
    """Sample points (n, 2) in meters with nonnegative weights (n,)."""

    points: FloatArray
    weights: FloatArray

    def __post_init__(self) -> None:
        points = np.asarray(self.points, dtype=float).reshape(-1, 2)
        weights = np.asarray(self.weights, dtype=float).ravel()
        if len(points) != len(weights):
            raise ValueError(f"{len(points)} points but {len(weights)} weights")
        if np.any(weights < 0) or not np.all(np.isfinite(weights)):
            raise ValueError("Weights must be finite and nonnegative")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "weights", weights)

    def __len__(self) -> int:
        return len(self.weights)

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum())

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"x": self.points[:, 0], "y": self.points[:, 1], "w": self.weights})

    @classmethod
    def from_frame(cls, frame: pd.DataFrame) -> WeightedSamples:
        missing = {"x", "y", "w"} - set(frame.columns)
        if missing:
            raise ValueError(f"Weighted samples need columns x, y, w; missing {sorted(missing)}")
        return cls(frame[["x", "y"]].to_numpy(dtype=float), frame["w"].to_numpy(dtype=float))


@dataclass(frozen=True)
class ClusterState:
    """Centers (K, 2), the cluster of every sample and the objective on that pair."""

    centers: FloatArray
    assignment: np.ndarray
    objective: float
    iterations: int = 0
    converged: bool = False
    history: list[float] = field(default_factory=list)
    decreases: int = 0
    assignment_drops: int = 0

    def to_dict(self) -> dict:
        return {
            "centers": self.centers.tolist(),
            "assignment": self.assignment.tolist(),
            "objective": self.objective,
            "iterations": self.iterations,
            "converged": self.converged,
            "history": list(self.history),
            "centroid_step_decreases": self.decreases,
            "assignment_step_drops": self.assignment_drops,
        }


# ========== Objectives ==========


def fading_kernel(d: FloatArray | float, alpha: float, m: float) -> FloatArray:
    """Success probability kernel (1 + d^alpha/m)^(-m); m = inf gives exp(-d^alpha)."""
    d = np.asarray(d, dtype=float)
    if math.isinf(m):
        return np.exp(-(d**alpha))
    return np.exp(-m * np.log1p(d**alpha / m))


def _distances(samples: WeightedSamples, centers: FloatArray) -> FloatArray:
    return cdist(samples.points, np.asarray(centers, dtype=float).reshape(-1, 2))


def fading_objective(
    samples: WeightedSamples,
    centers: FloatArray,
    assignment: np.ndarray | None = None,
    alpha: float = 2.0,
    m: float = 2.0,
    length_scale: float = 1.0,
) -> float:
    """Weighted average success probability; the best center per sample when ``assignment`` is None."""
    total = samples.total_weight
    if total == 0 or len(centers) == 0:
        return 0.0
    kernel = fading_kernel(_distances(samples, centers) / length_scale, alpha, m)
    served = kernel.max(axis=1) if assignment is None else kernel[np.arange(len(samples)), assignment]
    return float(np.dot(samples.weights, served) / total)


def classical_objective(samples: WeightedSamples, centers: FloatArray, assignment: np.ndarray | None = None) -> float:
    """sum_i w_i ||x_i - mu||², nearest center when ``assignment`` is None."""
    sq = _distances(samples, centers) ** 2
    served = sq.min(axis=1) if assignment is None else sq[np.arange(len(samples)), assignment]
    return float(np.dot(samples.weights, served))


# ========== Initialization ==========


def weighted_kmeanspp(samples: WeightedSamples, K: int, rng: RngStream | np.random.Generator) -> ClusterState:
    """K-means++ seeding with selection probabilities proportional to w_i D(x_i)²."""
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    gen = as_generator(rng)
    n = len(samples)
    w = samples.weights if samples.total_weight > 0 else np.ones(n)
    centers = [samples.points[gen.choice(n, p=w / w.sum())]]
    best = np.sum((samples.points - centers[0]) ** 2, axis=1)
    for _ in range(1, K):
        score = w * best
        probs = score / score.sum() if score.sum() > 0 else w / w.sum()
        centers.append(samples.points[gen.choice(n, p=probs)])
        best = np.minimum(best, np.sum((samples.points - centers[-1]) ** 2, axis=1))
    centers_arr = np.array(centers)
    assignment = np.argmin(_distances(samples, centers_arr), axis=1)
    return ClusterState(centers_arr, assignment, classical_objective(samples, centers_arr, assignment))


def _initial_centers(
    samples: WeightedSamples, K: int, init: ClusterState | FloatArray | None, rng: RngStream | None
) -> FloatArray:
    if init is None:
        return weighted_kmeanspp(samples, K, rng or RngStream(0)).centers.copy()
    centers = init.centers if isinstance(init, ClusterState) else np.asarray(init, dtype=float)
    if centers.shape != (K, 2):
        raise ValueError(f"Initial centers must have shape ({K}, 2), got {centers.shape}")
    return centers.astype(float).copy()


def _check_loop(K: int, epsilon: float, T_max: int) -> None:
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    if epsilon <= 0:
        raise ValueError(f"epsilon must be > 0, got {epsilon}")
    if T_max < 1:
        raise ValueError(f"T_max must be >= 1, got {T_max}")


# ========== Path-loss and fading-aware clustering ==========


def fading_aware_kmeans(
    samples: WeightedSamples,
    K: int,
    alpha: float = 2.0,
    m: float = 2.0,
    epsilon: float = 1e-3,
    T_max: int = 100,
    init: ClusterState | FloatArray | None = None,
    rng: RngStream | None = None,
    length_scale: float = 1.0,
) -> ClusterState:
    """
    Alternate (i) assignment of each sample to the center with the largest
    w_i K(d_ij) and (ii) centroid updates weighted by w_i K(d_i) frozen at the
    pre-update centers, until every center moves less than ``epsilon`` or
    ``T_max`` iterations pass. The best iterate is returned.

    An empty cluster is reseeded at the worst-served weighted sample,
    argmax_i w_i (1 - K_i).
    """
    _check_loop(K, epsilon, T_max)
    centers = _initial_centers(samples, K, init, rng)
    idx = np.arange(len(samples))

    def objective(c: FloatArray, a: np.ndarray) -> float:
        return fading_objective(samples, c, a, alpha, m, length_scale)

    if samples.total_weight == 0:
        logger.warning("All sample weights are zero; returning the initial centers")
        assignment = np.argmin(_distances(samples, centers), axis=1)
        return ClusterState(centers, assignment, 0.0, 0, True, [0.0])

    history: list[float] = []
    best: tuple[float, FloatArray, np.ndarray] | None = None
    previous = -math.inf
    decreases = drops = 0
    converged = False
    t = 0
    for t in range(1, T_max + 1):
        kernel = fading_kernel(_distances(samples, centers) / length_scale, alpha, m)
        assignment = np.argmax(kernel, axis=1)
        for k in np.setdiff1d(np.arange(K), assignment):
            served = kernel[idx, assignment]
            worst = int(np.argmax(samples.weights * (1 - served)))
            logger.debug("Cluster %d empty; reseeding at sample %d", k, worst)
            centers[k] = samples.points[worst]
            kernel = fading_kernel(_distances(samples, centers) / length_scale, alpha, m)
            assignment[worst] = k
        assigned = objective(centers, assignment)
        if assigned < previous - ASSIGN_TOL:
            drops += 1
            logger.warning("Assignment step lowered the objective: %.12g -> %.12g", previous, assigned)
        history.append(assigned)
        if best is None or assigned > best[0]:
            best = (assigned, centers.copy(), assignment.copy())

        frozen = samples.weights * kernel[idx, assignment]
        updated = centers.copy()
        for k in range(K):
            members = assignment == k
            mass = frozen[members].sum()
            if mass > 0:
                updated[k] = frozen[members] @ samples.points[members] / mass
        moved = float(np.max(np.linalg.norm(updated - centers, axis=1)))
        after = objective(updated, assignment)
        if after < assigned - CENTROID_TOL:
            decreases += 1
            logger.warning("Centroid step lowered the objective at iteration %d: %.9g -> %.9g", t, assigned, after)
        if after > best[0]:
            best = (after, updated.copy(), assignment.copy())
        centers, previous = updated, after
        logger.debug("Iteration %d: objective %.9f, max shift %.3g", t, after, moved)
        if moved < epsilon:
            converged = True
            break

    objective_value, best_centers, best_assignment = best
    history.append(previous)
    logger.info("Fading-aware clustering: K=%d, %d iterations, objective %.6f", K, t, objective_value)
    return ClusterState(best_centers, best_assignment, objective_value, t, converged, history, decreases, drops)


def grid_search_single_center(
    samples: WeightedSamples,
    alpha: float = 2.0,
    m: float = 2.0,
    length_scale: float = 1.0,
    resolution: int = 201,
) -> tuple[FloatArray, float]:
    """Brute-force K = 1 optimum of the fading objective over a grid spanning the samples' bounding box."""
    if resolution < 2:
        raise ValueError(f"resolution must be >= 2, got {resolution}")
    (xmin, ymin), (xmax, ymax) = samples.points.min(axis=0), samples.points.max(axis=0)
    gx, gy = np.meshgrid(np.linspace(xmin, xmax, resolution), np.linspace(ymin, ymax, resolution))
    candidates = np.column_stack([gx.ravel(), gy.ravel()])
    if samples.total_weight == 0:
        return candidates[0], 0.0
    kernel = fading_kernel(cdist(samples.points, candidates) / length_scale, alpha, m)
    values = samples.weights @ kernel / samples.total_weight
    best = int(np.argmax(values))
    return candidates[best], float(values[best])


# ========== Classical baseline ==========


def classical_weighted_kmeans(
    samples: WeightedSamples,
    K: int,
    epsilon: float = 1e-3,
    T_max: int = 100,
    init: ClusterState | FloatArray | None = None,
    rng: RngStream | None = None,
) -> ClusterState:
    """Weighted Lloyd iterations on sum_i w_i ||x_i - mu||², same stopping rule."""
    _check_loop(K, epsilon, T_max)
    centers = _initial_centers(samples, K, init, rng)
    if samples.total_weight == 0:
        logger.warning("All sample weights are zero; returning the initial centers")
        assignment = np.argmin(_distances(samples, centers), axis=1)
        return ClusterState(centers, assignment, 0.0, 0, True, [0.0])

    history: list[float] = []
    converged = False
    t = 0
    for t in range(1, T_max + 1):
        sq = _distances(samples, centers) ** 2
        assignment = np.argmin(sq, axis=1)
        for k in np.setdiff1d(np.arange(K), assignment):
            far = int(np.argmax(samples.weights * sq[np.arange(len(samples)), assignment]))
            centers[k] = samples.points[far]
            assignment[far] = k
            sq = _distances(samples, centers) ** 2
        updated = centers.copy()
        for k in range(K):
            members = assignment == k
            mass = samples.weights[members].sum()
            if mass > 0:
                updated[k] = samples.weights[members] @ samples.points[members] / mass
        value = classical_objective(samples, updated, assignment)
        if history and value > history[-1] + CENTROID_TOL * max(1.0, abs(history[-1])):
            logger.warning("Classical objective increased at iteration %d", t)
        history.append(value)
        moved = float(np.max(np.linalg.norm(updated - centers, axis=1)))
        centers = updated
        if moved < epsilon:
            converged = True
            break
    assignment = np.argmin(_distances(samples, centers), axis=1)
    return ClusterState(centers, assignment, classical_objective(samples, centers, assignment), t, converged, history)


# ========== Coverage maps and strategies ==========


def make_grid(extent: Extent, nx: int, ny: int) -> FloatArray:
    """Cell centres of an nx-by-ny grid over (xmin, xmax, ymin, ymax), row-major from ymin."""
    xmin, xmax, ymin, ymax = extent
    if nx < 1 or ny < 1 or xmax <= xmin or ymax <= ymin:
        raise ValueError(f"Invalid grid {nx}x{ny} over {extent}")
    xs = xmin + (np.arange(nx) + 0.5) * (xmax - xmin) / nx
    ys = ymin + (np.arange(ny) + 0.5) * (ymax - ymin) / ny
    gx, gy = np.meshgrid(xs, ys)
    return np.column_stack([gx.ravel(), gy.ravel()])


def realize_tbs(cfg: NetworkConfig, extent: Extent, rng: RngStream | np.random.Generator) -> FloatArray:
    """Poisson number of uniform TBS positions over the rectangle ``extent``."""
    gen = as_generator(rng)
    xmin, xmax, ymin, ymax = extent
    count = gen.poisson(cfg.lambda_TBS * (xmax - xmin) * (ymax - ymin))
    return np.column_stack([gen.uniform(xmin, xmax, count), gen.uniform(ymin, ymax, count)])


def _mean_sir_db(sir: FloatArray) -> FloatArray:
    return np.mean(10 * np.log10(np.maximum(sir, db_to_linear(SIR_FLOOR_DB))), axis=1)


def sir_gap_weights(
    grid: FloatArray,
    dep: Deployment,
    cfg: NetworkConfig,
    trials: int = 200,
    rng: RngStream | None = None,
    gamma_db: float | None = None,
    workers: int | None = None,
) -> WeightedSamples:
    """
    w_i = max(0, gamma_TBS - gamma_i) in dB, gamma_i the mean SIR at point i
    over the stations of the TBS-only deployment ``dep``. SIRs are floored at
    SIR_FLOOR_DB, so points no station reaches get a finite weight.
    """
    grid = np.asarray(grid, dtype=float).reshape(-1, 2)
    if len(grid) == 0:
        raise ValueError("Grid must not be empty")
    if dep.n_abs:
        raise ValueError(f"SIR-gap weights need a TBS-only deployment, got {dep.n_abs} ABSs")
    tbs_xy = dep.tbs_positions[:, :2]
    target = linear_to_db(cfg.gamma_TBS) if gamma_db is None else gamma_db
    sir = sir_map(np.empty((0, 2)), tbs_xy, grid, cfg, trials, rng, workers)
    return WeightedSamples(grid, np.maximum(0.0, target - _mean_sir_db(sir)))


@dataclass(frozen=True)
class StrategyResult:
    strategy: Strategy
    abs_xy: FloatArray
    coverage_map: FloatArray
    aggregate: float


def compare_strategies(
    cfg: NetworkConfig,
    grid: FloatArray,
    K: int,
    gamma_db: float | None = None,
    trials: int = 200,
    rng: RngStream | None = None,
    tbs_xy: FloatArray | None = None,
    extent: Extent | None = None,
    alpha: float = 2.0,
    m: float = 2.0,
    length_scale: float | None = None,
    epsilon: float = 1e-3,
    T_max: int = 100,
    workers: int | None = None,
) -> dict[Strategy, StrategyResult]:
    """
    Coverage maps of TBS-only, random, classical and fading-aware ABS placements.

    All four maps share one TBS realization and the same fading streams, so
    K = 0 reproduces the TBS-only map exactly.
    """
    if K < 0 or K > cfg.N:
        raise ValueError(f"K must lie in [0, {cfg.N}], got {K}")
    rng = rng or RngStream(0)
    grid = np.asarray(grid, dtype=float).reshape(-1, 2)
    if extent is None:
        (xmin, ymin), (xmax, ymax) = grid.min(axis=0), grid.max(axis=0)
        extent = (float(xmin), float(xmax), float(ymin), float(ymax))
    if tbs_xy is None:
        tbs_xy = realize_tbs(cfg, extent, rng.substream(1))
    gamma_db = linear_to_db(cfg.gamma_TBS) if gamma_db is None else gamma_db
    gamma = db_to_linear(gamma_db)
    scale = length_scale or cfg.gap
    map_rng = rng.substream(2)

    def evaluate(strategy: Strategy, abs_xy: FloatArray) -> tuple[StrategyResult, FloatArray]:
        sir = sir_map(abs_xy, tbs_xy, grid, cfg, trials, map_rng, workers)
        coverage = np.mean(sir >= gamma, axis=1)
        result = StrategyResult(strategy, abs_xy, coverage, float(coverage.mean()))
        logger.info("%s: aggregate coverage %.4f", strategy, result.aggregate)
        return result, sir

    baseline, tbs_sir = evaluate(Strategy.TBS_ONLY, np.empty((0, 2)))
    results = {Strategy.TBS_ONLY: baseline}
    if K == 0:
        for strategy in (Strategy.RANDOM, Strategy.CLASSICAL, Strategy.FADING_AWARE):
            results[strategy] = StrategyResult(strategy, np.empty((0, 2)), baseline.coverage_map, baseline.aggregate)
        return results

    samples = WeightedSamples(grid, np.maximum(0.0, gamma_db - _mean_sir_db(tbs_sir)))
    gen = rng.substream(3).generator()
    xmin, xmax, ymin, ymax = extent
    random_xy = np.column_stack([gen.uniform(xmin, xmax, K), gen.uniform(ymin, ymax, K)])
    init = weighted_kmeanspp(samples, K, rng.substream(4))
    classical = classical_weighted_kmeans(samples, K, epsilon, T_max, init)
    fading = fading_aware_kmeans(samples, K, alpha, m, epsilon, T_max, init, length_scale=scale)

    results[Strategy.RANDOM] = evaluate(Strategy.RANDOM, random_xy)[0]
    results[Strategy.CLASSICAL] = evaluate(Strategy.CLASSICAL, classical.centers)[0]
    results[Strategy.FADING_AWARE] = evaluate(Strategy.FADING_AWARE, fading.centers)[0]
    return results


def strategies_frame(results: dict[Strategy, StrategyResult]) -> pd.DataFrame:
    """One row per strategy: strategy, k, aggregate."""
    return pd.DataFrame(
        [{"strategy": str(s), "k": len(r.abs_xy), "aggregate": r.aggregate} for s, r in results.items()]
    )


def placement_frame(centers: Sequence[Sequence[float]]) -> pd.DataFrame:
    centers = np.asarray(centers, dtype=float).reshape(-1, 2)
    return pd.DataFrame({"k": np.arange(len(centers)), "x": centers[:, 0], "y": centers[:, 1]})
