"""
System-level Monte Carlo: network snapshots, instantaneous SIR of the aerial
user under a cooperation policy, and empirical coverage.

Coordinates are meters relative to the TBS reference plane: TBSs at z = 0,
ABSs at z = H, the user at z = h. The ABS disk is centred on the origin and the
TBS window on the user.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .assoc import AssociationResult
from .channel import los_probability
from .coverage import CoverageReport, interference_tail_bound
from .exceptions import DegenerateTriangulationError, InsufficientTrialsError
from .model import MAX_USER_ALTITUDE, NetworkConfig, linear_to_db
from .numerics import RngStream, as_generator, map_indexed, run_chunked
from .triangulation import Triangulation, delaunay, locate
from .types import FloatArray, LinkState, LinkStateVector, Method, Policy, Tier

logger = logging.getLogger(__name__)

MIN_SIM_TRIALS = 1_000
TAIL_TOLERANCE = 0.01

# serving-tier codes of a batch
ALL_ABS, ALL_TBS, MIXED = 0, 1, 2


def default_window_radius(cfg: NetworkConfig) -> float:
    """Radius of the user-centred TBS window: max(5/sqrt(pi lambda), 3 r_C)."""
    return max(5.0 / math.sqrt(math.pi * cfg.lambda_TBS), 3.0 * cfg.r_C)


@dataclass(frozen=True, slots=True)
class Deployment:
    """One network snapshot; positions are (n, 3) arrays in meters."""

    abs_positions: FloatArray
    tbs_positions: FloatArray
    region_radius: float

    @classmethod
    def tbs_only(cls, tbs_xy: FloatArray, region_radius: float) -> Deployment:
        tbs_xy = np.asarray(tbs_xy, dtype=float).reshape(-1, 2)
        return cls(np.empty((0, 3)), np.column_stack([tbs_xy, np.zeros(len(tbs_xy))]), region_radius)

    @property
    def n_abs(self) -> int:
        return len(self.abs_positions)

    @property
    def n_tbs(self) -> int:
        return len(self.tbs_positions)


@dataclass(frozen=True, slots=True)
class SirSample:
    """
    Instantaneous SIR at one user. ``comp_set`` holds station ids such as
    ``"ABS:4"``; ``tier`` is None for a mixed set and ``zeta`` is None unless
    three stations cooperate.
    """

    sir_linear: float
    comp_set: tuple[str, ...]
    tier: Tier | None
    zeta: LinkStateVector | None

    @property
    def sir_db(self) -> float:
        if self.sir_linear <= 0:
            return -math.inf
        return math.inf if math.isinf(self.sir_linear) else linear_to_db(self.sir_linear)

    def covered(self, gamma: float) -> bool:
        return self.sir_linear >= gamma


def _uniform_disk(gen: np.random.Generator, radius: float, size: int) -> FloatArray:
    rho = radius * np.sqrt(gen.random(size))
    phi = 2 * np.pi * gen.random(size)
    return np.column_stack([rho * np.cos(phi), rho * np.sin(phi)])


def realize_network(
    cfg: NetworkConfig,
    window_radius: float | None = None,
    rng: RngStream | np.random.Generator | None = None,
    center: tuple[float, float] = (0.0, 0.0),
) -> Deployment:
    """N uniform ABSs on the altitude-H disk; a Poisson count of uniform TBSs on the window around ``center``."""
    gen = as_generator(rng or RngStream(0))
    window = window_radius or default_window_radius(cfg)
    abs_xy = _uniform_disk(gen, cfg.r_C, cfg.N)
    count = gen.poisson(cfg.lambda_TBS * math.pi * window**2)
    tbs_xy = _uniform_disk(gen, window, count) + np.asarray(center, dtype=float)
    return Deployment(
        abs_positions=np.column_stack([abs_xy, np.full(cfg.N, cfg.H)]),
        tbs_positions=np.column_stack([tbs_xy, np.zeros(count)]),
        region_radius=window,
    )


# ========== SIR core ==========


@dataclass(frozen=True, slots=True)
class _SirBatch:
    sir: FloatArray
    tier_code: FloatArray
    abs_serving: FloatArray
    tbs_serving: FloatArray
    tbs_los: FloatArray


def _group_rank(owner: FloatArray, key: FloatArray) -> FloatArray:
    """Rank of each point within its owner group, by descending ``key``."""
    if owner.size == 0:
        return np.zeros(0, dtype=int)
    order = np.lexsort((-key, owner))
    sorted_owner = owner[order]
    starts = np.searchsorted(sorted_owner, sorted_owner, side="left")
    rank = np.empty(owner.size, dtype=int)
    rank[order] = np.arange(owner.size) - starts
    return rank


def _sir_ratio(signal: FloatArray, interference: FloatArray) -> FloatArray:
    """signal² / interference; inf without interference, 0 when nothing serves."""
    ratio = signal**2 / np.where(interference > 0, interference, 1.0)
    return np.where(interference > 0, ratio, np.where(signal > 0, np.inf, 0.0))


def _sir_core(
    abs_rho: FloatArray,
    tbs_z: FloatArray,
    owner: FloatArray,
    n: int,
    policy: Policy,
    cfg: NetworkConfig,
    gen: np.random.Generator,
) -> _SirBatch:
    """
    SIR of ``n`` users. ``abs_rho`` is (n, N) horizontal ABS distances; TBSs are
    flat arrays of horizontal distance ``tbs_z`` and user index ``owner``.
    """
    p_los = los_probability(tbs_z, cfg.h, cfg.env)
    los = gen.random(tbs_z.size) < p_los
    alpha_tbs = np.where(los, cfg.alpha_TBS_L, cfg.alpha_TBS_N)
    m_tbs = np.where(los, cfg.m_TBS_L, cfg.m_TBS_N)
    d2_tbs = tbs_z**2 + cfg.h**2
    d2_abs = abs_rho**2 + cfg.gap**2
    amp_tbs = d2_tbs ** (-alpha_tbs / 4)
    amp_abs = d2_abs ** (-cfg.alpha_ABS / 4)
    g_tbs = gen.gamma(m_tbs, cfg.Omega / m_tbs)
    g_abs = gen.gamma(cfg.m_ABS, cfg.Omega / cfg.m_ABS, size=abs_rho.shape)

    abs_order = np.argsort(abs_rho, axis=1, kind="stable")
    abs_rank = np.empty_like(abs_order)
    np.put_along_axis(abs_rank, abs_order, np.arange(abs_rho.shape[1])[None, :].repeat(n, axis=0), axis=1)
    tbs_rank = _group_rank(owner, -tbs_z)

    if policy is Policy.STRONGEST_THREE:
        mean_abs = d2_abs ** (-cfg.alpha_ABS / 2)
        mean_tbs = p_los * d2_tbs ** (-cfg.alpha_TBS_L / 2) + (1 - p_los) * d2_tbs ** (-cfg.alpha_TBS_N / 2)
        strength_rank = _group_rank(owner, mean_tbs)
        candidates = np.full((n, 6), -np.inf)
        k = min(3, mean_abs.shape[1])
        candidates[:, :k] = -np.sort(-mean_abs, axis=1)[:, :k]
        top = strength_rank < 3
        candidates[owner[top], 3 + strength_rank[top]] = mean_tbs[top]
        third = -np.sort(-candidates, axis=1)[:, 2]
        abs_serving = mean_abs >= third[:, None]
        tbs_serving = mean_tbs >= third[owner]
    else:
        v_abs = np.sum(np.where(abs_rank < 3, amp_abs, 0.0), axis=1)
        v_tbs = np.bincount(owner, weights=np.where(tbs_rank < 3, amp_tbs, 0.0), minlength=n)
        abs_wins = v_abs > v_tbs
        size = 3 if policy is Policy.COMP3_SAME_TIER else 1
        abs_serving = (abs_rank < size) & abs_wins[:, None]
        tbs_serving = (tbs_rank < size) & ~abs_wins[owner]

    signal = np.sum(np.where(abs_serving, np.sqrt(g_abs) * amp_abs, 0.0), axis=1)
    signal += np.bincount(owner, weights=np.where(tbs_serving, np.sqrt(g_tbs) * amp_tbs, 0.0), minlength=n)
    interference = np.sum(np.where(abs_serving, 0.0, g_abs * amp_abs**2), axis=1)
    interference += np.bincount(owner, weights=np.where(tbs_serving, 0.0, g_tbs * amp_tbs**2), minlength=n)
    sir = _sir_ratio(signal, interference)

    n_abs = abs_serving.sum(axis=1)
    n_tbs = np.bincount(owner, weights=tbs_serving.astype(float), minlength=n)
    tier_code = np.where(n_tbs == 0, ALL_ABS, np.where(n_abs == 0, ALL_TBS, MIXED))
    return _SirBatch(sir, tier_code, abs_serving, tbs_serving, los)


def sir_at_user(
    user: Sequence[float],
    dep: Deployment,
    policy: Policy,
    cfg: NetworkConfig,
    rng: RngStream | np.random.Generator | None = None,
) -> SirSample:
    """
    SIR at ``user`` (x, y, z) over one deployment: coherent amplitude sum over
    the cooperating set, power sum over every other station of both tiers.
    """
    gen = as_generator(rng or RngStream(0))
    ux, uy = float(user[0]), float(user[1])
    if len(user) > 2 and not math.isclose(float(user[2]), cfg.h):
        cfg = cfg.replace(h=float(user[2]))
    abs_rho = np.hypot(dep.abs_positions[:, 0] - ux, dep.abs_positions[:, 1] - uy)[None, :]
    tbs_z = np.hypot(dep.tbs_positions[:, 0] - ux, dep.tbs_positions[:, 1] - uy)
    batch = _sir_core(abs_rho, tbs_z, np.zeros(tbs_z.size, dtype=int), 1, Policy(policy), cfg, gen)

    abs_ids = np.flatnonzero(batch.abs_serving[0])
    tbs_ids = np.flatnonzero(batch.tbs_serving)
    members = sorted(
        [(float(abs_rho[0, i]), f"ABS:{i}", LinkState.LOS) for i in abs_ids]
        + [
            (float(tbs_z[j]), f"TBS:{j}", LinkState.LOS if batch.tbs_los[j] else LinkState.NLOS)
            for j in tbs_ids
        ]
    )
    code = int(batch.tier_code[0])
    tier = {ALL_ABS: Tier.ABS, ALL_TBS: Tier.TBS}.get(code)
    zeta = LinkStateVector(tuple(m[2] for m in members)) if len(members) == 3 else None
    return SirSample(float(batch.sir[0]), tuple(m[1] for m in members), tier, zeta)


# ========== Batched trials ==========


@dataclass(frozen=True, slots=True)
class SirSamples:
    """SIR values of many independent snapshots with their serving-tier codes."""

    sir: FloatArray
    tier_code: FloatArray

    def __len__(self) -> int:
        return self.sir.size


def _draw_snapshots(
    cfg: NetworkConfig,
    policy: Policy,
    gen: np.random.Generator,
    size: int,
    window: float,
    user_spread: float,
) -> FloatArray:
    rho = cfg.r_C * np.sqrt(gen.random((size, cfg.N)))
    phi = 2 * np.pi * gen.random((size, cfg.N))
    user = (gen.random((size, 2)) - 0.5) * user_spread if user_spread > 0 else np.zeros((size, 2))
    abs_rho = np.hypot(rho * np.cos(phi) - user[:, :1], rho * np.sin(phi) - user[:, 1:])
    counts = gen.poisson(cfg.lambda_TBS * math.pi * window**2, size=size)
    owner = np.repeat(np.arange(size), counts)
    tbs_z = window * np.sqrt(gen.random(owner.size))
    batch = _sir_core(abs_rho, tbs_z, owner, size, policy, cfg, gen)
    return np.column_stack([batch.sir, batch.tier_code])


def sir_samples(
    cfg: NetworkConfig,
    policy: Policy = Policy.COMP3_SAME_TIER,
    trials: int = 20_000,
    rng: RngStream | None = None,
    window_radius: float | None = None,
    user_spread: float = 0.0,
    workers: int | None = None,
) -> SirSamples:
    """SIR over ``trials`` independent snapshots, each with its own network and fading."""
    rng = rng or RngStream(0)
    window = window_radius or default_window_radius(cfg)

    def draw(gen: np.random.Generator, size: int) -> FloatArray:
        return _draw_snapshots(cfg, Policy(policy), gen, size, window, user_spread)

    out = np.concatenate(run_chunked(draw, trials, rng, workers), axis=0)
    return SirSamples(out[:, 0], out[:, 1].astype(int))


def _clamped(cfg: NetworkConfig) -> NetworkConfig:
    if cfg.h > MAX_USER_ALTITUDE:
        logger.warning("User altitude %.1f m above the %.0f m cap; clamping", cfg.h, MAX_USER_ALTITUDE)
        return cfg.replace(h=MAX_USER_ALTITUDE)
    return cfg


def _check_window(cfg: NetworkConfig, window: float) -> None:
    bound = interference_tail_bound(cfg, window)
    if bound >= TAIL_TOLERANCE:
        logger.warning("Interference beyond the %.0f m window is %.2f%% of the in-window mean", window, 100 * bound)
    else:
        logger.debug("Interference tail bound %.2e at window %.0f m", bound, window)


def _report(samples: SirSamples, gamma: float) -> CoverageReport:
    n = len(samples)
    covered = samples.sir >= gamma
    abs_group = samples.tier_code == ALL_ABS
    n_abs = int(abs_group.sum())
    p_abs_cond = float(covered[abs_group].mean()) if n_abs else 0.0
    p_tbs_cond = float(covered[~abs_group].mean()) if n_abs < n else 0.0
    p_total = float(covered.mean())
    assoc = AssociationResult.from_p_abs(
        n_abs / n,
        math.sqrt(n_abs / n * (1 - n_abs / n) / n),
        Method.MONTECARLO,
        trials=n,
        p_mixed=float(np.mean(samples.tier_code == MIXED)),
    )
    return CoverageReport.combine(
        p_abs_cond,
        p_tbs_cond,
        assoc,
        linear_to_db(gamma),
        Method.MONTECARLO,
        trials=n,
        std_error=math.sqrt(p_total * (1 - p_total) / n),
    )


def empirical_coverage_sweep(
    cfg: NetworkConfig,
    gammas: Sequence[float],
    policy: Policy = Policy.COMP3_SAME_TIER,
    trials: int = 20_000,
    rng: RngStream | None = None,
    window_radius: float | None = None,
    user_spread: float = 0.0,
    workers: int | None = None,
) -> list[CoverageReport]:
    """Coverage at each linear threshold, all thresholds applied to one sample set."""
    if trials < MIN_SIM_TRIALS:
        raise InsufficientTrialsError(trials, MIN_SIM_TRIALS)
    cfg = _clamped(cfg)
    window = window_radius or default_window_radius(cfg)
    _check_window(cfg, window)
    samples = sir_samples(cfg, policy, trials, rng, window, user_spread, workers)
    logger.info("Simulated %d snapshots (%s)", trials, Policy(policy))
    return [_report(samples, g) for g in gammas]


def empirical_coverage(
    cfg: NetworkConfig,
    gamma: float | None = None,
    policy: Policy = Policy.COMP3_SAME_TIER,
    trials: int = 20_000,
    rng: RngStream | None = None,
    **kwargs,
) -> CoverageReport:
    """Fraction of snapshots with SIR >= ``gamma`` (linear; defaults to gamma_ABS)."""
    gamma = cfg.gamma_ABS if gamma is None else gamma
    return empirical_coverage_sweep(cfg, [gamma], policy, trials, rng, **kwargs)[0]


# ========== Coverage maps ==========


def _cluster_sets(stations: FloatArray, grid: FloatArray) -> tuple[list[tuple[int, ...]], int]:
    """
    Cooperating set of each grid point within one tier: its Delaunay triangle,
    or every station when fewer than three exist. Also returns the number of
    points outside the hull.
    """
    count = len(stations)
    if count == 0:
        return [()] * len(grid), 0
    if count < 3:
        return [tuple(range(count))] * len(grid), 0
    try:
        tri: Triangulation = delaunay(stations)
    except DegenerateTriangulationError:
        logger.warning("Degenerate station layout; using the three nearest stations")
        nearest = np.argsort(np.hypot(*(stations[None, :, :] - grid[:, None, :]).transpose(2, 0, 1)), axis=1)
        return [tuple(int(v) for v in row[:3]) for row in nearest], 0
    sets, outside, start = [], 0, 0
    for p in grid:
        loc = locate(tri, p, start, warn=False)
        start = loc.triangle
        outside += not loc.inside
        sets.append(loc.vertices)
    return sets, outside


def sir_map(
    abs_xy: FloatArray,
    tbs_xy: FloatArray,
    grid: FloatArray,
    cfg: NetworkConfig,
    trials: int = 200,
    rng: RngStream | None = None,
    workers: int | None = None,
) -> FloatArray:
    """
    SIR at every grid point over ``trials`` fading and link-state draws of one
    fixed deployment, shape (len(grid), trials).

    Each tier's cooperating set is the Delaunay triangle of that tier's
    stations containing the point; the tier with the larger distance-only
    aggregate amplitude serves.
    """
    rng = rng or RngStream(0)
    abs_xy = np.asarray(abs_xy, dtype=float).reshape(-1, 2)
    tbs_xy = np.asarray(tbs_xy, dtype=float).reshape(-1, 2)
    grid = np.asarray(grid, dtype=float).reshape(-1, 2)
    abs_sets, abs_out = _cluster_sets(abs_xy, grid)
    tbs_sets, tbs_out = _cluster_sets(tbs_xy, grid)
    if abs_out or tbs_out:
        logger.warning("%d/%d grid points outside the ABS/TBS hulls; nearest triangles used", abs_out, tbs_out)

    def point(i: int, gen: np.random.Generator) -> FloatArray:
        z = np.hypot(*(tbs_xy - grid[i]).T)
        los = gen.random((trials, z.size)) < los_probability(z, cfg.h, cfg.env)
        m_t = np.where(los, cfg.m_TBS_L, cfg.m_TBS_N)
        g_t = gen.gamma(m_t, cfg.Omega / m_t)
        amp_t = (z**2 + cfg.h**2) ** (-np.where(los, cfg.alpha_TBS_L, cfg.alpha_TBS_N) / 4)
        rho = np.hypot(*(abs_xy - grid[i]).T)
        g_a = gen.gamma(cfg.m_ABS, cfg.Omega / cfg.m_ABS, size=(trials, rho.size))
        amp_a = (rho**2 + cfg.gap**2) ** (-cfg.alpha_ABS / 4)

        mask_t = np.zeros(z.size, dtype=bool)
        mask_t[list(tbs_sets[i])] = True
        mask_a = np.zeros(rho.size, dtype=bool)
        mask_a[list(abs_sets[i])] = True
        abs_wins = amp_a[mask_a].sum() > amp_t[:, mask_t].sum(axis=1)

        s_abs = (np.sqrt(g_a[:, mask_a]) * amp_a[mask_a]).sum(axis=1)
        s_tbs = (np.sqrt(g_t[:, mask_t]) * amp_t[:, mask_t]).sum(axis=1)
        p_a, p_t = g_a * amp_a**2, g_t * amp_t**2
        i_abs_serving = p_a[:, ~mask_a].sum(axis=1) + p_t.sum(axis=1)
        i_tbs_serving = p_t[:, ~mask_t].sum(axis=1) + p_a.sum(axis=1)
        signal = np.where(abs_wins, s_abs, s_tbs)
        interference = np.where(abs_wins, i_abs_serving, i_tbs_serving)
        return _sir_ratio(signal, interference)

    return np.stack(map_indexed(point, len(grid), rng, workers))
