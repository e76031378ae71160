"""
Association of the aerial user with three ABSs or three TBSs, and the
altitude-regime analysis of the ABS association probability.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np
from scipy import optimize

from .channel import link_state_probability
from .dist import sample_abs_batch, sample_tbs_batch
from .exceptions import InsufficientTrialsError
from .model import NetworkConfig
from .numerics import DEFAULT_MC_TRIALS, RngStream, reg_lower_gamma, run_chunked
from .sigstats import FitOptions, GammaFit, fit_pair
from .types import FloatArray, LinkState, LinkStateVector, Method, Tier

if TYPE_CHECKING:
    from .cache import FitCache

logger = logging.getLogger(__name__)

MIN_ASSOC_TRIALS = 1_000
HALF = 0.5


@dataclass(frozen=True, slots=True)
class AssociationResult:
    """
    P(three ABSs serve) and P(three TBSs serve); they sum to one.

    ``variants`` maps each TBS zeta label to the cross-moment reading of the
    V fit the analytic estimate used.
    """

    p_abs: float
    p_tbs: float
    std_error: float
    method: Method
    trials: int = 0
    p_mixed: float | None = None
    per_zeta: dict[str, float] = field(default_factory=dict)
    variants: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not (0.0 <= self.p_abs <= 1.0 and 0.0 <= self.p_tbs <= 1.0):
            raise ValueError(f"Association probabilities out of range: {self.p_abs}, {self.p_tbs}")
        if abs(self.p_abs + self.p_tbs - 1.0) > 1e-12:
            raise ValueError("Association probabilities must sum to one")

    @classmethod
    def from_p_abs(cls, p_abs: float, std_error: float, method: Method, **kwargs) -> AssociationResult:
        p_abs = min(1.0, max(0.0, p_abs))
        return cls(p_abs=p_abs, p_tbs=1.0 - p_abs, std_error=std_error, method=method, **kwargs)

    def p(self, tier: Tier) -> float:
        return self.p_abs if tier is Tier.ABS else self.p_tbs


# ========== Analytic ==========


def tbs_v_fits(
    cfg: NetworkConfig,
    options: FitOptions = FitOptions(),
    rng: RngStream | None = None,
    cache: FitCache | None = None,
    workers: int | None = None,
) -> dict[str, GammaFit]:
    """The eight TBS V fits (nu', theta') keyed by zeta label."""
    rng = rng or RngStream(0)
    return {
        zeta.label: fit_pair(Tier.TBS, zeta, cfg, options, rng, cache, workers)[1] for zeta in LinkStateVector.all()
    }


def assoc_prob_abs_analytic(
    cfg: NetworkConfig,
    trials: int = DEFAULT_MC_TRIALS,
    rng: RngStream | None = None,
    fits: dict[str, GammaFit] | None = None,
    options: FitOptions = FitOptions(),
    cache: FitCache | None = None,
    workers: int | None = None,
) -> AssociationResult:
    """
    Product over the eight zeta vectors of E[P(V_TBS,zeta < V_ABS)], the
    expectation taken over the ABS joint distance law by exact sampling.

    All eight expectations share the same ABS draws; the standard error is
    propagated through the product by the delta method.
    """
    if trials < MIN_ASSOC_TRIALS:
        raise InsufficientTrialsError(trials, MIN_ASSOC_TRIALS)
    rng = rng or RngStream(0)
    fits = fits or tbs_v_fits(cfg, options, rng.substream(1), cache, workers)
    labels = [z.label for z in LinkStateVector.all()]

    def draw(gen: np.random.Generator, size: int) -> FloatArray:
        r = sample_abs_batch(cfg, gen, size)
        v_abs = np.sum(r ** (-cfg.alpha_ABS / 2), axis=1)
        return np.column_stack([reg_lower_gamma(fits[lab].nu, v_abs / fits[lab].theta) for lab in labels])

    g = np.concatenate(run_chunked(draw, trials, rng, workers), axis=0)
    means = g.mean(axis=0)
    p_abs = float(np.prod(means))
    grad = np.array([np.prod(np.delete(means, i)) for i in range(len(labels))])
    cov = np.atleast_2d(np.cov(g, rowvar=False)) / trials
    std_error = float(math.sqrt(max(grad @ cov @ grad, 0.0)))
    logger.debug("Analytic association h=%.1f: p_abs=%.4f", cfg.h, p_abs)
    return AssociationResult.from_p_abs(
        p_abs,
        std_error,
        Method.ANALYTIC,
        trials=trials,
        per_zeta={lab: float(m) for lab, m in zip(labels, means)},
        variants={lab: fits[lab].variant for lab in labels},
    )


# ========== Monte Carlo ==========


def _nearest_abs_with_user(cfg: NetworkConfig, gen: np.random.Generator, size: int, spread: float) -> FloatArray:
    if spread <= 0:
        return sample_abs_batch(cfg, gen, size)
    rho = cfg.r_C * np.sqrt(gen.random((size, cfg.N)))
    phi = 2 * np.pi * gen.random((size, cfg.N))
    user = (gen.random((size, 2)) - 0.5) * spread
    dx = rho * np.cos(phi) - user[:, :1]
    dy = rho * np.sin(phi) - user[:, 1:]
    r = np.sqrt(dx**2 + dy**2 + cfg.gap**2)
    return np.sort(np.partition(r, 2, axis=1)[:, :3], axis=1)


def assoc_prob_mc(
    cfg: NetworkConfig,
    trials: int = 50_000,
    rng: RngStream | None = None,
    user_spread: float = 0.0,
    workers: int | None = None,
) -> AssociationResult:
    """
    Association by long-term aggregate amplitude over simulated networks.

    Each trial realizes the ABS disk and the TBS field around one user, draws
    each TBS link state once, and compares V over the three nearest stations
    of each tier. The mixed share counts trials whose three strongest links
    among those six candidates span both tiers.
    """
    if trials < MIN_ASSOC_TRIALS:
        raise InsufficientTrialsError(trials, MIN_ASSOC_TRIALS)
    rng = rng or RngStream(0)

    def draw(gen: np.random.Generator, size: int) -> FloatArray:
        r_abs = _nearest_abs_with_user(cfg, gen, size, user_spread)
        r_tbs = sample_tbs_batch(cfg, gen, size)
        los = gen.random(r_tbs.shape) < link_state_probability(LinkState.LOS, r_tbs, cfg, Tier.TBS)
        a_abs = r_abs ** (-cfg.alpha_ABS / 2)
        a_tbs = r_tbs ** (-np.where(los, cfg.alpha_TBS_L, cfg.alpha_TBS_N) / 2)
        abs_wins = a_abs.sum(axis=1) > a_tbs.sum(axis=1)
        ranked = np.argsort(-np.concatenate([a_abs, a_tbs], axis=1), axis=1, kind="stable")[:, :3]
        abs_in_top = np.sum(ranked < 3, axis=1)
        mixed = (abs_in_top > 0) & (abs_in_top < 3)
        return np.column_stack([abs_wins, mixed, abs_in_top == 3]).astype(float)

    tallies = np.concatenate(run_chunked(draw, trials, rng, workers), axis=0)
    p_abs, p_mixed, _ = tallies.mean(axis=0)
    std_error = math.sqrt(p_abs * (1 - p_abs) / trials)
    logger.debug("MC association h=%.1f: p_abs=%.4f mixed=%.4f", cfg.h, p_abs, p_mixed)
    return AssociationResult.from_p_abs(
        float(p_abs), std_error, Method.MONTECARLO, trials=trials, p_mixed=float(p_mixed)
    )


# ========== Altitude regimes ==========


@dataclass(frozen=True, slots=True)
class HalfHeights:
    """Altitudes where the ABS association probability equals one half."""

    case: str
    heights: list[float] = field(default_factory=list)
    h_minus: float | None = None
    h_plus: float | None = None


def _crossing(h: FloatArray, curve: FloatArray, lo: int, hi: int) -> float:
    """Bisection for curve = 1/2 on the linear interpolant over h[lo..hi]."""

    def f(x: float) -> float:
        return float(np.interp(x, h[lo : hi + 1], curve[lo : hi + 1])) - HALF

    if f(h[lo]) == 0:
        return float(h[lo])
    if f(h[hi]) == 0:
        return float(h[hi])
    return float(optimize.bisect(f, float(h[lo]), float(h[hi]), xtol=1e-6))


def classify_half_heights(h_grid: Sequence[float], curve: Sequence[float], atol: float = 1e-12) -> HalfHeights:
    """
    Count and locate the 0.5-crossings of a U-shaped curve from its minimum
    and endpoint values.

    minimum > 1/2: none; minimum = 1/2: the minimizer; minimum < 1/2: one
    crossing on each side whose endpoint value is at least 1/2.
    """
    h = np.asarray(h_grid, dtype=float)
    a = np.asarray(curve, dtype=float)
    i_min = int(np.argmin(a))
    m, a_minus, a_plus = a[i_min], a[0], a[-1]
    if m > HALF + atol:
        return HalfHeights("minimum above one half")
    if abs(m - HALF) <= atol:
        return HalfHeights("minimum equals one half", [float(h[i_min])])
    h_minus = _crossing(h, a, 0, i_min) if a_minus >= HALF - atol else None
    h_plus = _crossing(h, a, i_min, len(h) - 1) if a_plus >= HALF - atol else None
    heights = [x for x in (h_minus, h_plus) if x is not None]
    return HalfHeights("minimum below one half", heights, h_minus, h_plus)


def is_u_shaped(curve: Sequence[float], tol: float = 0.0) -> bool:
    """Nonincreasing up to the minimizer and nondecreasing after it, up to ``tol``; minimum interior."""
    a = np.asarray(curve, dtype=float)
    i_min = int(np.argmin(a))
    if i_min == 0 or i_min == a.size - 1:
        return False
    return bool(np.all(np.diff(a[: i_min + 1]) <= tol) and np.all(np.diff(a[i_min:]) >= -tol))


@dataclass(frozen=True, slots=True)
class RegimeReport:
    """
    ABS association against user altitude.

    ``h_threshold`` separates the blockage-dominated regime (below) from the
    path-loss-dominated regime (above). ``h_half_plus`` is the handover-neutral
    height; ``h_half_minus`` is an unfavourable operating point.
    """

    h_grid: list[float]
    p_abs_curve: list[float]
    h_threshold: float
    half_heights: list[float]
    u_shaped: bool
    case: str | None = None
    h_half_minus: float | None = None
    h_half_plus: float | None = None
    method: Method = Method.ANALYTIC

    @property
    def tbs_peak(self) -> float:
        return 1.0 - min(self.p_abs_curve)

    def to_dict(self) -> dict:
        return {
            "h_grid": self.h_grid,
            "p_abs_curve": self.p_abs_curve,
            "h_threshold": self.h_threshold,
            "half_heights": self.half_heights,
            "u_shaped": self.u_shaped,
            "case": self.case,
            "h_half_minus": self.h_half_minus,
            "h_half_plus": self.h_half_plus,
            "tbs_peak": self.tbs_peak,
            "method": str(self.method),
        }


def regime_from_curve(
    h_grid: Sequence[float], curve: Sequence[float], method: Method = Method.ANALYTIC, tol: float = 0.02
) -> RegimeReport:
    h = [float(x) for x in h_grid]
    a = [float(x) for x in curve]
    if any(b <= x for x, b in zip(h, h[1:])):
        raise ValueError("h_grid must be strictly increasing")
    h_th = h[int(np.argmin(a))]
    u_shaped = is_u_shaped(a, tol)
    if not u_shaped:
        logger.warning("Association curve is not U-shaped; half-heights not reported")
        return RegimeReport(h, a, h_th, [], False, method=method)
    halves = classify_half_heights(h, a)
    return RegimeReport(h, a, h_th, halves.heights, True, halves.case, halves.h_minus, halves.h_plus, method)


def regime_analysis(
    cfg: NetworkConfig,
    h_grid: Sequence[float],
    method: Method = Method.ANALYTIC,
    trials: int = DEFAULT_MC_TRIALS,
    rng: RngStream | None = None,
    options: FitOptions = FitOptions(),
    cache: FitCache | None = None,
    workers: int | None = None,
) -> RegimeReport:
    """Evaluate the ABS association curve on ``h_grid`` (within (0, H)) and analyse its regimes."""
    rng = rng or RngStream(0)
    if any(not 0 < h < cfg.H for h in h_grid):
        raise ValueError(f"h_grid must lie within (0, {cfg.H})")
    curve = []
    for i, h in enumerate(h_grid):
        cfg_h = cfg.replace(h=float(h))
        stream = rng.child(i)
        if method is Method.ANALYTIC:
            result = assoc_prob_abs_analytic(cfg_h, trials, stream, options=options, cache=cache, workers=workers)
        else:
            result = assoc_prob_mc(cfg_h, trials, stream, workers=workers)
        curve.append(result.p_abs)
        logger.info("h=%.1f m: p_abs=%.4f", h, result.p_abs)
    return regime_from_curve(h_grid, curve, method)
