"""
Semi-analytic coverage probability of the CoMP user.

The conditional coverage given association with tier chi is

    P_chi = E[ sum_{k < nu~} (s sqrt(I))^k / k! * exp(-s sqrt(I)) ],  s = sqrt(gamma)/theta,

with the expectation over the conditional distance law of the serving triple
and the interference field beyond it. Distance expectations and the Laplace
moments of sqrt(I) are Monte Carlo; the series, Gamma fits and transforms are
analytic. The Laplace transforms of I and sqrt(I) are also available by
quadrature and serve as cross-checks.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING

import numpy as np
import pandas as pd

from .assoc import AssociationResult, assoc_prob_abs_analytic
from .channel import los_probability
from .dist import joint_ccdf, sample_batch
from .exceptions import AcceptanceRateError, DomainError, InsufficientTrialsError
from .model import NetworkConfig, db_to_linear, linear_to_db
from .numerics import (
    MIN_MC_TRIALS,
    MonteCarloEstimate,
    QuadratureSpec,
    RngStream,
    as_generator,
    integrate_1d,
    mc_mean,
    run_chunked,
)
from .sigstats import FitOptions, GammaFit, fit_pair
from .types import FloatArray, LinkState, LinkStateVector, Method, Tier

if TYPE_CHECKING:
    from .cache import FitCache

logger = logging.getLogger(__name__)

MIN_ACCEPTANCE = 1e-3
MIN_PROPOSALS = 10_000
DEFAULT_COVERAGE_TRIALS = 50_000
LAPLACE_QUADRATURE = QuadratureSpec(abs_tol=1e-10, rel_tol=1e-8, max_subdivisions=400)
NORMAL_CUTOFF = 8.5


def _other(tier: Tier) -> Tier:
    return Tier.TBS if tier is Tier.ABS else Tier.ABS


def _window(cfg: NetworkConfig, outer_radius: float | None) -> float:
    if outer_radius is not None:
        return outer_radius
    from .sim import default_window_radius

    return default_window_radius(cfg)


# ========== Conditional distance law ==========


@dataclass(frozen=True, slots=True)
class ConditionalDistanceLaw:
    """
    Law of the serving triple given association with ``tier``: the own-tier
    joint density reweighted by the other tier's joint box CCDF.

    ``normalizer`` is the Monte Carlo mass of that reweighting.
    """

    tier: Tier
    normalizer: MonteCarloEstimate
    ccdf_other_tier: Callable[[FloatArray], FloatArray]


def conditional_law(tier: Tier, cfg: NetworkConfig, trials: int, rng: RngStream) -> ConditionalDistanceLaw:
    other = _other(tier)

    def ccdf(r: FloatArray) -> FloatArray:
        return joint_ccdf(other, r, cfg)

    def draw(gen: np.random.Generator, size: int) -> FloatArray:
        return ccdf(sample_batch(tier, cfg, gen, size))

    normalizer = mc_mean(np.concatenate(run_chunked(draw, trials, rng)))
    return ConditionalDistanceLaw(tier, normalizer, ccdf)


@dataclass
class _Acceptance:
    proposed: int = 0
    accepted: int = 0

    @property
    def rate(self) -> float:
        return self.accepted / self.proposed if self.proposed else 0.0


def conditional_sample_batch(
    tier: Tier, cfg: NetworkConfig, gen: np.random.Generator, size: int, stats: _Acceptance | None = None
) -> FloatArray:
    """
    ``size`` ordered triples from the conditional law by rejection: propose
    from the own tier, accept with the other tier's joint CCDF.

    Raises:
        AcceptanceRateError: when fewer than 1e-3 of proposals are accepted.
    """
    stats = stats or _Acceptance()
    other = _other(tier)
    kept: list[FloatArray] = []
    have = 0
    batch = max(size, 256)
    while have < size:
        proposal = sample_batch(tier, cfg, gen, batch)
        accept = gen.random(batch) < joint_ccdf(other, proposal, cfg)
        stats.proposed += batch
        stats.accepted += int(accept.sum())
        kept.append(proposal[accept])
        have += int(accept.sum())
        if stats.proposed >= MIN_PROPOSALS and stats.rate < MIN_ACCEPTANCE:
            raise AcceptanceRateError(str(tier), stats.rate, MIN_ACCEPTANCE)
        if have < size:
            batch = int(min(max(256, 1.2 * (size - have) / max(stats.rate, MIN_ACCEPTANCE)), 1_000_000))
    return np.concatenate(kept, axis=0)[:size]


def conditional_sample(tier: Tier, cfg: NetworkConfig, rng: RngStream | np.random.Generator):
    from .dist import OrderedDistances

    row = conditional_sample_batch(tier, cfg, as_generator(rng), 1)[0]
    return OrderedDistances(tuple(float(x) for x in row), tier)


# ========== Interference ==========


def simulate_interference(
    r3: float | FloatArray,
    tier: Tier,
    cfg: NetworkConfig,
    gen: np.random.Generator,
    size: int | None = None,
    outer_radius: float | None = None,
) -> FloatArray:
    """
    Interference power realizations given the serving tier and its third distance r3.

    Serving TBS: other TBSs beyond horizontal radius sqrt(r3² - h²), all N
    ABSs. Serving ABS: all TBSs, the remaining N - 3 ABSs on the annulus beyond
    sqrt(r3² - (H - h)²). TBSs lie within ``outer_radius`` of the user.
    """
    R = _window(cfg, outer_radius)
    if not math.isfinite(R):
        raise DomainError("Interference simulation needs a finite outer radius")
    r3_arr = np.atleast_1d(np.asarray(r3, dtype=float))
    if size is not None and r3_arr.size == 1:
        r3_arr = np.full(size, r3_arr[0])
    n = r3_arr.size

    if tier is Tier.TBS:
        l1 = np.sqrt(np.maximum(r3_arr**2 - cfg.h**2, 0.0))
    else:
        l1 = np.zeros(n)
    l1 = np.minimum(l1, R)
    span = R**2 - l1**2
    counts = gen.poisson(cfg.lambda_TBS * math.pi * span)
    owner = np.repeat(np.arange(n), counts)
    z = np.sqrt(l1[owner] ** 2 + gen.random(owner.size) * span[owner])
    los = gen.random(owner.size) < los_probability(z, cfg.h, cfg.env)
    m = np.where(los, cfg.m_TBS_L, cfg.m_TBS_N)
    alpha = np.where(los, cfg.alpha_TBS_L, cfg.alpha_TBS_N)
    gain = gen.gamma(m, cfg.Omega / m)
    i_tbs = np.bincount(owner, weights=gain * (z**2 + cfg.h**2) ** (-alpha / 2), minlength=n)

    k = 3 if tier is Tier.ABS else 0
    if tier is Tier.ABS:
        l2 = np.sqrt(np.clip(r3_arr**2 - cfg.gap**2, 0.0, cfg.r_C**2))
    else:
        l2 = np.zeros(n)
    rho2 = l2[:, None] ** 2 + gen.random((n, cfg.N - k)) * (cfg.r_C**2 - l2[:, None] ** 2)
    gain_abs = gen.gamma(cfg.m_ABS, cfg.Omega / cfg.m_ABS, size=(n, cfg.N - k))
    i_abs = np.sum(gain_abs * (rho2 + cfg.gap**2) ** (-cfg.alpha_ABS / 2), axis=1)
    return i_tbs + i_abs


def _nakagami_loss(u: float, d2: float, m: float, alpha: float, omega: float) -> float:
    """1 - E[exp(-u G d^-alpha)] for G ~ Gamma(m, omega/m)."""
    x = u * omega * d2 ** (-alpha / 2) / m
    return -math.expm1(-m * math.log1p(x))


def laplace_interference(
    u: float,
    r3: float,
    tier: Tier,
    cfg: NetworkConfig,
    spec: QuadratureSpec = LAPLACE_QUADRATURE,
    outer_radius: float | None = None,
) -> float:
    """
    E[exp(-u I)] given the serving tier and third distance r3.

    PPP factor exp(-2 pi lambda int [1 - (m/(m + u Omega d^-alpha))^m] z P_state(z) dz)
    over LoS and NLoS, times the BPP factor [E_z (m/(m + u Omega d^-alpha))^m]^(N-k)
    over the ABS annulus.
    """
    if u < 0:
        raise DomainError(f"Laplace argument must be >= 0, got {u}")
    if u == 0:
        return 1.0
    R = _window(cfg, outer_radius)
    l1 = math.sqrt(max(r3**2 - cfg.h**2, 0.0)) if tier is Tier.TBS else 0.0
    l2 = math.sqrt(min(max(r3**2 - cfg.gap**2, 0.0), cfg.r_C**2)) if tier is Tier.ABS else 0.0
    k = 3 if tier is Tier.ABS else 0

    exponent = 0.0
    if l1 < R:
        for state in LinkState:
            m, alpha = cfg.m(Tier.TBS, state), cfg.alpha(Tier.TBS, state)

            def tbs_term(z: float, m=m, alpha=alpha, state=state) -> float:
                p = los_probability(z, cfg.h, cfg.env)
                p = p if state is LinkState.LOS else 1.0 - p
                return _nakagami_loss(u, z * z + cfg.h**2, m, alpha, cfg.Omega) * z * p

            exponent += 2 * math.pi * cfg.lambda_TBS * integrate_1d(tbs_term, l1, R, spec)

    area = cfg.r_C**2 - l2**2
    if area <= 1e-9 * cfg.r_C**2:
        loss = _nakagami_loss(u, cfg.r_max**2, cfg.m_ABS, cfg.alpha_ABS, cfg.Omega)
    else:

        def abs_term(z: float) -> float:
            return _nakagami_loss(u, z * z + cfg.gap**2, cfg.m_ABS, cfg.alpha_ABS, cfg.Omega) * z

        loss = 2.0 / area * integrate_1d(abs_term, l2, cfg.r_C, spec)
    log_bpp = (cfg.N - k) * math.log1p(-min(loss, 1.0 - 1e-300))
    return math.exp(-exponent + log_bpp)


def laplace_sqrt_interference(
    s: float,
    r3: float,
    tier: Tier,
    cfg: NetworkConfig,
    spec: QuadratureSpec = LAPLACE_QUADRATURE,
    outer_radius: float | None = None,
) -> float:
    """
    E[exp(-s sqrt(I))] from the Laplace transform of I.

    The kernel s/(2 sqrt(pi)) u^(-3/2) exp(-s²/(4u)) is the law of s²/(2 Z²)
    with Z standard normal, so the integral becomes int 2 phi(z) L_I(s²/(2 z²)) dz.
    """
    if s < 0:
        raise DomainError(f"Laplace argument must be >= 0, got {s}")
    if s == 0:
        return 1.0
    R = _window(cfg, outer_radius)
    norm = math.sqrt(2 / math.pi)

    def integrand(z: float) -> float:
        if z < 1e-12:
            return 0.0
        return norm * math.exp(-z * z / 2) * laplace_interference(s * s / (2 * z * z), r3, tier, cfg, spec, R)

    outer = QuadratureSpec(abs_tol=1e-8, rel_tol=1e-6, max_subdivisions=spec.max_subdivisions)
    return min(1.0, integrate_1d(integrand, 0.0, NORMAL_CUTOFF, outer))


def _sqrt_moment_terms(s: float, k: int, sqrt_i: FloatArray) -> FloatArray:
    return sqrt_i**k * np.exp(-s * sqrt_i)


def laplace_sqrt_moment(
    s: float,
    k: int,
    r3: float,
    tier: Tier,
    cfg: NetworkConfig,
    rng: RngStream,
    trials: int = 100_000,
    outer_radius: float | None = None,
    max_k: int | None = None,
) -> MonteCarloEstimate:
    """
    E[(sqrt I)^k exp(-s sqrt I)] = (-1)^k d^k/ds^k E[exp(-s sqrt I)], by
    averaging over simulated interference fields.
    """
    if k < 0 or (max_k is not None and k > max_k):
        raise DomainError(f"Derivative order {k} outside [0, {max_k}]")
    if trials < MIN_MC_TRIALS:
        raise InsufficientTrialsError(trials, MIN_MC_TRIALS)

    def draw(gen: np.random.Generator, size: int) -> FloatArray:
        sqrt_i = np.sqrt(simulate_interference(r3, tier, cfg, gen, size, outer_radius))
        return _sqrt_moment_terms(s, k, sqrt_i)

    return mc_mean(np.concatenate(run_chunked(draw, trials, rng)))


def laplace_sqrt_moment_fd(
    s: float,
    k: int,
    r3: float,
    tier: Tier,
    cfg: NetworkConfig,
    step: float | None = None,
    spec: QuadratureSpec = LAPLACE_QUADRATURE,
    outer_radius: float | None = None,
) -> float:
    """(-1)^k d^k/ds^k of ``laplace_sqrt_interference`` by central differences, k <= 2."""
    if not 0 <= k <= 2:
        raise DomainError(f"Finite differences support k <= 2, got {k}")

    def L(x: float) -> float:
        return laplace_sqrt_interference(x, r3, tier, cfg, spec, outer_radius)

    if k == 0:
        return L(s)
    h = step if step is not None else max(1e-3 * s, 1e-6)
    h = min(h, s) if s > 0 else h
    if k == 1:
        return -(L(s + h) - L(max(s - h, 0.0))) / (s + h - max(s - h, 0.0))
    return (L(s + h) - 2 * L(s) + L(s - h)) / (h * h)


def interference_tail_bound(cfg: NetworkConfig, window: float) -> float:
    """
    Mean TBS interference from beyond horizontal radius ``window`` relative to
    the mean interference inside it (TBS within the window plus all ABSs).
    """

    def density(z: float) -> float:
        p = los_probability(z, cfg.h, cfg.env)
        d2 = z * z + cfg.h**2
        return cfg.Omega * (p * d2 ** (-cfg.alpha_TBS_L / 2) + (1 - p) * d2 ** (-cfg.alpha_TBS_N / 2)) * z

    spec = QuadratureSpec(abs_tol=1e-14, rel_tol=1e-8, max_subdivisions=400)
    scale = 2 * math.pi * cfg.lambda_TBS
    inside = scale * integrate_1d(density, 0.0, window, spec)
    outside = scale * integrate_1d(density, window, math.inf, spec)
    abs_mean = cfg.N * cfg.Omega * integrate_1d(
        lambda z: 2 * z / cfg.r_C**2 * (z * z + cfg.gap**2) ** (-cfg.alpha_ABS / 2), 0.0, cfg.r_C, spec
    )
    return outside / (inside + abs_mean)


# ========== Coverage ==========


@dataclass(frozen=True, slots=True)
class CoverageReport:
    """Total and conditional coverage at one threshold, combined over association events."""

    p_total: float
    p_abs_cond: float
    p_tbs_cond: float
    assoc: AssociationResult
    gamma_db: float
    method: Method
    trials: int = 0
    std_error: float = 0.0
    diagnostics: dict[str, float] = field(default_factory=dict)
    variants: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for name in ("p_total", "p_abs_cond", "p_tbs_cond"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name}={value} outside [0, 1]")
        expected = self.p_abs_cond * self.assoc.p_abs + self.p_tbs_cond * self.assoc.p_tbs
        if abs(self.p_total - expected) > 1e-12:
            raise ValueError("p_total must equal the association-weighted conditional coverage")

    @classmethod
    def combine(
        cls,
        p_abs_cond: float,
        p_tbs_cond: float,
        assoc: AssociationResult,
        gamma_db: float,
        method: Method,
        **kwargs,
    ) -> CoverageReport:
        p_total = p_abs_cond * assoc.p_abs + p_tbs_cond * assoc.p_tbs
        return cls(min(1.0, max(0.0, p_total)), p_abs_cond, p_tbs_cond, assoc, gamma_db, method, **kwargs)

    def to_dict(self) -> dict:
        return {
            "p_total": self.p_total,
            "p_abs_cond": self.p_abs_cond,
            "p_tbs_cond": self.p_tbs_cond,
            "p_abs": self.assoc.p_abs,
            "p_tbs": self.assoc.p_tbs,
            "assoc_method": str(self.assoc.method),
            "p_mixed": self.assoc.p_mixed,
            "gamma_db": self.gamma_db,
            "method": str(self.method),
            "trials": self.trials,
            "std_error": self.std_error,
            **self.diagnostics,
        }


@dataclass(frozen=True, slots=True)
class CoverageFits:
    """U fits used by the coverage series: ABS set and each TBS zeta (state-conditional)."""

    abs_U: GammaFit
    tbs_U: dict[str, GammaFit]

    @property
    def variants(self) -> dict[str, str]:
        """Cross-moment reading of each TBS fit, keyed by zeta label."""
        return {label: fit.variant for label, fit in self.tbs_U.items()}


def coverage_fits(
    cfg: NetworkConfig,
    options: FitOptions = FitOptions(),
    rng: RngStream | None = None,
    cache: FitCache | None = None,
    workers: int | None = None,
) -> CoverageFits:
    """
    U fits for the series. TBS fits are state-conditional: the coverage
    integrand already carries the link-state probabilities of the serving triple.
    """
    rng = rng or RngStream(0)
    conditional = replace(options, state_weighting="conditional")
    abs_U, _ = fit_pair(Tier.ABS, LinkStateVector.all_los(), cfg, options, rng, cache, workers)
    tbs_U = {
        z.label: fit_pair(Tier.TBS, z, cfg, conditional, rng, cache, workers)[0] for z in LinkStateVector.all()
    }
    return CoverageFits(abs_U, tbs_U)


def series_ccdf(nu_tilde: int, x: FloatArray) -> FloatArray:
    """sum_{k < nu~} x^k/k! exp(-x): the Gamma(nu~, 1) survival function at x."""
    x = np.asarray(x, dtype=float)
    total = np.zeros_like(x)
    term = np.exp(-x)
    for k in range(nu_tilde):
        if k > 0:
            term = term * x / k
        total = total + term
    return total


def _zeta_weights(r: FloatArray, cfg: NetworkConfig) -> dict[str, FloatArray]:
    p_los = los_probability(np.sqrt(np.maximum(r**2 - cfg.h**2, 0.0)), cfg.h, cfg.env)
    out = {}
    for zeta in LinkStateVector.all():
        w = np.ones(r.shape[0])
        for i, state in enumerate(zeta):
            w = w * (p_los[:, i] if state is LinkState.LOS else 1.0 - p_los[:, i])
        out[zeta.label] = w
    return out


def _conditional_coverage_samples(
    tier: Tier,
    cfg: NetworkConfig,
    gammas: Sequence[float],
    fits: CoverageFits,
    trials: int,
    rng: RngStream,
    outer_radius: float | None,
    workers: int | None,
) -> tuple[FloatArray, float]:
    """Per-draw series values, shape (trials, len(gammas)), and the acceptance rate."""
    stats_by_chunk: list[_Acceptance] = []

    def draw(gen: np.random.Generator, size: int) -> FloatArray:
        acc = _Acceptance()
        r = conditional_sample_batch(tier, cfg, gen, size, acc)
        stats_by_chunk.append(acc)
        sqrt_i = np.sqrt(simulate_interference(r[:, 2], tier, cfg, gen, outer_radius=outer_radius))
        out = np.zeros((size, len(gammas)))
        if tier is Tier.ABS:
            fit = fits.abs_U
            for j, g in enumerate(gammas):
                out[:, j] = series_ccdf(fit.rounded_shape, math.sqrt(g) / fit.theta * sqrt_i)
            return out
        for label, w in _zeta_weights(r, cfg).items():
            fit = fits.tbs_U[label]
            for j, g in enumerate(gammas):
                out[:, j] += w * series_ccdf(fit.rounded_shape, math.sqrt(g) / fit.theta * sqrt_i)
        return out

    values = np.concatenate(run_chunked(draw, trials, rng, workers), axis=0)
    proposed = sum(a.proposed for a in stats_by_chunk)
    accepted = sum(a.accepted for a in stats_by_chunk)
    return values, accepted / proposed if proposed else 0.0


def coverage_analytic_sweep(
    cfg: NetworkConfig,
    gammas: Sequence[float],
    trials: int = DEFAULT_COVERAGE_TRIALS,
    rng: RngStream | None = None,
    assoc: AssociationResult | None = None,
    fits: CoverageFits | None = None,
    options: FitOptions = FitOptions(),
    outer_radius: float | None = None,
    cache: FitCache | None = None,
    workers: int | None = None,
) -> list[CoverageReport]:
    """
    Semi-analytic coverage at each linear threshold in ``gammas`` (used for both tiers),
    all thresholds sharing the same conditional draws.
    """
    rng = rng or RngStream(0)
    assoc = assoc or assoc_prob_abs_analytic(cfg, max(trials, 1_000), rng.substream(1), options=options, cache=cache)
    fits = fits or coverage_fits(cfg, options, rng.substream(2), cache, workers)

    cond: dict[Tier, FloatArray] = {}
    errors: dict[Tier, FloatArray] = {}
    diagnostics: dict[str, float] = {}
    for i, tier in enumerate((Tier.ABS, Tier.TBS)):
        try:
            values, rate = _conditional_coverage_samples(
                tier, cfg, gammas, fits, trials, rng.substream(10 + i), outer_radius, workers
            )
        except AcceptanceRateError:
            if assoc.p(tier) > MIN_ACCEPTANCE:
                raise
            logger.warning("%s association %.1e is negligible; its conditional coverage is not estimated", tier,
                           assoc.p(tier))
            cond[tier] = np.zeros(len(gammas))
            errors[tier] = np.zeros(len(gammas))
            diagnostics[f"acceptance_{tier}"] = 0.0
            continue
        cond[tier] = np.clip(values.mean(axis=0), 0.0, 1.0)
        errors[tier] = values.std(axis=0, ddof=1) / math.sqrt(values.shape[0])
        diagnostics[f"acceptance_{tier}"] = rate

    reports = []
    for j, g in enumerate(gammas):
        std_error = math.hypot(errors[Tier.ABS][j] * assoc.p_abs, errors[Tier.TBS][j] * assoc.p_tbs)
        reports.append(
            CoverageReport.combine(
                float(cond[Tier.ABS][j]),
                float(cond[Tier.TBS][j]),
                assoc,
                linear_to_db(g),
                Method.ANALYTIC,
                trials=trials,
                std_error=std_error,
                diagnostics=dict(diagnostics),
                variants=fits.variants,
            )
        )
    return reports


def coverage_analytic(
    cfg: NetworkConfig,
    gamma: float | None = None,
    trials: int = DEFAULT_COVERAGE_TRIALS,
    rng: RngStream | None = None,
    **kwargs,
) -> CoverageReport:
    """Semi-analytic coverage at linear threshold ``gamma`` (defaults to the configured one)."""
    if gamma is None:
        if cfg.gamma_ABS != cfg.gamma_TBS:
            logger.warning("Distinct tier thresholds; using gamma_ABS for both")
        gamma = cfg.gamma_ABS
    cfg = cfg.replace(gamma_ABS=gamma, gamma_TBS=gamma)
    return coverage_analytic_sweep(cfg, [gamma], trials, rng, **kwargs)[0]


def coverage_sweep(
    cfg: NetworkConfig,
    gammas_db: Sequence[float],
    vary: str | None = None,
    values: Sequence[float] | None = None,
    trials: int = DEFAULT_COVERAGE_TRIALS,
    mc_trials: int = 20_000,
    rng: RngStream | None = None,
    include_mc: bool = True,
    options: FitOptions = FitOptions(),
    cache: FitCache | None = None,
    workers: int | None = None,
) -> pd.DataFrame:
    """
    Coverage against threshold, optionally repeated over values of ``vary``
    (one of h, H, N). Columns: x, gamma_db, p_total_analytic, p_total_mc,
    p_abs_cond, p_tbs_cond, assoc.
    """
    from .sim import empirical_coverage_sweep

    rng = rng or RngStream(0)
    if vary is not None and vary not in ("h", "H", "N"):
        raise ValueError(f"vary must be one of h, H, N, got {vary!r}")
    gammas = [db_to_linear(g) for g in gammas_db]
    settings = [(None, cfg)] if vary is None else [
        (v, cfg.replace(**{vary: int(v) if vary == "N" else float(v)})) for v in (values or [])
    ]
    rows = []
    for i, (x, cfg_x) in enumerate(settings):
        stream = rng.child(i)
        analytic = coverage_analytic_sweep(cfg_x, gammas, trials, stream, options=options, cache=cache,
                                           workers=workers)
        empirical = (
            empirical_coverage_sweep(cfg_x, gammas, trials=mc_trials, rng=stream.substream(3), workers=workers)
            if include_mc
            else [None] * len(gammas)
        )
        for g_db, rep, emp in zip(gammas_db, analytic, empirical):
            rows.append(
                {
                    "x": g_db if x is None else x,
                    "gamma_db": g_db,
                    "p_total_analytic": rep.p_total,
                    "p_total_mc": emp.p_total if emp is not None else float("nan"),
                    "p_abs_cond": rep.p_abs_cond,
                    "p_tbs_cond": rep.p_tbs_cond,
                    "assoc": rep.assoc.p_abs,
                }
            )
        logger.info("Coverage sweep point %s done", x if x is not None else "gamma")
    return pd.DataFrame(rows)


# ========== Curve shape ==========


@dataclass(frozen=True, slots=True)
class CurveShape:
    """Extremes of a coverage curve over one swept field and its largest second divided difference."""

    x_max: float
    x_min: float
    interior_max: bool
    interior_min: bool
    max_curvature: float

    def to_dict(self) -> dict:
        return {
            "x_max": self.x_max,
            "x_min": self.x_min,
            "interior_max": self.interior_max,
            "interior_min": self.interior_min,
            "max_curvature": self.max_curvature,
        }


def curve_shape(x: Sequence[float], y: Sequence[float]) -> CurveShape:
    """Shape of ``y`` over strictly increasing ``x``; a concave curve has ``max_curvature`` <= 0."""
    x_arr = np.asarray(x, dtype=float)
    y_arr = np.asarray(y, dtype=float)
    if x_arr.size < 3 or x_arr.shape != y_arr.shape or np.any(np.diff(x_arr) <= 0):
        raise ValueError("Curve shape needs at least 3 points on a strictly increasing grid")
    slopes = np.diff(y_arr) / np.diff(x_arr)
    curvature = np.diff(slopes) / ((x_arr[2:] - x_arr[:-2]) / 2)
    i_max, i_min = int(np.argmax(y_arr)), int(np.argmin(y_arr))
    last = x_arr.size - 1
    return CurveShape(
        float(x_arr[i_max]), float(x_arr[i_min]), 0 < i_max < last, 0 < i_min < last, float(curvature.max())
    )
