"""
Gamma moment matching of the aggregate CoMP amplitudes

    U = sum_n |H_n| R_n^(-alpha_n/2)    (with fading)
    V = sum_n R_n^(-alpha_n/2)          (large-scale only)

over the three nearest stations of a tier, for a link-state vector zeta.

First moments A_n and second moments B_n are 1-D quadratures against the
marginal distance densities; the cross moments C_pq are Monte Carlo
expectations under the exact joint distance law.

The cross-moment integrand admits several readings; ``FitOptions`` selects one:

* ``state_domain="pair-sum"`` sums over both states of links p and q, each
  weighted by its state probability; ``"fixed"`` keeps only (zeta_p, zeta_q).
* ``exponent_pairing="own"`` attenuates each distance with its own link's
  exponent; ``"crossed"`` swaps the exponents of the pair.
* ``state_weighting="indicator"`` carries the state probabilities P_zeta(r)
  into A, B and C (V then is the sum restricted to links whose drawn state
  matches zeta); ``"conditional"`` drops them, giving the moments of the sum
  given that the links are in state zeta.

``select_cross_moment_variant`` scores each reading against a brute-force
sample of V. With ``select_variant`` set (the default) ``fit_pair`` lets it pick
the (state_domain, exponent_pairing) reading of every TBS fit, and the fit
records the reading it was built with.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Literal

import numpy as np
from scipy import special, stats

from .channel import FadingParams, link_state_probability, sample_nakagami_amplitude
from .dist import pdf_nth, sample_batch, support, tbs_truncation_radius
from .exceptions import DegenerateFitError
from .model import NetworkConfig
from .numerics import (
    DEFAULT_QUADRATURE,
    MonteCarloEstimate,
    QuadratureSpec,
    RngStream,
    integrate_1d,
    mc_mean,
    run_chunked,
)
from .types import FloatArray, LinkState, LinkStateVector, SignalKind, Tier

if TYPE_CHECKING:
    from .cache import FitCache

logger = logging.getLogger(__name__)

DEFAULT_FIT_TRIALS = 200_000
RETRY_FACTOR = 10
TAIL_MASS = 1e-12
SELECTION_STREAM = 3

type StateDomain = Literal["pair-sum", "fixed"]
type ExponentPairing = Literal["own", "crossed"]
type StateWeighting = Literal["indicator", "conditional"]


@dataclass(frozen=True, slots=True)
class FitOptions:
    """Selects the cross-moment reading and the numerical effort of a fit."""

    state_domain: StateDomain = "pair-sum"
    exponent_pairing: ExponentPairing = "own"
    state_weighting: StateWeighting = "indicator"
    trials: int = DEFAULT_FIT_TRIALS
    quadrature: QuadratureSpec = DEFAULT_QUADRATURE
    select_variant: bool = True

    @property
    def variant(self) -> str:
        return f"{self.state_weighting}/{self.state_domain}/{self.exponent_pairing}"

    def cache_label(self, seed: int) -> str:
        reading = f"{self.state_weighting}/selected" if self.select_variant else self.variant
        return f"{reading}/trials={self.trials}/seed={seed}"


@dataclass(frozen=True, slots=True)
class GammaFit:
    """Gamma law with shape ``nu`` and scale ``theta``; ``variant`` names the cross-moment reading behind it."""

    nu: float
    theta: float
    variant: str = ""

    def __post_init__(self) -> None:
        if not (self.nu > 0 and self.theta > 0):
            raise ValueError(f"Gamma parameters must be positive, got nu={self.nu}, theta={self.theta}")

    @classmethod
    def from_moments(cls, mean: float, variance: float, variant: str = "") -> GammaFit:
        return cls(nu=mean**2 / variance, theta=variance / mean, variant=variant)

    @property
    def mean(self) -> float:
        return self.nu * self.theta

    @property
    def variance(self) -> float:
        return self.nu * self.theta**2

    @property
    def rounded_shape(self) -> int:
        """Series length of the coverage expansion: round(nu), at least 1."""
        return max(1, int(round(self.nu)))

    def cdf(self, x: float | FloatArray) -> float | FloatArray:
        return special.gammainc(self.nu, np.maximum(np.asarray(x, dtype=float), 0.0) / self.theta)


@dataclass(frozen=True, slots=True)
class SignalMoments:
    """Intermediate moments of one (tier, zeta) CoMP set."""

    tier: Tier
    zeta: LinkStateVector
    A: FloatArray
    B: FloatArray
    C: FloatArray
    Delta: FloatArray
    Omega: float
    C_std_error: FloatArray = field(default_factory=lambda: np.zeros((3, 3)))


def fading_first_moment(m: float, omega: float) -> float:
    """E|H| = Gamma(m + 1/2)/Gamma(m) * sqrt(omega/m)."""
    return math.exp(special.gammaln(m + 0.5) - special.gammaln(m)) * math.sqrt(omega / m)


# ========== Moments ==========


def _quantile_points(tier: Tier, n: int, cfg: NetworkConfig) -> list[float]:
    q = np.array([0.01, 0.1, 0.5, 0.9, 0.99])
    if tier is Tier.ABS:
        frac = special.betaincinv(n, cfg.N - n + 1, q)
        return list(np.sqrt(cfg.gap**2 + cfg.r_C**2 * frac))
    mu = special.gammaincinv(n, q)
    return list(np.sqrt(cfg.h**2 + mu / (math.pi * cfg.lambda_TBS)))


def _state_weight(tier: Tier, state: LinkState, r, cfg: NetworkConfig, options: FitOptions):
    if options.state_weighting == "conditional" and tier is Tier.TBS:
        return 1.0
    return link_state_probability(state, r, cfg, tier)


def _distance_moment(
    tier: Tier, n: int, state: LinkState, power: float, cfg: NetworkConfig, options: FitOptions
) -> float:
    """E[R_n^(-power) P_state(R_n)] by quadrature, relative to the envelope lo^(-power)."""
    lo, hi = support(tier, cfg)
    if not math.isfinite(hi):
        hi = tbs_truncation_radius(n, cfg, TAIL_MASS)
    envelope = lo ** (-power)

    def integrand(r: float) -> float:
        weight = _state_weight(tier, state, r, cfg, options)
        return (r / lo) ** (-power) * weight * pdf_nth(tier, r, n, cfg)

    return envelope * integrate_1d(integrand, lo, hi, options.quadrature, points=_quantile_points(tier, n, cfg))


def _pair_terms(
    tier: Tier, zeta: LinkStateVector, p: int, q: int, options: FitOptions
) -> list[tuple[LinkState, LinkState]]:
    if tier is Tier.ABS:
        return [(LinkState.LOS, LinkState.LOS)]
    if options.state_domain == "fixed" or options.state_weighting == "conditional":
        return [(zeta[p], zeta[q])]
    return [(sp, sq) for sp in LinkState for sq in LinkState]


def cross_moment_samples(
    r: FloatArray, tier: Tier, zeta: LinkStateVector, cfg: NetworkConfig, options: FitOptions
) -> FloatArray:
    """Per-draw cross-moment integrands, shape (size, 3) for the pairs (0,1), (0,2), (1,2)."""
    out = np.zeros((r.shape[0], 3))
    for col, (p, q) in enumerate(((0, 1), (0, 2), (1, 2))):
        for sp, sq in _pair_terms(tier, zeta, p, q, options):
            ep, eq = (sp, sq) if options.exponent_pairing == "own" else (sq, sp)
            wp = _state_weight(tier, sp, r[:, p], cfg, options)
            wq = _state_weight(tier, sq, r[:, q], cfg, options)
            out[:, col] += wp * wq * r[:, p] ** (-cfg.alpha(tier, ep) / 2) * r[:, q] ** (-cfg.alpha(tier, eq) / 2)
    return out


def compute_moments(
    tier: Tier,
    zeta: LinkStateVector,
    cfg: NetworkConfig,
    options: FitOptions = FitOptions(),
    rng: RngStream | None = None,
    workers: int | None = None,
) -> SignalMoments:
    """
    A_n, B_n by quadrature, C_pq by ordered-triple Monte Carlo, and Delta_n.

    C is stored symmetric without a pair-doubling factor; the variance sums it
    over ordered pairs p != q.
    """
    if tier is Tier.ABS:
        zeta = LinkStateVector.all_los()
    rng = rng or RngStream(0)
    A = np.array([_distance_moment(tier, n + 1, zeta[n], cfg.alpha(tier, zeta[n]) / 2, cfg, options) for n in range(3)])
    B = np.array([_distance_moment(tier, n + 1, zeta[n], cfg.alpha(tier, zeta[n]), cfg, options) for n in range(3)])
    Delta = np.array([fading_first_moment(cfg.m(tier, zeta[n]), cfg.Omega) for n in range(3)])

    parts = run_chunked(
        lambda gen, size: cross_moment_samples(sample_batch(tier, cfg, gen, size), tier, zeta, cfg, options),
        options.trials,
        rng,
        workers,
    )
    draws = np.concatenate(parts, axis=0)
    C = np.zeros((3, 3))
    C_err = np.zeros((3, 3))
    for col, (p, q) in enumerate(((0, 1), (0, 2), (1, 2))):
        est = mc_mean(draws[:, col])
        C[p, q] = C[q, p] = est.estimate
        C_err[p, q] = C_err[q, p] = est.std_error
    logger.debug("Moments %s %s: A=%s B=%s", tier, zeta, A, B)
    return SignalMoments(tier, zeta, A, B, C, Delta, cfg.Omega, C_err)


def assemble_u(moments: SignalMoments) -> tuple[float, float]:
    """Mean and variance of U from its moments."""
    mean = float(np.sum(moments.A * moments.Delta))
    cross = float(np.sum(np.outer(moments.Delta, moments.Delta) * moments.C))
    second = moments.Omega * float(np.sum(moments.B)) + cross
    return mean, second - mean**2


def assemble_v(moments: SignalMoments) -> tuple[float, float]:
    """Mean and variance of V from its moments."""
    mean = float(np.sum(moments.A))
    second = float(np.sum(moments.B)) + float(np.sum(moments.C))
    return mean, second - mean**2


# ========== Fits ==========


def _fit(
    kind: SignalKind,
    tier: Tier,
    zeta: LinkStateVector,
    cfg: NetworkConfig,
    options: FitOptions,
    rng: RngStream | None,
    moments: SignalMoments | None,
    workers: int | None,
) -> GammaFit:
    assemble = assemble_u if kind is SignalKind.U else assemble_v
    moments = moments or compute_moments(tier, zeta, cfg, options, rng, workers)
    mean, variance = assemble(moments)
    if variance <= 0:
        logger.warning(
            "Non-positive %s variance %.3e for %s %s; retrying with %dx trials",
            kind,
            variance,
            tier,
            zeta,
            RETRY_FACTOR,
        )
        wider = replace(options, trials=options.trials * RETRY_FACTOR)
        retry_rng = (rng or RngStream(0)).child(RETRY_FACTOR)
        mean, variance = assemble(compute_moments(tier, zeta, cfg, wider, retry_rng, workers))
        if variance <= 0:
            raise DegenerateFitError(str(kind), str(tier), zeta.label, variance)
    return GammaFit.from_moments(mean, variance, options.variant)


def fit_gamma_U(
    tier: Tier,
    zeta: LinkStateVector,
    cfg: NetworkConfig,
    options: FitOptions = FitOptions(),
    rng: RngStream | None = None,
    moments: SignalMoments | None = None,
    workers: int | None = None,
) -> GammaFit:
    """Gamma fit (nu, theta) of the fading-inclusive aggregate amplitude U."""
    return _fit(SignalKind.U, tier, zeta, cfg, options, rng, moments, workers)


def fit_gamma_V(
    tier: Tier,
    zeta: LinkStateVector,
    cfg: NetworkConfig,
    options: FitOptions = FitOptions(),
    rng: RngStream | None = None,
    moments: SignalMoments | None = None,
    workers: int | None = None,
) -> GammaFit:
    """Gamma fit (nu', theta') of the large-scale aggregate amplitude V."""
    return _fit(SignalKind.V, tier, zeta, cfg, options, rng, moments, workers)


@dataclass(frozen=True, slots=True)
class FitTable:
    """U and V fits of the ABS set and of the TBS set for every zeta."""

    abs_U: GammaFit
    abs_V: GammaFit
    tbs_U: dict[str, GammaFit]
    tbs_V: dict[str, GammaFit]
    options: FitOptions

    def tbs(self, kind: SignalKind, zeta: LinkStateVector) -> GammaFit:
        table = self.tbs_U if kind is SignalKind.U else self.tbs_V
        return table[zeta.label]


def fit_stream(rng: RngStream, tier: Tier, zeta: LinkStateVector) -> RngStream:
    if tier is Tier.ABS:
        return rng.child(0)
    return rng.child(1 + LinkStateVector.all().index(zeta))


def fit_pair(
    tier: Tier,
    zeta: LinkStateVector,
    cfg: NetworkConfig,
    options: FitOptions,
    rng: RngStream,
    cache: FitCache | None = None,
    workers: int | None = None,
) -> tuple[GammaFit, GammaFit]:
    """
    U and V fits of one (tier, zeta) sharing a single moment computation, via ``cache``.

    With ``options.select_variant`` the TBS reading is the one
    ``select_cross_moment_variant`` scores best; both fits carry its label.
    """
    if tier is Tier.ABS:
        zeta = LinkStateVector.all_los()
    label = options.cache_label(rng.seed)
    key_hash = cfg.config_hash()
    if cache is not None:
        u = cache.get(key_hash, tier, zeta, SignalKind.U, label)
        v = cache.get(key_hash, tier, zeta, SignalKind.V, label)
        if u is not None and v is not None:
            return u, v
    stream = fit_stream(rng, tier, zeta)
    chosen = replace(options, select_variant=False)
    moments = None
    if options.select_variant and tier is Tier.TBS:
        selection = select_cross_moment_variant(
            tier, zeta, cfg, options.trials, stream.substream(SELECTION_STREAM), chosen, options.state_weighting,
            workers,
        )
        chosen, moments = selection.best, selection.moments
    moments = moments or compute_moments(tier, zeta, cfg, chosen, stream, workers)
    u = fit_gamma_U(tier, zeta, cfg, chosen, stream, moments, workers)
    v = fit_gamma_V(tier, zeta, cfg, chosen, stream, moments, workers)
    if cache is not None:
        cache.set(key_hash, tier, zeta, SignalKind.U, label, u)
        cache.set(key_hash, tier, zeta, SignalKind.V, label, v)
    return u, v


def fit_table(
    cfg: NetworkConfig,
    options: FitOptions = FitOptions(),
    rng: RngStream | None = None,
    cache: FitCache | None = None,
    workers: int | None = None,
) -> FitTable:
    rng = rng or RngStream(0)
    abs_U, abs_V = fit_pair(Tier.ABS, LinkStateVector.all_los(), cfg, options, rng, cache, workers)
    tbs_U: dict[str, GammaFit] = {}
    tbs_V: dict[str, GammaFit] = {}
    for zeta in LinkStateVector.all():
        tbs_U[zeta.label], tbs_V[zeta.label] = fit_pair(Tier.TBS, zeta, cfg, options, rng, cache, workers)
    return FitTable(abs_U, abs_V, tbs_U, tbs_V, options)


# ========== Brute-force oracles ==========


def _draw_states(tier: Tier, r: FloatArray, cfg: NetworkConfig, gen: np.random.Generator) -> FloatArray:
    """Boolean LoS mask per link, one draw per link."""
    if tier is Tier.ABS:
        return np.ones_like(r, dtype=bool)
    return gen.random(r.shape) < link_state_probability(LinkState.LOS, r, cfg, tier)


def _link_mask(
    tier: Tier, zeta: LinkStateVector, r: FloatArray, cfg: NetworkConfig, gen: np.random.Generator, weighting: str
) -> FloatArray:
    target = np.array([s is LinkState.LOS for s in zeta])
    if tier is Tier.ABS or weighting == "conditional":
        return np.ones_like(r, dtype=bool)
    return _draw_states(tier, r, cfg, gen) == target


def _attenuation(tier: Tier, zeta: LinkStateVector, r: FloatArray, cfg: NetworkConfig) -> FloatArray:
    alphas = np.array([cfg.alpha(tier, s) for s in zeta])
    return r ** (-alphas / 2)


def sample_v(
    tier: Tier,
    zeta: LinkStateVector,
    cfg: NetworkConfig,
    gen: np.random.Generator,
    size: int,
    weighting: StateWeighting = "indicator",
) -> FloatArray:
    """Brute-force draws of V; with indicator weighting only links whose drawn state matches zeta count."""
    if tier is Tier.ABS:
        zeta = LinkStateVector.all_los()
    r = sample_batch(tier, cfg, gen, size)
    mask = _link_mask(tier, zeta, r, cfg, gen, weighting)
    return np.sum(mask * _attenuation(tier, zeta, r, cfg), axis=1)


def sample_u(
    tier: Tier,
    zeta: LinkStateVector,
    cfg: NetworkConfig,
    gen: np.random.Generator,
    size: int,
    weighting: StateWeighting = "indicator",
) -> FloatArray:
    """Brute-force draws of U (Nakagami amplitudes times attenuation)."""
    if tier is Tier.ABS:
        zeta = LinkStateVector.all_los()
    r = sample_batch(tier, cfg, gen, size)
    mask = _link_mask(tier, zeta, r, cfg, gen, weighting)
    amps = np.column_stack(
        [sample_nakagami_amplitude(FadingParams.for_link(cfg, tier, s), gen, size) for s in zeta]
    )
    return np.sum(mask * amps * _attenuation(tier, zeta, r, cfg), axis=1)


def ks_fit_vs_empirical(fit: GammaFit, samples: FloatArray) -> float:
    """Kolmogorov-Smirnov distance between a Gamma fit and empirical draws."""
    return float(stats.kstest(samples, fit.cdf).statistic)


def empirical_moments(samples: FloatArray) -> MonteCarloEstimate:
    return mc_mean(samples)


@dataclass(frozen=True, slots=True)
class VariantSelection:
    """Relative variance error of every cross-moment reading; ``best`` minimizes it."""

    best: FitOptions
    scores: dict[str, float]
    empirical_variance: float
    moments: SignalMoments | None = None


def select_cross_moment_variant(
    tier: Tier,
    zeta: LinkStateVector,
    cfg: NetworkConfig,
    trials: int,
    rng: RngStream,
    base: FitOptions = FitOptions(),
    weighting: StateWeighting = "indicator",
    workers: int | None = None,
) -> VariantSelection:
    """Score each (state_domain, exponent_pairing) reading against sampled V."""
    samples = sample_v(tier, zeta, cfg, rng.child(99).generator(), trials, weighting)
    empirical_variance = float(np.var(samples, ddof=1))
    scores: dict[str, float] = {}
    candidates: dict[str, tuple[FitOptions, SignalMoments]] = {}
    for domain in ("pair-sum", "fixed"):
        for pairing in ("own", "crossed"):
            options = replace(
                base,
                state_domain=domain,
                exponent_pairing=pairing,
                state_weighting=weighting,
                trials=trials,
                select_variant=False,
            )
            moments = compute_moments(tier, zeta, cfg, options, rng.child(7), workers)
            _, variance = assemble_v(moments)
            scores[options.variant] = abs(variance - empirical_variance) / empirical_variance
            candidates[options.variant] = (options, moments)
    best_label = min(scores, key=scores.__getitem__)
    logger.info("Cross-moment variant for %s %s: %s (scores %s)", tier, zeta, best_label, scores)
    best, moments = candidates[best_label]
    return VariantSelection(best, scores, empirical_variance, moments)
