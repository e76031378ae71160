"""
Distance laws of the ordered nearest ABSs (finite BPP on a disk at altitude H)
and nearest TBSs (PPP on the ground plane), with exact samplers.

ABS distances live on [H - h, r_max]; TBS distances on [h, inf).
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy import special, stats

from .exceptions import DomainError, OrderingError
from .model import NetworkConfig
from .numerics import RngStream, as_generator
from .types import FloatArray, Tier

logger = logging.getLogger(__name__)

ORDER_TOL = 1e-9


@dataclass(frozen=True, slots=True)
class OrderedDistances:
    """Distances r1 <= r2 <= r3 from the user to the nearest stations of one tier."""

    r: tuple[float, float, float]
    tier: Tier

    def __post_init__(self) -> None:
        if len(self.r) != 3:
            raise OrderingError(f"Expected 3 distances, got {len(self.r)}")
        if any(b < a for a, b in zip(self.r, self.r[1:])):
            raise OrderingError(f"Distances must be nondecreasing, got {self.r}")

    def as_array(self) -> FloatArray:
        return np.asarray(self.r, dtype=float)

    def check_support(self, cfg: NetworkConfig) -> None:
        lo, hi = support(self.tier, cfg)
        if self.r[0] < lo - ORDER_TOL or self.r[-1] > hi + ORDER_TOL:
            raise OrderingError(f"{self.tier} distances {self.r} outside [{lo}, {hi}]")


def support(tier: Tier, cfg: NetworkConfig) -> tuple[float, float]:
    if tier is Tier.ABS:
        return cfg.gap, cfg.r_max
    return cfg.h, math.inf


def _ordered_array(r: OrderedDistances | Sequence[float] | FloatArray) -> FloatArray:
    if isinstance(r, OrderedDistances):
        return r.as_array()
    arr = np.asarray(r, dtype=float)
    if arr.ndim == 1 and np.any(np.diff(arr) < 0):
        raise OrderingError(f"Distances must be nondecreasing, got {arr.tolist()}")
    if arr.ndim == 2 and np.any(np.diff(arr, axis=1) < 0):
        raise OrderingError("Every distance row must be nondecreasing")
    return arr


def _scalar(out: FloatArray) -> float | FloatArray:
    return float(out) if np.ndim(out) == 0 else out


# ========== ABS tier ==========


def abs_area_fraction(r: float | FloatArray, cfg: NetworkConfig) -> FloatArray:
    """F_D(r): probability that a single ABS lies within 3-D distance r of the user."""
    r_arr = np.asarray(r, dtype=float)
    return np.clip((r_arr**2 - cfg.gap**2) / cfg.r_C**2, 0.0, 1.0)


def _abs_checked_n(n: int, cfg: NetworkConfig) -> None:
    if not 1 <= n <= cfg.N:
        raise DomainError(f"ABS order n must be in [1, {cfg.N}], got {n}")


def pdf_abs_nth(r: float | FloatArray, n: int, cfg: NetworkConfig) -> float | FloatArray:
    """Density of the n-th nearest ABS distance (order-statistics compact form)."""
    _abs_checked_n(n, cfg)
    r_arr = np.asarray(r, dtype=float)
    inside = (r_arr >= cfg.gap) & (r_arr <= cfg.r_max)
    F = abs_area_fraction(r_arr, cfg)
    log_coef = special.gammaln(cfg.N + 1) - special.gammaln(n) - special.gammaln(cfg.N - n + 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_pdf = (
            log_coef
            + np.log(2 * np.where(inside, r_arr, 1.0) / cfg.r_C**2)
            + special.xlogy(n - 1, F)
            + special.xlogy(cfg.N - n, 1.0 - F)
        )
    return _scalar(np.where(inside, np.exp(log_pdf), 0.0))


def pdf_abs_first(r: float | FloatArray, cfg: NetworkConfig) -> float | FloatArray:
    """Nearest-ABS density N (2r/r_C²) ((r_max² - r²)/r_C²)^(N-1)."""
    r_arr = np.asarray(r, dtype=float)
    inside = (r_arr >= cfg.gap) & (r_arr <= cfg.r_max)
    out = cfg.N * (2 * r_arr / cfg.r_C**2) * ((cfg.r_max**2 - r_arr**2) / cfg.r_C**2) ** (cfg.N - 1)
    return _scalar(np.where(inside, out, 0.0))


def pdf_abs_nth_binomial(r: float | FloatArray, n: int, cfg: NetworkConfig) -> float | FloatArray:
    """The same density written as the derivative of the binomial tail sum."""
    _abs_checked_n(n, cfg)
    r_arr = np.asarray(r, dtype=float)
    inside = (r_arr >= cfg.gap) & (r_arr <= cfg.r_max)
    F = abs_area_fraction(r_arr, cfg)
    G = 1.0 - F
    f_d = 2 * r_arr / cfg.r_C**2
    total = np.zeros_like(F)
    for k in range(n, cfg.N + 1):
        up = k * F ** (k - 1) * G ** (cfg.N - k)
        down = (cfg.N - k) * F**k * G ** (cfg.N - k - 1) if k < cfg.N else 0.0
        total = total + special.comb(cfg.N, k) * (up - down)
    return _scalar(np.where(inside, f_d * total, 0.0))


def cdf_abs_nth(r: float | FloatArray, n: int, cfg: NetworkConfig) -> float | FloatArray:
    """P(R_n <= r): at least n of N ABSs within r, a regularized incomplete beta."""
    _abs_checked_n(n, cfg)
    return _scalar(special.betainc(n, cfg.N - n + 1, abs_area_fraction(r, cfg)))


def joint_pdf_abs(r: OrderedDistances | Sequence[float], cfg: NetworkConfig) -> float:
    """Joint density of the n nearest ABS distances (n = len(r))."""
    arr = _ordered_array(r)
    n = arr.size
    _abs_checked_n(n, cfg)
    if arr[0] < cfg.gap or arr[-1] > cfg.r_max:
        return 0.0
    log_coef = special.gammaln(cfg.N + 1) - special.gammaln(cfg.N - n + 1)
    tail = (cfg.r_max**2 - arr[-1] ** 2) / cfg.r_C**2
    log_pdf = log_coef + n * math.log(2 / cfg.r_C**2) + float(np.sum(np.log(arr))) + special.xlogy(cfg.N - n, tail)
    return float(np.exp(log_pdf))


# ========== TBS tier ==========


def tbs_mean_count(r: float | FloatArray, cfg: NetworkConfig) -> FloatArray:
    """Mean number of TBSs within 3-D distance r: pi lambda (r² - h²)."""
    r_arr = np.asarray(r, dtype=float)
    return math.pi * cfg.lambda_TBS * np.maximum(r_arr**2 - cfg.h**2, 0.0)


def pdf_tbs_nth(r: float | FloatArray, n: int, cfg: NetworkConfig) -> float | FloatArray:
    """Density of the n-th nearest TBS distance."""
    if n < 1:
        raise DomainError(f"TBS order n must be >= 1, got {n}")
    r_arr = np.asarray(r, dtype=float)
    inside = r_arr > cfg.h
    mu = tbs_mean_count(r_arr, cfg)
    lam = math.pi * cfg.lambda_TBS
    with np.errstate(divide="ignore", invalid="ignore"):
        log_pdf = (
            math.log(2.0)
            + n * math.log(lam)
            + np.log(np.where(inside, r_arr, 1.0))
            - special.gammaln(n)
            + special.xlogy(n - 1, mu / lam)
            - mu
        )
    return _scalar(np.where(inside, np.exp(log_pdf), 0.0))


def pdf_tbs_first(r: float | FloatArray, cfg: NetworkConfig) -> float | FloatArray:
    """Nearest-TBS density 2 pi lambda r exp(-pi lambda (r² - h²))."""
    r_arr = np.asarray(r, dtype=float)
    out = 2 * math.pi * cfg.lambda_TBS * r_arr * np.exp(-math.pi * cfg.lambda_TBS * (r_arr**2 - cfg.h**2))
    return _scalar(np.where(r_arr > cfg.h, out, 0.0))


def cdf_tbs_nth(r: float | FloatArray, n: int, cfg: NetworkConfig) -> float | FloatArray:
    """P(R_n <= r): at least n TBSs within r, a regularized lower gamma."""
    if n < 1:
        raise DomainError(f"TBS order n must be >= 1, got {n}")
    return _scalar(special.gammainc(n, tbs_mean_count(r, cfg)))


def tbs_conditional_pdf(r_next: float | FloatArray, r_prev: float, cfg: NetworkConfig) -> float | FloatArray:
    """Density of the next TBS distance given the previous one."""
    r_arr = np.asarray(r_next, dtype=float)
    lam = math.pi * cfg.lambda_TBS
    out = 2 * lam * r_arr * np.exp(-lam * (r_arr**2 - r_prev**2))
    return _scalar(np.where(r_arr >= r_prev, out, 0.0))


def joint_pdf_tbs(r: OrderedDistances | Sequence[float], cfg: NetworkConfig) -> float:
    """Joint density of the n nearest TBS distances (n = len(r))."""
    arr = _ordered_array(r)
    if arr[0] < cfg.h:
        return 0.0
    lam = math.pi * cfg.lambda_TBS
    n = arr.size
    log_pdf = n * math.log(2 * lam) + float(np.sum(np.log(arr))) - lam * (arr[-1] ** 2 - cfg.h**2)
    return float(np.exp(log_pdf))


def tbs_truncation_radius(n: int, cfg: NetworkConfig, tail_mass: float = 1e-12) -> float:
    """Radius beyond which the n-th TBS distance has probability below ``tail_mass``."""
    if not 0 < tail_mass < 1:
        raise DomainError(f"tail_mass must lie in (0, 1), got {tail_mass}")
    mu = float(special.gammainccinv(n, tail_mass))
    return math.sqrt(cfg.h**2 + mu / (math.pi * cfg.lambda_TBS))


# ========== Joint box CDFs of the ordered triple ==========


def joint_cdf_abs(r: FloatArray, cfg: NetworkConfig) -> FloatArray:
    """
    P(R1 <= r1, R2 <= r2, R3 <= r3) for the ABS tier, rows of ``r`` ordered.

    Counts the ABSs falling in the shells (., r1], (r1, r2], (r2, r3].
    """
    arr = np.atleast_2d(_ordered_array(r))
    N = cfg.N
    F = abs_area_fraction(arr, cfg)
    p1 = F[:, 0]
    p2 = F[:, 1] - F[:, 0]
    p3 = F[:, 2] - F[:, 1]
    q1 = 1.0 - p1
    q12 = np.clip(1.0 - p1 - p2, 0.0, 1.0)
    q123 = np.clip(1.0 - p1 - p2 - p3, 0.0, 1.0)
    three_inner = stats.binom.sf(2, N, p1)
    two_inner = special.comb(N, 2) * p1**2 * (q1 ** (N - 2) - q123 ** (N - 2))
    one_inner_two_mid = N * p1 * (q1 ** (N - 1) - q12 ** (N - 1) - (N - 1) * p2 * q12 ** (N - 2))
    one_inner_one_mid = N * (N - 1) * p1 * p2 * (q12 ** (N - 2) - q123 ** (N - 2))
    out = np.clip(three_inner + two_inner + one_inner_two_mid + one_inner_one_mid, 0.0, 1.0)
    return out if np.ndim(r) == 2 else out[0]


def joint_cdf_tbs(r: FloatArray, cfg: NetworkConfig) -> FloatArray:
    """P(R1 <= r1, R2 <= r2, R3 <= r3) for the TBS tier, rows of ``r`` ordered."""
    arr = np.atleast_2d(_ordered_array(r))
    mu = tbs_mean_count(arr, cfg)
    mu1 = mu[:, 0]
    d2 = mu[:, 1] - mu[:, 0]
    d3 = mu[:, 2] - mu[:, 1]
    three_inner = stats.poisson.sf(2, mu1)
    two_inner = stats.poisson.pmf(2, mu1) * -np.expm1(-(d2 + d3))
    one_inner = stats.poisson.pmf(1, mu1) * (stats.poisson.sf(1, d2) + stats.poisson.pmf(1, d2) * -np.expm1(-d3))
    out = np.clip(three_inner + two_inner + one_inner, 0.0, 1.0)
    return out if np.ndim(r) == 2 else out[0]


def joint_ccdf(tier: Tier, r: FloatArray, cfg: NetworkConfig) -> FloatArray:
    """1 - joint box CDF of ``tier`` at the ordered triples ``r``."""
    cdf = joint_cdf_abs(r, cfg) if tier is Tier.ABS else joint_cdf_tbs(r, cfg)
    return 1.0 - cdf


# ========== Samplers ==========


def sample_abs_batch(cfg: NetworkConfig, gen: np.random.Generator, size: int, count: int = 3) -> FloatArray:
    """``size`` exact draws of the ``count`` nearest ABS distances, shape (size, count)."""
    if cfg.N < count:
        raise DomainError(f"Need N >= {count} ABSs, got {cfg.N}")
    rho2 = cfg.r_C**2 * gen.random((size, cfg.N))
    r = np.sqrt(cfg.gap**2 + rho2)
    nearest = np.partition(r, count - 1, axis=1)[:, :count]
    return np.sort(nearest, axis=1)


def sample_tbs_batch(cfg: NetworkConfig, gen: np.random.Generator, size: int, count: int = 3) -> FloatArray:
    """``size`` exact draws of the ``count`` nearest TBS distances, shape (size, count)."""
    steps = gen.standard_exponential((size, count)) / (math.pi * cfg.lambda_TBS)
    return np.sqrt(cfg.h**2 + np.cumsum(steps, axis=1))


def sample_batch(tier: Tier, cfg: NetworkConfig, gen: np.random.Generator, size: int, count: int = 3) -> FloatArray:
    if tier is Tier.ABS:
        return sample_abs_batch(cfg, gen, size, count)
    return sample_tbs_batch(cfg, gen, size, count)


def sample_ordered_abs(cfg: NetworkConfig, rng: RngStream | np.random.Generator, count: int = 3) -> OrderedDistances:
    row = sample_abs_batch(cfg, as_generator(rng), 1, count)[0]
    return OrderedDistances(tuple(float(x) for x in row), Tier.ABS)


def sample_ordered_tbs(cfg: NetworkConfig, rng: RngStream | np.random.Generator, count: int = 3) -> OrderedDistances:
    row = sample_tbs_batch(cfg, as_generator(rng), 1, count)[0]
    return OrderedDistances(tuple(float(x) for x in row), Tier.TBS)


# ========== Validation helpers ==========


def pdf_nth(tier: Tier, r: float | FloatArray, n: int, cfg: NetworkConfig) -> float | FloatArray:
    return pdf_abs_nth(r, n, cfg) if tier is Tier.ABS else pdf_tbs_nth(r, n, cfg)


def cdf_nth(tier: Tier, r: float | FloatArray, n: int, cfg: NetworkConfig) -> float | FloatArray:
    return cdf_abs_nth(r, n, cfg) if tier is Tier.ABS else cdf_tbs_nth(r, n, cfg)


@dataclass(frozen=True, slots=True)
class KSResult:
    tier: Tier
    n: int
    statistic: float
    pvalue: float
    trials: int


def ks_against_analytic(
    tier: Tier,
    n: int,
    cfg: NetworkConfig,
    trials: int,
    rng: RngStream | np.random.Generator,
    samples: FloatArray | None = None,
) -> KSResult:
    """Kolmogorov-Smirnov distance between sampled n-th distances and the analytic CDF."""
    if samples is None:
        samples = sample_batch(tier, cfg, as_generator(rng), trials, count=max(n, 3))[:, n - 1]
    result = stats.kstest(samples, lambda x: cdf_nth(tier, x, n, cfg))
    logger.debug("KS %s n=%d: D=%.4g p=%.3g", tier, n, result.statistic, result.pvalue)
    return KSResult(tier, n, float(result.statistic), float(result.pvalue), len(samples))


def histogram_table(tier: Tier, n: int, cfg: NetworkConfig, samples: FloatArray, bins: int = 60) -> pd.DataFrame:
    """Columns (tier, n, r, analytic_pdf, empirical_pdf) at bin centers."""
    lo, hi = support(tier, cfg)
    upper = hi if math.isfinite(hi) else float(np.quantile(samples, 0.999))
    counts, edges = np.histogram(samples, bins=bins, range=(lo, upper))
    width = edges[1] - edges[0]
    centers = 0.5 * (edges[:-1] + edges[1:])
    return pd.DataFrame(
        {
            "tier": str(tier),
            "n": n,
            "r": centers,
            "analytic_pdf": pdf_nth(tier, centers, n, cfg),
            "empirical_pdf": counts / (len(samples) * width),
        }
    )
