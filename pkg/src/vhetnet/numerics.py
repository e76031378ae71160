"""
Shared numerical kernels: seeded random streams, special functions,
adaptive quadrature and deterministic Monte Carlo reduction.
"""

from __future__ import annotations

import logging
import math
import os
import warnings
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .exceptions import DomainError, InsufficientTrialsError, QuadratureError
from .types import FloatArray

logger = logging.getLogger(__name__)

DEFAULT_MC_TRIALS = 200_000
MIN_MC_TRIALS = 100
CHUNK_SIZE = 8_192
THREADS_ENV_VAR = "VHETNET_THREADS"


def default_workers() -> int:
    """Worker count from ``VHETNET_THREADS``, falling back to 1."""
    raw = os.environ.get(THREADS_ENV_VAR)
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        logger.warning("Ignoring non-integer %s=%r", THREADS_ENV_VAR, raw)
        return 1


# ========== Random streams ==========


@dataclass(frozen=True, slots=True)
class RngStream:
    """
    Reproducible random stream identified by (seed, stream_id).

    Children derived with ``child`` are statistically independent of their
    parent and of each other, so work can be split across threads without
    changing results.

    Example:
        rng = RngStream(42)
        x = rng.generator().standard_normal(10)
        chunk_rng = rng.child(3)
    """

    seed: int
    stream_id: int = 0
    path: tuple[int, ...] = ()

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id, *self.path))
        return np.random.Generator(np.random.PCG64(seq))

    def child(self, key: int) -> RngStream:
        return RngStream(self.seed, self.stream_id, (*self.path, int(key)))

    def substream(self, stream_id: int) -> RngStream:
        """A sibling stream with a different ``stream_id`` and the same seed."""
        return RngStream(self.seed, int(stream_id), self.path)


def as_generator(rng: RngStream | np.random.Generator) -> np.random.Generator:
    return rng.generator() if isinstance(rng, RngStream) else rng


# ========== Special functions ==========


def reg_lower_gamma(nu: float, x: float | FloatArray) -> float | FloatArray:
    """
    Regularized lower incomplete gamma γ(ν, x)/Γ(ν).

    Raises:
        DomainError: if nu <= 0 or any x < 0.
    """
    if not nu > 0:
        raise DomainError(f"reg_lower_gamma needs nu > 0, got {nu}")
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr < 0) or np.any(np.isnan(x_arr)):
        raise DomainError("reg_lower_gamma needs x >= 0")
    out = special.gammainc(nu, x_arr)
    return float(out) if out.ndim == 0 else out


# ========== Quadrature ==========


@dataclass(frozen=True, slots=True)
class QuadratureSpec:
    """Tolerances for ``integrate_1d``."""

    abs_tol: float = 1e-9
    rel_tol: float = 1e-7
    max_subdivisions: int = 200

    def __post_init__(self) -> None:
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise DomainError("Quadrature tolerances must be positive")
        if self.max_subdivisions < 1:
            raise DomainError("max_subdivisions must be >= 1")


DEFAULT_QUADRATURE = QuadratureSpec()


def integrate_1d(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    spec: QuadratureSpec = DEFAULT_QUADRATURE,
    points: Sequence[float] | None = None,
) -> float:
    """
    Adaptive Gauss-Kronrod quadrature of ``f`` over [lo, hi]; ``hi`` may be inf.

    Raises:
        QuadratureError: if the integrator reports non-convergence or the
            error estimate exceeds the requested tolerance.
    """
    if hi == lo:
        return 0.0
    kwargs = {}
    if points is not None and math.isfinite(hi):
        kwargs["points"] = [p for p in points if lo < p < hi]
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            value, error = integrate.quad(
                f,
                lo,
                hi,
                epsabs=spec.abs_tol,
                epsrel=spec.rel_tol,
                limit=spec.max_subdivisions,
                **kwargs,
            )
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(lo, hi, str(exc).splitlines()[0]) from None
    if not math.isfinite(value):
        raise QuadratureError(lo, hi, f"non-finite value {value}")
    if error > max(spec.abs_tol, spec.rel_tol * abs(value)) * 10:
        raise QuadratureError(lo, hi, f"error estimate {error:.2e} above tolerance")
    return float(value)


# ========== Monte Carlo ==========


@dataclass(frozen=True, slots=True)
class MonteCarloEstimate:
    """Sample mean with its standard error."""

    estimate: float
    std_error: float
    trials: int

    def within(self, value: float, sigmas: float = 3.0, floor: float = 0.0) -> bool:
        return abs(self.estimate - value) <= max(sigmas * self.std_error, floor)


def pairwise_sum(values: FloatArray) -> float:
    """Deterministic pairwise (cascade) summation; order depends only on length."""
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        return 0.0
    width = 1 << (v.size - 1).bit_length()
    # zero padding leaves every partial sum unchanged
    v = np.concatenate([v, np.zeros(width - v.size)])
    while v.size > 1:
        v = v[0::2] + v[1::2]
    return float(v[0])


def mc_mean(values: FloatArray) -> MonteCarloEstimate:
    v = np.asarray(values, dtype=float).ravel()
    n = v.size
    if n == 0:
        raise InsufficientTrialsError(0, 1)
    mean = pairwise_sum(v) / n
    if n == 1:
        return MonteCarloEstimate(mean, math.inf, 1)
    var = pairwise_sum((v - mean) ** 2) / (n - 1)
    return MonteCarloEstimate(mean, math.sqrt(var / n), n)


def run_chunked[T](
    draw: Callable[[np.random.Generator, int], T],
    trials: int,
    rng: RngStream,
    workers: int | None = None,
    chunk_size: int = CHUNK_SIZE,
) -> list[T]:
    """
    Run ``draw(generator, size)`` over fixed-size chunks and return results in chunk order.

    Chunk ``i`` always uses ``rng.child(i)``, so the output is identical for any
    worker count.
    """
    if trials < 1:
        raise InsufficientTrialsError(trials, 1)
    sizes = [chunk_size] * (trials // chunk_size)
    if trials % chunk_size:
        sizes.append(trials % chunk_size)
    workers = workers or default_workers()

    def job(i: int) -> T:
        return draw(rng.child(i).generator(), sizes[i])

    if workers <= 1 or len(sizes) == 1:
        return [job(i) for i in range(len(sizes))]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(job, range(len(sizes))))


def map_indexed[T](
    fn: Callable[[int, np.random.Generator], T],
    count: int,
    rng: RngStream,
    workers: int | None = None,
) -> list[T]:
    """``fn(i, generator)`` for i in range(count), item ``i`` on ``rng.child(i)``; results in index order."""
    workers = workers or default_workers()

    def job(i: int) -> T:
        return fn(i, rng.child(i).generator())

    if workers <= 1 or count <= 1:
        return [job(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(job, range(count)))


def mc_expectation(
    draw: Callable[[np.random.Generator, int], FloatArray],
    trials: int,
    rng: RngStream,
    workers: int | None = None,
) -> MonteCarloEstimate:
    """Mean of chunked vector draws with deterministic reduction."""
    parts = run_chunked(draw, trials, rng, workers)
    return mc_mean(np.concatenate([np.asarray(p, dtype=float).ravel() for p in parts]))


def integrate_ordered_triple_mc(
    g: Callable[[FloatArray], FloatArray],
    sampler: Callable[[np.random.Generator, int], FloatArray],
    trials: int,
    rng: RngStream,
    workers: int | None = None,
) -> MonteCarloEstimate:
    """
    Estimate E[g(R1, R2, R3)] by exact sampling from a joint ordered-distance law.

    ``sampler(gen, size)`` returns a ``(size, 3)`` array of ordered triples and
    ``g`` maps such an array to ``size`` values.

    Raises:
        InsufficientTrialsError: if trials < 100.
    """
    if trials < MIN_MC_TRIALS:
        raise InsufficientTrialsError(trials, MIN_MC_TRIALS)

    def draw(gen: np.random.Generator, size: int) -> FloatArray:
        return np.asarray(g(sampler(gen, size)), dtype=float)

    return mc_expectation(draw, trials, rng, workers)
