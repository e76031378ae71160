"""
Exception classes for the vhetnet engine.
"""

from dataclasses import dataclass


class VHetNetError(Exception):
    """Base exception for vhetnet errors."""

    pass


@dataclass(frozen=True)
class ConfigViolation:
    """A single violated configuration bound."""

    field: str
    bound: str
    value: object

    def __str__(self) -> str:
        return f"{self.field}={self.value!r} violates {self.bound}"


class ConfigError(VHetNetError):
    """Raised when a scenario configuration is invalid or incomplete."""

    def __init__(self, violations: list[ConfigViolation] | str):
        if isinstance(violations, str):
            self.violations: list[ConfigViolation] = []
            message = violations
        else:
            self.violations = list(violations)
            message = "Invalid configuration: " + "; ".join(str(v) for v in self.violations)
        super().__init__(message)

    @property
    def fields(self) -> list[str]:
        return [v.field for v in self.violations]


class UndefinedEnvironmentError(ConfigError):
    """Raised when referencing an undefined environment preset."""

    pass


class NumericsError(VHetNetError):
    """Base exception for numerical kernel failures."""

    pass


class DomainError(NumericsError, ValueError):
    """Raised when an argument lies outside a function's domain."""

    pass


class QuadratureError(NumericsError):
    """Raised when adaptive quadrature fails to reach the requested tolerance."""

    def __init__(self, lo: float, hi: float, detail: str):
        self.lo = lo
        self.hi = hi
        self.detail = detail
        super().__init__(f"Quadrature over [{lo}, {hi}] did not converge: {detail}")


class InsufficientTrialsError(NumericsError):
    """Raised when a Monte Carlo estimator is asked for too few trials."""

    def __init__(self, trials: int, minimum: int):
        self.trials = trials
        self.minimum = minimum
        super().__init__(f"{trials} trials requested, at least {minimum} required")


class OrderingError(VHetNetError, ValueError):
    """Raised when a distance tuple is not ordered or lies off its support."""

    pass


class DegenerateFitError(VHetNetError):
    """Raised when a Gamma moment fit has a non-positive variance."""

    def __init__(self, kind: str, tier: str, zeta: str, variance: float):
        self.kind = kind
        self.tier = tier
        self.zeta = zeta
        self.variance = variance
        super().__init__(f"Degenerate {kind} fit for {tier} zeta={zeta}: variance {variance:.3e} <= 0")


class AcceptanceRateError(VHetNetError):
    """Raised when a rejection sampler accepts too rarely to be useful."""

    def __init__(self, tier: str, rate: float, minimum: float):
        self.tier = tier
        self.rate = rate
        self.minimum = minimum
        super().__init__(f"Conditional sampler for {tier} accepted {rate:.2e} of proposals (minimum {minimum:.0e})")


class GeometryError(VHetNetError):
    """Base exception for computational-geometry failures."""

    pass


class DegenerateTriangulationError(GeometryError):
    """Raised when points admit no triangulation (fewer than 3 or all collinear)."""

    pass
