"""
Scenario parameters, environment presets and configuration validation.

Heights are relative: ``h`` is the aerial user's height above the TBS reference
plane and ``H - h`` is the ABS-user vertical gap. ``h_TBS`` is kept for
reporting only.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Literal, TypedDict

from .exceptions import ConfigError, ConfigViolation, UndefinedEnvironmentError
from .types import LinkState, Tier

PER_KM2 = 1e-6
MAX_USER_ALTITUDE = 300.0


@dataclass(frozen=True, slots=True)
class Environment:
    """
    Parameters (a, b, c) of the G2A LoS model
    P_L = clamp(-a * exp(-b * delta) + c, 0, 1) with delta = arctan(h / z).

    ``angle_unit`` is the unit in which delta enters the exponent.
    """

    a: float
    b: float
    c: float
    angle_unit: Literal["rad", "deg"] = "rad"
    name: str = "custom"

    def __post_init__(self) -> None:
        violations = check_environment(self)
        if violations:
            raise ConfigError(violations)


def check_environment(env: Environment, prefix: str = "env") -> list[ConfigViolation]:
    violations = []
    if not env.a >= 0:
        violations.append(ConfigViolation(f"{prefix}.a", "a >= 0", env.a))
    if not env.b >= 0:
        violations.append(ConfigViolation(f"{prefix}.b", "b >= 0", env.b))
    if not env.c > 0:
        violations.append(ConfigViolation(f"{prefix}.c", "c > 0", env.c))
    if env.angle_unit not in ("rad", "deg"):
        violations.append(ConfigViolation(f"{prefix}.angle_unit", "one of rad, deg", env.angle_unit))
    return violations


SUBURBAN = Environment(1.0, 6.581, 1.0, angle_unit="rad", name="suburban")
HIGHRISE = Environment(1.124, 0.049, 1.024, angle_unit="deg", name="highrise")

ENVIRONMENTS: dict[str, Environment] = {
    "suburban": SUBURBAN,
    "highrise": HIGHRISE,
    "highrise-urban": HIGHRISE,
}


def get_environment(name: str) -> Environment:
    """Look up an environment preset by name."""
    env = ENVIRONMENTS.get(name.lower())
    if env is None:
        raise UndefinedEnvironmentError(
            [ConfigViolation("env", f"one of {sorted(ENVIRONMENTS)}", name)]
        )
    return env


def db_to_linear(value_db: float) -> float:
    return 10.0 ** (value_db / 10.0)


def linear_to_db(value: float) -> float:
    return 10.0 * math.log10(value)


@dataclass(frozen=True, slots=True)
class NetworkConfig:
    """
    All scenario parameters of one VHetNet.

    Internal units are SI: meters, per-square-meter density and linear
    thresholds. Use ``load_config`` to read boundary units (per-km², dB).
    """

    r_C: float
    H: float
    h: float
    N: int
    lambda_TBS: float
    h_TBS: float = 30.0
    alpha_ABS: float = 2.0
    alpha_TBS_L: float = 2.0
    alpha_TBS_N: float = 2.7
    m_ABS: float = 2.0
    m_TBS_L: float = 2.0
    m_TBS_N: float = 1.0
    Omega: float = 1.0
    gamma_ABS: float = 1.0
    gamma_TBS: float = 1.0
    env: Environment = field(default=SUBURBAN)

    @property
    def gap(self) -> float:
        """Vertical ABS-user distance H - h."""
        return self.H - self.h

    @property
    def r_max(self) -> float:
        return math.sqrt(self.gap**2 + self.r_C**2)

    def alpha(self, tier: Tier, state: LinkState = LinkState.LOS) -> float:
        if tier is Tier.ABS:
            return self.alpha_ABS
        return self.alpha_TBS_L if state is LinkState.LOS else self.alpha_TBS_N

    def m(self, tier: Tier, state: LinkState = LinkState.LOS) -> float:
        if tier is Tier.ABS:
            return self.m_ABS
        return self.m_TBS_L if state is LinkState.LOS else self.m_TBS_N

    def gamma(self, tier: Tier) -> float:
        return self.gamma_ABS if tier is Tier.ABS else self.gamma_TBS

    def replace(self, **changes: Any) -> NetworkConfig:
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        """Boundary-unit representation (per-km², dB), as read by ``load_config``."""
        data = {f.name: getattr(self, f.name) for f in dataclasses.fields(self) if f.name != "env"}
        data["lambda_TBS"] = self.lambda_TBS / PER_KM2
        data["gamma_ABS"] = linear_to_db(self.gamma_ABS)
        data["gamma_TBS"] = linear_to_db(self.gamma_TBS)
        data["env"] = {"a": self.env.a, "b": self.env.b, "c": self.env.c, "angle_unit": self.env.angle_unit}
        return data

    def config_hash(self) -> str:
        """SHA-256 over the canonical JSON form; keys the fit cache and manifests."""
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass(frozen=True, slots=True)
class ValidatedConfig:
    """A configuration that passed validation, with its derived quantities."""

    config: NetworkConfig
    r_max: float
    gamma_ABS_db: float
    gamma_TBS_db: float
    lambda_TBS_per_km2: float


def check(config: NetworkConfig) -> list[ConfigViolation]:
    """Return every violated invariant of ``config`` (empty when valid)."""
    c = config
    violations: list[ConfigViolation] = []

    def need(ok: bool, name: str, bound: str) -> None:
        if not ok:
            violations.append(ConfigViolation(name, bound, getattr(c, name)))

    need(c.h > 0, "h", "0 < h < H")
    need(c.h < c.H, "H", "0 < h < H")
    need(c.r_C > 0, "r_C", "r_C > 0")
    need(isinstance(c.N, int) and c.N >= 3, "N", "N >= 3")
    need(c.lambda_TBS > 0, "lambda_TBS", "lambda_TBS > 0")
    for name in ("m_ABS", "m_TBS_L", "m_TBS_N"):
        need(getattr(c, name) >= 0.5, name, f"{name} >= 0.5")
    for name in ("alpha_ABS", "alpha_TBS_L", "alpha_TBS_N"):
        need(getattr(c, name) >= 2, name, f"{name} >= 2")
    need(c.Omega > 0, "Omega", "Omega > 0")
    need(c.gamma_ABS > 0, "gamma_ABS", "gamma_ABS > 0")
    need(c.gamma_TBS > 0, "gamma_TBS", "gamma_TBS > 0")
    need(c.h_TBS >= 0, "h_TBS", "h_TBS >= 0")
    return violations


def validate(config: NetworkConfig) -> ValidatedConfig:
    """
    Validate ``config`` and expose its derived quantities.

    Raises:
        ConfigError: listing every violated invariant by field and bound.
    """
    violations = check(config)
    if violations:
        raise ConfigError(violations)
    return ValidatedConfig(
        config=config,
        r_max=config.r_max,
        gamma_ABS_db=linear_to_db(config.gamma_ABS),
        gamma_TBS_db=linear_to_db(config.gamma_TBS),
        lambda_TBS_per_km2=config.lambda_TBS / PER_KM2,
    )


# ========== Boundary ingestion ==========


class EnvironmentSchema(TypedDict, total=False):
    """JSON form of a custom environment."""

    a: float
    b: float
    c: float
    angle_unit: str


class ConfigSchema(TypedDict):
    """JSON form of a scenario file (boundary units)."""

    r_C: float
    H: float
    h: float
    h_TBS: float
    N: int
    lambda_TBS: float
    alpha_ABS: float
    alpha_TBS_L: float
    alpha_TBS_N: float
    m_ABS: float
    m_TBS_L: float
    m_TBS_N: float
    Omega: float
    gamma_ABS: float
    gamma_TBS: float
    env: str | EnvironmentSchema


CONFIG_FIELDS: tuple[str, ...] = tuple(ConfigSchema.__annotations__)


def _parse_environment(value: Any) -> Environment:
    if isinstance(value, Environment):
        return value
    if isinstance(value, str):
        return get_environment(value)
    if isinstance(value, Mapping):
        missing = [k for k in ("a", "b", "c") if k not in value]
        if missing:
            raise ConfigError([ConfigViolation(f"env.{k}", "required", None) for k in missing])
        return Environment(
            float(value["a"]),
            float(value["b"]),
            float(value["c"]),
            angle_unit=str(value.get("angle_unit", "rad")),
            name=str(value.get("name", "custom")),
        )
    raise ConfigError([ConfigViolation("env", "preset name or {a, b, c}", value)])


def _coerce(name: str, value: Any) -> Any:
    if name == "env":
        return _parse_environment(value)
    try:
        if name == "N":
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            return int(value)
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError([ConfigViolation(name, "numeric", value)]) from None


def parse_override(item: str) -> tuple[str, Any]:
    """Split a ``field=value`` override; the value is parsed as JSON when possible."""
    if "=" not in item:
        raise ConfigError(f"Override {item!r} must have the form field=value")
    key, raw = item.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def load_config(
    source: str | Path | Mapping[str, Any],
    overrides: Mapping[str, Any] | None = None,
) -> NetworkConfig:
    """
    Build a validated ``NetworkConfig`` from a JSON file or mapping in boundary units.

    Boundary units: meters, per-km² for ``lambda_TBS``, dB for thresholds.

    Raises:
        ConfigError: on unknown, missing or invalid fields, naming each one.
    """
    if isinstance(source, Mapping):
        raw = dict(source)
    else:
        path = Path(source)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"Config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"Config file {path} is not valid JSON: {exc}") from None
    raw.pop("$schema", None)
    raw.update(overrides or {})

    unknown = sorted(set(raw) - set(CONFIG_FIELDS))
    missing = [name for name in CONFIG_FIELDS if name not in raw]
    violations = [ConfigViolation(k, "unknown field", raw[k]) for k in unknown]
    violations += [ConfigViolation(k, "required field", None) for k in missing]
    if violations:
        raise ConfigError(violations)

    values = {name: _coerce(name, raw[name]) for name in CONFIG_FIELDS}
    values["lambda_TBS"] *= PER_KM2
    values["gamma_ABS"] = db_to_linear(values["gamma_ABS"])
    values["gamma_TBS"] = db_to_linear(values["gamma_TBS"])
    config = NetworkConfig(**values)
    validate(config)
    return config


# ========== Reference scenarios ==========


def table2_config(env: Environment | str = SUBURBAN, **changes: Any) -> NetworkConfig:
    """Default simulation setting: r_C=1 km, h=120 m, H=320 m, N=20, λ=20 km⁻², γ=0 dB."""
    if isinstance(env, str):
        env = get_environment(env)
    config = NetworkConfig(
        r_C=1000.0,
        H=320.0,
        h=120.0,
        N=20,
        lambda_TBS=20 * PER_KM2,
        h_TBS=30.0,
        alpha_ABS=2.0,
        alpha_TBS_L=2.0,
        alpha_TBS_N=2.7,
        m_ABS=2.0,
        m_TBS_L=2.0,
        m_TBS_N=1.0,
        Omega=1.0,
        gamma_ABS=1.0,
        gamma_TBS=1.0,
        env=env,
    )
    return config.replace(**changes) if changes else config


def association_scenario(h: float, env: Environment | str = SUBURBAN, **changes: Any) -> NetworkConfig:
    """Association-study setting: 30 ABSs on a 500 m disk at 320 m, λ=20 km⁻², user at ``h``."""
    return table2_config(env, r_C=500.0, N=30, h=h, **changes)
