"""
G2A line-of-sight probability, Nakagami-m fading and power-law attenuation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .exceptions import DomainError
from .model import Environment, NetworkConfig
from .types import FloatArray, LinkState, Tier


@dataclass(frozen=True, slots=True)
class FadingParams:
    """Nakagami-m amplitude parameters; the power is Gamma(m, omega/m)."""

    m: float
    omega: float = 1.0

    def __post_init__(self) -> None:
        if not self.m >= 0.5:
            raise DomainError(f"Nakagami shape must be >= 0.5, got {self.m}")
        if not self.omega > 0:
            raise DomainError(f"Nakagami mean power must be > 0, got {self.omega}")

    @classmethod
    def for_link(cls, cfg: NetworkConfig, tier: Tier, state: LinkState = LinkState.LOS) -> FadingParams:
        return cls(cfg.m(tier, state), cfg.Omega)


# ========== LoS probability ==========


def los_probability(z: float | FloatArray, h_rel: float, env: Environment) -> float | FloatArray:
    """
    P_L(z) = clamp(-a * exp(-b * delta) + c, 0, 1), delta = arctan(h_rel / z).

    ``z`` is the horizontal distance; at z = 0 the elevation is a right angle.
    """
    if not h_rel > 0:
        raise DomainError(f"Relative height must be > 0, got {h_rel}")
    z_arr = np.asarray(z, dtype=float)
    if np.any(z_arr < 0):
        raise DomainError("Horizontal distance must be >= 0")
    delta = np.arctan2(h_rel, z_arr)
    if env.angle_unit == "deg":
        delta = np.degrees(delta)
    p = np.clip(-env.a * np.exp(-env.b * delta) + env.c, 0.0, 1.0)
    return float(p) if p.ndim == 0 else p


def nlos_probability(z: float | FloatArray, h_rel: float, env: Environment) -> float | FloatArray:
    return 1.0 - los_probability(z, h_rel, env)


def state_probability(
    state: LinkState, z: float | FloatArray, h_rel: float, env: Environment
) -> float | FloatArray:
    p_los = los_probability(z, h_rel, env)
    return p_los if state is LinkState.LOS else 1.0 - p_los


def horizontal_distance(r: float | FloatArray, vertical: float) -> float | FloatArray:
    """Horizontal offset of a link of 3-D length ``r`` spanning ``vertical`` meters."""
    return np.sqrt(np.maximum(np.asarray(r, dtype=float) ** 2 - vertical**2, 0.0))


def link_state_probability(
    state: LinkState, r: float | FloatArray, cfg: NetworkConfig, tier: Tier = Tier.TBS
) -> float | FloatArray:
    """
    Probability that a link of 3-D length ``r`` is in ``state``.

    A2A links are always LoS; G2A links follow the environment's LoS model.
    """
    if tier is Tier.ABS:
        one = np.ones_like(np.asarray(r, dtype=float))
        p = one if state is LinkState.LOS else 0.0 * one
        return float(p) if p.ndim == 0 else p
    return state_probability(state, horizontal_distance(r, cfg.h), cfg.h, cfg.env)


def los_profile(h_grid: FloatArray, z: float, env: Environment) -> tuple[FloatArray, FloatArray]:
    """LoS and NLoS probability against user altitude at horizontal distance ``z``."""
    h = np.asarray(h_grid, dtype=float)
    p_los = np.array([los_probability(z, float(hi), env) for hi in h])
    return p_los, 1.0 - p_los


# ========== Fading ==========


def sample_power_gain(params: FadingParams, gen: np.random.Generator, size=None) -> float | FloatArray:
    """Gamma(m, omega/m) channel power gain |H|²."""
    return gen.gamma(params.m, params.omega / params.m, size=size)


def sample_nakagami_amplitude(params: FadingParams, gen: np.random.Generator, size=None) -> float | FloatArray:
    """Nakagami-m amplitude |H| drawn as the square root of its Gamma power."""
    return np.sqrt(sample_power_gain(params, gen, size))


def nakagami_power_cdf(x: float | FloatArray, params: FadingParams) -> float | FloatArray:
    """CDF of the power |H|², a regularized lower gamma in m·x/omega."""
    x_arr = np.maximum(np.asarray(x, dtype=float), 0.0)
    return special.gammainc(params.m, params.m * x_arr / params.omega)


def nakagami_amplitude_cdf(x: float | FloatArray, params: FadingParams) -> float | FloatArray:
    x_arr = np.maximum(np.asarray(x, dtype=float), 0.0)
    return nakagami_power_cdf(x_arr**2, params)


# ========== Attenuation ==========


def _checked(r: float | FloatArray) -> FloatArray:
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr <= 0):
        raise DomainError("Link distance must be > 0")
    return r_arr


def path_loss_power(r: float | FloatArray, alpha: float) -> float | FloatArray:
    """Power-domain attenuation r^(-alpha)."""
    out = _checked(r) ** (-alpha)
    return float(out) if out.ndim == 0 else out


def path_loss_amplitude(r: float | FloatArray, alpha: float) -> float | FloatArray:
    """Amplitude-domain attenuation r^(-alpha/2)."""
    out = _checked(r) ** (-alpha / 2.0)
    return float(out) if out.ndim == 0 else out
