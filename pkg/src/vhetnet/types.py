"""
Type definitions for the vhetnet engine.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import StrEnum

import numpy as np
import numpy.typing as npt

# Type aliases
type Meters = float
type Probability = float
type FloatArray = npt.NDArray[np.float64]
type ConfigHash = str


class Tier(StrEnum):
    """Tier indicator of a base station."""

    ABS = "ABS"
    TBS = "TBS"


class LinkState(StrEnum):
    """Line-of-sight state of a link."""

    LOS = "L"
    NLOS = "N"


class Method(StrEnum):
    """Provenance of a reported probability."""

    ANALYTIC = "analytic"
    MONTECARLO = "montecarlo"


class Policy(StrEnum):
    """Cooperating-set selection rule used by the system-level simulator."""

    COMP3_SAME_TIER = "comp3-same-tier"
    SINGLE_NEAREST = "single-nearest"
    STRONGEST_THREE = "strongest-three"


class Strategy(StrEnum):
    """ABS deployment strategies compared on a coverage map."""

    TBS_ONLY = "tbs-only"
    RANDOM = "random"
    CLASSICAL = "classical"
    FADING_AWARE = "fading-aware"


class SignalKind(StrEnum):
    """Aggregate signal a Gamma fit approximates: U with fading, V distances only."""

    U = "U"
    V = "V"


@dataclass(frozen=True, slots=True)
class LinkStateVector:
    """
    Ordered triple of link states of a CoMP set.

    Example:
        zeta = LinkStateVector.from_label("LLN")
        [z.label for z in LinkStateVector.all()]  # ["LLL", "LLN", ..., "NNN"]
    """

    states: tuple[LinkState, LinkState, LinkState]

    def __post_init__(self) -> None:
        if len(self.states) != 3:
            raise ValueError(f"LinkStateVector needs 3 states, got {len(self.states)}")

    @classmethod
    def all(cls) -> list[LinkStateVector]:
        """All 8 vectors, L before N, lexicographic."""
        return [cls(tuple(s)) for s in itertools.product((LinkState.LOS, LinkState.NLOS), repeat=3)]

    @classmethod
    def all_los(cls) -> LinkStateVector:
        return cls((LinkState.LOS, LinkState.LOS, LinkState.LOS))

    @classmethod
    def from_label(cls, label: str) -> LinkStateVector:
        if len(label) != 3:
            raise ValueError(f"Link-state label must have 3 characters, got {label!r}")
        return cls(tuple(LinkState(ch) for ch in label.upper()))

    @property
    def label(self) -> str:
        return "".join(s.value for s in self.states)

    def __iter__(self):
        return iter(self.states)

    def __getitem__(self, index: int) -> LinkState:
        return self.states[index]

    def __str__(self) -> str:
        return self.label
