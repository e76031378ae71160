"""
In-memory cache of Gamma fits, optionally backed by a persistent fit repository.
"""

from __future__ import annotations

import threading
import time
from typing import TYPE_CHECKING, Protocol

from .types import ConfigHash, LinkStateVector, SignalKind, Tier

if TYPE_CHECKING:
    from .sigstats import GammaFit

type FitKey = tuple[ConfigHash, str, str, str, str]


class FitStore(Protocol):
    """Persistent backend of a ``FitCache`` (see ``vhetnet.repository.FitRepository``)."""

    def get_fit(self, config_hash: str, tier: str, zeta: str, kind: str, variant: str) -> GammaFit | None: ...

    def put_fit(self, config_hash: str, tier: str, zeta: str, kind: str, variant: str, fit: GammaFit) -> None: ...


class FitCache:
    """
    Cache for Gamma fits keyed by (config hash, tier, zeta, kind, variant).

    Entries expire after ``ttl_seconds`` (0 disables expiry). When a ``store``
    is given, misses fall through to it and new entries are written through.
    """

    def __init__(self, ttl_seconds: float = 0, store: FitStore | None = None):
        self._cache: dict[FitKey, tuple[float, GammaFit]] = {}
        self._ttl = ttl_seconds
        self._store = store
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    @staticmethod
    def key(config_hash: str, tier: Tier, zeta: LinkStateVector, kind: SignalKind, variant: str) -> FitKey:
        return (config_hash, str(tier), zeta.label, str(kind), variant)

    def get(
        self, config_hash: str, tier: Tier, zeta: LinkStateVector, kind: SignalKind, variant: str
    ) -> GammaFit | None:
        """Return the cached fit, or None if absent or expired."""
        key = self.key(config_hash, tier, zeta, kind, variant)
        with self._lock:
            entry = self._cache.get(key)
            if entry is not None:
                timestamp, fit = entry
                if self._ttl <= 0 or time.time() - timestamp <= self._ttl:
                    self.hits += 1
                    return fit
                del self._cache[key]

        fit = self._store.get_fit(*key) if self._store is not None else None
        with self._lock:
            if fit is None:
                self.misses += 1
                return None
            self.hits += 1
            self._cache[key] = (time.time(), fit)
        return fit

    def set(
        self, config_hash: str, tier: Tier, zeta: LinkStateVector, kind: SignalKind, variant: str, fit: GammaFit
    ) -> None:
        key = self.key(config_hash, tier, zeta, kind, variant)
        with self._lock:
            self._cache[key] = (time.time(), fit)
        if self._store is not None:
            self._store.put_fit(*key, fit)

    def invalidate(self, config_hash: str) -> None:
        """Drop every in-memory fit of one configuration."""
        with self._lock:
            for key in [k for k in self._cache if k[0] == config_hash]:
                del self._cache[key]

    def clear(self) -> None:
        with self._lock:
            self._cache.clear()

    def __len__(self) -> int:
        return len(self._cache)
