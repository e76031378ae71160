"""Tests for FitRepository."""

import pytest

pytest.importorskip("sqlalchemy")

from vhetnet import ExperimentManifest, FitCache, GammaFit, LinkStateVector, SignalKind, Tier  # noqa: E402
from vhetnet.repository import FitRepository  # noqa: E402

HASH = "b" * 64
VARIANT = "indicator/pair-sum/own/trials=1000/seed=0"


class TestFitRepository:
    """Tests for FitRepository."""

    def test_get_missing(self, session):
        """Test getting a fit that was never stored."""
        assert FitRepository(session).get_fit(HASH, "TBS", "LLN", "V", VARIANT) is None

    def test_put_and_get(self, session):
        """Test storing and reading a fit."""
        repo = FitRepository(session)
        repo.put_fit(HASH, "TBS", "LLN", "V", VARIANT, GammaFit(3.0, 0.004))
        assert repo.get_fit(HASH, "TBS", "LLN", "V", VARIANT) == GammaFit(3.0, 0.004)

    def test_reading_persisted(self, session):
        """Test that the cross-moment reading of a fit survives storage."""
        repo = FitRepository(session)
        label = "indicator/selected/trials=1000/seed=0"
        repo.put_fit(HASH, "TBS", "LNN", "V", label, GammaFit(3.0, 0.004, "indicator/fixed/crossed"))
        assert repo.get_fit(HASH, "TBS", "LNN", "V", label).variant == "indicator/fixed/crossed"

    def test_put_overwrites(self, session):
        """Test that a second put replaces the stored parameters."""
        repo = FitRepository(session)
        repo.put_fit(HASH, "ABS", "LLL", "U", VARIANT, GammaFit(3.0, 0.004))
        repo.put_fit(HASH, "ABS", "LLL", "U", VARIANT, GammaFit(4.0, 0.002))
        assert repo.get_fit(HASH, "ABS", "LLL", "U", VARIANT) == GammaFit(4.0, 0.002)
        assert repo.count_fits() == 1

    def test_count_and_delete(self, session):
        """Test counting and deleting by configuration."""
        repo = FitRepository(session)
        for zeta in ("LLL", "LLN", "NNN"):
            repo.put_fit(HASH, "TBS", zeta, "V", VARIANT, GammaFit(2.0, 0.01))
        repo.put_fit("c" * 64, "TBS", "LLL", "V", VARIANT, GammaFit(2.0, 0.01))
        assert repo.count_fits(HASH) == 3
        assert repo.delete_fits(HASH) == 3
        assert repo.count_fits() == 1
        assert repo.delete_fits() == 1

    def test_backs_cache(self, session):
        """Test a FitCache persisting through the repository."""
        repo = FitRepository(session)
        zeta = LinkStateVector.from_label("LNN")
        FitCache(store=repo).set(HASH, Tier.TBS, zeta, SignalKind.U, VARIANT, GammaFit(1.5, 0.02))
        fresh = FitCache(store=repo)
        assert fresh.get(HASH, Tier.TBS, zeta, SignalKind.U, VARIANT) == GammaFit(1.5, 0.02)

    def test_manifests(self, session):
        """Test recording and listing manifests."""
        repo = FitRepository(session)
        repo.record_manifest(ExperimentManifest("simulate", HASH, 1, "0.1.0"))
        repo.record_manifest(ExperimentManifest("regime", HASH, 2, "0.1.0"))
        assert [m["seed"] for m in repo.list_manifests()] == [1, 2]
        assert [m["subcommand"] for m in repo.list_manifests("regime")] == ["regime"]
