"""
Repository for persisted Gamma fits and experiment manifests.

Requires: pip install vhetnet[db]
"""

from __future__ import annotations

import json
from typing import TYPE_CHECKING

from sqlalchemy import delete, func, select
from sqlalchemy.orm import Session

from .models import ExperimentRecord, GammaFitRecord
from .sigstats import GammaFit

if TYPE_CHECKING:
    from .outputs import ExperimentManifest


class FitRepository:
    """
    Synchronous repository over a SQLAlchemy ``Session``.

    Implements the ``FitStore`` protocol, so it can back a ``FitCache``:

        engine = create_engine("sqlite:///fits.db")
        Base.metadata.create_all(engine)
        with Session(engine) as session:
            cache = FitCache(store=FitRepository(session))
            table = fit_table(cfg, cache=cache)
            session.commit()

    Writes are flushed, never committed; the caller owns the transaction.
    """

    def __init__(self, session: Session):
        self._session = session

    def _find(self, config_hash: str, tier: str, zeta: str, kind: str, variant: str) -> GammaFitRecord | None:
        return self._session.execute(
            select(GammaFitRecord).where(
                GammaFitRecord.config_hash == config_hash,
                GammaFitRecord.tier == tier,
                GammaFitRecord.zeta == zeta,
                GammaFitRecord.kind == kind,
                GammaFitRecord.variant == variant,
            )
        ).scalar_one_or_none()

    # ========== Fits ==========

    def get_fit(self, config_hash: str, tier: str, zeta: str, kind: str, variant: str) -> GammaFit | None:
        """Stored fit, or None."""
        record = self._find(config_hash, tier, zeta, kind, variant)
        return None if record is None else GammaFit(record.nu, record.theta, record.reading)

    def put_fit(self, config_hash: str, tier: str, zeta: str, kind: str, variant: str, fit: GammaFit) -> GammaFitRecord:
        """Insert or overwrite one fit."""
        record = self._find(config_hash, tier, zeta, kind, variant)
        if record is None:
            record = GammaFitRecord(
                config_hash=config_hash,
                tier=tier,
                zeta=zeta,
                kind=kind,
                variant=variant,
                nu=fit.nu,
                theta=fit.theta,
                reading=fit.variant,
            )
            self._session.add(record)
        else:
            record.nu, record.theta, record.reading = fit.nu, fit.theta, fit.variant
        self._session.flush()
        return record

    def count_fits(self, config_hash: str | None = None) -> int:
        stmt = select(func.count()).select_from(GammaFitRecord)
        if config_hash is not None:
            stmt = stmt.where(GammaFitRecord.config_hash == config_hash)
        return int(self._session.execute(stmt).scalar_one())

    def delete_fits(self, config_hash: str | None = None) -> int:
        """
        Delete the fits of one configuration, or every fit.

        Returns:
            Number of deleted rows.
        """
        stmt = delete(GammaFitRecord)
        if config_hash is not None:
            stmt = stmt.where(GammaFitRecord.config_hash == config_hash)
        result = self._session.execute(stmt)
        self._session.flush()
        return result.rowcount

    # ========== Manifests ==========

    def record_manifest(self, manifest: ExperimentManifest) -> ExperimentRecord:
        record = ExperimentRecord(
            subcommand=manifest.subcommand,
            config_hash=manifest.config_hash,
            seed=manifest.seed,
            manifest=json.dumps(manifest.to_dict(), sort_keys=True),
        )
        self._session.add(record)
        self._session.flush()
        return record

    def list_manifests(self, subcommand: str | None = None) -> list[dict]:
        """Stored manifests, oldest first, optionally for one subcommand."""
        stmt = select(ExperimentRecord).order_by(ExperimentRecord.id)
        if subcommand is not None:
            stmt = stmt.where(ExperimentRecord.subcommand == subcommand)
        return [json.loads(r.manifest) for r in self._session.execute(stmt).scalars().all()]
