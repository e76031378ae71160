"""
SQLAlchemy models for persisted Gamma fits and the experiment ledger.

Requires: pip install vhetnet[db]
"""

from datetime import UTC, datetime

from sqlalchemy import Float, Integer, String, Text
from sqlalchemy.orm import DeclarativeBase, Mapped, mapped_column


def _now() -> datetime:
    return datetime.now(UTC)


class Base(DeclarativeBase):
    """
    Base class for vhetnet tables.

    Call ``Base.metadata.create_all(engine)`` once per database.
    """

    pass


class GammaFitRecord(Base):
    """
    One fitted Gamma law (nu, theta).

    Keyed by the configuration hash, tier, link-state label, signal kind and
    the requested variant label (which includes the seed and trial count).
    ``reading`` is the cross-moment reading the fit was built with, the
    selected one when the label ends in "selected".

    Example:
        config_hash="9f2c...", tier="TBS", zeta="LLN", kind="V",
        variant="indicator/selected/trials=200000/seed=42", reading="indicator/fixed/own",
        nu=3.1, theta=0.004
    """

    __tablename__ = "gamma_fits"

    config_hash: Mapped[str] = mapped_column(String(64), primary_key=True)
    tier: Mapped[str] = mapped_column(String(8), primary_key=True)
    zeta: Mapped[str] = mapped_column(String(3), primary_key=True)
    kind: Mapped[str] = mapped_column(String(1), primary_key=True)
    variant: Mapped[str] = mapped_column(String(200), primary_key=True)
    nu: Mapped[float] = mapped_column(Float, nullable=False)
    theta: Mapped[float] = mapped_column(Float, nullable=False)
    reading: Mapped[str] = mapped_column(String(64), nullable=False, default="")
    created_at: Mapped[datetime] = mapped_column(default=_now)

    def __repr__(self) -> str:
        return (
            f"GammaFitRecord(tier={self.tier!r}, zeta={self.zeta!r}, kind={self.kind!r}, "
            f"nu={self.nu:.6g}, theta={self.theta:.6g})"
        )


class ExperimentRecord(Base):
    """A run of one CLI subcommand; ``manifest`` holds the full manifest JSON."""

    __tablename__ = "experiments"

    id: Mapped[int] = mapped_column(Integer, primary_key=True, autoincrement=True)
    subcommand: Mapped[str] = mapped_column(String(50), nullable=False, index=True)
    config_hash: Mapped[str] = mapped_column(String(64), nullable=False, index=True)
    seed: Mapped[int] = mapped_column(Integer, nullable=False)
    manifest: Mapped[str] = mapped_column(Text, nullable=False)
    created_at: Mapped[datetime] = mapped_column(default=_now)

    def __repr__(self) -> str:
        return f"ExperimentRecord(id={self.id}, subcommand={self.subcommand!r}, seed={self.seed})"
