"""Pytest fixtures for vhetnet tests."""

import pytest

from vhetnet import RngStream, association_scenario, table2_config


@pytest.fixture
def cfg():
    """Reference simulation setting (suburban)."""
    return table2_config()


@pytest.fixture
def highrise_cfg():
    """Association-study setting in the highrise environment at h = 30 m."""
    return association_scenario(30.0, "highrise")


@pytest.fixture
def small_cfg():
    """A compact network: 5 ABSs on a 300 m disk, sparse TBSs."""
    return table2_config(r_C=300.0, N=5, lambda_TBS=5e-6)


@pytest.fixture
def rng():
    """Seeded master stream."""
    return RngStream(42)


@pytest.fixture
def gen():
    """Seeded numpy generator for direct sampling."""
    return RngStream(7).generator()


@pytest.fixture
def engine():
    """SQLite in-memory engine with the vhetnet tables."""
    sqlalchemy = pytest.importorskip("sqlalchemy")
    from vhetnet.models import Base

    engine = sqlalchemy.create_engine("sqlite:///:memory:", echo=False)
    Base.metadata.create_all(engine)
    yield engine
    engine.dispose()


@pytest.fixture
def session(engine):
    """Session rolled back after each test."""
    from sqlalchemy.orm import Session

    with Session(engine, expire_on_commit=False) as session:
        yield session
        session.rollback()
