"""Tests for random streams, quadrature and Monte Carlo reduction."""

import math

import numpy as np
import pytest

from vhetnet import DomainError, InsufficientTrialsError, QuadratureError, QuadratureSpec, RngStream
from vhetnet.numerics import (
    CHUNK_SIZE,
    THREADS_ENV_VAR,
    default_workers,
    integrate_1d,
    integrate_ordered_triple_mc,
    map_indexed,
    mc_expectation,
    mc_mean,
    pairwise_sum,
    reg_lower_gamma,
    run_chunked,
)


class TestRngStream:
    """Tests for RngStream."""

    def test_reproducible(self):
        """Test that equal streams draw equal numbers."""
        a = RngStream(42).generator().random(5)
        b = RngStream(42).generator().random(5)
        np.testing.assert_array_equal(a, b)

    def test_children_independent(self):
        """Test that children and substreams differ from the parent and each other."""
        rng = RngStream(42)
        draws = [s.generator().random() for s in (rng, rng.child(0), rng.child(1), rng.substream(1))]
        assert len(set(draws)) == 4

    def test_child_path(self):
        """Test that children extend the path."""
        assert RngStream(1).child(3).child(4).path == (3, 4)
        assert RngStream(1, 2).substream(5).stream_id == 5


class TestRegLowerGamma:
    """Tests for reg_lower_gamma."""

    def test_exponential_case(self):
        """Test P(1, x) = 1 - exp(-x)."""
        x = np.array([0.0, 0.5, 2.0])
        np.testing.assert_allclose(reg_lower_gamma(1.0, x), 1 - np.exp(-x), atol=1e-14)

    def test_scalar(self):
        """Test scalar in, scalar out."""
        assert isinstance(reg_lower_gamma(2.0, 1.0), float)

    def test_domain(self):
        """Test that nu <= 0 and x < 0 are rejected."""
        with pytest.raises(DomainError, match="nu > 0"):
            reg_lower_gamma(0.0, 1.0)
        with pytest.raises(DomainError, match="x >= 0"):
            reg_lower_gamma(1.0, -0.1)


class TestIntegrate1D:
    """Tests for integrate_1d."""

    def test_polynomial(self):
        """Test a finite interval."""
        assert integrate_1d(lambda x: x * x, 0.0, 1.0) == pytest.approx(1 / 3, abs=1e-12)

    def test_infinite_interval(self):
        """Test a semi-infinite interval."""
        assert integrate_1d(lambda x: math.exp(-x), 0.0, math.inf) == pytest.approx(1.0, abs=1e-9)

    def test_empty_interval(self):
        """Test that lo == hi gives zero."""
        assert integrate_1d(lambda x: 1.0, 2.0, 2.0) == 0.0

    def test_breakpoints(self):
        """Test that interior breakpoints help with kinks."""
        value = integrate_1d(lambda x: abs(x - 0.3), 0.0, 1.0, points=[0.3])
        assert value == pytest.approx(0.5 * 0.09 + 0.5 * 0.49, abs=1e-12)

    def test_divergent(self):
        """Test that a divergent integral raises QuadratureError."""
        with pytest.raises(QuadratureError, match="did not converge"):
            integrate_1d(lambda x: 1.0 / x, 0.0, 1.0, QuadratureSpec(max_subdivisions=20))

    def test_invalid_spec(self):
        """Test that nonpositive tolerances are rejected."""
        with pytest.raises(DomainError):
            QuadratureSpec(abs_tol=0.0)


class TestMonteCarlo:
    """Tests for deterministic Monte Carlo reduction."""

    def test_pairwise_sum(self):
        """Test pairwise summation against a plain sum."""
        values = np.random.default_rng(0).random(1001)
        assert pairwise_sum(values) == pytest.approx(values.sum(), rel=1e-13)
        assert pairwise_sum(np.array([])) == 0.0

    def test_mc_mean(self):
        """Test the sample mean and its standard error."""
        est = mc_mean(np.array([1.0, 2.0, 3.0, 4.0]))
        assert est.estimate == pytest.approx(2.5)
        assert est.std_error == pytest.approx(math.sqrt(5 / 3 / 4))
        assert est.trials == 4
        assert est.within(2.6)

    def test_mc_mean_empty(self):
        """Test that no samples is an error."""
        with pytest.raises(InsufficientTrialsError):
            mc_mean(np.array([]))

    def test_chunk_sizes(self, rng):
        """Test that chunks cover the trials exactly."""
        sizes = run_chunked(lambda gen, size: size, 2 * CHUNK_SIZE + 5, rng)
        assert sizes == [CHUNK_SIZE, CHUNK_SIZE, 5]

    def test_worker_count_invariance(self, rng):
        """Test that results do not depend on the worker count."""

        def draw(gen, size):
            return gen.standard_normal(size)

        serial = np.concatenate(run_chunked(draw, 3 * CHUNK_SIZE + 17, rng, workers=1))
        threaded = np.concatenate(run_chunked(draw, 3 * CHUNK_SIZE + 17, rng, workers=4))
        np.testing.assert_array_equal(serial, threaded)

    def test_zero_trials(self, rng):
        """Test that zero trials is rejected."""
        with pytest.raises(InsufficientTrialsError):
            run_chunked(lambda gen, size: size, 0, rng)

    def test_map_indexed(self, rng):
        """Test index order and worker-count invariance of map_indexed."""
        serial = map_indexed(lambda i, gen: (i, gen.random()), 10, rng, workers=1)
        threaded = map_indexed(lambda i, gen: (i, gen.random()), 10, rng, workers=3)
        assert serial == threaded
        assert [i for i, _ in serial] == list(range(10))

    def test_mc_expectation(self, rng):
        """Test a uniform mean within its standard error."""
        est = mc_expectation(lambda gen, size: gen.random(size), 50_000, rng)
        assert est.within(0.5, sigmas=4)

    def test_ordered_triple_minimum_trials(self, rng):
        """Test the trial floor of the ordered-triple estimator."""
        with pytest.raises(InsufficientTrialsError, match="at least 100"):
            integrate_ordered_triple_mc(lambda r: r[:, 0], lambda gen, size: gen.random((size, 3)), 50, rng)

    def test_ordered_triple_constant(self, cfg, rng):
        """Test that g = 1 has mean one and no spread."""
        from vhetnet.dist import sample_abs_batch

        est = integrate_ordered_triple_mc(
            lambda r: np.ones(len(r)), lambda gen, size: sample_abs_batch(cfg, gen, size), 1_000, rng
        )
        assert est.estimate == 1.0
        assert est.std_error == 0.0


class TestDefaultWorkers:
    """Tests for the thread-count environment variable."""

    def test_unset(self, monkeypatch):
        """Test the single-thread default."""
        monkeypatch.delenv(THREADS_ENV_VAR, raising=False)
        assert default_workers() == 1

    def test_set(self, monkeypatch):
        """Test reading the variable."""
        monkeypatch.setenv(THREADS_ENV_VAR, "6")
        assert default_workers() == 6

    def test_invalid(self, monkeypatch):
        """Test that a non-integer falls back to one thread."""
        monkeypatch.setenv(THREADS_ENV_VAR, "many")
        assert default_workers() == 1
