"""Tests for network snapshots, SIR and empirical coverage."""

import logging
import math

import numpy as np
import pytest

from vhetnet import InsufficientTrialsError, LinkStateVector, Policy, RngStream, Tier, table2_config
from vhetnet.model import db_to_linear
from vhetnet.sim import (
    Deployment,
    SirSample,
    default_window_radius,
    empirical_coverage,
    empirical_coverage_sweep,
    realize_network,
    sir_at_user,
    sir_map,
    sir_samples,
)


def _deployment(cfg, tbs_xy=()):
    abs_xy = np.array([[0.0, 0.0], [30.0, 0.0], [0.0, 30.0], [900.0, 900.0]])
    tbs = np.array(tbs_xy, dtype=float).reshape(-1, 2)
    return Deployment(
        abs_positions=np.column_stack([abs_xy, np.full(len(abs_xy), cfg.H)]),
        tbs_positions=np.column_stack([tbs, np.zeros(len(tbs))]),
        region_radius=1000.0,
    )


class TestNetwork:
    """Tests for network realizations."""

    def test_window_radius(self, cfg):
        """Test the window radius: the larger of the density and ABS-disk scales."""
        expected = max(5 / math.sqrt(math.pi * cfg.lambda_TBS), 3 * cfg.r_C)
        assert default_window_radius(cfg) == pytest.approx(expected)

    def test_realize(self, cfg, rng):
        """Test station counts, altitudes and placement."""
        dep = realize_network(cfg, 2_000.0, rng)
        assert dep.n_abs == cfg.N
        assert np.all(dep.abs_positions[:, 2] == cfg.H)
        assert np.all(np.hypot(dep.abs_positions[:, 0], dep.abs_positions[:, 1]) <= cfg.r_C)
        assert np.all(np.hypot(dep.tbs_positions[:, 0], dep.tbs_positions[:, 1]) <= 2_000.0)
        expected = cfg.lambda_TBS * math.pi * 2_000.0**2
        assert abs(dep.n_tbs - expected) < 6 * math.sqrt(expected)

    def test_realize_deterministic(self, cfg):
        """Test that equal streams give equal networks."""
        a = realize_network(cfg, rng=RngStream(3))
        b = realize_network(cfg, rng=RngStream(3))
        np.testing.assert_array_equal(a.tbs_positions, b.tbs_positions)


class TestSirAtUser:
    """Tests for the SIR of one user in a fixed deployment."""

    def test_no_interference(self, cfg, rng):
        """Test infinite SIR when three ABSs serve and nothing else transmits."""
        dep = _deployment(cfg)
        dep = Deployment(dep.abs_positions[:3], dep.tbs_positions, dep.region_radius)
        sample = sir_at_user((0.0, 0.0, cfg.h), dep, Policy.COMP3_SAME_TIER, cfg, rng)
        assert math.isinf(sample.sir_linear)
        assert math.isinf(sample.sir_db)
        assert sample.tier is Tier.ABS
        assert sample.zeta == LinkStateVector.all_los()

    def test_comp3_set(self, cfg, rng):
        """Test that the three nearest ABSs cooperate over a distant TBS."""
        sample = sir_at_user((0.0, 0.0), _deployment(cfg, [[5_000.0, 0.0]]), Policy.COMP3_SAME_TIER, cfg, rng)
        assert sample.comp_set == ("ABS:0", "ABS:1", "ABS:2")
        assert 0 < sample.sir_linear < math.inf

    def test_single_nearest(self, cfg, rng):
        """Test that one station serves and no link-state vector is reported."""
        sample = sir_at_user((0.0, 0.0), _deployment(cfg, [[5_000.0, 0.0]]), Policy.SINGLE_NEAREST, cfg, rng)
        assert sample.comp_set == ("ABS:0",)
        assert sample.zeta is None

    def test_tbs_tier(self, cfg, rng):
        """Test that nearby TBSs win over distant ABSs."""
        dep = _deployment(cfg, [[3_000.0, 3_000.0], [3_010.0, 3_000.0], [3_000.0, 3_010.0]])
        sample = sir_at_user((3_000.0, 3_000.0), dep, Policy.COMP3_SAME_TIER, cfg, rng)
        assert sample.tier is Tier.TBS
        assert all(s.startswith("TBS:") for s in sample.comp_set)
        assert sample.zeta is not None and len(sample.zeta) == 3

    def test_strongest_three(self, cfg, rng):
        """Test that the strongest-three set has three members."""
        dep = _deployment(cfg, [[10.0, 10.0], [400.0, 0.0]])
        sample = sir_at_user((0.0, 0.0), dep, Policy.STRONGEST_THREE, cfg, rng)
        assert len(sample.comp_set) == 3

    def test_no_stations(self, cfg, rng):
        """Test that a user with no station at all is not covered."""
        empty = np.empty((0, 3))
        sample = sir_at_user((0.0, 0.0), Deployment(empty, empty, 1000.0), Policy.COMP3_SAME_TIER, cfg, rng)
        assert sample.sir_linear == 0.0
        assert sample.sir_db == -math.inf
        assert sample.comp_set == ()
        assert not sample.covered(db_to_linear(-30.0))

    def test_covered(self):
        """Test the threshold comparison."""
        sample = SirSample(2.0, ("ABS:0",), Tier.ABS, None)
        assert sample.covered(2.0)
        assert not sample.covered(2.5)


class TestEmpiricalCoverage:
    """Tests for simulated coverage."""

    def test_minimum_trials(self, cfg):
        """Test that fewer than 1000 snapshots is rejected."""
        with pytest.raises(InsufficientTrialsError):
            empirical_coverage(cfg, trials=999)

    def test_sweep_monotone(self, small_cfg, rng):
        """Test that coverage does not increase with the threshold."""
        gammas = [db_to_linear(g) for g in (-10.0, 0.0, 10.0)]
        reports = empirical_coverage_sweep(small_cfg, gammas, trials=2_000, rng=rng)
        totals = [r.p_total for r in reports]
        assert totals[0] >= totals[1] >= totals[2]
        assert reports[0].assoc.p_mixed == 0.0

    def test_worker_invariance(self, small_cfg):
        """Test that the thread count does not change the samples."""
        a = sir_samples(small_cfg, trials=3_000, rng=RngStream(1), workers=1)
        b = sir_samples(small_cfg, trials=3_000, rng=RngStream(1), workers=3)
        np.testing.assert_array_equal(a.sir, b.sir)

    def test_mixed_sets_counted(self, cfg, rng):
        """Test that strongest-three reports a mixed share."""
        report = empirical_coverage(cfg, 1.0, Policy.STRONGEST_THREE, 2_000, rng)
        assert 0.0 <= report.assoc.p_mixed <= 1.0
        assert report.assoc.p_abs + report.assoc.p_tbs == pytest.approx(1.0)

    def test_altitude_clamped(self, rng, caplog):
        """Test that users above 300 m are clamped with a warning."""
        cfg = table2_config(H=400.0, h=350.0, r_C=300.0, N=5, lambda_TBS=5e-6)
        with caplog.at_level(logging.WARNING, logger="vhetnet.sim"):
            empirical_coverage(cfg, trials=1_000, rng=rng)
        assert "clamping" in caplog.text

    @pytest.mark.slow
    def test_comp_gain(self, rng):
        """Test the cooperation gain over single-station service at -4 dB with alpha = 3."""
        cfg = table2_config(alpha_ABS=3.0, alpha_TBS_L=3.0, alpha_TBS_N=3.0)
        gamma = db_to_linear(-4.0)
        comp3 = empirical_coverage(cfg, gamma, Policy.COMP3_SAME_TIER, 50_000, rng).p_total
        single = empirical_coverage(cfg, gamma, Policy.SINGLE_NEAREST, 50_000, rng).p_total
        strongest = empirical_coverage(cfg, gamma, Policy.STRONGEST_THREE, 50_000, rng).p_total
        assert comp3 >= 0.8
        assert single <= 0.25
        assert comp3 - single >= 0.5
        assert abs(comp3 - strongest) <= 0.05


class TestSirMap:
    """Tests for coverage maps over a fixed deployment."""

    GRID = np.array([[x, y] for x in (-200.0, 0.0, 200.0) for y in (-200.0, 0.0, 200.0)])

    def _stations(self, gen, count, spread=600.0):
        return (gen.random((count, 2)) - 0.5) * 2 * spread

    def test_shape(self, cfg, gen, rng):
        """Test one row per grid point and one column per draw."""
        values = sir_map(self._stations(gen, 4), self._stations(gen, 12), self.GRID, cfg, 25, rng)
        assert values.shape == (len(self.GRID), 25)
        assert np.all(values > 0)

    def test_no_abs(self, cfg, gen, rng):
        """Test a TBS-only map."""
        values = sir_map(np.empty((0, 2)), self._stations(gen, 12), self.GRID, cfg, 10, rng)
        assert np.all(np.isfinite(values))

    def test_no_stations(self, cfg, rng):
        """Test zero SIR everywhere when the map has no station."""
        values = sir_map(np.empty((0, 2)), np.empty((0, 2)), self.GRID, cfg, 10, rng)
        np.testing.assert_array_equal(values, 0.0)

    def test_worker_invariance(self, cfg, gen):
        """Test that grid points draw from their own streams."""
        abs_xy, tbs_xy = self._stations(gen, 4), self._stations(gen, 12)
        a = sir_map(abs_xy, tbs_xy, self.GRID, cfg, 10, RngStream(9), workers=1)
        b = sir_map(abs_xy, tbs_xy, self.GRID, cfg, 10, RngStream(9), workers=4)
        np.testing.assert_array_equal(a, b)
