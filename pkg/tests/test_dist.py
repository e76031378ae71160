"""Tests for the ordered distance laws and their samplers."""

import math

import numpy as np
import pytest

from vhetnet import DomainError, OrderingError, Tier
from vhetnet.dist import (
    OrderedDistances,
    cdf_abs_nth,
    cdf_tbs_nth,
    histogram_table,
    joint_ccdf,
    joint_cdf_abs,
    joint_cdf_tbs,
    joint_pdf_abs,
    joint_pdf_tbs,
    ks_against_analytic,
    pdf_abs_first,
    pdf_abs_nth,
    pdf_abs_nth_binomial,
    pdf_nth,
    pdf_tbs_first,
    pdf_tbs_nth,
    sample_abs_batch,
    sample_batch,
    sample_ordered_abs,
    sample_ordered_tbs,
    sample_tbs_batch,
    support,
    tbs_conditional_pdf,
    tbs_truncation_radius,
)
from vhetnet.numerics import integrate_1d


class TestReductions:
    """Tests for the n = 1 reductions and the binomial-sum form."""

    def test_abs_first(self, cfg):
        """Test that the n-th ABS density at n = 1 is the nearest-ABS density."""
        r = np.linspace(cfg.gap, cfg.r_max, 1000)
        np.testing.assert_allclose(pdf_abs_nth(r, 1, cfg), pdf_abs_first(r, cfg), rtol=0, atol=1e-12)

    def test_tbs_first(self, cfg):
        """Test that the n-th TBS density at n = 1 is the nearest-TBS density."""
        r = np.linspace(cfg.h, 2000.0, 1000)
        np.testing.assert_allclose(pdf_tbs_nth(r, 1, cfg), pdf_tbs_first(r, cfg), rtol=0, atol=1e-12)

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_binomial_form(self, cfg, n):
        """Test that the binomial-sum and compact forms coincide."""
        r = np.linspace(cfg.gap, cfg.r_max, 1000)
        np.testing.assert_allclose(pdf_abs_nth_binomial(r, n, cfg), pdf_abs_nth(r, n, cfg), rtol=0, atol=1e-10)

    def test_joint_single(self, cfg):
        """Test that the joint density of one distance is the marginal."""
        assert joint_pdf_abs([500.0], cfg) == pytest.approx(pdf_abs_first(500.0, cfg), rel=1e-12)
        assert joint_pdf_tbs([300.0], cfg) == pytest.approx(pdf_tbs_first(300.0, cfg), rel=1e-12)


class TestDensities:
    """Tests for normalisation and support."""

    @pytest.mark.parametrize("tier", list(Tier))
    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_normalised(self, cfg, tier, n):
        """Test that each marginal density integrates to one."""
        lo, hi = support(tier, cfg)
        if not math.isfinite(hi):
            hi = tbs_truncation_radius(n, cfg)
        total = integrate_1d(lambda r: pdf_nth(tier, r, n, cfg), lo, hi)
        assert total == pytest.approx(1.0, abs=1e-7)

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_cdf_matches_density(self, cfg, n):
        """Test the closed-form ABS CDF against the integrated density."""
        r = 450.0
        integral = integrate_1d(lambda x: pdf_abs_nth(x, n, cfg), cfg.gap, r)
        assert cdf_abs_nth(r, n, cfg) == pytest.approx(integral, abs=1e-8)

    def test_tbs_cdf_matches_density(self, cfg):
        """Test the closed-form TBS CDF against the integrated density."""
        integral = integrate_1d(lambda x: pdf_tbs_nth(x, 2, cfg), cfg.h, 250.0)
        assert cdf_tbs_nth(250.0, 2, cfg) == pytest.approx(integral, abs=1e-8)

    def test_zero_outside_support(self, cfg):
        """Test that densities vanish outside their support."""
        assert pdf_abs_nth(cfg.gap - 1.0, 1, cfg) == 0.0
        assert pdf_abs_nth(cfg.r_max + 1.0, 2, cfg) == 0.0
        assert pdf_tbs_nth(cfg.h - 1.0, 1, cfg) == 0.0
        assert joint_pdf_abs([100.0, 300.0, 400.0], cfg) == 0.0

    def test_conditional_normalised(self, cfg):
        """Test that the next-TBS conditional density integrates to one."""
        total = integrate_1d(lambda x: tbs_conditional_pdf(x, 200.0, cfg), 200.0, math.inf)
        assert total == pytest.approx(1.0, abs=1e-8)

    def test_truncation_radius(self, cfg):
        """Test the tail mass beyond the truncation radius."""
        radius = tbs_truncation_radius(3, cfg, 1e-9)
        assert 1.0 - cdf_tbs_nth(radius, 3, cfg) == pytest.approx(1e-9, rel=1e-4)

    def test_order_out_of_range(self, cfg):
        """Test that n must lie in [1, N]."""
        with pytest.raises(DomainError, match="ABS order"):
            pdf_abs_nth(300.0, cfg.N + 1, cfg)
        with pytest.raises(DomainError, match="TBS order"):
            pdf_tbs_nth(300.0, 0, cfg)


class TestJointLaws:
    """Tests for joint densities and box CDFs."""

    def test_unordered_rejected(self, cfg):
        """Test that unordered tuples raise OrderingError."""
        with pytest.raises(OrderingError, match="nondecreasing"):
            joint_pdf_abs([400.0, 300.0, 500.0], cfg)
        with pytest.raises(OrderingError):
            OrderedDistances((3.0, 2.0, 1.0), Tier.TBS)

    def test_ordered_support_check(self, cfg):
        """Test the support check of OrderedDistances."""
        with pytest.raises(OrderingError, match="outside"):
            OrderedDistances((10.0, 300.0, 400.0), Tier.ABS).check_support(cfg)

    @pytest.mark.parametrize("tier", list(Tier))
    def test_box_cdf_against_samples(self, cfg, gen, tier):
        """Test the joint box CDF against sampled triples."""
        samples = sample_batch(tier, cfg, gen, 100_000)
        box = np.array([[300.0, 420.0, 500.0], [250.0, 260.0, 600.0]]) if tier is Tier.ABS else np.array(
            [[150.0, 200.0, 260.0], [200.0, 210.0, 400.0]]
        )
        analytic = joint_cdf_abs(box, cfg) if tier is Tier.ABS else joint_cdf_tbs(box, cfg)
        empirical = [np.mean(np.all(samples <= row, axis=1)) for row in box]
        np.testing.assert_allclose(analytic, empirical, atol=0.006)

    def test_box_cdf_limits(self, cfg):
        """Test that the box CDF is one at the outer edge and complements the CCDF."""
        edge = np.array([cfg.r_max] * 3)
        assert joint_cdf_abs(edge, cfg) == pytest.approx(1.0)
        r = np.array([300.0, 400.0, 450.0])
        assert joint_ccdf(Tier.ABS, r, cfg) == pytest.approx(1.0 - joint_cdf_abs(r, cfg))

    def test_joint_density_integrates(self, small_cfg):
        """Test the two-distance TBS joint density by nested quadrature."""
        cfg = small_cfg
        outer = tbs_truncation_radius(2, cfg)
        total = integrate_1d(
            lambda r1: integrate_1d(lambda r2: joint_pdf_tbs([r1, r2], cfg), r1, outer), cfg.h, outer
        )
        assert total == pytest.approx(1.0, abs=1e-6)


class TestSamplers:
    """Tests for the exact samplers."""

    @pytest.mark.parametrize("tier", list(Tier))
    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_ks(self, cfg, rng, tier, n):
        """Test each sampled marginal against the analytic CDF."""
        result = ks_against_analytic(tier, n, cfg, 100_000, rng.child(n))
        assert result.statistic < 0.01
        assert result.trials == 100_000

    def test_shapes_and_order(self, cfg, gen):
        """Test shapes, ordering and support of sampled triples."""
        r_abs = sample_abs_batch(cfg, gen, 500)
        r_tbs = sample_tbs_batch(cfg, gen, 500, count=4)
        assert r_abs.shape == (500, 3)
        assert r_tbs.shape == (500, 4)
        assert np.all(np.diff(r_abs, axis=1) >= 0) and np.all(np.diff(r_tbs, axis=1) >= 0)
        assert r_abs.min() >= cfg.gap and r_abs.max() <= cfg.r_max
        assert r_tbs.min() >= cfg.h

    def test_too_few_abs(self, cfg, gen):
        """Test that fewer ABSs than requested distances is rejected."""
        with pytest.raises(DomainError, match="N >= 3"):
            sample_abs_batch(cfg.replace(N=2), gen, 10)

    def test_single_draws(self, cfg, rng):
        """Test the single-draw samplers."""
        abs_draw = sample_ordered_abs(cfg, rng)
        tbs_draw = sample_ordered_tbs(cfg, rng.child(1))
        abs_draw.check_support(cfg)
        tbs_draw.check_support(cfg)
        assert abs_draw.tier is Tier.ABS

    def test_histogram_table(self, cfg, gen):
        """Test the validation table layout."""
        samples = sample_batch(Tier.TBS, cfg, gen, 5_000)[:, 0]
        table = histogram_table(Tier.TBS, 1, cfg, samples, bins=20)
        assert list(table.columns) == ["tier", "n", "r", "analytic_pdf", "empirical_pdf"]
        assert len(table) == 20
        assert (table["tier"] == "TBS").all()
