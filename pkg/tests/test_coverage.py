"""Tests for Laplace transforms, conditional sampling and semi-analytic coverage."""

import math

import numpy as np
import pytest
from scipy import stats

from vhetnet import (
    AcceptanceRateError,
    AssociationResult,
    CoverageReport,
    DomainError,
    LinkStateVector,
    Method,
    Tier,
)
from vhetnet.coverage import (
    conditional_law,
    conditional_sample,
    conditional_sample_batch,
    coverage_analytic,
    coverage_analytic_sweep,
    coverage_fits,
    coverage_sweep,
    curve_shape,
    interference_tail_bound,
    laplace_interference,
    laplace_sqrt_interference,
    laplace_sqrt_moment,
    laplace_sqrt_moment_fd,
    series_ccdf,
    simulate_interference,
)
from vhetnet.model import db_to_linear
from vhetnet.sigstats import FitOptions

WINDOW = 1500.0
FAST = FitOptions(trials=5_000)


class TestLaplace:
    """Tests for the Laplace transforms of I and sqrt(I)."""

    def test_zero_argument(self, small_cfg):
        """Test that both transforms are one at zero."""
        assert laplace_interference(0.0, 300.0, Tier.TBS, small_cfg, outer_radius=WINDOW) == 1.0
        assert laplace_sqrt_interference(0.0, 300.0, Tier.ABS, small_cfg, outer_radius=WINDOW) == 1.0

    def test_negative_argument(self, small_cfg):
        """Test that negative arguments are rejected."""
        with pytest.raises(DomainError, match=">= 0"):
            laplace_interference(-1.0, 300.0, Tier.TBS, small_cfg, outer_radius=WINDOW)

    def test_decreasing(self, small_cfg):
        """Test that the transform decreases in its argument."""
        values = [laplace_interference(u, 300.0, Tier.TBS, small_cfg, outer_radius=WINDOW) for u in (1e3, 1e4, 1e5)]
        assert values[0] > values[1] > values[2] > 0

    @pytest.mark.parametrize("tier", list(Tier))
    def test_against_simulation(self, small_cfg, gen, tier):
        """Test the quadrature transform against simulated interference fields."""
        r3 = 300.0
        samples = simulate_interference(r3, tier, small_cfg, gen, size=20_000, outer_radius=WINDOW)
        u = 1e4
        analytic = laplace_interference(u, r3, tier, small_cfg, outer_radius=WINDOW)
        assert analytic == pytest.approx(np.exp(-u * samples).mean(), abs=0.015)

    def test_sqrt_against_simulation(self, small_cfg, gen):
        """Test the transform of sqrt(I) against simulated interference fields."""
        r3, s = 300.0, 100.0
        samples = simulate_interference(r3, Tier.TBS, small_cfg, gen, size=20_000, outer_radius=WINDOW)
        analytic = laplace_sqrt_interference(s, r3, Tier.TBS, small_cfg, outer_radius=WINDOW)
        assert analytic == pytest.approx(np.exp(-s * np.sqrt(samples)).mean(), abs=0.015)

    def test_sqrt_moment_order_zero(self, small_cfg, rng):
        """Test that the k = 0 moment estimate is the transform of sqrt(I)."""
        r3, s = 300.0, 100.0
        estimate = laplace_sqrt_moment(s, 0, r3, Tier.TBS, small_cfg, rng, 20_000, WINDOW)
        analytic = laplace_sqrt_interference(s, r3, Tier.TBS, small_cfg, outer_radius=WINDOW)
        assert estimate.estimate == pytest.approx(analytic, abs=0.015)

    def test_sqrt_moment_order_range(self, small_cfg, rng):
        """Test the derivative-order bounds."""
        with pytest.raises(DomainError, match="Derivative order"):
            laplace_sqrt_moment(1.0, 3, 300.0, Tier.TBS, small_cfg, rng, 1_000, WINDOW, max_k=2)
        with pytest.raises(DomainError, match="k <= 2"):
            laplace_sqrt_moment_fd(1.0, 3, 300.0, Tier.TBS, small_cfg, outer_radius=WINDOW)

    def test_finite_difference_sign(self, small_cfg):
        """Test that the first derivative moment is positive."""
        value = laplace_sqrt_moment_fd(100.0, 1, 300.0, Tier.TBS, small_cfg, outer_radius=WINDOW)
        assert value > 0


class TestInterference:
    """Tests for interference simulation and the window tail bound."""

    def test_shape_and_sign(self, small_cfg, gen):
        """Test one nonnegative value per serving distance."""
        values = simulate_interference(np.array([250.0, 300.0, 400.0]), Tier.ABS, small_cfg, gen, outer_radius=WINDOW)
        assert values.shape == (3,)
        assert np.all(values > 0)

    def test_infinite_window(self, small_cfg, gen):
        """Test that simulation needs a finite window."""
        with pytest.raises(DomainError, match="finite"):
            simulate_interference(300.0, Tier.TBS, small_cfg, gen, 10, outer_radius=math.inf)

    def test_tail_bound_shrinks(self, cfg):
        """Test that a larger window leaves less interference outside."""
        assert interference_tail_bound(cfg, 5_000.0) < interference_tail_bound(cfg, 1_000.0)


class TestSeries:
    """Tests for the truncated series."""

    def test_exponential(self):
        """Test that one term is exp(-x)."""
        x = np.array([0.0, 0.5, 3.0])
        np.testing.assert_allclose(series_ccdf(1, x), np.exp(-x))

    @pytest.mark.parametrize("nu", [2, 5, 9])
    def test_gamma_survival(self, nu):
        """Test against the Gamma survival function."""
        x = np.linspace(0.0, 20.0, 50)
        np.testing.assert_allclose(series_ccdf(nu, x), stats.gamma.sf(x, nu), rtol=1e-10, atol=1e-14)


class TestConditionalLaw:
    """Tests for the serving-triple law given association."""

    def test_samples_ordered(self, cfg, gen):
        """Test shape and ordering of conditional draws."""
        r = conditional_sample_batch(Tier.TBS, cfg, gen, 1_000)
        assert r.shape == (1_000, 3)
        assert np.all(np.diff(r, axis=1) >= 0)

    def test_normalizer_is_association(self, highrise_cfg, rng):
        """Test that the ABS normalizer estimates the ABS association probability."""
        law = conditional_law(Tier.ABS, highrise_cfg, 20_000, rng)
        assert 0.0 < law.normalizer.estimate < 1.0

    def test_single_draw(self, highrise_cfg, rng):
        """Test one conditional draw."""
        draw = conditional_sample(Tier.ABS, highrise_cfg, rng)
        assert draw.tier is Tier.ABS
        draw.check_support(highrise_cfg)

    def test_acceptance_error(self, cfg, gen):
        """Test that a vanishing acceptance rate raises."""
        crowded = cfg.replace(lambda_TBS=1e-2)
        with pytest.raises(AcceptanceRateError):
            conditional_sample_batch(Tier.ABS, crowded, gen, 100)


class TestCoverageReport:
    """Tests for CoverageReport."""

    ASSOC = AssociationResult.from_p_abs(0.4, 0.0, Method.ANALYTIC)

    def test_combine(self):
        """Test the association-weighted total."""
        report = CoverageReport.combine(0.9, 0.5, self.ASSOC, 0.0, Method.ANALYTIC)
        assert report.p_total == pytest.approx(0.9 * 0.4 + 0.5 * 0.6)
        assert report.to_dict()["p_abs"] == 0.4

    def test_inconsistent_total(self):
        """Test that a total off the weighted sum is rejected."""
        with pytest.raises(ValueError, match="association-weighted"):
            CoverageReport(0.5, 0.9, 0.5, self.ASSOC, 0.0, Method.ANALYTIC)

    def test_out_of_range(self):
        """Test that probabilities lie in [0, 1]."""
        with pytest.raises(ValueError, match="outside"):
            CoverageReport.combine(1.5, 0.5, self.ASSOC, 0.0, Method.ANALYTIC)


class TestCoverage:
    """Tests for the semi-analytic coverage."""

    def test_monotone_in_threshold(self, small_cfg, rng):
        """Test that coverage does not increase with the threshold."""
        gammas = [db_to_linear(g) for g in (-10.0, -5.0, 0.0, 5.0, 10.0)]
        reports = coverage_analytic_sweep(small_cfg, gammas, 4_000, rng, options=FAST)
        totals = [r.p_total for r in reports]
        assert all(b <= a + 1e-12 for a, b in zip(totals, totals[1:]))
        assert all(r.method is Method.ANALYTIC for r in reports)
        assert "acceptance_ABS" in reports[0].diagnostics

    def test_single_threshold(self, small_cfg, rng):
        """Test that coverage_analytic uses the configured threshold."""
        report = coverage_analytic(small_cfg, trials=2_000, rng=rng, options=FAST)
        assert report.gamma_db == pytest.approx(0.0, abs=1e-12)
        assert 0.0 <= report.p_total <= 1.0
        assert report.std_error >= 0.0

    def test_selected_variants_reported(self, small_cfg, rng):
        """Test that the report carries the reading of every TBS U fit it used."""
        report = coverage_analytic(small_cfg, trials=2_000, rng=rng, options=FAST)
        fits = coverage_fits(small_cfg, FAST, rng.substream(2))
        assert report.variants == fits.variants
        assert sorted(report.variants) == sorted(z.label for z in LinkStateVector.all())
        assert all(v.startswith("conditional/") for v in report.variants.values())

    def test_sweep_vary_rejected(self, small_cfg):
        """Test that only h, H and N can be varied."""
        with pytest.raises(ValueError, match="vary"):
            coverage_sweep(small_cfg, [0.0], vary="alpha_ABS", values=[2.0])

    def test_sweep_frame(self, small_cfg, rng):
        """Test the sweep columns with the Monte Carlo comparison switched off."""
        frame = coverage_sweep(
            small_cfg, [-5.0, 5.0], "N", [4, 6], trials=2_000, rng=rng, include_mc=False, options=FAST
        )
        assert list(frame["x"]) == [4, 4, 6, 6]
        assert frame["p_total_mc"].isna().all()
        assert {"p_total_analytic", "p_abs_cond", "p_tbs_cond", "assoc"} <= set(frame.columns)

    @pytest.mark.slow
    def test_analytic_close_to_mc(self, cfg, rng):
        """Test the semi-analytic coverage against system simulation."""
        frame = coverage_sweep(
            cfg, [-5.0, 0.0, 5.0], trials=20_000, mc_trials=20_000, rng=rng, options=FitOptions(trials=50_000)
        )
        assert (frame["p_total_analytic"] - frame["p_total_mc"]).abs().max() <= 0.05


class TestCurveShape:
    """Tests for curve_shape."""

    def test_concave_with_interior_maximum(self):
        """Test a parabola on an uneven grid."""
        x = np.array([5.0, 10.0, 20.0, 30.0, 40.0, 60.0])
        shape = curve_shape(x, 1.0 - (x - 25.0) ** 2 / 1e4)
        assert shape.interior_max and not shape.interior_min
        assert shape.x_max == 20.0
        assert shape.max_curvature == pytest.approx(-2e-4)

    def test_interior_minimum(self):
        """Test a convex curve."""
        shape = curve_shape([1.0, 2.0, 3.0, 4.0], [0.9, 0.5, 0.6, 0.8])
        assert shape.interior_min
        assert shape.x_min == 2.0
        assert shape.max_curvature > 0

    def test_invalid_grid(self):
        """Test that short or unordered grids are rejected."""
        with pytest.raises(ValueError, match="increasing"):
            curve_shape([1.0, 2.0], [0.0, 1.0])
        with pytest.raises(ValueError, match="increasing"):
            curve_shape([1.0, 3.0, 2.0], [0.0, 1.0, 0.5])


@pytest.mark.slow
class TestCoverageShapes:
    """Tests for the shape of coverage against the number of ABSs and the user altitude."""

    def test_concave_in_abs_count(self, cfg, rng):
        """Test an interior optimum and a concave curve against N."""
        alpha3 = cfg.replace(alpha_ABS=3.0, alpha_TBS_L=3.0)
        counts = [5, 10, 20, 30, 40, 60]
        frame = coverage_sweep(
            alpha3, [0.0], "N", counts, trials=20_000, rng=rng, include_mc=False, options=FitOptions(trials=20_000)
        )
        shape = curve_shape(counts, frame["p_total_analytic"])
        assert shape.interior_max
        assert shape.max_curvature <= 5e-4

    def test_non_monotone_in_altitude(self, cfg, rng):
        """Test an interior minimum of coverage against the user altitude."""
        heights = [30.0, 60.0, 90.0, 120.0, 150.0, 180.0, 210.0, 240.0, 270.0, 300.0]
        frame = coverage_sweep(
            cfg, [-3.0], "h", heights, trials=20_000, rng=rng, include_mc=False, options=FitOptions(trials=20_000)
        )
        shape = curve_shape(heights, frame["p_total_analytic"])
        assert shape.interior_min
        assert np.any(np.diff(frame["p_total_analytic"]) > 0) and np.any(np.diff(frame["p_total_analytic"]) < 0)
