"""Tests for LoS probability, fading and attenuation."""

import math

import numpy as np
import pytest
from scipy import stats

from vhetnet import HIGHRISE, SUBURBAN, DomainError, Environment, FadingParams, LinkState, Tier
from vhetnet.channel import (
    horizontal_distance,
    link_state_probability,
    los_probability,
    los_profile,
    nakagami_amplitude_cdf,
    nakagami_power_cdf,
    path_loss_amplitude,
    path_loss_power,
    sample_nakagami_amplitude,
    sample_power_gain,
    state_probability,
)


class TestLosProbability:
    """Tests for the G2A LoS model."""

    def test_suburban_value(self):
        """Test the suburban closed form at a 45 degree elevation (radians)."""
        expected = 1.0 - math.exp(-SUBURBAN.b * math.pi / 4)
        assert los_probability(100.0, 100.0, SUBURBAN) == pytest.approx(expected, rel=1e-12)

    def test_highrise_uses_degrees(self):
        """Test the highrise closed form at a 45 degree elevation (degrees)."""
        expected = -HIGHRISE.a * math.exp(-HIGHRISE.b * 45.0) + HIGHRISE.c
        assert los_probability(50.0, 50.0, HIGHRISE) == pytest.approx(expected, rel=1e-12)

    def test_highrise_coefficients_in_radians(self):
        """Test the highrise coefficients evaluated in radians at z = 0, where the raw value is clamped."""
        env = Environment(HIGHRISE.a, HIGHRISE.b, HIGHRISE.c, angle_unit="rad")
        raw = -1.124 * math.exp(-0.049 * math.pi / 2) + 1.024
        assert raw < 0
        assert los_probability(0.0, 100.0, env) == 0.0
        assert los_probability(0.0, 100.0, HIGHRISE) == 1.0

    def test_clamped_to_unit_interval(self):
        """Test clamping at grazing and vertical elevations."""
        assert los_probability(1e5, 1.0, HIGHRISE) == 0.0
        assert los_probability(0.0, 100.0, HIGHRISE) == 1.0

    def test_increases_with_height(self):
        """Test that the LoS probability grows with the relative height."""
        p = np.array([los_probability(200.0, h, HIGHRISE) for h in (10.0, 50.0, 150.0, 300.0)])
        assert np.all(np.diff(p) > 0)

    def test_vectorized(self):
        """Test array input."""
        z = np.array([0.0, 100.0, 1000.0])
        p = los_probability(z, 50.0, SUBURBAN)
        assert p.shape == (3,)
        assert np.all((p >= 0) & (p <= 1))

    def test_domain(self):
        """Test that nonpositive heights and negative distances are rejected."""
        with pytest.raises(DomainError, match="Relative height"):
            los_probability(10.0, 0.0, SUBURBAN)
        with pytest.raises(DomainError, match="Horizontal distance"):
            los_probability(-1.0, 10.0, SUBURBAN)

    def test_states_complement(self):
        """Test that LoS and NLoS probabilities sum to one."""
        p_l = state_probability(LinkState.LOS, 300.0, 40.0, HIGHRISE)
        p_n = state_probability(LinkState.NLOS, 300.0, 40.0, HIGHRISE)
        assert p_l + p_n == pytest.approx(1.0)


class TestLinkState:
    """Tests for per-link state probabilities."""

    def test_a2a_always_los(self, cfg):
        """Test that ABS links are LoS with probability one."""
        assert link_state_probability(LinkState.LOS, 500.0, cfg, Tier.ABS) == 1.0
        assert link_state_probability(LinkState.NLOS, 500.0, cfg, Tier.ABS) == 0.0

    def test_g2a_uses_horizontal_distance(self, cfg):
        """Test that the TBS link state is evaluated at sqrt(r² - h²)."""
        r = 500.0
        expected = los_probability(math.sqrt(r**2 - cfg.h**2), cfg.h, cfg.env)
        assert link_state_probability(LinkState.LOS, r, cfg, Tier.TBS) == pytest.approx(expected)

    def test_horizontal_distance(self):
        """Test the horizontal offset, clipped at zero."""
        assert horizontal_distance(5.0, 3.0) == pytest.approx(4.0)
        assert horizontal_distance(2.0, 3.0) == 0.0

    def test_los_profile(self):
        """Test the LoS profile against altitude."""
        h = np.linspace(10.0, 300.0, 30)
        p_los, p_nlos = los_profile(h, 100.0, HIGHRISE)
        np.testing.assert_allclose(p_los + p_nlos, 1.0)
        assert np.all(np.diff(p_los) >= 0)


class TestFading:
    """Tests for Nakagami-m fading."""

    def test_invalid_shape(self):
        """Test that m < 0.5 is rejected."""
        with pytest.raises(DomainError, match="shape"):
            FadingParams(0.4)

    def test_invalid_power(self):
        """Test that omega <= 0 is rejected."""
        with pytest.raises(DomainError, match="mean power"):
            FadingParams(1.0, 0.0)

    def test_for_link(self, cfg):
        """Test per-link parameters."""
        assert FadingParams.for_link(cfg, Tier.TBS, LinkState.NLOS).m == 1.0
        assert FadingParams.for_link(cfg, Tier.ABS).m == 2.0

    @pytest.mark.parametrize("m", [0.5, 1.0, 2.0, 4.5])
    def test_power_distribution(self, gen, m):
        """Test sampled power against its CDF."""
        params = FadingParams(m, 1.5)
        samples = sample_power_gain(params, gen, 20_000)
        assert stats.kstest(samples, lambda x: nakagami_power_cdf(x, params)).statistic < 0.02
        assert samples.mean() == pytest.approx(1.5, rel=0.05)

    def test_amplitude_distribution(self, gen):
        """Test sampled amplitude against its CDF."""
        params = FadingParams(2.0)
        samples = sample_nakagami_amplitude(params, gen, 20_000)
        assert stats.kstest(samples, lambda x: nakagami_amplitude_cdf(x, params)).statistic < 0.02


class TestAttenuation:
    """Tests for path loss."""

    def test_values(self):
        """Test power and amplitude attenuation."""
        assert path_loss_power(10.0, 2.0) == pytest.approx(0.01)
        assert path_loss_amplitude(4.0, 2.0) == pytest.approx(0.25)
        assert path_loss_amplitude(16.0, 4.0) == pytest.approx(1 / 256)
        assert path_loss_power(200.0, 2.0) == pytest.approx(2.5e-5)

    def test_nonpositive_distance(self):
        """Test that r <= 0 is rejected."""
        with pytest.raises(DomainError, match="> 0"):
            path_loss_power(np.array([1.0, 0.0]), 2.0)
