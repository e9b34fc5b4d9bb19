"""Limit constants, regime classification, and the limit-law sampler."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gwilab import (
    EpsilonSpec,
    I_constant,
    LimitConstants,
    ModelRequired,
    MomentCondition,
    OutOfScope,
    Regime,
    classify_regime,
    sample_limit_law,
    scaling_A,
    upsilon,
)
from gwilab.limits import (
    i_constant_quadrature,
    normalization_factor,
    upsilon_quadrature,
)


class TestScalingA:
    def test_below_branch(self):
        assert scaling_A(100, 1.0, 2.0) == 100.0

    def test_equality_branch(self):
        np.testing.assert_allclose(scaling_A(100, 2.0, 2.0),
                                   10000.0 / math.log(100.0), rtol=1e-14)

    def test_above_branch(self):
        assert scaling_A(100, 3.0, 2.0) == 10000.0

    def test_equality_tolerance(self):
        loose = scaling_A(100, 2.0 + 5e-13, 2.0)
        np.testing.assert_allclose(loose, 10000.0 / math.log(100.0), rtol=1e-12)


class TestIConstant:
    def test_unit_case(self):
        assert I_constant(1.0, 2.0, 1.0) == pytest.approx(1.0, abs=1e-14)

    def test_equality_branch(self):
        assert I_constant(2.0, 2.0, 1.0) == pytest.approx(1.0, abs=1e-14)

    def test_beta_integral_identity_case(self):
        assert I_constant(1.0, 3.0, 2.0) == pytest.approx(0.25, abs=1e-14)

    def test_closed_form_matches_quadrature_on_grid(self):
        for r in (0.5, 1.0, 1.5):
            for sigma in (2.0, 3.0):
                for gamma in (0.5, 1.0, 2.0):
                    closed = I_constant(r, sigma, gamma)
                    quad = i_constant_quadrature(r, sigma, gamma)
                    assert abs(closed - quad) <= 1e-8

    def test_profile_branch_needs_model(self):
        with pytest.raises(ModelRequired):
            I_constant(3.0, 2.0, 1.0)

    def test_profile_branch_value(self, geo_model):
        """Closed-form profile for this model gives I(3,2) = 4.04905; the
        extrapolated profile at n* = 1024 lands within half a percent."""
        value = I_constant(3.0, 2.0, 1.0, model=geo_model)
        np.testing.assert_allclose(value, 4.049048, rtol=5e-3)


class TestUpsilon:
    def test_reference_value(self):
        assert upsilon(2.0, 1.0, 1.0) == pytest.approx(0.75, abs=1e-15)

    def test_gamma_scaling(self):
        assert upsilon(2.0, 1.0, 2.0) == pytest.approx(3.0 / 16.0, abs=1e-15)

    def test_gaussian_window_quadrature_identity(self):
        for sigma in (1.5, 2.0, 3.0):
            for sigma0_sq, gamma in ((1.0, 1.0), (0.5, 1.0), (1.0, 2.0)):
                closed = upsilon(sigma, sigma0_sq, gamma)
                quad = upsilon_quadrature(sigma, sigma0_sq, gamma)
                assert abs(closed - quad) <= 1e-8


class TestLimitConstants:
    def test_rho_reference_value(self):
        consts = LimitConstants(sigma=2.0, gamma=1.0, sigma0_sq=1.0,
                                alpha=2.5, a=1.0)
        np.testing.assert_allclose(consts.rho, 1.0 / 3.0, rtol=1e-15)
        assert 0.0 < consts.rho < 0.5

    def test_rho_absent_outside_window(self):
        consts = LimitConstants(sigma=2.0, gamma=1.0, sigma0_sq=1.0,
                                alpha=3.5, a=1.0)
        assert consts.rho is None

    def test_tail_pair_enforced(self):
        with pytest.raises(ValueError):
            LimitConstants(sigma=2.0, gamma=1.0, sigma0_sq=1.0, alpha=2.5)


class TestClassifyRegime:
    consts = LimitConstants(sigma=2.0, gamma=1.0, sigma0_sq=1.0, alpha=2.5, a=1.0)

    def test_fast_decay_is_gaussian_regime(self):
        report = classify_regime(self.consts, EpsilonSpec.power(0.4),
                                 MomentCondition.TAIL)
        assert report.regime is Regime.A_GAUSSIAN
        assert report.limit_value == pytest.approx(0.75, abs=1e-12)

    def test_slow_decay_is_heavy_tail_regime(self):
        report = classify_regime(self.consts, EpsilonSpec.power(0.2),
                                 MomentCondition.TAIL)
        assert report.regime is Regime.B_HEAVY_TAIL
        assert report.limit_value == pytest.approx(I_constant(1.5, 2.0, 1.0),
                                                   rel=1e-12)

    def test_boundary_decay_mixes_both(self):
        report = classify_regime(self.consts, EpsilonSpec.power(1.0 / 3.0, coeff=1.0),
                                 MomentCondition.TAIL)
        assert report.regime is Regime.C_BOUNDARY
        assert report.tau == 1.0
        expected = 0.75 + I_constant(1.5, 2.0, 1.0)
        assert report.limit_value == pytest.approx(expected, rel=1e-12)
        np.testing.assert_allclose(
            normalization_factor(report.regime, self.consts, 100, 0.1),
            100.0 ** (2.0 / 3.0), rtol=1e-14)

    def test_gaussian_increments_always_gaussian_regime(self):
        light = LimitConstants(sigma=2.0, gamma=1.0, sigma0_sq=1.0)
        report = classify_regime(light, EpsilonSpec.power(0.1),
                                 MomentCondition.FINITE)
        assert report.regime is Regime.A_GAUSSIAN

    def test_critical_index_regimes(self):
        crit = LimitConstants(sigma=2.0, gamma=1.0, sigma0_sq=1.0, alpha=3.0, a=1.0)
        assert classify_regime(crit, EpsilonSpec.power(0.3),
                               MomentCondition.TAIL).regime is Regime.CRIT_A
        assert classify_regime(crit, EpsilonSpec.log_law(2.0),
                               MomentCondition.TAIL).regime is Regime.CRIT_A
        report_b = classify_regime(crit, EpsilonSpec.log_law(0.5),
                                   MomentCondition.TAIL)
        assert report_b.regime is Regime.CRIT_B
        report_c = classify_regime(crit, EpsilonSpec.log_law(1.0, coeff=2.0),
                                   MomentCondition.TAIL)
        assert report_c.regime is Regime.CRIT_C
        assert report_c.tau == pytest.approx(2.0)

    def test_fixed_eps_regimes(self):
        heavy = LimitConstants(sigma=2.0, gamma=1.0, sigma0_sq=1.0, alpha=2.5, a=1.0)
        report_c = classify_regime(heavy, EpsilonSpec.fixed(0.5),
                                   MomentCondition.TAIL)
        assert report_c.regime is Regime.FIXED_EPS_C
        assert report_c.limit_value == pytest.approx(
            0.5**-2.5 * I_constant(1.5, 2.0, 1.0), rel=1e-12)
        crit = LimitConstants(sigma=2.0, gamma=1.0, sigma0_sq=1.0, alpha=3.0, a=1.0)
        report_b = classify_regime(crit, EpsilonSpec.fixed(0.5),
                                   MomentCondition.TAIL)
        assert report_b.regime is Regime.FIXED_EPS_B
        light = LimitConstants(sigma=2.0, gamma=1.0, sigma0_sq=1.0, alpha=5.0, a=1.0)
        report_a = classify_regime(light, EpsilonSpec.fixed(0.5),
                                   MomentCondition.TAIL, q_value=0.123)
        assert report_a.regime is Regime.FIXED_EPS_A
        assert report_a.limit_value == 0.123
        with pytest.raises(ValueError):
            classify_regime(light, EpsilonSpec.fixed(0.5), MomentCondition.TAIL)

    def test_out_of_scope_inputs(self):
        with pytest.raises(OutOfScope):
            classify_regime(self.consts, EpsilonSpec.power(0.6),
                            MomentCondition.TAIL)
        with pytest.raises(ValueError):
            EpsilonSpec.power(-0.1)
        shallow = LimitConstants(sigma=2.0, gamma=1.0, sigma0_sq=1.0,
                                 alpha=1.8, a=1.0)
        with pytest.raises(OutOfScope):
            classify_regime(shallow, EpsilonSpec.power(0.3), MomentCondition.TAIL)
        small_sigma = LimitConstants(sigma=0.8, gamma=1.0, sigma0_sq=1.0)
        with pytest.raises(OutOfScope):
            classify_regime(small_sigma, EpsilonSpec.power(0.3),
                            MomentCondition.FINITE)

    @settings(max_examples=200, deadline=None)
    @given(e=st.floats(0.01, 0.49), alpha=st.floats(2.05, 6.0),
           sigma=st.floats(1.1, 4.0))
    def test_every_admissible_input_maps_to_one_regime(self, e, alpha, sigma):
        consts = LimitConstants(sigma=sigma, gamma=1.0, sigma0_sq=1.0,
                                alpha=alpha, a=1.0)
        report = classify_regime(consts, EpsilonSpec.power(e),
                                 MomentCondition.TAIL)
        assert report.regime in (Regime.A_GAUSSIAN, Regime.B_HEAVY_TAIL,
                                 Regime.C_BOUNDARY, Regime.CRIT_A)
        if consts.rho is not None and abs(e - consts.rho) <= 1e-12:
            assert report.regime is Regime.C_BOUNDARY

    def test_boundary_exponent_lands_on_mixture(self):
        rho = self.consts.rho
        report = classify_regime(self.consts, EpsilonSpec.power(rho),
                                 MomentCondition.TAIL)
        assert report.regime is Regime.C_BOUNDARY


class TestSampleLimitLaw:
    def test_rejects_empty_request(self):
        with pytest.raises(ValueError):
            sample_limit_law(2.0, 1.0, 1.0, 0, seed=1)

    def test_median_symmetry(self):
        draws = sample_limit_law(2.0, 1.0, 1.0, 10**6, seed=424242)
        p_neg = float((draws <= 0.0).mean())
        three_se = 3.0 * 0.5 / math.sqrt(10**6)
        assert abs(p_neg - 0.5) <= three_se

    def test_second_moment_reference_model(self):
        """E[value^2] = sigma0^2 / (gamma (sigma - 1)) = 1 here; fixed-seed
        regression at the 1% band (the fourth moment diverges at sigma = 2,
        so this is a slow-LLN quantity)."""
        draws = sample_limit_law(2.0, 1.0, 1.0, 10**6, seed=42)
        assert abs(float((draws**2).mean()) - 1.0) <= 0.01

    def test_variance_within_three_se_when_light(self):
        """sigma = 3 keeps the fourth moment finite, so the usual CLT band
        applies to the empirical second moment."""
        draws = sample_limit_law(3.0, 1.0, 1.0, 10**6, seed=7)
        second = draws**2
        expected = 1.0 / (1.0 * (3.0 - 1.0))
        se = float(second.std(ddof=1)) / math.sqrt(second.size)
        assert abs(float(second.mean()) - expected) <= 3.0 * se

    def test_deterministic_per_seed(self):
        a = sample_limit_law(2.5, 0.5, 2.0, 1000, seed=9)
        b = sample_limit_law(2.5, 0.5, 2.0, 1000, seed=9)
        assert np.array_equal(a, b)
