"""Truncated-series arithmetic, pgf iteration, and the closed-form oracle."""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gwilab import (
    DistributionSpec,
    TruncatedSeries,
    TruncationOverflow,
    NegativeCoefficient,
    compose,
    evaluate,
    iterate_pgf,
    linear_fractional_oracle,
    pgf_coefficients,
)
from gwilab.series import _finalize_pgf_coeffs, apply_pgf, pgf_of_Zn


class TestCompose:
    def test_identity_outer_returns_inner(self):
        inner = pgf_coefficients(DistributionSpec.geometric(0.5), 8)
        result = compose(TruncatedSeries.identity(8), inner)
        np.testing.assert_allclose(result.coeffs, inner.coeffs, atol=1e-15)

    def test_geometric_outer_of_identity(self):
        """f composed with x reproduces the pmf expansion."""
        outer = pgf_coefficients(DistributionSpec.geometric(0.5), 2)
        result = compose(outer, TruncatedSeries.identity(2))
        np.testing.assert_allclose(result.coeffs, [0.5, 0.25, 0.125], atol=1e-15)

    def test_self_composition_constant_term(self):
        """f(f(0)) = 2/3 for the geometric(1/2) pgf; K large enough that the
        outer truncation tail is below the tolerance."""
        K = 64
        outer = pgf_coefficients(DistributionSpec.geometric(0.5), K)
        result = compose(outer, outer)
        np.testing.assert_allclose(result.coeffs[0], 2.0 / 3.0, atol=1e-12)

    def test_mismatched_truncation_rejected(self):
        with pytest.raises(ValueError):
            compose(TruncatedSeries.identity(4), TruncatedSeries.identity(5))

    def test_inner_constant_term_must_be_in_unit_interval(self):
        with pytest.raises(ValueError):
            compose(TruncatedSeries.identity(3), TruncatedSeries.constant(1.0, 3))

    def test_overflow_detected(self):
        outer = TruncatedSeries(np.full(4, 1e7))
        inner = TruncatedSeries(np.array([0.5, 0.25, 0.1, 0.05]))
        with pytest.raises(TruncationOverflow):
            compose(outer, inner)

    def test_family_application_matches_generic_compose(self):
        """apply_pgf is the composition with the exact outer function."""
        K = 96
        inner = pgf_coefficients(DistributionSpec.explicit((0.3, 0.4, 0.3)), K)
        for spec in (DistributionSpec.geometric(0.4), DistributionSpec.poisson(0.7),
                     DistributionSpec.explicit((0.2, 0.5, 0.3))):
            outer = pgf_coefficients(spec, K)
            generic = compose(outer, inner).coeffs
            fast = apply_pgf(spec, inner.coeffs, K)
            # The generic route carries the outer truncation tail only.
            np.testing.assert_allclose(fast, generic, atol=1e-12)


class TestIteration:
    def test_empty_product_at_n_zero(self, geo_model):
        trace = iterate_pgf(geo_model, 0, 8)
        np.testing.assert_allclose(trace.H_n.coeffs, [1, 0, 0, 0, 0, 0, 0, 0, 0])
        assert trace.f_at_zero[0] == 0.0

    def test_one_step_is_immigration_law(self, geo_model):
        """After a single step the population is exactly one immigration batch."""
        trace = iterate_pgf(geo_model, 1, 32)
        expected = pgf_coefficients(geo_model.immigration, 32)
        np.testing.assert_allclose(trace.H_n.coeffs, expected.coeffs, atol=1e-15)

    def test_two_step_mass_at_zero(self, geo_model):
        """H_2(0) = h(0) h(f(0)) = (1/3)(1/2) / (1 - 1/3) ... = 1/6."""
        trace = iterate_pgf(geo_model, 2, 32)
        np.testing.assert_allclose(trace.H_n.coeffs[0], 1.0 / 6.0, atol=1e-15)

    def test_coefficients_stay_nonnegative(self, geo_model, explicit_model):
        for mp in (geo_model, explicit_model):
            trace = iterate_pgf(mp, 40, 512)
            assert trace.H_n.coeffs.min() >= 0.0

    def test_product_is_monotone_in_n(self, geo_model):
        """Each extra factor h(f_k(x)) <= 1 shrinks H_n(x) on [0, 1)."""
        xs = (0.0, 0.3, 0.6, 0.9)
        prev = None
        for n in range(1, 11):
            trace = iterate_pgf(geo_model, n, 256)
            vals = [evaluate(trace.H_n, x) for x in xs]
            if prev is not None:
                assert all(v <= p + 1e-12 for v, p in zip(vals, prev))
            prev = vals

    def test_extinction_complement_rate(self, geo_model, explicit_model):
        """k gamma (1 - f_k(0)) climbs monotonically toward 1."""
        for mp in (geo_model, explicit_model):
            trace = iterate_pgf(mp, 200, 4)
            ks = np.arange(10, 201)
            vals = ks * mp.gamma * (1.0 - trace.f_at_zero[10:201])
            assert np.all(np.diff(vals) > 0.0)
            assert vals[-1] > 0.95

    def test_negative_coefficient_breakdown_raises(self):
        with pytest.raises(NegativeCoefficient):
            _finalize_pgf_coeffs(np.array([0.5, -1e-6]))
        cleaned = _finalize_pgf_coeffs(np.array([0.5, -1e-13]))
        assert cleaned[1] == 0.0


class TestLinearFractionalOracle:
    def test_two_step_value(self):
        assert linear_fractional_oracle(1.0, 2, 0.0) == pytest.approx(2.0 / 3.0, abs=1e-15)

    def test_zeroth_iterate_is_identity(self):
        for s in (0.0, 0.3, 0.7):
            assert linear_fractional_oracle(2.5, 0, s) == s

    def test_large_n_closed_form(self):
        assert linear_fractional_oracle(1.0, 99, 0.0) == pytest.approx(0.99, abs=1e-15)

    def test_series_agreement_on_grid(self, geo_model):
        """Iterated coefficients reproduce the closed form at interior points."""
        K = 256
        g = TruncatedSeries.identity(K).coeffs
        for k in range(1, 51):
            g = apply_pgf(geo_model.offspring, g, K)
            series = TruncatedSeries(g)
            for s in (0.0, 0.3, 0.7):
                oracle = linear_fractional_oracle(1.0, k, s)
                assert abs(evaluate(series, s) - oracle) <= 1e-9


class TestEvaluate:
    def test_constant_term_at_zero(self):
        series = TruncatedSeries(np.array([0.25, 0.5, 0.25]))
        assert evaluate(series, 0.0) == 0.25

    def test_geometric_partial_sum_at_one(self):
        series = pgf_coefficients(DistributionSpec.geometric(0.5), 20)
        np.testing.assert_allclose(evaluate(series, 1.0), 1.0 - 2.0**-21, rtol=1e-15)

    def test_one_step_value_matches_immigration_pgf(self, geo_model):
        trace = iterate_pgf(geo_model, 1, 512)
        np.testing.assert_allclose(evaluate(trace.H_n, 0.5), 0.5, atol=1e-12)

    def test_rejects_points_outside_disc(self):
        with pytest.raises(ValueError):
            evaluate(TruncatedSeries.identity(4), 1.5)

    @given(x=st.floats(0.0, 1.0))
    def test_subprobability_range(self, x):
        series = pgf_coefficients(DistributionSpec.geometric(0.5), 64)
        assert 0.0 <= evaluate(series, x) <= 1.0 + 1e-9


class TestScalarIteration:
    def test_matches_series_route(self, geo_model, explicit_model):
        for mp in (geo_model, explicit_model):
            trace = iterate_pgf(mp, 30, 1024)
            for x in (0.0, 0.4, 0.8):
                series_value = evaluate(trace.H_n, x)
                np.testing.assert_allclose(pgf_of_Zn(mp, 30, x), series_value,
                                           rtol=1e-9)

    def test_vectorized_matches_scalar(self, geo_model):
        xs = np.array([0.0, 0.2, 0.5, 0.9])
        vec = pgf_of_Zn(geo_model, 25, xs)
        np.testing.assert_allclose(vec, [pgf_of_Zn(geo_model, 25, float(x)) for x in xs],
                                   rtol=1e-13)
