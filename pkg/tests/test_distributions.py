import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st

from tapersum.distributions import (
    ParetoParams,
    TaperedParetoParams,
    centered_innovation_variance,
    coupled_from_uniforms,
    coupling_gap_moment,
    pareto_cdf,
    pareto_centering,
    sample_coupled,
    tp_cdf,
    tp_central_abs_moment,
    tp_mean,
    tp_moment_asymptotic,
    tp_moment_exact,
    tp_moment_quad,
    tp_pdf,
    tp_quantile,
    tp_sample,
    tp_sf,
)
from tapersum.errors import DomainError, ParameterError, UnsupportedError
from tapersum.rng import open_uniform, stream
from tapersum.stats import innovation_gap_moments, ks_test

alphas = st.floats(0.05, 1.95)
levels = st.floats(1.01, 1e4)


def mp_moment(alpha, b, r):
    """Independent oracle: both pieces of the density integrated by mpmath."""
    mp.mp.dps = 30
    a, b, r = mp.mpf(alpha), mp.mpf(b), mp.mpf(r)
    body = mp.quad(lambda x: x**r * a * x ** (-a - 1), [1, b])
    tail = mp.quad(lambda x: x**r * b ** (-a) * mp.e ** (b - x), [b, b + 50, mp.inf])
    return float(body + tail)


class TestParams:
    def test_rejects_nonpositive_alpha(self):
        with pytest.raises(ParameterError):
            TaperedParetoParams(0.0, 10.0)
        with pytest.raises(ParameterError):
            ParetoParams(-1.0)

    def test_alpha_above_two_is_a_valid_law(self):
        assert tp_moment_exact(TaperedParetoParams(2.5, 10.0), 0.0) == pytest.approx(1.0)

    def test_rejects_level_at_or_below_one(self):
        with pytest.raises(ParameterError):
            TaperedParetoParams(1.5, 1.0)

    def test_pareto_mean(self):
        assert ParetoParams(1.5).mean == pytest.approx(3.0)


class TestDensityAndCdf:
    p = TaperedParetoParams(1.5, 10.0)

    def test_pdf_examples(self):
        assert tp_pdf(self.p, 0.5) == 0.0
        assert tp_pdf(self.p, 1.0) == pytest.approx(1.5)
        assert tp_pdf(self.p, 12.0) == pytest.approx(10**-1.5 * math.exp(-2), rel=1e-13)

    def test_pdf_matches_numeric_derivative(self):
        h = 1e-5
        for x in (1.5, 9.0, 12.0, 20.0):
            # differencing the survival function avoids cancellation near cdf = 1
            num = (tp_sf(self.p, x - h) - tp_sf(self.p, x + h)) / (2 * h)
            assert tp_pdf(self.p, x) == pytest.approx(num, rel=1e-7)

    def test_cdf_examples(self):
        assert tp_cdf(self.p, 1.0) == 0.0
        assert tp_cdf(self.p, 10.0) == pytest.approx(1 - 10**-1.5, rel=1e-15)
        assert tp_cdf(self.p, 1e6) == 1.0

    def test_sf_complements_cdf(self):
        x = np.linspace(0.5, 40, 101)
        np.testing.assert_allclose(tp_cdf(self.p, x) + tp_sf(self.p, x), 1.0, atol=1e-15)

    @given(alphas, levels, st.floats(1e-9, 1 - 1e-9))
    def test_quantile_round_trip(self, a, b, u):
        p = TaperedParetoParams(a, b)
        x = tp_quantile(p, u)
        assert x >= 1.0
        assert tp_cdf(p, x) == pytest.approx(u, rel=1e-9, abs=1e-12)

    @given(alphas, levels)
    def test_cdf_monotone(self, a, b):
        p = TaperedParetoParams(a, b)
        x = np.concatenate([np.geomspace(1, b, 50), b + np.linspace(0, 30, 50)])
        assert np.all(np.diff(tp_cdf(p, np.sort(x))) >= 0)

    def test_quantile_examples(self):
        assert tp_quantile(TaperedParetoParams(1.0, 10.0), 0.5) == pytest.approx(2.0)
        p = self.p
        assert tp_quantile(p, 1 - p.b**-p.alpha) == pytest.approx(10.0, rel=1e-12)
        assert tp_quantile(p, 1e-15) == pytest.approx(1.0, abs=1e-12)


class TestSampler:
    def test_first_draw_is_quantile_of_first_uniform(self, seed):
        p = TaperedParetoParams(1.5, 10.0)
        u = open_uniform(stream(seed, 3), 1)[0]
        assert tp_sample(p, stream(seed, 3)) == pytest.approx(tp_quantile(p, u), rel=1e-15)

    def test_support_and_ks(self, seed):
        p = TaperedParetoParams(0.8, 10.0)
        x = tp_sample(p, stream(seed, 1), 100_000)
        assert x.min() >= 1.0
        assert ks_test(x, lambda v: tp_cdf(p, v)).passed


class TestMoments:
    @pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5, 1.9])
    @pytest.mark.parametrize("b", [1.5, 10.0, 1e3])
    @pytest.mark.parametrize("r", [0.3, 1.0, 2.0])
    def test_exact_matches_mpmath(self, alpha, b, r):
        got = tp_moment_exact(TaperedParetoParams(alpha, b), r)
        assert got == pytest.approx(mp_moment(alpha, b, r), rel=1e-10)

    @given(alphas, levels)
    def test_mass_is_one(self, a, b):
        assert tp_moment_exact(TaperedParetoParams(a, b), 0.0) == pytest.approx(1.0, abs=1e-12)

    @given(alphas, st.floats(1.5, 1e3), st.floats(0.0, 3.0))
    def test_exact_matches_quadrature(self, a, b, r):
        p = TaperedParetoParams(a, b)
        assert tp_moment_exact(p, r) == pytest.approx(tp_moment_quad(p, r), rel=1e-8)

    def test_golden_first_moment(self):
        assert tp_moment_exact(TaperedParetoParams(1.5, 100.0), 1.0) == pytest.approx(2.801,
                                                                                      rel=1e-12)

    def test_asymptotic_examples(self):
        assert tp_moment_asymptotic(TaperedParetoParams(1.5, 77.0), 1.0) == pytest.approx(3.0)
        assert tp_moment_asymptotic(TaperedParetoParams(1.0, math.e), 1.0) == pytest.approx(1.0)
        p = TaperedParetoParams(1.5, 100.0)
        assert tp_moment_asymptotic(p, 2.0) == pytest.approx(40.0)
        assert tp_moment_exact(p, 2.0) / 40.0 == pytest.approx(1.0, abs=0.1)

    def test_asymptotic_ratio_at_large_level(self):
        p = TaperedParetoParams(1.5, 1e4)
        ratio = tp_moment_exact(p, 2.0) / tp_moment_asymptotic(p, 2.0)
        assert abs(ratio - 1) < 0.05

    @pytest.mark.parametrize("r", [0.75, 1.5, 2.0])
    def test_asymptotic_ratio_at_1e6(self, r):
        p = TaperedParetoParams(1.5, 1e6)
        assert abs(tp_moment_exact(p, r) / tp_moment_asymptotic(p, r) - 1) < 0.05

    def test_negative_order_rejected(self):
        with pytest.raises(DomainError):
            tp_moment_exact(TaperedParetoParams(1.5, 10.0), -1.0)


class TestVariance:
    @given(alphas, levels)
    def test_positive(self, a, b):
        assert centered_innovation_variance(TaperedParetoParams(a, b)) > 0

    def test_leading_term(self):
        p = TaperedParetoParams(1.5, 1e4)
        assert abs(centered_innovation_variance(p) / (4 * 100) - 1) < 0.05

    def test_monte_carlo(self, seed):
        p = TaperedParetoParams(1.5, 10.0)
        x = tp_sample(p, stream(seed, 7), 1_000_000)
        v = centered_innovation_variance(p)
        se = np.std((x - x.mean()) ** 2, ddof=1) / math.sqrt(x.size)
        assert abs(np.var(x, ddof=1) - v) < 3 * se

    def test_central_abs_moment_second_order_is_variance(self):
        p = TaperedParetoParams(1.2, 30.0)
        assert tp_central_abs_moment(p, 2.0) == pytest.approx(centered_innovation_variance(p),
                                                               rel=1e-8)


class TestCoupling:
    p = TaperedParetoParams(1.5, 10.0)

    def test_identity_branch(self):
        c = coupled_from_uniforms(self.p, np.array([0.5]), np.array([0.3]))
        assert c.theta[0] < 10 and c.zeta[0] == c.theta[0]

    def test_exceedance_branch(self):
        c = coupled_from_uniforms(self.p, np.array([1e-3]), np.array([0.3]))
        assert c.theta[0] >= 10
        assert c.zeta[0] == pytest.approx(10 - math.log(0.3))

    def test_marginals(self, seed):
        c = sample_coupled(self.p, stream(seed, 2), 100_000)
        assert ks_test(c.zeta, lambda v: tp_cdf(self.p, v)).passed
        assert ks_test(c.theta, lambda v: pareto_cdf(ParetoParams(1.5), v)).passed

    def test_gap_constant_below_level(self, seed):
        c = sample_coupled(self.p, stream(seed, 2), 10_000)
        below = c.theta < 10
        gap = c.eta - c.xi
        const = tp_mean(self.p) - pareto_centering(1.5)
        np.testing.assert_allclose(gap[below], const, atol=1e-12)

    def test_alpha_one_unsupported(self, rng):
        with pytest.raises(UnsupportedError):
            sample_coupled(TaperedParetoParams(1.0, 10.0), rng, 3)

    def test_scalar_draw(self, rng):
        c = sample_coupled(self.p, rng)
        assert isinstance(c.zeta, float)


class TestCouplingGapMoment:
    """Quadrature oracle against Monte Carlo and a closed form at kappa -> 2."""

    def test_matches_plain_monte_carlo(self, seed):
        # the plain average converges slowly (|gap| has tail index alpha), so
        # only the small level where exceedances are frequent is compared
        (_, mc), = innovation_gap_moments(1.5, [10.0], 1.0, 2_000_000, seed, method="plain")
        assert coupling_gap_moment(TaperedParetoParams(1.5, 10.0), 1.0) == pytest.approx(
            mc, rel=0.03)

    def test_matches_stratified(self, seed):
        est = innovation_gap_moments(1.5, [1e3, 1e4], 1.0, 2_000_000, seed)
        for b, mc in est:
            assert coupling_gap_moment(TaperedParetoParams(1.5, b), 1.0) == pytest.approx(
                mc, rel=0.03)

    def test_rejects_kappa_outside_range(self):
        with pytest.raises(DomainError):
            coupling_gap_moment(TaperedParetoParams(1.5, 10.0), 1.6)

    def test_slope_in_level(self):
        from tapersum.stats import scaling_regression

        pts = [(b, coupling_gap_moment(TaperedParetoParams(1.5, b), 1.0))
               for b in (1e2, 1e3, 1e4, 1e5)]
        assert scaling_regression(pts).exponent_hat == pytest.approx(-0.5, abs=0.05)
