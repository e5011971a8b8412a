import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats as sps

from tapersum import io
from tapersum.distributions import (
    TaperedParetoParams,
    centered_innovation_variance,
    pareto_centering,
    tp_central_abs_moment,
    tp_mean,
)
from tapersum.engine import (
    DCoefficients,
    Normalization,
    PathEnsemble,
    SimulationPlan,
    coupling_gap,
    d_coefficients,
    d_matrix,
    default_plan,
    lyapunov_parts,
    lyapunov_ratio,
    normalization_constant,
    partial_sums,
    past_horizon,
    past_remainder,
    prop1_constant,
    prop1_integrals,
    simulate,
    simulate_coupled,
    sum_d_squared,
    variance_exact,
    with_n,
)
from tapersum.errors import ContractError, DivergenceError, DomainError, ParameterError, \
    UnsupportedError
from tapersum.filters import FilterSpec, coefficients, filter_sum
from tapersum.stats import ks_normal, scaling_regression

T1I = dict(alpha=1.5, gamma=0.2, filter=FilterSpec.power_law(0.75))
T2I = dict(alpha=1.5, gamma=1.0, filter=FilterSpec.power_law(0.8))


def brute_d(f, n, t, J):
    """d_{n,j,t} straight from the definition sum_{k=max(1,j)}^{[nt]} a_{k-j}."""
    m = int(math.floor(round(n * t, 9)))
    a = coefficients(f, n + J + 1)
    out = np.zeros(J + n)
    for idx, j in enumerate(range(-J + 1, n + 1)):
        out[idx] = sum(a[k - j] for k in range(max(1, j), m + 1))
    return out


@pytest.fixture
def small_plan():
    return SimulationPlan(n=64, t_grid=(0.25, 0.5, 1.0), replicates=40, truncation_J=128,
                          seed=3, **T1I)


class TestPlan:
    def test_taper_level(self, small_plan):
        assert small_plan.b == pytest.approx(64**0.2)

    def test_round_trip(self, small_plan):
        d = json.loads(json.dumps(small_plan.to_dict()))
        assert SimulationPlan.from_dict(d) == small_plan

    def test_stored_level_checked(self, small_plan):
        d = small_plan.to_dict()
        d["b"] = 3.0
        with pytest.raises(ParameterError):
            SimulationPlan.from_dict(d)

    @pytest.mark.parametrize("field, value", [("replicates", 0), ("n", 0), ("truncation_J", 0),
                                              ("t_grid", (0.5, 0.25)), ("t_grid", (1.5,)),
                                              ("t_grid", ())])
    def test_validation(self, small_plan, field, value):
        d = dict(small_plan.to_dict(), **{field: value})
        with pytest.raises(ParameterError):
            SimulationPlan.from_dict(d)

    def test_gamma_zero_rejected(self):
        with pytest.raises(ParameterError):
            SimulationPlan(n=64, t_grid=(1.0,), replicates=1, truncation_J=8,
                           **dict(T1I, gamma=0.0))

    def test_explicit_filter_has_no_regime(self):
        plan = SimulationPlan(1.5, 0.2, FilterSpec.explicit([1.0]), 8, (1.0,), 1, 1)
        with pytest.raises(ContractError):
            plan.regime()

    def test_with_n_keeps_ratio(self, small_plan):
        q = with_n(small_plan, 128)
        assert q.n == 128 and q.truncation_J == 256


class TestDCoefficients:
    def test_identity_filter(self, identity_filter):
        d = d_coefficients(identity_filter, 8, 1.0, 4)
        assert all(d[j] == 1.0 for j in range(1, 9))
        assert all(d[j] == 0.0 for j in range(-3, 1))
        assert float(np.sum(d.values**2)) == 8

    def test_power_law_j0(self):
        d = d_coefficients(FilterSpec.power_law(0.75), 16, 1.0, 8)
        assert d[0] == pytest.approx(math.fsum(k**-0.75 for k in range(1, 17)), rel=1e-13)

    def test_index_and_out_of_range(self):
        d = d_coefficients(FilterSpec.power_law(0.75), 4, 1.0, 3)
        assert list(d.index) == [-2, -1, 0, 1, 2, 3, 4]
        assert d[-10] == 0.0 and d[5] == 0.0
        assert isinstance(d, DCoefficients)

    @given(st.integers(1, 30), st.integers(1, 30), st.sampled_from([0.25, 0.5, 0.7, 1.0]),
           st.sampled_from([FilterSpec.power_law(0.75), FilterSpec.power_law(1.5),
                            FilterSpec.zero_sum(1.25), FilterSpec.explicit([1, -0.5, 0.25])]))
    def test_matches_definition(self, n, J, t, f):
        np.testing.assert_allclose(d_coefficients(f, n, t, J).values, brute_d(f, n, t, J),
                                   rtol=1e-11, atol=1e-12)

    def test_bad_time(self):
        with pytest.raises(DomainError):
            d_coefficients(FilterSpec.power_law(0.75), 4, 0.0, 4)


class TestSumDSquared:
    def test_identity(self, identity_filter):
        assert sum_d_squared(identity_filter, 100, 1) == 100

    @pytest.mark.parametrize("f", [FilterSpec.power_law(0.75), FilterSpec.zero_sum(1.25)])
    def test_past_remainder_against_long_sum(self, f):
        n, J, big = 64, 256, 1 << 20
        d = d_coefficients(f, n, 1.0, big).values
        band = d[: big - J]  # J <= -j < big
        want = float(np.dot(band, band))
        got = past_remainder(f, n, J) - past_remainder(f, n, big)
        assert got == pytest.approx(want, rel=1e-3)

    @pytest.mark.parametrize("k", range(10, 15))
    def test_case_i_ratio(self, k):
        n = 2**k
        f = FilterSpec.power_law(0.75)
        assert sum_d_squared(f, n, 2 * n) / n**1.5 / prop1_constant("i", 0.75) == pytest.approx(
            1, abs=0.03)

    def test_case_ii_ratio(self):
        n = 2**14
        f = FilterSpec.power_law(1.5)
        assert sum_d_squared(f, n, 2 * n) / n / filter_sum(f) ** 2 == pytest.approx(1, abs=0.03)


class TestProp1:
    def test_case_iii_v2(self):
        assert prop1_integrals("iii", 1.25)[1] == pytest.approx(32.0, rel=1e-10)

    def test_case_ii_explicit(self):
        assert prop1_constant("ii", 1.5, FilterSpec.explicit([2.0])) == pytest.approx(4.0)

    def test_case_i_closed_form(self):
        b = 0.75
        want = math.gamma(1 - b) * math.gamma(2 * b - 1) / math.gamma(b) / ((1 - b) * (3 - 2 * b))
        assert prop1_constant("i", b) == pytest.approx(want, rel=1e-9)

    def test_case_i_direct_sum(self):
        n = 2**16
        got = sum_d_squared(FilterSpec.power_law(0.75), n, 2 * n) / n**1.5
        assert got == pytest.approx(prop1_constant("i", 0.75), rel=0.02)

    def test_bad_case(self):
        with pytest.raises(DomainError):
            prop1_constant("iv", 0.75)
        with pytest.raises(DomainError):
            prop1_constant("i", 1.25)


class TestPastHorizon:
    def test_fraction_reported_when_capped(self):
        J, frac = past_horizon(FilterSpec.power_law(0.75), 256, max_factor=4)
        assert J == 1024 and frac > 1e-6

    def test_reaches_tolerance(self):
        J, frac = past_horizon(FilterSpec.power_law(1.5), 256)
        assert frac <= 1e-6

    def test_default_plan_norm_choice(self):
        hard = default_plan(n=256, **T1I)
        soft = default_plan(n=256, **T2I)
        assert hard.truncation_J >= 256 and soft.truncation_J >= 256


class TestExactQuantities:
    def test_identity_variance(self, identity_filter):
        plan = SimulationPlan(1.5, 0.5, identity_filter, 100, (1.0,), 1, 1)
        assert variance_exact(plan) == pytest.approx(100 * centered_innovation_variance(plan.params))

    def test_identity_lyapunov(self, identity_filter):
        plan = SimulationPlan(1.5, 0.5, identity_filter, 100, (1.0,), 1, 1)
        p = plan.params
        m = tp_central_abs_moment(p, 3.0) / centered_innovation_variance(p) ** 1.5
        assert lyapunov_ratio(plan) == pytest.approx(m / 10, rel=1e-9)

    @staticmethod
    def _coef_slope(f, gamma):
        pts = []
        for k in range(10, 17):
            plan = default_plan(1.5, gamma, f, 2**k)
            pts.append((2**k, lyapunov_parts(plan)[0]))
        return scaling_regression(pts).exponent_hat

    def test_case_iii_coefficient_rate(self):
        # sum |d|^3 ~ n^(4-3 beta) and sum d^2 ~ n^(3-2 beta) give n^(-1/2);
        # the max|d| bound n^(-3/2+beta) is respected but not attained
        slope = self._coef_slope(FilterSpec.zero_sum(1.25), 0.15)
        assert slope < -0.25
        assert slope == pytest.approx(-0.5, abs=0.05)

    @pytest.mark.xfail(strict=True, reason="-3/2+beta is an upper bound on the rate, not the "
                       "rate itself; recorded in the decisions ledger")
    def test_case_iii_coefficient_slope_equals_bound(self):
        assert self._coef_slope(FilterSpec.zero_sum(1.25), 0.15) == pytest.approx(-0.25, abs=0.05)

    def test_case_i_coefficient_rate(self):
        assert self._coef_slope(FilterSpec.power_law(0.75), 0.2) == pytest.approx(-0.5, abs=0.06)

    def test_variance_filter_factor_doubles_at_rate(self):
        n = 2**13
        f = FilterSpec.power_law(0.75)
        ratio = sum_d_squared(f, 2 * n, 64 * n) / sum_d_squared(f, n, 32 * n)
        assert ratio / 2**1.5 == pytest.approx(1, abs=0.01)

    @pytest.mark.xfail(strict=True, reason="taper level n^0.2 ~ 6 is far from its asymptotic "
                       "variance; recorded in the decisions ledger")
    def test_variance_doubling_matches_hurst(self):
        n = 2**13
        plan = default_plan(n=n, **T1I)
        r = variance_exact(with_n(plan, 2 * n), True) / variance_exact(plan, True)
        assert r / 2 ** (2 * 0.8) == pytest.approx(1, abs=0.05)

    @pytest.mark.xfail(strict=True, reason="Var xi(b) at b = 5.3 is a quarter of 4 b^0.5; "
                       "recorded in the decisions ledger")
    def test_variance_leading_term(self):
        plan = default_plan(n=2**12, **T1I)
        lead = prop1_constant("i", 0.75) * 4 * plan.b**0.5 * plan.n**1.5
        assert variance_exact(plan, True) / lead == pytest.approx(1, abs=0.1)

    def test_theoretical_power_constant(self):
        plan = default_plan(n=256, normalization=Normalization.THEORETICAL_POWER, **T1I)
        assert normalization_constant(plan) == pytest.approx(256**0.8)


class TestPartialSums:
    @pytest.mark.parametrize("f", [FilterSpec.power_law(0.75), FilterSpec.zero_sum(1.25)])
    def test_methods_agree(self, f):
        n, J = 200, 300
        e = np.random.default_rng(0).standard_normal((4, n + J))
        grid = (0.1, 0.5, 1.0)
        np.testing.assert_allclose(partial_sums(f, n, J, grid, e, "dcoef"),
                                   partial_sums(f, n, J, grid, e, "conv"), rtol=1e-9, atol=1e-9)

    def test_fft_branch_agrees(self):
        f = FilterSpec.power_law(0.75)
        n, J = 1024, 4096
        e = np.random.default_rng(1).standard_normal((2, n + J))
        np.testing.assert_allclose(partial_sums(f, n, J, (1.0,), e, "dcoef"),
                                   partial_sums(f, n, J, (1.0,), e, "conv"), rtol=1e-9, atol=1e-8)

    def test_shape_contract(self):
        with pytest.raises(ContractError):
            partial_sums(FilterSpec.power_law(0.75), 4, 4, (1.0,), np.zeros((1, 7)))


class TestSimulate:
    def test_bit_identical_rerun(self, small_plan):
        a = simulate(small_plan).values
        b = simulate(small_plan).values
        np.testing.assert_array_equal(a, b)

    def test_workers_do_not_change_values(self, small_plan, monkeypatch):
        import tapersum.engine as eng

        monkeypatch.setattr(eng, "BLOCK_FLOATS", 192 * 5)
        np.testing.assert_array_equal(simulate(small_plan, workers=1).values,
                                      simulate(small_plan, workers=3).values)

    def test_methods_agree(self, small_plan):
        np.testing.assert_allclose(simulate(small_plan, method="dcoef").values,
                                   simulate(small_plan, method="conv").values, rtol=1e-9,
                                   atol=1e-12)

    def test_exact_stddev_variance(self):
        plan = default_plan(n=256, t_grid=(1.0,), replicates=2000, seed=11, **T1I)
        z = simulate(plan).at(1.0)
        se = np.std(z**2, ddof=1) / math.sqrt(z.size)
        assert abs(np.var(z, ddof=1) - 1) < 3 * se

    def test_identity_filter_clt(self, identity_filter):
        plan = SimulationPlan(1.5, 0.2, identity_filter, 4096, (1.0,), 2000, 1, seed=5)
        assert ks_normal(simulate(plan).at(1.0)).passed

    def test_ensemble_io_round_trip(self, small_plan, tmp_path):
        ens = simulate(small_plan)
        ens.to_csv(tmp_path / "e.csv")
        vals, grid = io.read_csv(tmp_path / "e.csv")
        np.testing.assert_array_equal(vals, ens.values)
        np.testing.assert_array_equal(grid, small_plan.t_grid)
        ens.to_json(tmp_path / "e.json")
        doc = json.loads((tmp_path / "e.json").read_text())
        assert SimulationPlan.from_dict(doc["plan"]) == small_plan
        np.testing.assert_array_equal(np.array(doc["values"]), ens.values)

    def test_at_off_grid(self, small_plan):
        with pytest.raises(DomainError):
            simulate(small_plan).at(0.3)

    def test_non_finite_rejected(self, small_plan):
        with pytest.raises(ContractError):
            PathEnsemble(np.full((40, 3), np.nan), small_plan, 1.0)


class TestCoupled:
    def test_errors(self):
        with pytest.raises(UnsupportedError):
            simulate_coupled(SimulationPlan(1.0, 1.0, FilterSpec.power_law(1.5), 64, (1.0,), 2, 64))
        with pytest.raises(DivergenceError):
            simulate_coupled(default_plan(n=64, **dict(T2I, filter=FilterSpec.power_law(0.6))))

    def test_huge_gamma_gap_is_centering_only(self):
        plan = default_plan(n=64, t_grid=(1.0,), replicates=50, **dict(T2I, gamma=10.0))
        v, s = simulate_coupled(plan)
        D = d_matrix(plan.filter, plan.n, (1.0,), plan.truncation_J)
        shift = (tp_mean(plan.params) - pareto_centering(1.5)) * D.sum() / v.normalization_used
        gap = v.values[:, 0] - s.values[:, 0]
        np.testing.assert_allclose(gap, shift, atol=1e-9)
        assert abs(shift) < 1e-6

    def test_marginal_of_tapered_side_matches_simulate(self):
        plan = default_plan(n=64, t_grid=(1.0,), replicates=20, seed=2, **T2I)
        _, s = simulate_coupled(plan)
        assert np.all(np.isfinite(s.values))

    def test_exceedance_sampler_matches_full_paths(self):
        plan = default_plan(n=128, t_grid=(0.5, 1.0), replicates=3000, seed=4, **T2I)
        v, s = simulate_coupled(plan)
        full = np.round(v.values - s.values, 6)
        fast = np.round(coupling_gap(plan), 6)
        for col in range(2):
            assert sps.ks_2samp(full[:, col], fast[:, col]).pvalue > 0.01

    def test_median_gap_shrinks(self):
        meds = []
        for k in (10, 12, 14):
            plan = default_plan(n=2**k, replicates=20_000, seed=9,
                                normalization=Normalization.THEORETICAL_POWER, **T2I)
            meds.append(float(np.median(np.abs(coupling_gap(plan)))))
        assert meds[0] > meds[1] > meds[2]
