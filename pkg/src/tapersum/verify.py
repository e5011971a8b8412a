"""Verification suites.

Each ``check_*`` function runs one group of checks and returns a list of
:class:`~tapersum.stats.TestReport`. Suites bundle them for the CLI; fast mode
cuts replicate counts and widens the Monte Carlo tolerances by ``FAST_WIDEN``,
and both facts are written into every report.
"""

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import __version__
from ._accel import BACKEND
from .distributions import (
    ParetoParams,
    TaperedParetoParams,
    centered_innovation_variance,
    coupling_gap_moment,
    pareto_cdf,
    sample_coupled,
    tp_cdf,
    tp_moment_asymptotic,
    tp_moment_exact,
    tp_moment_quad,
    tp_sample,
)
from .engine import (
    Normalization,
    default_plan,
    lyapunov_parts,
    prop1_constant,
    prop1_integrals,
    simulate,
    sum_d_squared,
    variance_exact,
)
from .errors import DomainError
from .filters import FilterSpec, filter_sum
from .limit_processes import (
    FbmSpec,
    LfsmSpec,
    StableSpec,
    sample_fbm,
    sample_lfsm,
    sample_stable,
    sample_stable_levy,
)
from .regimes import RegimeParams, classify, gap_constants
from .rng import stream
from .stats import (
    THRESHOLDS,
    TestReport,
    cf_distance,
    covariance_match,
    coupling_moments,
    hill_tail_index,
    innovation_gap_moments,
    ks_normal,
    ks_test,
    quantile_scaling,
    scaling_regression,
    skew_convention_check,
)

SEED = 12345
FAST_WIDEN = 2.0
MOMENT_ALPHAS = (0.5, 0.8, 1.2, 1.5, 1.9)
MOMENT_BS = (2.0, 10.0, 100.0, 1e4)


@dataclass(frozen=True)
class GaussianCase:
    label: str
    alpha: float
    beta: float
    gamma: float
    zero_sum: bool = False

    @property
    def filter(self):
        if self.zero_sum:
            return FilterSpec.zero_sum(self.beta)
        return FilterSpec.power_law(self.beta)

    @property
    def H(self):
        return classify(RegimeParams(self.alpha, self.beta, self.gamma, self.zero_sum)).H


T1_CASES = (
    GaussianCase("i", 1.5, 0.75, 0.2),
    GaussianCase("ii", 1.5, 1.5, 0.5),
    GaussianCase("iii", 1.5, 1.25, 0.15, zero_sum=True),
)
T2_CASES = (
    GaussianCase("i", 1.5, 0.8, 1.0),
    GaussianCase("ii", 1.5, 2.0, 1.0),
)


@dataclass
class SuiteResult:
    suite: str
    reports: list
    fast: bool
    seed: int
    wall_time_s: float
    thresholds: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(r.passed for r in self.reports)

    def to_dict(self):
        return {"suite": self.suite, "passed": self.passed, "fast": self.fast,
                "seed": self.seed, "wall_time_s": self.wall_time_s, "version": __version__,
                "backend": BACKEND, "thresholds": self.thresholds,
                "reports": [r.to_dict() for r in self.reports]}


def _th(fast, thresholds):
    return thresholds.widened(FAST_WIDEN) if fast else thresholds


def _tag(reports, fast):
    for r in reports:
        r.detail.setdefault("fast", fast)
    return reports


# -- criterion 1: moments --------------------------------------------------------

def check_moments(fast=False, seed=SEED, thresholds=THRESHOLDS, workers=1):
    th = thresholds
    out = []
    worst_mass = 0.0
    worst_quad = 0.0
    for a in MOMENT_ALPHAS:
        for b in MOMENT_BS:
            p = TaperedParetoParams(a, b)
            worst_mass = max(worst_mass, abs(tp_moment_exact(p, 0.0) - 1.0))
            for r in (0.5, 1.0, a, 2.0, 3.0):
                ex, q = tp_moment_exact(p, r), tp_moment_quad(p, r)
                worst_quad = max(worst_quad, abs(ex - q) / abs(q))
    grid = {"alpha": list(MOMENT_ALPHAS), "b": list(MOMENT_BS)}
    out.append(TestReport("moment_r0_mass", worst_mass, th.mass_tol, "max", detail=grid))
    out.append(TestReport("moment_exact_vs_quadrature", worst_quad, th.quad_tol, "max",
                          detail=dict(grid, r=[0.5, 1.0, "alpha", 2.0, 3.0])))
    p = TaperedParetoParams(1.5, 1e4)
    for r in (1.0, 2.0):
        ratio = tp_moment_exact(p, r) / tp_moment_asymptotic(p, r)
        out.append(TestReport(f"moment_asymptotic_ratio_r{r:g}", abs(ratio - 1.0),
                              th.asymptotic_tol, "max",
                              detail={"alpha": 1.5, "b": 1e4, "r": r, "ratio": ratio}))
    var_ratio = centered_innovation_variance(p) / (4.0 * p.b**0.5)
    out.append(TestReport("variance_asymptotic_ratio", abs(var_ratio - 1.0), th.asymptotic_tol,
                          "max", detail={"alpha": 1.5, "b": 1e4, "ratio": var_ratio}))
    return _tag(out, fast)


# -- criterion 2: sampler -------------------------------------------------------

def check_sampler(fast=False, seed=SEED, thresholds=THRESHOLDS, workers=1):
    N = 20_000 if fast else 100_000
    out = []
    for i, (a, b) in enumerate([(0.8, 10.0), (0.8, 1e3), (1.5, 10.0), (1.5, 1e3)]):
        p = TaperedParetoParams(a, b)
        x = tp_sample(p, stream(seed, i), N)
        r = ks_test(x, lambda v, p=p: tp_cdf(p, v), name=f"ks_tp_sample_a{a:g}_b{b:g}",
                    seed=seed, thresholds=thresholds)
        out.append(r)
    p = TaperedParetoParams(1.5, 10.0)
    c = sample_coupled(p, stream(seed, 10), N)
    out.append(ks_test(c.zeta, lambda v: tp_cdf(p, v), name="ks_coupled_zeta", seed=seed,
                       thresholds=thresholds))
    out.append(ks_test(c.theta, lambda v: pareto_cdf(ParetoParams(1.5), v),
                       name="ks_coupled_theta", seed=seed, thresholds=thresholds))
    return _tag(out, fast)


# -- criterion 3: variance constants ----------------------------------------------

def check_prop1(fast=False, seed=SEED, thresholds=THRESHOLDS, workers=1):
    th = thresholds
    n = 2**14
    out = []
    cases = [("i", FilterSpec.power_law(0.75), 3 - 2 * 0.75),
             ("iii", FilterSpec.zero_sum(1.25), 3 - 2 * 1.25),
             ("ii", FilterSpec.power_law(1.5), 1.0)]
    for case, f, expo in cases:
        J = 2 * n
        C = prop1_constant(case, f.beta, f)
        ratio = sum_d_squared(f, n, J) / n**expo / C
        out.append(TestReport(f"prop1_case_{case}", abs(ratio - 1.0), th.prop1_tol, "max",
                              {"n": n, "J": J},
                              detail={"ratio": ratio, "constant": C, "beta": f.beta}))
    # two oracles for the case (i) constant: quadrature against the beta-function form
    # and against the coefficient sum at n = 2^16
    beta = 0.75
    quad = prop1_constant("i", beta)
    closed = math.gamma(1 - beta) * math.gamma(2 * beta - 1) / math.gamma(beta) / \
        ((1 - beta) * (3 - 2 * beta))
    m = 2**16
    direct = sum_d_squared(FilterSpec.power_law(beta), m, 2 * m) / m ** (3 - 2 * beta)
    spread = max(abs(quad - closed), abs(quad - direct)) / quad
    out.append(TestReport("prop1_oracles_agree", spread, th.oracle_tol, "max", {"n": m},
                          detail={"quadrature": quad, "closed_form": closed,
                                  "direct_sum": direct}))
    v1, v2 = prop1_integrals("iii", 1.25)
    out.append(TestReport("prop1_case_iii_v2_closed_form", abs(v2 - 32.0) / 32.0, 1e-8, "max",
                          detail={"v2": v2, "v1": v1}))
    return _tag(out, fast)


# -- criterion 4: Gaussian regime at desk scale ----------------------------------

def _t1_plan(case, n, replicates, seed, t_grid=(0.25, 0.5, 1.0),
             normalization=Normalization.EXACT_STDDEV):
    return default_plan(case.alpha, case.gamma, case.filter, n, t_grid, replicates, seed,
                        normalization)


def check_t1_case(case, fast=False, seed=SEED, thresholds=THRESHOLDS, workers=1):
    th = _th(fast, thresholds)
    R = 500 if fast else 2000
    plan = _t1_plan(case, 2**12, R, seed)
    ens = simulate(plan, workers=workers)
    z = ens.at(1.0)
    var = float(np.var(z, ddof=1))
    sizes = {"n": plan.n, "replicates": R, "J": plan.truncation_J}
    out = [
        TestReport(f"t1{case.label}_var_z1", var, th.var_band, "range", sizes, seed,
                   {"H": case.H}),
        ks_normal(z, name=f"t1{case.label}_ks_normal", seed=seed, thresholds=th),
        covariance_match(ens, case.H, pairs=[(0.25, 1.0), (0.5, 1.0)], thresholds=th,
                         name=f"t1{case.label}_covariance"),
    ]
    return _tag(out, fast)


def check_t1(fast=False, seed=SEED, thresholds=THRESHOLDS, workers=1):
    out = []
    for case in T1_CASES:
        out += check_t1_case(case, fast, seed, thresholds, workers)
    return out


# -- criterion 5: Hurst scaling ---------------------------------------------------

HURST_NS = tuple(2**k for k in range(9, 15))


def check_hurst(fast=False, seed=SEED, thresholds=THRESHOLDS, workers=1):
    th = _th(fast, thresholds)
    R = 250 if fast else 1000
    out = []
    for case in T1_CASES:
        emp, exact = [], []
        for n in HURST_NS:
            plan = _t1_plan(case, n, R, seed, t_grid=(1.0,), normalization=Normalization.RAW)
            z = simulate(plan, workers=workers).at(1.0)
            emp.append((n, float(np.std(z, ddof=1))))
            exact.append((n, math.sqrt(variance_exact(plan))))
        fit = scaling_regression(emp)
        fit_exact = scaling_regression(exact)
        out.append(TestReport(f"hurst_empirical_{case.label}", abs(fit.exponent_hat - case.H),
                              th.hurst_tol, "max", {"replicates": R, "n": list(HURST_NS)}, seed,
                              {"H": case.H, "fit": fit.to_dict()}))
        out.append(TestReport(f"hurst_exact_variance_{case.label}",
                              abs(fit_exact.exponent_hat - case.H), th.hurst_exact_tol, "max",
                              {"n": list(HURST_NS)}, None,
                              {"H": case.H, "fit": fit_exact.to_dict()}))
    return _tag(out, fast)


# -- criterion 6: Lyapunov ratio ---------------------------------------------------

LYAPUNOV_NS = tuple(2**k for k in range(8, 17))


def lyapunov_series(case, ns=LYAPUNOV_NS):
    """``[(n, coefficient factor, moment factor)]`` along ``ns``."""
    rows = []
    for n in ns:
        plan = _t1_plan(case, n, 1, 0, t_grid=(1.0,))
        coef, mom = lyapunov_parts(plan)
        rows.append((n, coef, mom))
    return rows


def check_lyapunov(fast=False, seed=SEED, thresholds=THRESHOLDS, workers=1):
    th = thresholds
    out = []
    for case in (T1_CASES[0], T1_CASES[2]):
        rows = lyapunov_series(case)
        fit = scaling_regression([(n, c * m) for n, c, m in rows])
        coef_fit = scaling_regression([(n, c) for n, c, _ in rows])
        if case.label == "i":
            target = -0.5 + case.gamma * case.alpha / 2
        else:
            target = -1.5 + case.beta + case.gamma * case.alpha / 2
        out.append(TestReport(f"lyapunov_slope_{case.label}", abs(fit.exponent_hat - target),
                              th.lyapunov_tol, "max", {"n": list(LYAPUNOV_NS)}, None,
                              {"target": target, "fit": fit.to_dict(),
                               "coefficient_slope": coef_fit.exponent_hat}))
    return out


# -- criterion 7: stable regime at desk scale ------------------------------------

T2_GRID = (0.125, 0.25, 0.5, 1.0)


def check_t2_case(case, fast=False, seed=SEED, thresholds=THRESHOLDS, workers=1):
    th = _th(fast, thresholds)
    R = 500 if fast else 2000
    plan = default_plan(case.alpha, case.gamma, case.filter, 2**12, T2_GRID, R, seed,
                        Normalization.THEORETICAL_POWER)
    ens = simulate(plan, workers=workers)
    z = ens.at(1.0)
    sizes = {"n": plan.n, "replicates": R, "J": plan.truncation_J}
    k = int(round(R ** th.hill_k_exponent))
    hill = hill_tail_index(z, k)
    qs = quantile_scaling(ens)
    skew = skew_convention_check(z, case.alpha)
    out = [
        TestReport(f"t2{case.label}_hill", abs(hill - case.alpha), th.hill_tol, "max", sizes,
                   seed, {"alpha_hat": hill, "k": k}),
        TestReport(f"t2{case.label}_quantile_scaling", abs(qs.exponent_hat - case.H),
                   th.quantile_tol, "max", sizes, seed, {"H": case.H, "fit": qs.to_dict()}),
        ks_normal(z, standardize=True, name=f"t2{case.label}_ks_normal_negative_control",
                  seed=seed, thresholds=th, negative_control=True),
        TestReport(f"t2{case.label}_skew_convention", 0.0, 0.0, "info", sizes, seed, skew),
    ]
    return _tag(out, fast)


def check_t2(fast=False, seed=SEED, thresholds=THRESHOLDS, workers=1):
    out = []
    for case in T2_CASES:
        out += check_t2_case(case, fast, seed, thresholds, workers)
    return out


# -- criterion 8: coupling ---------------------------------------------------------

COUPLING_BS = (10.0, 1e2, 1e3, 1e4)


def check_coupling(fast=False, seed=SEED, thresholds=THRESHOLDS, workers=1):
    th = _th(fast, thresholds)
    alpha, kappa = 1.5, 1.0
    draws = 200_000 if fast else 2_000_000
    mc = innovation_gap_moments(alpha, COUPLING_BS, kappa, draws, seed)
    fit = scaling_regression(mc)
    oracle = [(b, coupling_gap_moment(TaperedParetoParams(alpha, b), kappa)) for b in COUPLING_BS]
    target = -(alpha - kappa)
    out = [TestReport("coupling_innovation_slope", abs(fit.exponent_hat - target),
                      th.coupling_slope_tol, "max", {"draws_per_b": draws}, seed,
                      {"target": target, "fit": fit.to_dict(), "quadrature": oracle,
                       "oracle_slope": scaling_regression(oracle).exponent_hat})]
    case = T2_CASES[0]
    kappa2 = (1.0 / case.beta + case.alpha) / 2
    R = 100_000 if fast else 1_000_000
    plans = [default_plan(case.alpha, case.gamma, case.filter, 2**k, (1.0,), R, seed,
                          Normalization.THEORETICAL_POWER) for k in range(10, 15)]
    moments = coupling_moments(plans, kappa2)
    dfit = scaling_regression(moments)
    out.append(TestReport("coupling_decay_t2i", dfit.exponent_hat, 0.0, "max",
                          {"replicates": R, "n": [p.n for p in plans]}, seed,
                          {"kappa": kappa2, "fit": dfit.to_dict()}))
    return _tag(out, fast)


# -- criterion 9: limit processes --------------------------------------------------

def check_limits(fast=False, seed=SEED, thresholds=THRESHOLDS, workers=1):
    th = thresholds
    out = []
    N = 2_000 if fast else 10_000
    strict = replace(th, cov_allowance=0.0)
    for i, H in enumerate((0.3, 0.5, 0.8)):
        paths = sample_fbm(FbmSpec.uniform(H, 16), stream(seed, i), N)
        r = covariance_match(paths, H, thresholds=strict, name=f"fbm_covariance_H{H:g}")
        r.seed = seed
        r.sample_sizes = {"paths": N, "grid": 16}
        out.append(r)
    M = 20_000 if fast else 100_000
    cf_tol = th.cf_tol * (FAST_WIDEN if fast else 1.0)
    for i, a in enumerate((0.8, 1.5)):
        spec = StableSpec.right_skewed(a)
        x = sample_stable(spec, stream(seed, 10 + i), M)
        d = cf_distance(x, spec, (0.5, 1.0, 2.0))
        other = cf_distance(x, StableSpec.negated_tangent(a), (0.5, 1.0, 2.0))
        out.append(TestReport(f"stable_cf_alpha{a:g}", d, cf_tol, "max", {"N": M}, seed,
                              {"D": spec.D, "distance_to_negated_tangent": other}))
    steps = 64
    spec = LfsmSpec(1.5, 1.0, StableSpec.right_skewed(1.5).D, h=1.0 / steps)
    grid = np.arange(1, steps + 1) / steps
    lf = sample_lfsm(spec, grid, stream(seed, 20), 200)
    lv = sample_stable_levy(spec.stable, steps, stream(seed, 20), 200)
    diff = float(np.max(np.abs(lf.values - lv.values)))
    out.append(TestReport("lfsm_beta1_equals_levy", diff, 0.0, "max", {"paths": 200}, seed))
    return _tag(out, fast)


# -- criterion 10: classifier --------------------------------------------------------

def regime_grid(n_alpha=20, n_beta=25, n_gamma=20):
    alphas = np.linspace(0.05, 1.95, n_alpha)
    betas = np.linspace(0.55, 2.95, n_beta)
    gammas = np.linspace(0.0, 3.0, n_gamma)
    return [(float(a), float(b), float(g), z) for a in alphas for b in betas for g in gammas
            for z in (False, True)]


def theorem_predicates(a, b, g, z):
    """Hypotheses of each theorem case, written out independently of :mod:`regimes`."""
    t2 = a != 1 and a * b > 1
    return {
        "T1i": (not z) and 0.5 < b < 1 and g < min(1 / a, (2 * b - 1) / (2 - a)),
        "T1ii": (not z) and b > 1 and g < min(1 / a, 1 / (2 - a)),
        "T1iii": z and 1 < b < 1.5 and g < min((2 * b - 1) / (2 - a), (3 - 2 * b) / a),
        "T2i": t2 and (not z) and 1 / a < b < 1 and g > 1 / a,
        "T2ii": t2 and (not z) and b > 1 and g > 1 / a,
        "T2iii": t2 and z and max(1, 1 / a) < b < 1 + 1 / a and
        g > 1 / a + (b - 1) / (a * b - 1),
    }


def check_regimes(fast=False, seed=SEED, thresholds=THRESHOLDS, workers=1):
    grid = regime_grid()
    overlap, mismatch, h_out, gap_bad = [], [], [], []
    for a, b, g, z in grid:
        preds = theorem_predicates(a, b, g, z)
        hits = [k for k, v in preds.items() if v]
        if len(hits) > 1:
            overlap.append((a, b, g, z, hits))
        v = classify(RegimeParams(a, b, g, z))
        want = hits[0] if hits else None
        got = v.theorem.value if v.theorem.value.startswith("T") else None
        if want != got:
            mismatch.append((a, b, g, z, want, got))
        if v.H is not None and not 0 < v.H < 1:
            h_out.append((a, b, g, z, v.theorem.value, v.H))
        if z and 2 / 3 < a < 2 and max(1.0, 1 / a) < b < min(1.5, 1 + 1 / a):
            c1, c2 = gap_constants(a, b)
            if not c1 < c2:
                gap_bad.append((a, b))
    size = {"points": len(grid)}
    return [
        TestReport("regimes_exclusive", float(len(overlap)), 0.0, "max", size,
                   detail={"examples": overlap[:5]}),
        TestReport("regimes_match_predicates", float(len(mismatch)), 0.0, "max", size,
                   detail={"examples": mismatch[:5]}),
        TestReport("regimes_H_in_unit_interval", float(len(h_out)), 0.0, "max", size,
                   detail={"count_by_theorem": _count(h_out, 4), "examples": h_out[:5]}),
        TestReport("regimes_gap_ordered", float(len(gap_bad)), 0.0, "max", size,
                   detail={"examples": gap_bad[:5]}),
    ]


def _count(rows, col):
    out = {}
    for r in rows:
        out[r[col]] = out.get(r[col], 0) + 1
    return out


# -- suites -------------------------------------------------------------------------

CRITERIA = {
    1: check_moments,
    2: check_sampler,
    3: check_prop1,
    4: check_t1,
    5: check_hurst,
    6: check_lyapunov,
    7: check_t2,
    8: check_coupling,
    9: check_limits,
    10: check_regimes,
}

SUITES = {
    "moments": (check_moments, check_sampler),
    "prop1": (check_prop1,),
    "t1": (check_t1, check_hurst, check_lyapunov),
    "t2": (check_t2,),
    "coupling": (check_coupling,),
    "limits": (check_limits,),
    "regimes": (check_regimes,),
}


def run_suite(name, fast=False, seed=SEED, thresholds=THRESHOLDS, workers=1):
    if name not in SUITES:
        raise DomainError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    t0 = time.perf_counter()
    reports = []
    for fn in SUITES[name]:
        reports += fn(fast=fast, seed=seed, thresholds=thresholds, workers=workers)
    th = _th(fast, thresholds)
    return SuiteResult(name, reports, fast, seed, time.perf_counter() - t0, th.to_dict())
