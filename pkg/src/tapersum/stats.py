"""Turning ensembles into pass/fail evidence.

Every tolerance used by the checks below lives in :class:`Thresholds`; each
:class:`TestReport` echoes the threshold it was judged against.
"""

import math
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np
from scipy import stats as sps

from .distributions import TaperedParetoParams, coupled_from_uniforms, pareto_centering, tp_mean
from .engine import Normalization, PathEnsemble, coupling_gap, simulate_coupled
from .errors import ContractError, DomainError, InsufficientSampleError
from .limit_processes import LimitPaths, StableSpec, fbm_covariance, stable_cf
from .rng import open_uniform, stream


@dataclass(frozen=True)
class Thresholds:
    ks_level: float = 0.01
    ks_min_sample: int = 100
    cov_n_se: float = 3.0
    cov_allowance: float = 0.05
    var_band: tuple = (0.9, 1.1)
    hurst_tol: float = 0.05
    hurst_exact_tol: float = 0.03
    hill_tol: float = 0.15
    hill_k_exponent: float = 2.0 / 3.0
    quantile_tol: float = 0.07
    cf_tol: float = 0.02
    coupling_slope_tol: float = 0.1
    lyapunov_tol: float = 0.05
    prop1_tol: float = 0.03
    oracle_tol: float = 0.02
    mass_tol: float = 1e-12
    quad_tol: float = 1e-8
    asymptotic_tol: float = 0.05
    mc_n_se: float = 3.0

    def to_dict(self):
        out = asdict(self)
        out["var_band"] = list(self.var_band)
        return out

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise DomainError(f"unknown threshold keys: {sorted(unknown)}")
        data = dict(data)
        if "var_band" in data:
            data["var_band"] = tuple(data["var_band"])
        return cls(**data)

    def widened(self, factor):
        """Copy with Monte Carlo tolerances scaled by ``factor`` (fast mode)."""
        keys = ("cov_allowance", "hurst_tol", "hill_tol", "quantile_tol", "cf_tol",
                "coupling_slope_tol")
        lo, hi = self.var_band
        band = (1 - (1 - lo) * factor, 1 + (hi - 1) * factor)
        return replace(self, var_band=band, **{k: getattr(self, k) * factor for k in keys})


THRESHOLDS = Thresholds()


@dataclass(frozen=True)
class ScalingFit:
    exponent_hat: float
    stderr: float
    r_squared: float
    intercept: float
    points: tuple

    def __post_init__(self):
        if len(self.points) < 4:
            raise InsufficientSampleError("a scaling fit needs at least 4 points")

    def to_dict(self):
        return {"exponent_hat": self.exponent_hat, "stderr": self.stderr,
                "r_squared": self.r_squared, "intercept": self.intercept,
                "points": [list(p) for p in self.points]}


@dataclass
class TestReport:
    """One check. ``kind`` says how ``value`` is judged against ``threshold``.

    ``"max"``: value <= threshold; ``"min"``: value >= threshold;
    ``"range"``: threshold[0] <= value <= threshold[1];
    ``"fail_expected"``: a negative control, passing when the underlying
    test (value <= threshold) fails; ``"info"``: recorded, never gating.
    """

    __test__ = False  # keep pytest from collecting this class

    name: str
    value: float
    threshold: object
    kind: str = "max"
    sample_sizes: dict = field(default_factory=dict)
    seed: int | None = None
    detail: dict = field(default_factory=dict)
    passed: bool = field(init=False)

    def __post_init__(self):
        v, th = self.value, self.threshold
        if self.kind == "max":
            ok = v <= th
        elif self.kind == "min":
            ok = v >= th
        elif self.kind == "range":
            ok = th[0] <= v <= th[1]
        elif self.kind == "fail_expected":
            ok = v > th
        elif self.kind == "info":
            ok = True
        else:
            raise DomainError(f"unknown report kind {self.kind!r}")
        self.passed = bool(ok) and not (isinstance(v, float) and math.isnan(v))

    def to_dict(self):
        th = list(self.threshold) if isinstance(self.threshold, tuple) else self.threshold
        return {"name": self.name, "value": _jsonable(self.value), "threshold": th,
                "kind": self.kind, "passed": self.passed, "sample_sizes": self.sample_sizes,
                "seed": self.seed, "detail": _jsonable(self.detail)}


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


# -- regression ---------------------------------------------------------------

def scaling_regression(points):
    """Least-squares slope of ``log statistic`` on ``log n``."""
    pts = [(float(n), float(s)) for n, s in points]
    if any(s <= 0 or not math.isfinite(s) for _, s in pts):
        raise DomainError("scaling regression needs positive finite statistics")
    if any(n <= 0 for n, _ in pts):
        raise DomainError("scaling regression needs positive abscissae")
    if len({n for n, _ in pts}) < 4:
        raise InsufficientSampleError("scaling regression needs at least 4 distinct n")
    x = np.log([n for n, _ in pts])
    y = np.log([s for _, s in pts])
    res = sps.linregress(x, y)
    return ScalingFit(float(res.slope), float(res.stderr), float(res.rvalue**2),
                      float(res.intercept), tuple(zip(x.tolist(), y.tolist())))


# -- Kolmogorov-Smirnov -------------------------------------------------------

def ks_critical(n, level=0.01):
    """Two-sided critical value with the finite-sample factor ``sqrt(N) + 0.12 + 0.11/sqrt(N)``."""
    c = math.sqrt(-0.5 * math.log(level / 2))
    rn = math.sqrt(n)
    return c / (rn + 0.12 + 0.11 / rn)


# 1% point of the modified statistic D (sqrt(N) - 0.01 + 0.85/sqrt(N)) when the
# normal mean and variance are estimated from the sample
_LILLIEFORS_1PCT = 1.035


def ks_test(sample, cdf, name="ks", level=None, seed=None, thresholds=THRESHOLDS):
    x = np.asarray(sample, dtype=np.float64).ravel()
    if x.size < thresholds.ks_min_sample:
        raise InsufficientSampleError(
            f"KS test needs at least {thresholds.ks_min_sample} values, got {x.size}")
    level = thresholds.ks_level if level is None else level
    d = float(sps.kstest(x, cdf).statistic)
    crit = ks_critical(x.size, level)
    return TestReport(name, d, crit, "max", {"N": int(x.size)}, seed, {"level": level})


def ks_normal(sample, standardize=False, name="ks_normal", seed=None, thresholds=THRESHOLDS,
              negative_control=False):
    """KS distance to the standard normal.

    With ``standardize`` the sample is centred and scaled by its own moments
    and judged against the estimated-parameter critical value.
    """
    x = np.asarray(sample, dtype=np.float64).ravel()
    if x.size < thresholds.ks_min_sample:
        raise InsufficientSampleError(
            f"KS test needs at least {thresholds.ks_min_sample} values, got {x.size}")
    if standardize:
        x = (x - x.mean()) / x.std(ddof=1)
    d = float(sps.kstest(x, sps.norm.cdf).statistic)
    rn = math.sqrt(x.size)
    if standardize:
        if thresholds.ks_level != 0.01:
            raise DomainError("estimated-parameter critical value is tabulated at 1% only")
        crit = _LILLIEFORS_1PCT / (rn - 0.01 + 0.85 / rn)
    else:
        crit = ks_critical(x.size, thresholds.ks_level)
    kind = "fail_expected" if negative_control else "max"
    return TestReport(name, d, crit, kind, {"N": int(x.size)}, seed,
                      {"level": thresholds.ks_level, "standardized": bool(standardize)})


# -- tails ----------------------------------------------------------------------

def default_hill_k(n, thresholds=THRESHOLDS):
    return int(round(n ** thresholds.hill_k_exponent))


def hill_tail_index(sample, k=None):
    """Hill estimate of the tail index from the ``k`` largest positive values."""
    x = np.asarray(sample, dtype=np.float64).ravel()
    n = x.size
    if k is None:
        k = default_hill_k(n)
    if not 10 <= k <= n / 10:
        raise DomainError(f"k = {k} must satisfy 10 <= k <= N/10 = {n / 10:g}")
    pos = x[x > 0]
    if pos.size < k + 1:
        raise DomainError(f"only {pos.size} positive values for k = {k}")
    top = -np.partition(-pos, k)[: k + 1]
    top.sort()
    top = top[::-1]
    gamma = float(np.mean(np.log(top[:k])) - math.log(top[k]))
    return 1.0 / gamma


# -- characteristic functions ---------------------------------------------------

def empirical_cf(sample, u):
    x = np.asarray(sample, dtype=np.float64).ravel()
    u = np.atleast_1d(np.asarray(u, dtype=np.float64))
    return np.array([np.mean(np.exp(1j * v * x)) for v in u])


def calibrated_time(sample, alpha, u0=1.0):
    """Time scale ``t`` matching ``|CF|`` of ``exp(-t|u0|^alpha)`` to the sample."""
    m = abs(empirical_cf(sample, u0)[0])
    if not 0 < m < 1:
        raise DomainError(f"|empirical CF| = {m} at u = {u0} cannot calibrate a scale")
    return -math.log(m) / abs(u0) ** alpha


def cf_distance(sample, spec, u_grid, calibrate_u=None):
    """``max_u |empirical CF - stable_cf|``, optionally refitting the time scale at ``calibrate_u``."""
    u = np.atleast_1d(np.asarray(u_grid, dtype=np.float64))
    if u.size == 0:
        raise DomainError("u_grid must not be empty")
    if calibrate_u is not None:
        spec = spec.at(calibrated_time(sample, spec.alpha, calibrate_u))
    return float(np.max(np.abs(empirical_cf(sample, u) - stable_cf(spec, u))))


def skew_convention_check(sample, alpha, u_grid=(0.5, 1.0, 2.0), calibrate_u=1.0):
    """CF distances to the two totally skewed conventions and the better match."""
    dist = {
        "tan": cf_distance(sample, StableSpec.right_skewed(alpha), u_grid, calibrate_u),
        "minus_tan": cf_distance(sample, StableSpec.negated_tangent(alpha), u_grid, calibrate_u),
    }
    dist["match"] = min(("tan", "minus_tan"), key=lambda k: dist[k])
    return dist


# -- covariance -------------------------------------------------------------------

def _check_normalized(ensemble):
    if isinstance(ensemble, PathEnsemble):
        if ensemble.plan.normalization is not Normalization.EXACT_STDDEV:
            raise ContractError("covariance_match needs an exact_stddev-normalized ensemble")
        return ensemble.values, np.asarray(ensemble.plan.t_grid), ensemble.plan.seed
    if isinstance(ensemble, LimitPaths) and ensemble.meta.get("process") == "fbm":
        return ensemble.values, np.asarray(ensemble.t_grid), None
    raise ContractError("covariance_match needs a normalized ensemble or fBm paths")


def covariance_match(ensemble, H, pairs=None, thresholds=THRESHOLDS, name="covariance_match"):
    """Empirical covariances against the fBm formula on pairs of grid times.

    Each pair passes when ``|cov_hat - cov| <= n_se * SE + allowance``; the
    reported value is the largest ``|cov_hat - cov| - n_se * SE``.
    """
    vals, grid, seed = _check_normalized(ensemble)
    if pairs is None:
        pairs = [(s, t) for i, s in enumerate(grid) for t in grid[i:]]
    idx = {round(float(t), 12): i for i, t in enumerate(grid)}
    N = vals.shape[0]
    xc = vals - vals.mean(axis=0)
    worst = -math.inf
    detail = {}
    for s, t in pairs:
        try:
            a, b = idx[round(float(s), 12)], idx[round(float(t), 12)]
        except KeyError:
            raise DomainError(f"pair ({s}, {t}) not on the ensemble grid") from None
        prod = xc[:, a] * xc[:, b]
        c_hat = float(prod.sum() / (N - 1))
        se = float(prod.std(ddof=1) / math.sqrt(N))
        target = float(fbm_covariance(s, t, H))
        excess = abs(c_hat - target) - thresholds.cov_n_se * se
        worst = max(worst, excess)
        detail[f"({s:g},{t:g})"] = {"cov_hat": c_hat, "target": target, "se": se}
    return TestReport(name, worst, thresholds.cov_allowance, "max", {"N": N}, seed,
                      {"H": H, "pairs": detail, "n_se": thresholds.cov_n_se})


# -- scaling in t -------------------------------------------------------------------

def iqr(x):
    q1, q3 = np.percentile(x, [25, 75])
    return float(q3 - q1)


def quantile_scaling(ensemble):
    """Slope of ``log IQR(Z(t))`` on ``log t``; a self-similarity exponent estimate."""
    vals = ensemble.values
    grid = np.asarray(ensemble.t_grid)
    return scaling_regression([(t, iqr(vals[:, i])) for i, t in enumerate(grid)])


# -- coupling ---------------------------------------------------------------------

def check_kappa(kappa, alpha, beta=None):
    lo = 1.0 / beta if beta is not None else 0.0
    if not lo < kappa < alpha:
        raise DomainError(f"kappa = {kappa} must lie in ({lo:g}, {alpha:g})")


def coupling_moments(plans, kappa, t=1.0, method="exceedance", workers=1):
    """``(n, mean |V_n(t) - S_n(t)|^kappa / A_n^kappa)`` for each plan.

    ``method="exceedance"`` draws the gap exactly from the taper exceedances
    (:func:`tapersum.engine.coupling_gap`); ``"paths"`` simulates both
    ensembles in full.
    """
    out = []
    for plan in plans:
        col = plan.t_grid.index(float(t))
        if method == "exceedance":
            gap = np.abs(coupling_gap(plan)[:, col])
        elif method == "paths":
            v, s = simulate_coupled(plan, workers=workers)
            gap = np.abs(v.values[:, col] - s.values[:, col])
        else:
            raise DomainError(f"unknown method {method!r}")
        out.append((plan.n, float(np.mean(gap**kappa))))
    return out


def coupling_decay(plans, kappa, t=1.0, method="exceedance", workers=1):
    """Regression of the normalized coupling moment on ``n``; slope below 0 means decay."""
    f = plans[0].filter
    check_kappa(kappa, plans[0].alpha, f.beta)
    return scaling_regression(coupling_moments(plans, kappa, t, method, workers))


def innovation_gap_moments(alpha, b_values, kappa, draws, seed, method="stratified",
                           chunk=1 << 22):
    """Monte Carlo ``E|eta - xi|^kappa`` for each taper level.

    ``"plain"`` averages over ``draws`` coupled pairs. ``"stratified"`` uses
    that the gap is the constant ``c`` unless ``theta >= b`` (probability
    ``b^-alpha``) and averages ``draws`` pairs drawn given the exceedance.
    """
    out = []
    for i, b in enumerate(b_values):
        p = TaperedParetoParams(alpha, b)
        mu = tp_mean(p)
        rng = stream(seed, i)
        n = int(draws)
        if method == "plain":
            acc = math.fsum(
                float(np.sum(np.abs(c.eta - c.xi) ** kappa))
                for c in (coupled_from_uniforms(p, open_uniform(rng, m), open_uniform(rng, m), mu)
                          for m in _chunks(n, chunk)))
            out.append((float(b), acc / n))
        elif method == "stratified":
            c = mu - pareto_centering(alpha)
            acc = 0.0
            for m in _chunks(n, chunk):
                x = open_uniform(rng, m) ** (-1.0 / alpha)
                r = -np.log(open_uniform(rng, m))
                acc += math.fsum(np.abs(c + b * (x - 1.0) - r) ** kappa)
            q = b ** -alpha
            out.append((float(b), (1 - q) * abs(c) ** kappa + q * acc / n))
        else:
            raise DomainError(f"unknown method {method!r}")
    return out


def _chunks(n, chunk):
    while n > 0:
        m = min(n, chunk)
        yield m
        n -= m
