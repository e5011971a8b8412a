"""Finite-n quantities and Monte Carlo for the partial-sum process.

The partial sum ``S_n(t) = sum_{k<=[nt]} X_k`` is written as a weighted sum of
innovations, ``S_n(t) = sum_{j<=[nt]} d_{n,j,t} xi_j``, with
``d_{n,j,t} = sum_{k=max(1,j)}^{[nt]} a_{k-j}``. Innovations before ``-J+1``
are dropped; ``J`` is the past horizon stored in the plan.

Innovation arrays are laid out oldest first: column ``i`` holds ``xi_{i-J+1}``.
"""

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
from scipy import integrate

from . import io, kernels
from ._accel import BACKEND
from .distributions import (
    TaperedParetoParams,
    centered_innovation_variance,
    coupled_from_uniforms,
    pareto_centering,
    tp_central_abs_moment,
    tp_mean,
)
from .errors import ContractError, DivergenceError, DomainError, ParameterError, UnsupportedError
from .filters import FilterKind, FilterSpec, coefficients, filter_sum
from .regimes import RegimeParams, classify
from .rng import open_uniform, stream

# direct summation below this width, power-of-two FFT above
FFT_THRESHOLD = 4096
# floats per replicate block held in memory at once
BLOCK_FLOATS = 1 << 22


class Normalization(str, Enum):
    EXACT_STDDEV = "exact_stddev"
    THEORETICAL_POWER = "theoretical_power"
    RAW = "raw"


def grid_index(n, t):
    """``[nt]`` with a guard against ``n*t`` landing just below an integer."""
    return int(math.floor(round(n * t, 9)))


@dataclass(frozen=True)
class SimulationPlan:
    alpha: float
    gamma: float
    filter: FilterSpec
    n: int
    t_grid: tuple
    replicates: int
    truncation_J: int
    seed: int = 0
    normalization: Normalization = Normalization.EXACT_STDDEV

    def __post_init__(self):
        object.__setattr__(self, "normalization", Normalization(self.normalization))
        object.__setattr__(self, "t_grid", tuple(float(t) for t in self.t_grid))
        if int(self.n) != self.n or self.n < 1:
            raise ParameterError(f"n must be a positive integer, got {self.n}")
        if int(self.replicates) != self.replicates or self.replicates < 1:
            raise ParameterError(f"replicates must be a positive integer, got {self.replicates}")
        if int(self.truncation_J) != self.truncation_J or self.truncation_J < 1:
            raise ParameterError(f"truncation_J must be a positive integer, got {self.truncation_J}")
        if not self.t_grid:
            raise ParameterError("t_grid must not be empty")
        g = np.asarray(self.t_grid)
        if g[0] <= 0 or g[-1] > 1 or np.any(np.diff(g) <= 0):
            raise ParameterError("t_grid must be strictly increasing inside (0, 1]")
        if not self.b > 1:
            raise ParameterError(f"taper level n^gamma = {self.b} must exceed 1")

    @property
    def b(self):
        return float(self.n) ** self.gamma

    @property
    def params(self):
        return TaperedParetoParams(self.alpha, self.b)

    @property
    def width(self):
        """Number of innovations per replicate, ``J + n``."""
        return self.truncation_J + self.n

    def regime(self):
        f = self.filter
        if f.kind is FilterKind.EXPLICIT:
            raise ContractError("explicit filters carry no decay exponent to classify")
        return RegimeParams(self.alpha, f.beta, self.gamma, zero_sum=f.is_zero_sum)

    def to_dict(self):
        return {
            "alpha": self.alpha,
            "gamma": self.gamma,
            "b": self.b,
            "filter": self.filter.to_dict(),
            "n": self.n,
            "t_grid": list(self.t_grid),
            "replicates": self.replicates,
            "truncation_J": self.truncation_J,
            "seed": self.seed,
            "normalization": self.normalization.value,
        }

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        b = data.pop("b", None)
        data["filter"] = FilterSpec.from_dict(data["filter"])
        plan = cls(**data)
        if b is not None and not math.isclose(b, plan.b, rel_tol=1e-12, abs_tol=0):
            raise ParameterError(f"stored b = {b} does not match n^gamma = {plan.b}")
        return plan


@dataclass
class PathEnsemble:
    values: np.ndarray
    plan: SimulationPlan
    normalization_used: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (self.plan.replicates, len(self.plan.t_grid)):
            raise ContractError(f"values shape {self.values.shape} does not match plan")
        if not np.all(np.isfinite(self.values)):
            raise ContractError("ensemble contains non-finite entries")

    @property
    def t_grid(self):
        return np.asarray(self.plan.t_grid)

    def at(self, t):
        """Column of the ensemble for grid time ``t``."""
        idx = int(np.argmin(np.abs(self.t_grid - t)))
        if not math.isclose(self.t_grid[idx], t, rel_tol=0, abs_tol=1e-12):
            raise DomainError(f"t = {t} is not on the ensemble grid")
        return self.values[:, idx]

    def to_csv(self, path):
        io.write_csv(path, self.values, self.plan.t_grid)

    def to_document(self):
        meta = dict(self.meta, normalization_used=self.normalization_used)
        return io.ensemble_document(self.values, self.plan.t_grid, meta, self.plan.to_dict())

    def to_json(self, path):
        io.write_json(path, self.to_document())


@dataclass(frozen=True)
class DCoefficients:
    n: int
    t: float
    J: int
    values: np.ndarray

    @property
    def index(self):
        """Innovation indices ``j = -J+1, ..., n`` matching ``values``."""
        return np.arange(-self.J + 1, self.n + 1)

    def __getitem__(self, j):
        if j < -self.J + 1 or j > self.n:
            return 0.0
        return float(self.values[j + self.J - 1])


def _prefix(f, width):
    a = coefficients(f, width)
    return a, np.concatenate(([0.0], np.cumsum(a)))


def _d_from_prefix(P, n, m, J):
    out = np.zeros(J + n)
    i = np.arange(J - 1, -1, -1)  # past index j = -i, oldest first
    out[:J] = P[m + i + 1] - P[i + 1]
    j = np.arange(1, m + 1)
    out[J:J + m] = P[m - j + 1]
    return out


def d_coefficients(f, n, t, J):
    if n < 1 or J < 1:
        raise DomainError("n and J must be positive")
    if not 0 < t <= 1:
        raise DomainError(f"t must lie in (0, 1], got {t}")
    _, P = _prefix(f, n + J)
    return DCoefficients(n=n, t=t, J=J, values=_d_from_prefix(P, n, grid_index(n, t), J))


def d_matrix(f, n, t_grid, J):
    """Rows of ``d_{n,j,t}`` for each grid time, shape ``(len(t_grid), J+n)``."""
    _, P = _prefix(f, n + J)
    return np.vstack([_d_from_prefix(P, n, grid_index(n, t), J) for t in t_grid])


def past_remainder(f, n, J):
    """``sum_{i>=J} d_{n,-i}^2``, the part of the infinite past dropped by truncation.

    Zero-sum filters telescope, ``d_{n,-i} = (i+1)^(1-beta) - (i+n+1)^(1-beta)``,
    and the sum is taken by Euler-Maclaurin on that closed form. Power laws use
    the midpoint approximation ``d_{n,-i} ~ c int_{i+1/2}^{i+n+1/2} x^-beta dx``.
    """
    if f.kind is FilterKind.EXPLICIT:
        return 0.0 if J >= len(f.coeffs) else math.nan
    e = 1.0 - f.beta
    if f.kind is FilterKind.ZERO_SUM:
        lo, hi = 1.0, n + 1.0
        scale = 1.0
    else:
        lo, hi = 0.5, n + 0.5
        scale = f.c_a / e

    def d(x):
        # (x+lo)^e - (x+hi)^e written to avoid cancellation
        return -scale * (x + lo) ** e * math.expm1(e * math.log1p((hi - lo) / (x + lo)))

    # x = J e^s turns the slow power decay into an exponential one
    s_max = min(600.0, 80.0 / (2.0 * f.beta - 1.0))
    body, _ = integrate.quad(lambda s: d(J * math.exp(s)) ** 2 * J * math.exp(s), 0.0,
                             s_max, epsabs=0, epsrel=1e-12, limit=400)
    return body + 0.5 * d(J) ** 2


def sum_d_squared(f, n, J, include_past=True):
    """``sum_j d_{n,j}^2`` over ``j >= -J+1``, plus the dropped past when requested."""
    d = d_coefficients(f, n, 1.0, J).values
    head = float(np.dot(d, d))
    return head + past_remainder(f, n, J) if include_past else head


def past_tail_bound(f, n, J, p=2.0):
    """Integral bound on ``sum_{i>=J} |d_{n,-i}|^p`` from ``|a_j| <= c j^-beta``."""
    if f.kind is FilterKind.EXPLICIT:
        return 0.0 if J >= len(f.coeffs) else math.inf
    e = f.beta * p
    if e <= 1:
        return math.inf
    c = abs(f.scale) * n
    return c**p * (J - 1) ** (1.0 - e) / (e - 1.0) if J > 1 else math.inf


def past_horizon(f, n, p=2.0, tol=1e-6, max_factor=32):
    """Past horizon for simulation.

    Smallest power of two ``J >= n`` whose discarded ``|d|^p`` mass is below
    ``tol`` of the retained mass, capped at ``max_factor * n``. Returns
    ``(J, tail_fraction_bound)``; the bound is reported, not enforced, when
    the cap binds.
    """
    if f.kind is FilterKind.EXPLICIT:
        J = 1 << max(len(f.coeffs) - 1, 1).bit_length()
        return J, 0.0
    if f.beta * p <= 1:
        raise DivergenceError(f"sum |a_j|^{p} diverges for beta = {f.beta}")
    cap = 1 << max(int(max_factor * n) - 1, 1).bit_length()
    J = 1 << max(n - 1, 1).bit_length()
    while True:
        d = d_coefficients(f, n, 1.0, J).values
        head = float(np.sum(np.abs(d) ** p))
        frac = past_tail_bound(f, n, J, p) / head
        if frac <= tol or J >= cap:
            return J, frac
        J <<= 1


def default_plan(alpha, gamma, filter, n, t_grid=(1.0,), replicates=1000, seed=0,
                 normalization=Normalization.EXACT_STDDEV, max_factor=32, tol=1e-6):
    """Plan whose past horizon comes from :func:`past_horizon`.

    The ``|d|^p`` norm is ``p = 2`` for hard tapering and ``p = alpha`` otherwise.
    """
    p = 2.0 if gamma < 1.0 / alpha else alpha
    J, _ = past_horizon(filter, n, p=p, tol=tol, max_factor=max_factor)
    return SimulationPlan(alpha=alpha, gamma=gamma, filter=filter, n=n, t_grid=tuple(t_grid),
                          replicates=replicates, truncation_J=J, seed=seed,
                          normalization=normalization)


# -- variance constants of the Gaussian regime ---------------------------------

_CASE_BETA = {"i": (0.5, 1.0), "ii": (1.0, math.inf), "iii": (1.0, 1.5)}


def _check_case(case, beta):
    if case not in _CASE_BETA:
        raise DomainError(f"case must be one of i, ii, iii, got {case!r}")
    lo, hi = _CASE_BETA[case]
    if not lo < beta < hi:
        raise DomainError(f"beta = {beta} outside ({lo}, {hi}) for case {case}")


def _inner_past(z, beta):
    # int_0^1 (u+z)^-beta du = ((1+z)^{1-beta} - z^{1-beta}) / (1-beta)
    e = 1.0 - beta
    if z == 0:
        return 1.0 / e
    if z > 1:
        return z**e * math.expm1(e * math.log1p(1.0 / z)) / e
    return ((1.0 + z) ** e - z**e) / e


def prop1_integrals(case, beta):
    """Unscaled ``(V1, V2)`` integrals for cases i and iii."""
    _check_case(case, beta)
    if case == "ii":
        raise DomainError("case ii has no integral constant; it is (sum a_j)^2")

    def g2(z):
        return _inner_past(z, beta) ** 2

    # z^{2(1-beta)} singularity at 0 in case iii: substitute z = w^2
    near, _ = integrate.quad(lambda w: 2 * w * g2(w * w), 0.0, 1.0, epsabs=0, epsrel=1e-12,
                             limit=400)
    far, _ = integrate.quad(g2, 1.0, math.inf, epsabs=0, epsrel=1e-12, limit=400)
    v1 = near + far
    if case == "i":
        inner = lambda z: (1.0 - z) ** (1.0 - beta) / (1.0 - beta)  # noqa: E731
    else:
        inner = lambda z: (1.0 - z) ** (1.0 - beta) / (beta - 1.0)  # noqa: E731
    # (1-z)^{2(1-beta)} singular at z = 1 in case iii: substitute 1 - z = w^2
    v2, _ = integrate.quad(lambda w: 2 * w * inner(1.0 - w * w) ** 2, 0.0, 1.0,
                           epsabs=0, epsrel=1e-12, limit=400)
    return v1, v2


def prop1_constant(case, beta, filter=None):
    """Limit of ``sum_j d_{n,j}^2 / n^{3-2beta}`` (cases i, iii) or ``/ n`` (case ii).

    ``filter`` fixes the scale ``c`` in ``a_j ~ c j^-beta``; without it the
    scale is 1 for case i and that of the zero-sum construction,
    ``beta - 1``, for case iii.
    """
    _check_case(case, beta)
    if case == "ii":
        f = filter if filter is not None else FilterSpec.power_law(beta)
        return filter_sum(f) ** 2
    if filter is not None:
        scale = filter.scale
    else:
        scale = 1.0 if case == "i" else beta - 1.0
    v1, v2 = prop1_integrals(case, beta)
    return scale * scale * (v1 + v2)


# -- exact finite-n quantities ------------------------------------------------

def variance_exact(plan, include_past=False):
    """``Var S_n(1)``; by default for the truncated process that :func:`simulate` draws."""
    return sum_d_squared(plan.filter, plan.n, plan.truncation_J, include_past) * \
        centered_innovation_variance(plan.params)


def lyapunov_parts(plan):
    """``(coefficient factor, moment factor)`` of the third-moment ratio."""
    d = d_coefficients(plan.filter, plan.n, 1.0, plan.truncation_J).values
    s2 = float(np.dot(d, d))
    coef = float(np.sum(np.abs(d) ** 3)) / s2**1.5
    p = plan.params
    mom = tp_central_abs_moment(p, 3.0) / centered_innovation_variance(p) ** 1.5
    return coef, mom


def lyapunov_ratio(plan):
    coef, mom = lyapunov_parts(plan)
    return coef * mom


def normalization_constant(plan):
    mode = plan.normalization
    if mode is Normalization.RAW:
        return 1.0
    if mode is Normalization.EXACT_STDDEV:
        return math.sqrt(variance_exact(plan))
    verdict = classify(plan.regime())
    if verdict.H is None:
        raise ContractError(f"no power normalization for verdict {verdict.theorem.value}")
    return float(plan.n) ** verdict.H


# -- simulation ---------------------------------------------------------------

def partial_sums(filter, n, J, t_grid, innovations, method="dcoef"):
    """Partial sums on the grid for rows of innovations (oldest first).

    ``method`` is ``"dcoef"`` (inner products with the d-coefficients) or
    ``"conv"`` (convolution then prefix sums); both give the same numbers up
    to rounding.
    """
    e = np.atleast_2d(np.asarray(innovations, dtype=np.float64))
    if e.shape[1] != J + n:
        raise ContractError(f"innovation rows must have length J + n = {J + n}")
    if method == "dcoef":
        return e @ d_matrix(filter, n, t_grid, J).T
    if method == "conv":
        a = coefficients(filter, J + n)
        if J + n >= FFT_THRESHOLD:
            X = kernels.fft_increments(a, e, n, J)
        else:
            X = kernels.direct_increments(a, e, n, J)
        csum = np.cumsum(X, axis=1)
        out = np.zeros((e.shape[0], len(t_grid)))
        for col, t in enumerate(t_grid):
            m = grid_index(n, t)
            if m > 0:
                out[:, col] = csum[:, m - 1]
        return out
    raise DomainError(f"unknown method {method!r}")


def tapered_innovations(plan, replicate, mean=None):
    """Centered tapered innovations for one replicate, oldest first."""
    p = plan.params
    mu = tp_mean(p) if mean is None else mean
    u = open_uniform(stream(plan.seed, replicate), plan.width)
    return kernels.tp_quantile_array(u, p.alpha, p.b) - mu


def coupled_innovations(plan, replicate, mean=None):
    """``(eta, xi)`` rows for one replicate from the shared Pareto/exponential draws."""
    rng = stream(plan.seed, replicate)
    u_theta = open_uniform(rng, plan.width)
    u_r = open_uniform(rng, plan.width)
    c = coupled_from_uniforms(plan.params, u_theta, u_r, mean=mean)
    return c.eta, c.xi


def _blocks(plan):
    rows = max(1, BLOCK_FLOATS // plan.width)
    return [(s, min(s + rows, plan.replicates)) for s in range(0, plan.replicates, rows)]


def _resolve_method(plan, method):
    if method == "auto":
        return "dcoef" if len(plan.t_grid) <= 64 else "conv"
    return method


def _run_blocks(plan, fill, workers):
    blocks = _blocks(plan)
    if workers <= 1 or len(blocks) == 1:
        for blk in blocks:
            fill(*blk)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(lambda blk: fill(*blk), blocks))


def simulate(plan, workers=1, method="auto"):
    """Replicates of ``S_n(t) / A_n`` on the plan's grid."""
    t0 = time.perf_counter()
    method = _resolve_method(plan, method)
    A = normalization_constant(plan)
    mu = tp_mean(plan.params)
    D = d_matrix(plan.filter, plan.n, plan.t_grid, plan.truncation_J) if method == "dcoef" else None
    out = np.empty((plan.replicates, len(plan.t_grid)))

    def fill(lo, hi):
        E = np.vstack([tapered_innovations(plan, r, mu) for r in range(lo, hi)])
        if D is not None:
            out[lo:hi] = E @ D.T
        else:
            out[lo:hi] = partial_sums(plan.filter, plan.n, plan.truncation_J, plan.t_grid, E,
                                      method="conv")

    _run_blocks(plan, fill, workers)
    out /= A
    meta = {"method": method, "backend": BACKEND, "workers": workers,
            "wall_time_s": time.perf_counter() - t0}
    return PathEnsemble(out, plan, A, meta)


def simulate_coupled(plan, workers=1, method="auto"):
    """Pareto-driven and tapered ensembles built from the same draws.

    Returns ``(pareto_ensemble, tapered_ensemble)``, both divided by the
    plan's normalizing constant, so their difference is the coupling gap.
    """
    if plan.alpha == 1:
        raise UnsupportedError("alpha = 1 is excluded for the coupled construction")
    f = plan.filter
    if f.kind is not FilterKind.EXPLICIT and f.beta * plan.alpha <= 1:
        raise DivergenceError("coupling needs sum |a_j|^alpha < inf (alpha * beta > 1)")
    pareto_centering(plan.alpha)
    t0 = time.perf_counter()
    method = _resolve_method(plan, method)
    A = normalization_constant(plan)
    mu = tp_mean(plan.params)
    D = d_matrix(f, plan.n, plan.t_grid, plan.truncation_J) if method == "dcoef" else None
    v_out = np.empty((plan.replicates, len(plan.t_grid)))
    s_out = np.empty_like(v_out)

    def fill(lo, hi):
        rows = [coupled_innovations(plan, r, mu) for r in range(lo, hi)]
        eta = np.vstack([r[0] for r in rows])
        xi = np.vstack([r[1] for r in rows])
        if D is not None:
            v_out[lo:hi] = eta @ D.T
            s_out[lo:hi] = xi @ D.T
        else:
            v_out[lo:hi] = partial_sums(f, plan.n, plan.truncation_J, plan.t_grid, eta, "conv")
            s_out[lo:hi] = partial_sums(f, plan.n, plan.truncation_J, plan.t_grid, xi, "conv")

    _run_blocks(plan, fill, workers)
    meta = {"method": method, "backend": BACKEND, "workers": workers, "coupled": True,
            "wall_time_s": time.perf_counter() - t0}
    return (PathEnsemble(v_out / A, plan, A, dict(meta, innovations="pareto")),
            PathEnsemble(s_out / A, plan, A, dict(meta, innovations="tapered")))


# stream ids for the exceedance sampler; counts, positions and jump sizes use
# separate streams so jump sizes line up across plans with the same seed
_GAP_COUNT, _GAP_POSITION, _GAP_SIZE = (1 << 40), (1 << 40) + 1, (1 << 40) + 2


def coupling_gap(plan, replicates=None):
    """Exact draws of ``(V_n(t) - S_n(t)) / A_n`` on the plan's grid.

    Below the taper level the Pareto and tapered innovations coincide, so
    ``eta_j - xi_j`` equals the constant ``mu_1(b) - E theta`` except at the
    exceedances ``theta_j >= b``, where it adds ``theta_j - b - R_j``. Drawing
    the exceedance count per replicate (binomial), their positions and their
    sizes (``theta = b U^(-1/alpha)``) gives the law of the gap without
    generating the other innovations. Jump sizes come from their own stream so
    plans sharing a seed share their largest draws.
    """
    if plan.alpha == 1:
        raise UnsupportedError("alpha = 1 is excluded for the coupled construction")
    N = plan.replicates if replicates is None else int(replicates)
    p = plan.params
    a, b = p.alpha, p.b
    D = d_matrix(plan.filter, plan.n, plan.t_grid, plan.truncation_J)
    W = D.shape[1]
    shift = (tp_mean(p) - pareto_centering(a)) * D.sum(axis=1)
    counts = stream(plan.seed, _GAP_COUNT).binomial(W, b**-a, size=N)
    pos_rng = stream(plan.seed, _GAP_POSITION)
    size_rng = stream(plan.seed, _GAP_SIZE)
    total = int(counts.sum())
    rep = np.repeat(np.arange(N), counts)
    pos = pos_rng.integers(0, W, size=total)
    # positions within a replicate are distinct; redraw the rare collisions
    while total:
        key = rep.astype(np.int64) * W + pos
        _, first = np.unique(key, return_index=True)
        dup = np.ones(total, dtype=bool)
        dup[first] = False
        if not dup.any():
            break
        pos[dup] = pos_rng.integers(0, W, size=int(dup.sum()))
    jump = b * open_uniform(size_rng, total) ** (-1.0 / a) - b + np.log(open_uniform(size_rng, total))
    gaps = np.empty((N, D.shape[0]))
    for i in range(D.shape[0]):
        gaps[:, i] = shift[i] + np.bincount(rep, weights=D[i, pos] * jump, minlength=N)
    return gaps / normalization_constant(plan)


def with_n(plan, n, truncation_J=None, max_factor=32):
    """Copy of ``plan`` at another sample size, keeping ``J / n`` fixed by default."""
    if truncation_J is None:
        truncation_J = max(1, plan.truncation_J * n // plan.n)
    return replace(plan, n=n, truncation_J=truncation_J)
