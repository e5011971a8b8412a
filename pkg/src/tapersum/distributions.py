"""Tapered Pareto innovations.

The law has density ``alpha x^(-alpha-1)`` on ``[1, b]`` and the exponential
tail ``b^-alpha exp(b - x)`` beyond ``b``. It is the standard Pareto law with
everything above the taper level ``b`` replaced by ``b + Exp(1)``, which is
also how the coupled sampler builds it.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from . import kernels
from .errors import DomainError, ParameterError, UnsupportedError
from .rng import open_uniform
from .special import upper_gamma_scaled


@dataclass(frozen=True)
class TaperedParetoParams:
    alpha: float
    b: float

    def __post_init__(self):
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise ParameterError(f"alpha must be positive, got {self.alpha}")
        if not (self.b > 1 and math.isfinite(self.b)):
            raise ParameterError(f"taper level b must exceed 1, got {self.b}")

    @property
    def u_taper(self):
        """CDF value at the taper point, ``1 - b^-alpha``."""
        return -math.expm1(-self.alpha * math.log(self.b))


@dataclass(frozen=True)
class ParetoParams:
    """Standard Pareto law on ``[1, inf)``."""

    alpha: float

    def __post_init__(self):
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise ParameterError(f"alpha must be positive, got {self.alpha}")

    @property
    def mean(self):
        if self.alpha <= 1:
            return math.inf
        return self.alpha / (self.alpha - 1.0)


@dataclass(frozen=True)
class CoupledInnovation:
    """One (or an array of) coupled draws; fields broadcast together."""

    theta: np.ndarray
    r: np.ndarray
    zeta: np.ndarray
    xi: np.ndarray
    eta: np.ndarray


def tp_pdf(p, x):
    x = np.asarray(x, dtype=np.float64)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        body = p.alpha * np.power(np.where(x >= 1, x, 1.0), -p.alpha - 1.0)
        tail = np.exp(-p.alpha * math.log(p.b) + p.b - np.where(x > p.b, x, p.b))
    out = np.where(x < 1, 0.0, np.where(x <= p.b, body, tail))
    return out[()] if out.ndim == 0 else out


def tp_cdf(p, x):
    x = np.asarray(x, dtype=np.float64)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        xs = np.where(x >= 1, x, 1.0)
        body = -np.expm1(-p.alpha * np.log(xs))
        tail = -np.expm1(-p.alpha * math.log(p.b) + p.b - np.where(x > p.b, x, p.b))
    out = np.where(x < 1, 0.0, np.where(x <= p.b, body, tail))
    return out[()] if out.ndim == 0 else out


def tp_sf(p, x):
    """Survival function ``1 - tp_cdf``, accurate far in the tail."""
    x = np.asarray(x, dtype=np.float64)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        body = np.power(np.where(x >= 1, x, 1.0), -p.alpha)
        tail = np.exp(-p.alpha * math.log(p.b) + p.b - np.where(x > p.b, x, p.b))
    out = np.where(x < 1, 1.0, np.where(x <= p.b, body, tail))
    return out[()] if out.ndim == 0 else out


def tp_quantile(p, u):
    u = np.asarray(u, dtype=np.float64)
    if np.any((u <= 0) | (u >= 1)) or np.any(np.isnan(u)):
        raise DomainError("quantile level must lie in the open interval (0, 1)")
    out = kernels.tp_quantile_array(u, p.alpha, p.b)
    return out[()] if out.ndim == 0 else out


def tp_sample(p, rng, size=None):
    """Draws from the tapered law by inverse transform of open uniforms."""
    u = open_uniform(rng, size)
    return tp_quantile(p, u)


def pareto_cdf(p, x):
    x = np.asarray(x, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(x < 1, 0.0, -np.expm1(-p.alpha * np.log(np.where(x >= 1, x, 1.0))))
    return out[()] if out.ndim == 0 else out


def _body_moment(alpha, b, r):
    # alpha * int_1^b x^{r-alpha-1} dx, written with expm1 so r -> alpha is smooth
    log_b = math.log(b)
    x = (r - alpha) * log_b
    if x == 0:
        return alpha * log_b
    return alpha * log_b * math.expm1(x) / x


def tp_moment_exact(p, r):
    """``E zeta^r`` for the tapered law.

    Closed form on ``[1, b]`` plus ``b^-alpha e^b Gamma(r+1, b)`` for the tail.
    """
    if r < 0:
        raise DomainError(f"moment order must be nonnegative, got {r}")
    tail = math.exp(-p.alpha * math.log(p.b)) * upper_gamma_scaled(r + 1.0, p.b)
    return _body_moment(p.alpha, p.b, r) + tail


def tp_moment_quad(p, r):
    """Adaptive-quadrature oracle for :func:`tp_moment_exact`."""
    if r < 0:
        raise DomainError(f"moment order must be nonnegative, got {r}")
    a, b = p.alpha, p.b
    # log-substitution x = e^s flattens the power-law body
    body, _ = integrate.quad(lambda s: a * math.exp((r - a) * s), 0.0, math.log(b),
                             epsabs=0.0, epsrel=1e-13, limit=200)
    tail, _ = integrate.quad(lambda y: (b + y) ** r * math.exp(-y), 0.0, math.inf,
                             epsabs=0.0, epsrel=1e-13, limit=200)
    return body + math.exp(-a * math.log(b)) * tail


def tp_moment_asymptotic(p, r):
    """Leading-order growth of ``E zeta^r`` as the taper level grows."""
    a = p.alpha
    if r > a:
        return r / (r - a) * p.b ** (r - a)
    if r < a:
        return a / (a - r)
    return a * math.log(p.b)


def tp_mean(p):
    return tp_moment_exact(p, 1.0)


def centered_innovation_variance(p):
    m1 = tp_moment_exact(p, 1.0)
    m2 = tp_moment_exact(p, 2.0)
    # m2 - m1^2 loses digits only when b is close to 1; fall back to quadrature there
    var = m2 - m1 * m1
    if var < 1e-8 * m2:
        var = tp_central_abs_moment(p, 2.0)
    return var


def tp_central_abs_moment(p, r):
    """``E |zeta - E zeta|^r`` by adaptive quadrature."""
    if r < 0:
        raise DomainError(f"moment order must be nonnegative, got {r}")
    a, b = p.alpha, p.b
    m1 = tp_mean(p)
    log_b = math.log(b)

    def body(s):
        x = math.exp(s)
        return abs(x - m1) ** r * a * math.exp(-a * s)

    pts = [math.log(m1)] if 1.0 < m1 < b else None
    lo, _ = integrate.quad(body, 0.0, log_b, points=pts, epsabs=0.0, epsrel=1e-12, limit=400)
    hi, _ = integrate.quad(lambda y: abs(b + y - m1) ** r * math.exp(-y), 0.0, math.inf,
                           points=None, epsabs=0.0, epsrel=1e-12, limit=400)
    return lo + math.exp(-a * log_b) * hi


def pareto_centering(alpha):
    """Centering used for untapered innovations: the mean if ``1 < alpha``, else 0."""
    if alpha == 1:
        raise UnsupportedError("alpha = 1 is excluded for the coupled construction")
    return alpha / (alpha - 1.0) if alpha > 1 else 0.0


def coupled_from_uniforms(p, u_theta, u_r, mean=None):
    """Deterministic coupling map from two uniform arrays."""
    if p.alpha == 1:
        raise UnsupportedError("alpha = 1 is excluded for the coupled construction")
    theta, r, zeta = kernels.coupled_transform(u_theta, u_r, p.alpha, p.b)
    mu = tp_mean(p) if mean is None else mean
    return CoupledInnovation(theta=theta, r=r, zeta=zeta, xi=zeta - mu,
                             eta=theta - pareto_centering(p.alpha))


def sample_coupled(p, rng, size=None):
    """Joint draw of Pareto ``theta`` and its tapered version ``zeta``.

    ``zeta = theta`` below the taper level and ``b + R`` above it, with ``R``
    unit exponential and independent of ``theta``. Scalars are returned when
    ``size`` is None.
    """
    if p.alpha == 1:
        raise UnsupportedError("alpha = 1 is excluded for the coupled construction")
    shape = () if size is None else size
    u_theta = np.asarray(open_uniform(rng, shape))
    u_r = np.asarray(open_uniform(rng, shape))
    c = coupled_from_uniforms(p, u_theta, u_r)
    if size is None:
        return CoupledInnovation(*(float(np.asarray(v)) for v in
                                   (c.theta, c.r, c.zeta, c.xi, c.eta)))
    return c


def coupling_gap_moment(p, kappa):
    """``E|eta - xi|^kappa`` by quadrature.

    Below the taper level the gap is the constant ``c = mu_1(b) - E theta``
    (``E theta`` read as 0 when ``alpha < 1``); above it, ``c + b(x - 1) - R``
    with ``x`` standard Pareto and ``R`` unit exponential.
    """
    a, b = p.alpha, p.b
    if not 0 < kappa < a:
        raise DomainError(f"kappa must lie in (0, alpha) = (0, {a}) for a finite moment")
    c = tp_mean(p) - pareto_centering(a)
    opts = {"epsabs": 0.0, "epsrel": 1e-11, "limit": 400}
    g = math.gamma(kappa + 1.0)

    def inner(y):
        # int_0^inf |y - r|^kappa e^-r dr
        if y <= 0:
            return upper_gamma_scaled(kappa + 1.0, -y)
        # e^-r kills the integrand well before r = 60 when y is large
        left, _ = integrate.quad(lambda r: (y - r) ** kappa * math.exp(-r), 0.0, min(y, 60.0),
                                 **opts)
        return left + math.exp(-y) * g

    # exceedance part in x = 1 + (e^s - 1); integrand decays like e^{(kappa - alpha) s}
    s_max = min(60.0 / (a - kappa), 650.0 / kappa - math.log(b))
    pts = sorted({v for v in (math.log1p(-c / b) if -c < b and c < 0 else None, 1.0, 5.0,
                              20.0) if v is not None and 0 < v < s_max})
    f = lambda s: inner(c + b * math.expm1(s)) * a * math.exp(-a * s)  # noqa: E731
    edges = [0.0] + pts + [s_max]
    tail = math.fsum(integrate.quad(f, lo, hi, **opts)[0] for lo, hi in zip(edges, edges[1:]))
    body = -math.expm1(-a * math.log(b)) * abs(c) ** kappa
    return body + math.exp(-a * math.log(b)) * tail
