"""Reference generators for the three limit laws.

* fractional Brownian motion, by circulant embedding on uniform grids and
  Cholesky factorization otherwise;
* totally skewed alpha-stable variables and Levy motion, by the
  Chambers-Mallows-Stuck transform;
* linear fractional stable motion, by a midpoint Riemann sum of the kernel
  ``(t-s)_+^(1-beta) - (-s)_+^(1-beta)`` against stable increments.

Stable characteristic functions are written ``exp{-t|u|^alpha (1 - i D sign u)}``.
The skew coefficient ``D`` is stored explicitly. ``D = tan(pi alpha / 2)`` is the
law skewed toward ``+inf``; :meth:`StableSpec.negated_tangent` builds the
opposite sign, ``D = -tan(pi alpha / 2)``, which is skewed toward ``-inf``.
"""

import functools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import DomainError, ParameterError, UnsupportedError
from .io import ensemble_document, write_csv, write_json
from .rng import open_uniform

CHOLESKY_MAX = 2048
EMBEDDING_TOL = 1e-10


@dataclass
class LimitPaths:
    """Paths of a limit process on a time grid, rows are replicates."""

    values: np.ndarray
    t_grid: np.ndarray
    meta: dict = field(default_factory=dict)

    def to_csv(self, path):
        write_csv(path, self.values, self.t_grid)

    def to_json(self, path):
        write_json(path, ensemble_document(self.values, self.t_grid, self.meta))


# -- fractional Brownian motion ----------------------------------------------

@dataclass(frozen=True)
class FbmSpec:
    H: float
    grid: tuple

    def __post_init__(self):
        if not 0 < self.H < 1:
            raise DomainError(f"H must lie in (0, 1), got {self.H}")
        g = tuple(float(t) for t in self.grid)
        object.__setattr__(self, "grid", g)
        if not g:
            raise ParameterError("grid must not be empty")
        a = np.asarray(g)
        if a[0] < 0 or np.any(np.diff(a) <= 0):
            raise ParameterError("grid must be nonnegative and strictly increasing")

    @classmethod
    def uniform(cls, H, m, horizon=1.0):
        """Grid ``horizon * k / m`` for ``k = 1..m``."""
        return cls(H, tuple(horizon * np.arange(1, m + 1) / m))


def fbm_covariance(s, t, H):
    if not 0 < H < 1:
        raise DomainError(f"H must lie in (0, 1), got {H}")
    s = np.asarray(s, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    if np.any(s < 0) or np.any(t < 0):
        raise DomainError("fBm covariance is defined for nonnegative times")
    h2 = 2.0 * H
    out = 0.5 * (np.abs(s) ** h2 + np.abs(t) ** h2 - np.abs(s - t) ** h2)
    return out[()] if out.ndim == 0 else out


def fbm_gram(grid, H):
    g = np.asarray(grid, dtype=np.float64)
    return fbm_covariance(g[:, None], g[None, :], H)


def _uniform_step(grid):
    g = np.asarray(grid)
    h = g[0]
    if h <= 0:
        return None
    k = np.arange(1, len(g) + 1)
    if np.allclose(g, h * k, rtol=1e-12, atol=0):
        return h
    return None


def _fgn_autocov(H, m):
    k = np.arange(m + 1, dtype=np.float64)
    h2 = 2.0 * H
    return 0.5 * (np.abs(k + 1) ** h2 - 2 * k**h2 + np.abs(k - 1) ** h2)


def _circulant_eigs(H, m):
    c = _fgn_autocov(H, m)
    row = np.concatenate([c, c[-2:0:-1]])
    return np.fft.fft(row).real


def _sample_fbm_circulant(H, m, h, rng, size, lam):
    M = lam.size
    # real part of F diag(sqrt(lam/M)) (N1 + i N2) has the circulant covariance
    w = rng.standard_normal((size, M)) + 1j * rng.standard_normal((size, M))
    fgn = np.fft.fft(np.sqrt(np.clip(lam, 0.0, None) / M) * w, axis=1).real[:, :m]
    return np.cumsum(fgn, axis=1) * h**H


def _sample_fbm_cholesky(grid, H, rng, size):
    g = np.asarray(grid)
    pos = g > 0
    out = np.zeros((size, g.size))
    if not pos.any():
        return out
    G = fbm_gram(g[pos], H)
    try:
        L = np.linalg.cholesky(G)
    except np.linalg.LinAlgError:
        w, V = np.linalg.eigh(G)
        L = V * np.sqrt(np.clip(w, 0.0, None))
    out[:, pos] = rng.standard_normal((size, int(pos.sum()))) @ L.T
    return out


def sample_fbm(spec, rng, size=1):
    """``size`` fBm paths on ``spec.grid``.

    Uniform grids ``h, 2h, ..., mh`` use circulant embedding; other grids, or an
    embedding with a negative eigenvalue, fall back to Cholesky up to
    ``CHOLESKY_MAX`` points. The method and any fallback are recorded in ``meta``.
    """
    grid = np.asarray(spec.grid)
    meta = {"process": "fbm", "H": spec.H, "method": "circulant", "fallback": False}
    h = _uniform_step(grid)
    if h is not None:
        m = grid.size
        lam = _circulant_eigs(spec.H, m)
        if lam.min() >= -EMBEDDING_TOL * lam.max():
            vals = _sample_fbm_circulant(spec.H, m, h, rng, size, lam)
            return LimitPaths(vals, grid, meta)
        meta["fallback"] = True
        meta["warning"] = f"circulant embedding eigenvalue {lam.min():.3e} < 0"
    if grid.size > CHOLESKY_MAX:
        raise UnsupportedError(f"Cholesky fallback limited to {CHOLESKY_MAX} grid points")
    meta["method"] = "cholesky"
    return LimitPaths(_sample_fbm_cholesky(grid, spec.H, rng, size), grid, meta)


# -- stable laws ---------------------------------------------------------------

@dataclass(frozen=True)
class StableSpec:
    alpha: float
    D: float
    t: float = 1.0

    def __post_init__(self):
        if not 0 < self.alpha < 2:
            raise ParameterError(f"alpha must lie in (0, 2), got {self.alpha}")
        if self.alpha == 1:
            raise UnsupportedError("alpha = 1 is excluded")
        if not self.t > 0:
            raise ParameterError(f"time scale t must be positive, got {self.t}")

    @classmethod
    def right_skewed(cls, alpha, t=1.0):
        """Totally skewed toward ``+inf``: ``D = tan(pi alpha / 2)``."""
        return cls(alpha, math.tan(math.pi * alpha / 2), t)

    @classmethod
    def negated_tangent(cls, alpha, t=1.0):
        """``D = -tan(pi alpha / 2)``: the mirror image of :meth:`right_skewed`."""
        return cls(alpha, -math.tan(math.pi * alpha / 2), t)

    @property
    def skewness(self):
        """Skewness parameter ``D / tan(pi alpha / 2)`` in the usual parametrization."""
        return self.D / math.tan(math.pi * self.alpha / 2)

    def at(self, t):
        return StableSpec(self.alpha, self.D, t)


def stable_cf(spec, u):
    u = np.asarray(u, dtype=np.float64)
    out = np.exp(-spec.t * np.abs(u) ** spec.alpha * (1 - 1j * spec.D * np.sign(u)))
    return out[()] if out.ndim == 0 else out


def _skew_sign(spec):
    s = spec.skewness
    if math.isclose(s, 1.0, rel_tol=1e-9):
        return 1.0
    if math.isclose(s, -1.0, rel_tol=1e-9):
        return -1.0
    raise UnsupportedError("only totally skewed laws (|D| = |tan(pi alpha / 2)|) are generated")


def _cms(alpha, skew, rng, size):
    v = math.pi * (open_uniform(rng, size) - 0.5)
    w = -np.log(open_uniform(rng, size))
    tan_term = skew * math.tan(math.pi * alpha / 2)
    shift = math.atan(tan_term) / alpha
    scale = (1 + tan_term * tan_term) ** (1 / (2 * alpha))
    av = alpha * (v + shift)
    return scale * np.sin(av) / np.cos(v) ** (1 / alpha) * \
        (np.cos(v - av) / w) ** ((1 - alpha) / alpha)


def sample_stable(spec, rng, size=None):
    """Draws with characteristic function :func:`stable_cf`."""
    skew = _skew_sign(spec)
    x = _cms(spec.alpha, skew, rng, () if size is None else size)
    x = x * spec.t ** (1 / spec.alpha)
    return float(x) if size is None else x


def sample_stable_levy(spec, n_steps, rng, size=1):
    """Stable Levy motion on ``t k / n_steps``, ``k = 1..n_steps``, ``t = spec.t``."""
    step = spec.at(spec.t / n_steps)
    inc = sample_stable(step, rng, (size, n_steps))
    grid = spec.t * np.arange(1, n_steps + 1) / n_steps
    meta = {"process": "stable_levy", "alpha": spec.alpha, "D": spec.D}
    return LimitPaths(np.cumsum(inc, axis=1), grid, meta)


# -- linear fractional stable motion ------------------------------------------

def lfsm_kernel(t, s, beta):
    """``(t-s)_+^(1-beta) - (-s)_+^(1-beta)``; indicator convention at ``beta = 1``."""
    t = np.asarray(t, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    e = 1.0 - beta
    with np.errstate(divide="ignore", invalid="ignore"):
        if e == 0:
            first = (t - s > 0).astype(np.float64)
            second = (-s > 0).astype(np.float64)
        else:
            first = np.where(t - s > 0, np.abs(t - s) ** e, 0.0)
            second = np.where(-s > 0, np.abs(s) ** e, 0.0)
            # for s < 0 both terms are present: |s|^e ((1 + t/|s|)^e - 1) avoids cancellation
            both = (s < 0) & (t > 0)
            sa = np.where(both, np.abs(s), 1.0)
            diff = sa**e * np.expm1(e * np.log1p(np.where(both, t, 0.0) / sa))
            return np.where(both, diff, first - second)
    return first - second


def lfsm_tail_fraction(alpha, beta, M, t=1.0):
    """Share of ``int |kernel(t, s)|^alpha ds`` lying below ``s = -M``."""
    f = lambda s: abs(lfsm_kernel(t, s, beta)) ** alpha  # noqa: E731
    pts = {"epsabs": 0, "epsrel": 1e-9, "limit": 400}
    logf = lambda lo, hi: integrate.quad(  # noqa: E731
        lambda y: f(-math.exp(y)) * math.exp(y), math.log(lo), math.log(hi), **pts)[0]
    near = integrate.quad(f, 0.0, t, **pts)[0] + integrate.quad(f, -min(M, 1.0), 0.0, **pts)[0]
    if M > 1:
        near += logf(1.0, M)
    # far tail in the variable s = -M e^y
    far, _ = integrate.quad(lambda y: f(-M * math.exp(y)) * M * math.exp(y), 0.0, 200.0, **pts)
    return far / (near + far)


@functools.lru_cache(maxsize=64)
def lfsm_cutoff(alpha, beta, tol=1e-4, start=1.0):
    """Smallest ``16^k * start`` with :func:`lfsm_tail_fraction` at most ``tol``."""
    X = start
    while lfsm_tail_fraction(alpha, beta, X) > tol:
        X *= 16.0
        if X > 1e300:
            raise DomainError("kernel tail does not reach the tolerance")
    return X


@dataclass(frozen=True)
class LfsmSpec:
    """Discretization of LFSM on ``[0, 1]``.

    The past ``[-M, 0)`` is split into cells of width ``h``; beyond it, cells
    grow geometrically by ``ratio`` out to the point where the discarded share
    of the kernel's alpha-norm falls below ``tail_tol``.
    """

    alpha: float
    beta: float
    D: float
    h: float = 1.0 / 512
    M: float = 4.0
    ratio: float = 1.1
    tail_tol: float = 1e-4

    def __post_init__(self):
        if not 0 < self.alpha < 2 or self.alpha == 1:
            raise ParameterError(f"alpha must lie in (0, 2) without 1, got {self.alpha}")
        if not 1.0 / self.alpha < self.beta < 1.0 + 1.0 / self.alpha:
            raise DomainError(
                f"beta = {self.beta} outside (1/alpha, 1 + 1/alpha); kernel not alpha-integrable")
        if not self.h > 0 or not self.M > 0:
            raise ParameterError("step h and cutoff M must be positive")
        if abs(round(1.0 / self.h) * self.h - 1.0) > 1e-12:
            raise ParameterError("1/h must be an integer")
        if not self.ratio > 1 or not 0 < self.tail_tol < 1:
            raise ParameterError("ratio must exceed 1 and tail_tol lie in (0, 1)")

    @property
    def H(self):
        return 1.0 / self.alpha + 1.0 - self.beta

    @property
    def stable(self):
        return StableSpec(self.alpha, self.D)

    def far_edges(self):
        """Cell edges ``M = e_0 < e_1 < ...`` of the geometric far past (as ``|s|``)."""
        if self.beta == 1.0:
            return np.array([self.M])
        far = max(lfsm_cutoff(self.alpha, self.beta, self.tail_tol, self.M), self.M)
        k = int(math.ceil(math.log(far / self.M) / math.log(self.ratio)))
        return self.M * self.ratio ** np.arange(k + 1)


def sample_lfsm(spec, t_grid, rng, size=1):
    """LFSM at the times in ``t_grid`` (each a multiple of ``h``, at most 1).

    The kernel is evaluated at cell midpoints and each cell carries an
    independent stable increment with scale ``width^(1/alpha)``. Increments on
    ``s >= 0`` are drawn first, then the uniform past, then the far past, so at
    ``beta = 1`` the path equals the cumulative sum of the first ``1/h``
    increments of the same stream.
    """
    t_grid = np.asarray(t_grid, dtype=np.float64)
    steps = int(round(1.0 / spec.h))
    k_t = np.rint(t_grid / spec.h)
    if np.any(np.abs(k_t * spec.h - t_grid) > 1e-12) or np.any(t_grid <= 0) or \
            np.any(t_grid > 1 + 1e-12):
        raise DomainError("t_grid must consist of multiples of h inside (0, 1]")
    step = spec.stable.at(spec.h)
    pos = sample_stable(step, rng, (size, steps))
    meta = {"process": "lfsm", "alpha": spec.alpha, "beta": spec.beta, "D": spec.D,
            "h": spec.h, "M": spec.M}
    if spec.beta == 1.0:
        vals = np.cumsum(pos, axis=1)[:, k_t.astype(int) - 1]
        meta["tail_fraction"] = 0.0
        return LimitPaths(vals, t_grid, meta)
    mid_pos = (np.arange(steps) + 0.5) * spec.h
    n_past = int(math.ceil(spec.M / spec.h))
    neg = sample_stable(step, rng, (size, n_past))
    mid_neg = -(np.arange(n_past) + 0.5) * spec.h
    edges = spec.far_edges()
    widths = np.diff(edges)
    far = sample_stable(spec.stable.at(1.0), rng, (size, widths.size)) * widths ** (1 / spec.alpha)
    mid_far = -0.5 * (edges[1:] + edges[:-1])
    K = lfsm_kernel(t_grid[:, None], np.concatenate([mid_pos, mid_neg, mid_far])[None, :],
                    spec.beta)
    vals = np.hstack([pos, neg, far]) @ K.T
    meta.update(far_cells=int(widths.size), far_limit=float(edges[-1]),
                tail_fraction=lfsm_tail_fraction(spec.alpha, spec.beta, float(edges[-1])))
    return LimitPaths(vals, t_grid, meta)
