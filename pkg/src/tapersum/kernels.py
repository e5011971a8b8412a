"""Hot inner loops, each in a numba and a pure-numpy flavour.

The module-level names (``tp_quantile_array`` etc.) point at the backend picked
in :mod:`tapersum._accel`; both flavours stay importable under
``NUMPY_KERNELS`` / ``NUMBA_KERNELS`` for tests and the benchmark.
"""

import math

import numpy as np

from ._accel import HAVE_NUMBA, USE_NUMBA, njit


# -- pure numpy ---------------------------------------------------------------

def _tp_quantile_np(u, alpha, b):
    u = np.asarray(u, dtype=np.float64)
    u_b = -math.expm1(-alpha * math.log(b))  # 1 - b^-alpha
    body = u <= u_b
    out = np.empty_like(u)
    out[body] = (1.0 - u[body]) ** (-1.0 / alpha)
    tail = ~body
    # b - ln((1-u) b^alpha)
    out[tail] = b - (np.log1p(-u[tail]) + alpha * math.log(b))
    return out


def _coupled_np(u_theta, u_r, alpha, b):
    theta = np.asarray(u_theta, dtype=np.float64) ** (-1.0 / alpha)
    r = -np.log(np.asarray(u_r, dtype=np.float64))
    zeta = np.where(theta < b, theta, b + r)
    return theta, r, zeta


def _direct_increments_np(a, e, n, J):
    # X_k = sum_{m=0}^{k+J-1} a_m e[k+J-1-m], k = 1..n, rows of e are replicates
    e = np.atleast_2d(e)
    out = np.empty((e.shape[0], n))
    for k in range(1, n + 1):
        top = k + J - 1
        out[:, k - 1] = e[:, top::-1] @ a[: top + 1]
    return out


# -- numba --------------------------------------------------------------------

@njit(cache=True)
def _tp_quantile_nb(u, alpha, b):
    out = np.empty(u.size)
    log_b = math.log(b)
    u_b = -math.expm1(-alpha * log_b)
    inv = -1.0 / alpha
    flat = u.ravel()
    for i in range(flat.size):
        v = flat[i]
        if v <= u_b:
            out[i] = (1.0 - v) ** inv
        else:
            out[i] = b - (math.log1p(-v) + alpha * log_b)
    return out.reshape(u.shape)


@njit(cache=True)
def _coupled_nb(u_theta, u_r, alpha, b):
    theta = np.empty(u_theta.size)
    r = np.empty(u_theta.size)
    zeta = np.empty(u_theta.size)
    inv = -1.0 / alpha
    ft = u_theta.ravel()
    fr = u_r.ravel()
    for i in range(ft.size):
        th = ft[i] ** inv
        rr = -math.log(fr[i])
        theta[i] = th
        r[i] = rr
        zeta[i] = th if th < b else b + rr
    return theta.reshape(u_theta.shape), r.reshape(u_theta.shape), zeta.reshape(u_theta.shape)


@njit(cache=True)
def _direct_increments_nb(a, e, n, J):
    reps = e.shape[0]
    out = np.zeros((reps, n))
    for r in range(reps):
        for k in range(1, n + 1):
            top = k + J - 1
            s = 0.0
            for m in range(top + 1):
                s += a[m] * e[r, top - m]
            out[r, k - 1] = s
    return out


def _wrap_quantile(fn):
    def tp_quantile_array(u, alpha, b):
        return fn(np.asarray(u, dtype=np.float64), float(alpha), float(b))
    return tp_quantile_array


def _wrap_coupled(fn):
    def coupled_transform(u_theta, u_r, alpha, b):
        return fn(np.asarray(u_theta, dtype=np.float64),
                  np.asarray(u_r, dtype=np.float64), float(alpha), float(b))
    return coupled_transform


def _wrap_direct(fn):
    def direct_increments(a, e, n, J):
        e = np.ascontiguousarray(np.atleast_2d(e), dtype=np.float64)
        return fn(np.ascontiguousarray(a, dtype=np.float64), e, int(n), int(J))
    return direct_increments


NUMPY_KERNELS = {
    "tp_quantile_array": _wrap_quantile(_tp_quantile_np),
    "coupled_transform": _wrap_coupled(_coupled_np),
    "direct_increments": _wrap_direct(_direct_increments_np),
}

NUMBA_KERNELS = {
    "tp_quantile_array": _wrap_quantile(_tp_quantile_nb),
    "coupled_transform": _wrap_coupled(_coupled_nb),
    "direct_increments": _wrap_direct(_direct_increments_nb),
} if HAVE_NUMBA else dict(NUMPY_KERNELS)

_ACTIVE = NUMBA_KERNELS if USE_NUMBA else NUMPY_KERNELS

tp_quantile_array = _ACTIVE["tp_quantile_array"]
coupled_transform = _ACTIVE["coupled_transform"]
direct_increments = _ACTIVE["direct_increments"]


def fft_increments(a, e, n, J):
    """Same contract as ``direct_increments`` using a power-of-two FFT."""
    e = np.atleast_2d(np.asarray(e, dtype=np.float64))
    width = J + n
    size = 1 << (2 * width - 1).bit_length()
    fa = np.fft.rfft(a[:width], size)
    fe = np.fft.rfft(e, size, axis=1)
    full = np.fft.irfft(fe * fa, size, axis=1)
    return full[:, J:J + n]
