"""Filter sequences ``a_j`` with power-law decay.

Three constructions cover the memory cases:

* power law, ``a_j = c_a j^-beta`` for ``j >= 1``;
* zero-sum telescoping, ``a_0 = -1`` and ``a_j = j^(1-beta) - (j+1)^(1-beta)``,
  so that ``sum_{j<=N} a_j = -(N+1)^(1-beta)`` tends to zero;
* an explicit finite list, zero-extended.

For a power law with ``1/2 < beta < 1`` the lead weight defaults to
``-c_a * zeta(beta)``. This cancels the constant term in
``sum_{k=0}^{m} a_k = c_a m^(1-beta)/(1-beta) + (a_0 + c_a zeta(beta)) + O(m^-beta)``
so the partial sums of the filter follow their power law from small ``m`` on.
Pass ``a0`` explicitly to use any other lead weight.
"""

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import DivergenceError, DomainError, ParameterError
from .special import power_sum, zeta


class FilterKind(str, Enum):
    POWER_LAW = "power_law"
    ZERO_SUM = "zero_sum"
    EXPLICIT = "explicit"


@dataclass(frozen=True)
class FilterSpec:
    kind: FilterKind
    beta: float | None = None
    c_a: float = 1.0
    coeffs: tuple = field(default_factory=tuple)
    a0: float | None = None

    def __post_init__(self):
        kind = FilterKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind is FilterKind.EXPLICIT:
            if len(self.coeffs) == 0:
                raise ParameterError("explicit filter needs at least one coefficient")
            object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
            return
        if self.beta is None or not self.beta > 0.5:
            raise ParameterError(f"decay exponent beta must exceed 1/2, got {self.beta}")
        if kind is FilterKind.POWER_LAW:
            if self.c_a == 0 or not math.isfinite(self.c_a):
                raise ParameterError("power-law scale c_a must be finite and nonzero")
            if self.beta == 1.0 and self.a0 is None:
                raise ParameterError("beta = 1 power law needs an explicit a0")
        if kind is FilterKind.ZERO_SUM and not self.beta > 1:
            raise ParameterError(f"zero-sum filter needs beta > 1, got {self.beta}")

    @classmethod
    def power_law(cls, beta, c_a=1.0, a0=None):
        return cls(FilterKind.POWER_LAW, beta=float(beta), c_a=float(c_a),
                   a0=None if a0 is None else float(a0))

    @classmethod
    def zero_sum(cls, beta):
        return cls(FilterKind.ZERO_SUM, beta=float(beta))

    @classmethod
    def explicit(cls, coeffs):
        return cls(FilterKind.EXPLICIT, coeffs=tuple(coeffs))

    @property
    def lead(self):
        """The weight ``a_0``."""
        if self.kind is FilterKind.EXPLICIT:
            return self.coeffs[0]
        if self.kind is FilterKind.ZERO_SUM:
            return -1.0
        if self.a0 is not None:
            return self.a0
        if self.beta < 1:
            return -self.c_a * zeta(self.beta)
        return self.c_a

    @property
    def is_zero_sum(self):
        return self.kind is FilterKind.ZERO_SUM

    @property
    def scale(self):
        """Asymptotic constant ``c`` in ``a_j ~ c j^-beta``."""
        if self.kind is FilterKind.POWER_LAW:
            return self.c_a
        if self.kind is FilterKind.ZERO_SUM:
            return self.beta - 1.0
        return None

    def to_dict(self):
        out = {"kind": self.kind.value}
        if self.kind is FilterKind.EXPLICIT:
            out["coeffs"] = list(self.coeffs)
            return out
        out["beta"] = self.beta
        if self.kind is FilterKind.POWER_LAW:
            out["c_a"] = self.c_a
            if self.a0 is not None:
                out["a0"] = self.a0
        return out

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        unknown = set(data) - {"kind", "beta", "c_a", "coeffs", "a0"}
        if unknown:
            raise ParameterError(f"unknown filter keys: {sorted(unknown)}")
        kind = FilterKind(data.pop("kind"))
        if kind is FilterKind.EXPLICIT:
            return cls.explicit(data["coeffs"])
        if kind is FilterKind.ZERO_SUM:
            return cls.zero_sum(data["beta"])
        return cls.power_law(data["beta"], data.get("c_a", 1.0), data.get("a0"))


def coefficients(f, size):
    """Array ``[a_0, ..., a_{size-1}]``."""
    size = int(size)
    out = np.zeros(size)
    if size == 0:
        return out
    if f.kind is FilterKind.EXPLICIT:
        m = min(size, len(f.coeffs))
        out[:m] = f.coeffs[:m]
        return out
    j = np.arange(1, size, dtype=np.float64)
    if f.kind is FilterKind.POWER_LAW:
        out[1:] = f.c_a * j ** (-f.beta)
    else:
        # j^{1-beta} - (j+1)^{1-beta} = -j^{1-beta} expm1((1-beta) log1p(1/j))
        out[1:] = -(j ** (1.0 - f.beta)) * np.expm1((1.0 - f.beta) * np.log1p(1.0 / j))
    out[0] = f.lead
    return out


def coefficient(f, j):
    if j < 0:
        raise DomainError(f"filter index must be nonnegative, got {j}")
    j = int(j)
    if f.kind is FilterKind.EXPLICIT:
        return f.coeffs[j] if j < len(f.coeffs) else 0.0
    return float(coefficients(f, j + 1)[j])


def filter_sum(f):
    """``sum_j a_j``; exact zero for the telescoping construction."""
    if f.kind is FilterKind.EXPLICIT:
        return math.fsum(f.coeffs)
    if f.kind is FilterKind.ZERO_SUM:
        return 0.0
    if f.beta <= 1:
        raise DivergenceError(f"sum of a_j diverges for beta = {f.beta} <= 1")
    return f.lead + f.c_a * zeta(f.beta)


def _next_pow2(m):
    m = max(int(m), 1)
    return 1 << (m - 1).bit_length()


def _abs_power_tail_bound(f, p, J):
    # integral bound for sum_{j>J} |a_j|^p given |a_j| <= c j^-beta
    c = abs(f.scale)
    e = f.beta * p
    return c**p * J ** (1.0 - e) / (e - 1.0)


def _abs_power_head(f, p, J):
    if f.kind is FilterKind.POWER_LAW:
        return abs(f.lead) ** p + abs(f.c_a) ** p * power_sum(f.beta * p, J)
    if J <= 1 << 20:
        return float(np.sum(np.abs(coefficients(f, J + 1)) ** p))
    head = float(np.sum(np.abs(coefficients(f, (1 << 20) + 1)) ** p))
    # lower bound on the remainder keeps the horizon conservative
    return head


def truncation_horizon(f, p, tol=1e-6):
    """Smallest power of two ``J`` with ``sum_{j>J}|a_j|^p <= tol * sum_{j<=J}|a_j|^p``."""
    if not tol > 0:
        raise DomainError(f"tolerance must be positive, got {tol}")
    if f.kind is FilterKind.EXPLICIT:
        return _next_pow2(len(f.coeffs))
    if f.beta * p <= 1:
        raise DivergenceError(
            f"sum |a_j|^{p} diverges for beta = {f.beta} (needs beta > 1/{p})")
    J = 1
    while J < 1 << 62:
        if _abs_power_tail_bound(f, p, J) <= tol * _abs_power_head(f, p, J):
            return J
        J <<= 1
    raise DivergenceError("truncation horizon exceeds 2^62")
