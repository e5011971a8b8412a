"""Which limit theorem applies to a parameter point.

Memory case comes from the filter: ``beta < 1`` (positive memory, case i),
``beta > 1`` with nonzero filter sum (case ii) and ``beta > 1`` with zero sum
(case iii). Within a case the taper growth exponent ``gamma`` picks the side:
below the hard-tapering bound the limit is fractional Brownian motion, above
the soft-tapering bound it is stable (linear fractional stable motion or
stable Levy motion). Points on a bound, or between the two bounds, get
``UNKNOWN_GAP``; points outside both theorems' parameter ranges get
``UNSUPPORTED``.
"""

import math
from dataclasses import asdict, dataclass, replace
from enum import Enum

from .errors import NoExponentError, ParameterError


class Theorem(str, Enum):
    T1I = "T1i"
    T1II = "T1ii"
    T1III = "T1iii"
    T2I = "T2i"
    T2II = "T2ii"
    T2III = "T2iii"
    UNKNOWN_GAP = "UnknownGap"
    UNSUPPORTED = "Unsupported"


class LimitKind(str, Enum):
    FBM = "FBM"
    LFSM = "LFSM"
    STABLE_LEVY = "StableLevy"
    UNKNOWN = "Unknown"


class Tapering(str, Enum):
    HARD = "Hard"
    SOFT = "Soft"
    BOUNDARY = "Boundary"


@dataclass(frozen=True)
class RegimeParams:
    alpha: float
    beta: float
    gamma: float
    zero_sum: bool = False

    def __post_init__(self):
        if not 0 < self.alpha < 2:
            raise ParameterError(f"alpha must lie in (0, 2), got {self.alpha}")
        if not self.beta > 0.5:
            raise ParameterError(f"beta must exceed 1/2, got {self.beta}")
        if not self.gamma >= 0:
            raise ParameterError(f"gamma must be nonnegative, got {self.gamma}")


@dataclass(frozen=True)
class RegimeVerdict:
    theorem: Theorem
    limit: LimitKind
    H: float | None
    tapering: Tapering
    bounds: tuple | None = None
    memory_case: str | None = None

    def to_dict(self):
        out = asdict(self)
        out["theorem"] = self.theorem.value
        out["limit"] = self.limit.value
        out["tapering"] = self.tapering.value
        out["bounds"] = None if self.bounds is None else list(self.bounds)
        return out


def tapering_mode(p):
    edge = 1.0 / p.alpha
    if p.gamma < edge:
        return Tapering.HARD
    if p.gamma > edge:
        return Tapering.SOFT
    return Tapering.BOUNDARY


def memory_case(p):
    """``"i"``, ``"ii"``, ``"iii"`` or None when the filter falls outside all three."""
    if p.beta < 1:
        return None if p.zero_sum else "i"
    if p.beta > 1:
        return "iii" if p.zero_sum else "ii"
    return None


def hard_bound(p, case=None):
    """Upper bound on gamma for the Gaussian limit, or None if no bound applies."""
    a, b = p.alpha, p.beta
    case = case or memory_case(p)
    if case == "i":
        return min(1.0 / a, (2 * b - 1) / (2 - a))
    if case == "ii":
        return min(1.0 / a, 1.0 / (2 - a))
    if case == "iii" and b < 1.5:
        return min((2 * b - 1) / (2 - a), (3 - 2 * b) / a)
    return None


def soft_bound(p, case=None):
    """Lower bound on gamma for the stable limit, or None if no bound applies."""
    a, b = p.alpha, p.beta
    if a == 1 or a * b <= 1:
        return None
    case = case or memory_case(p)
    if case == "i":
        return 1.0 / a if 1.0 / a < b < 1 else None
    if case == "ii":
        return 1.0 / a
    if case == "iii" and max(1.0, 1.0 / a) < b < 1 + 1.0 / a:
        return 1.0 / a + (b - 1) / (a * b - 1)
    return None


def gap_constants(alpha, beta):
    """Hard and soft bounds for the zero-sum case, ``(C1, C2)``."""
    c1 = min((2 * beta - 1) / (2 - alpha), (3 - 2 * beta) / alpha)
    c2 = 1.0 / alpha + (beta - 1) / (alpha * beta - 1)
    return c1, c2


def _hurst(theorem, p):
    a, b, g = p.alpha, p.beta, p.gamma
    if theorem in (Theorem.T1I, Theorem.T1III):
        return 1.5 - b + g * (2 - a) / 2
    if theorem is Theorem.T1II:
        return 0.5 + g * (2 - a) / 2
    if theorem in (Theorem.T2I, Theorem.T2III):
        return 1.0 / a + 1 - b
    if theorem is Theorem.T2II:
        return 1.0 / a
    return None


_T1 = {"i": Theorem.T1I, "ii": Theorem.T1II, "iii": Theorem.T1III}
_T2 = {"i": Theorem.T2I, "ii": Theorem.T2II, "iii": Theorem.T2III}


def classify(p):
    mode = tapering_mode(p)
    case = memory_case(p)
    if case is None:
        return RegimeVerdict(Theorem.UNSUPPORTED, LimitKind.UNKNOWN, None, mode)
    c1 = hard_bound(p, case)
    c2 = soft_bound(p, case)
    if c1 is not None and p.gamma < c1:
        th = _T1[case]
        H = _hurst(th, p)
        assert 0 < H < 1, (p, H)
        return RegimeVerdict(th, LimitKind.FBM, H, mode, memory_case=case)
    if c2 is not None and p.gamma > c2:
        th = _T2[case]
        limit = LimitKind.STABLE_LEVY if case == "ii" else LimitKind.LFSM
        return RegimeVerdict(th, limit, _hurst(th, p), mode, memory_case=case)
    if p.alpha == 1 or c1 is None or c2 is None:
        return RegimeVerdict(Theorem.UNSUPPORTED, LimitKind.UNKNOWN, None, mode,
                             memory_case=case)
    return RegimeVerdict(Theorem.UNKNOWN_GAP, LimitKind.UNKNOWN, None, mode,
                         bounds=(c1, c2), memory_case=case)


def hurst_exponent(p):
    v = classify(p)
    if v.H is None:
        raise NoExponentError(f"no exponent for verdict {v.theorem.value}")
    return v.H


def h_shift_check(p):
    """Increase of H over the fixed-taper value ``gamma = 0``."""
    v = classify(p)
    if v.theorem not in (Theorem.T1I, Theorem.T1II, Theorem.T1III):
        raise NoExponentError("the shift is defined for Gaussian-limit cases only")
    return v.H - hurst_exponent(replace(p, gamma=0.0))


def brownian_beta(alpha, gamma):
    """Zero-sum decay exponent giving H = 1/2 on the Gaussian side."""
    return 1 + gamma * (2 - alpha) / 2


def is_close_boundary(p, tol=1e-12):
    """True when gamma sits within ``tol`` of one of the case bounds."""
    bounds = [b for b in (hard_bound(p), soft_bound(p)) if b is not None]
    return any(math.isclose(p.gamma, b, rel_tol=0, abs_tol=tol) for b in bounds)
