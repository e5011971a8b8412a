"""Backend selection for the hot kernels.

Set ``TAPERSUM_DISABLE_NUMBA=1`` to force the pure-numpy path.
"""

import os

_flag = os.environ.get("TAPERSUM_DISABLE_NUMBA", "").strip().lower()
DISABLED = _flag not in ("", "0", "false", "no")

try:
    from numba import njit as _njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency in CI
    _njit = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not DISABLED
BACKEND = "numba" if USE_NUMBA else "numpy"


def njit(*args, **kwargs):
    """``numba.njit`` when available, otherwise an identity decorator."""
    if _njit is not None:
        return _njit(*args, **kwargs)
    if args and callable(args[0]):
        return args[0]
    return lambda f: f
