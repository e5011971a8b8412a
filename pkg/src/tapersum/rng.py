"""Reproducible random streams.

Every stream is a Philox counter-based generator keyed by ``(seed, stream_id)``
through :class:`numpy.random.SeedSequence`, so replicate ``r`` of a run draws
the same numbers no matter how replicates are scheduled across workers.
"""

import numpy as np

_OPEN_SCALE = 2.0**-53


def stream(seed, stream_id=0):
    """Independent generator for ``(seed, stream_id)``."""
    if isinstance(stream_id, (tuple, list)):
        key = tuple(int(s) for s in stream_id)
    else:
        key = (int(stream_id),)
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=key)
    return np.random.Generator(np.random.Philox(ss))


def open_uniform(rng, size=None):
    """Uniform draws on the open interval (0, 1).

    Uses 53-bit integers offset by one half, so neither endpoint can occur.
    """
    k = rng.integers(0, 2**53, size=size, dtype=np.int64)
    return (k + 0.5) * _OPEN_SCALE
