"""The numba and numpy kernel sets must agree; the FFT path must match direct summation."""

import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, strategies as st

from tapersum import kernels
from tapersum._accel import HAVE_NUMBA
from tapersum.filters import FilterSpec, coefficients
from tapersum.rng import open_uniform, stream

needs_numba = pytest.mark.skipif(not HAVE_NUMBA, reason="numba not installed")


@pytest.fixture
def uniforms():
    r = stream(5, 0)
    return open_uniform(r, 10_000), open_uniform(r, 10_000)


@needs_numba
class TestBackendsAgree:
    @pytest.mark.parametrize("alpha, b", [(0.5, 2.0), (1.5, 10.0), (1.9, 1e4)])
    def test_quantile(self, uniforms, alpha, b):
        u, _ = uniforms
        np.testing.assert_allclose(kernels.NUMBA_KERNELS["tp_quantile_array"](u, alpha, b),
                                   kernels.NUMPY_KERNELS["tp_quantile_array"](u, alpha, b),
                                   rtol=1e-13)

    def test_coupled(self, uniforms):
        got = kernels.NUMBA_KERNELS["coupled_transform"](*uniforms, 1.5, 10.0)
        want = kernels.NUMPY_KERNELS["coupled_transform"](*uniforms, 1.5, 10.0)
        for g, w in zip(got, want):
            np.testing.assert_allclose(g, w, rtol=1e-13)

    def test_direct_increments(self):
        a = coefficients(FilterSpec.power_law(0.75), 96)
        e = stream(1, 0).standard_normal((3, 96))
        np.testing.assert_allclose(kernels.NUMBA_KERNELS["direct_increments"](a, e, 32, 64),
                                   kernels.NUMPY_KERNELS["direct_increments"](a, e, 32, 64),
                                   rtol=1e-12, atol=1e-12)


class TestFftPath:
    @given(st.integers(1, 40), st.integers(1, 60), st.floats(0.6, 2.5).filter(lambda b: b != 1.0))
    def test_matches_direct(self, n, J, beta):
        a = coefficients(FilterSpec.power_law(beta), n + J)
        e = stream(2, n * 100 + J).standard_normal((2, n + J))
        np.testing.assert_allclose(kernels.fft_increments(a, e, n, J),
                                   kernels.NUMPY_KERNELS["direct_increments"](a, e, n, J),
                                   rtol=1e-9, atol=1e-9)


def test_env_flag_selects_numpy():
    code = "from tapersum._accel import BACKEND; print(BACKEND)"
    env = dict(os.environ, TAPERSUM_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.stdout.strip() == "numpy"
