"""The compiled kernels and the numpy fallback must agree."""
import numpy as np
import pytest
from hypothesis import given, strategies as st

from novikov_inflation import _kernels_py, kernels

compiled = pytest.importorskip("novikov_inflation._kernels")


@given(
    st.lists(st.floats(-10, 10), min_size=1, max_size=200),
    st.floats(0.1, 1.0),
    st.floats(1.1, 3.0),
)
def test_smooth_cutoff_backends_agree(xs, r1, scale):
    xi = np.array(xs)
    r2 = r1 * scale
    a = _kernels_py.smooth_cutoff(xi, r1, r2)
    b = compiled.smooth_cutoff(xi, r1, r2)
    assert np.allclose(a, b, rtol=0, atol=1e-15)


def test_smooth_cutoff_shape():
    xi = np.linspace(-2, 2, 4001)
    c = kernels.smooth_cutoff(xi, 0.75, 4 / 3)
    assert np.all(c[np.abs(xi) <= 0.75] == 1.0)
    assert np.all(c[np.abs(xi) >= 4 / 3] == 0.0)
    mid = (np.abs(xi) > 0.8) & (np.abs(xi) < 1.25)
    assert np.all((c[mid] > 0) & (c[mid] < 1))
    # symmetric and non-increasing in |xi|
    assert np.array_equal(c, kernels.smooth_cutoff(-xi, 0.75, 4 / 3))
    assert np.all(np.diff(c[xi >= 0]) <= 0)


@given(st.integers(0, 2**31 - 1), st.integers(4, 12))
def test_gauss_interp_backends_agree(seed, msp):
    rng = np.random.default_rng(seed)
    n = 256
    vals = rng.normal(size=2 * n)
    theta = rng.uniform(0, 2 * np.pi, 300)
    tau = np.pi * msp / (n * n * 2 * 1.5)
    a = _kernels_py.gauss_interp(vals, theta, tau, msp)
    b = compiled.gauss_interp(vals, theta, tau, msp)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-12)


def test_backend_reported():
    assert kernels.BACKEND in ("cython", "python")
