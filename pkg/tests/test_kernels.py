"""Numba and numpy backends agree, and each matches a naive reference."""

import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.signal import lfilter

from crossimpact import _accel, _kernels
from crossimpact.simulate import SimConfig, planted_kernel, simulate


@pytest.fixture
def numpy_backend():
    prev = _accel.backend()
    _accel.set_backend("numpy")
    yield
    _accel.set_backend(prev)


def flow(rng, steps, n, density=0.5):
    a = rng.choice([-1.0, 1.0], size=(steps, n)) * (rng.random((steps, n)) < density)
    return a


def naive_propagate(a, dH, day_starts):
    steps, n = a.shape
    bounds = list(day_starts) + [steps]
    out = np.zeros((steps, n))
    for d in range(len(day_starts)):
        for t in range(bounds[d], bounds[d + 1]):
            for lag in range(dH.shape[0]):
                if t - lag >= bounds[d]:
                    out[t] += dH[lag] @ a[t - lag]
    return out


def naive_moments(a, b, maxlag, t0):
    out = np.zeros((maxlag, b.shape[1], a.shape[1]))
    for m in range(maxlag):
        for t in range(t0, a.shape[0] - m):
            out[m] += np.outer(b[t + m], a[t])
    return out


@given(seed=st.integers(0, 2**31), steps=st.integers(1, 60), n=st.integers(1, 4), p=st.integers(1, 8),
       n_days=st.integers(1, 4))
@settings(max_examples=40, deadline=None)
def test_propagate_backends(seed, steps, n, p, n_days):
    rng = np.random.default_rng(seed)
    a = flow(rng, steps, n)
    dH = rng.standard_normal((p, n, n))
    cuts = np.unique(np.concatenate([[0], rng.integers(0, steps, n_days - 1)])).astype(np.int64)
    ref = naive_propagate(a, dH, cuts)
    np.testing.assert_allclose(_kernels.propagate_numba(a, dH, cuts), ref, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(_kernels.propagate_numpy(a, dH, cuts), ref, rtol=1e-12, atol=1e-12)


@given(seed=st.integers(0, 2**31), steps=st.integers(1, 50), na=st.integers(1, 3), nb=st.integers(1, 3),
       maxlag=st.integers(1, 10), t0=st.integers(0, 5))
@settings(max_examples=40, deadline=None)
def test_cross_moments_backends(seed, steps, na, nb, maxlag, t0):
    rng = np.random.default_rng(seed)
    a = flow(rng, steps, na)
    b = rng.standard_normal((steps, nb))
    ref = naive_moments(a, b, maxlag, t0)
    np.testing.assert_allclose(_kernels.cross_moments_numba(a, b, maxlag, t0), ref, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(_kernels.cross_moments_numpy(a, b, maxlag, t0), ref, rtol=1e-12, atol=1e-12)


@given(seed=st.integers(0, 2**31), steps=st.integers(1, 200), n=st.integers(1, 4))
@settings(max_examples=30, deadline=None)
def test_ar1_backends(seed, steps, n):
    rng = np.random.default_rng(seed)
    e = rng.standard_normal((steps, n))
    phi = rng.uniform(-0.95, 0.95, n)
    ref = np.column_stack([lfilter([1.0], [1.0, -phi[i]], e[:, i]) for i in range(n)])
    np.testing.assert_allclose(_kernels.ar1_filter_numba(e, phi), ref, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(_kernels.ar1_filter_numpy(e, phi), ref, rtol=1e-10, atol=1e-12)


@given(seed=st.integers(0, 2**31), p=st.integers(1, 12), n=st.integers(1, 4), k=st.integers(1, 3))
@settings(max_examples=40, deadline=None)
def test_levinson_backends_match_dense(seed, p, n, k):
    from crossimpact.toeplitz import assemble
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((40 * p * n, n)) @ (np.eye(n) + 0.3 * rng.standard_normal((n, n)))
    blocks = np.stack([x[m:].T @ x[: x.shape[0] - m] for m in range(p)]) / x.shape[0]
    rhs = rng.standard_normal((p, n, k))
    dense = np.linalg.solve(assemble(blocks), rhs.reshape(p * n, k)).reshape(p, n, k)
    np.testing.assert_allclose(_kernels.block_levinson_numba(blocks, rhs), dense, rtol=1e-8, atol=1e-9)
    np.testing.assert_allclose(_kernels.block_levinson_numpy(blocks, rhs), dense, rtol=1e-8, atol=1e-9)


def test_set_backend_roundtrip(numpy_backend):
    assert _accel.backend() == "numpy"
    with pytest.raises(ValueError):
        _accel.set_backend("fortran")


def test_simulation_identical_across_backends():
    H = planted_kernel(2, 5, 1e-4, 2e-5)
    cfg = SimConfig(2, H, 3000, seed=5, sign_persistence=0.4, noise_vol=1e-4, steps_per_day=500)
    prev = _accel.backend()
    try:
        _accel.set_backend("numba")
        fast = simulate(cfg)
        _accel.set_backend("numpy")
        slow = simulate(cfg)
    finally:
        _accel.set_backend(prev)
    np.testing.assert_array_equal(fast.signs, slow.signs)
    np.testing.assert_allclose(fast.mid_log, slow.mid_log, rtol=0, atol=1e-13)


def test_env_flag_selects_numpy():
    code = "from crossimpact import _accel; print(_accel.backend())"
    env = dict(os.environ, CROSSIMPACT_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
    env["CROSSIMPACT_DISABLE_NUMBA"] = "0"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numba"
