"""Hot numeric loops, each with a numba and a pure-numpy implementation.

The public functions dispatch on :func:`crossimpact._accel.backend`.  Both
implementations are kept importable (``*_numba`` / ``*_numpy``) so that tests
and ``benchmarks/bench_kernels.py`` can compare them directly.
"""

from __future__ import annotations

import numpy as np
from scipy.signal import lfilter

from ._accel import backend, njit


# ---------------------------------------------------------------------------
# AR(1) recursion  z[t] = phi * z[t-1] + e[t]
# ---------------------------------------------------------------------------

def _ar1_loop(innov, phi):
    n_steps, n = innov.shape
    out = np.empty_like(innov)
    for i in range(n):
        out[0, i] = innov[0, i]
    for t in range(1, n_steps):
        for i in range(n):
            out[t, i] = phi[i] * out[t - 1, i] + innov[t, i]
    return out


ar1_filter_numba = njit(_ar1_loop)


def ar1_filter_numpy(innov, phi):
    out = np.empty_like(innov)
    for i in range(innov.shape[1]):
        out[:, i] = lfilter([1.0], [1.0, -phi[i]], innov[:, i])
    return out


def ar1_filter(innov: np.ndarray, phi: np.ndarray) -> np.ndarray:
    innov = np.ascontiguousarray(innov, dtype=np.float64)
    phi = np.ascontiguousarray(phi, dtype=np.float64)
    if backend() == "numba":
        return ar1_filter_numba(innov, phi)
    return ar1_filter_numpy(innov, phi)


# ---------------------------------------------------------------------------
# Propagator convolution  r[t, i] = sum_n sum_j dH[n, i, j] a[t - n, j]
# restricted to t - n inside the same day.
# ---------------------------------------------------------------------------

def _propagate_loop(a, dH, day_starts):
    # scatter each trade forward; order flow is sparse so zero entries are skipped once
    n_steps, n = a.shape
    p = dH.shape[0]
    out = np.zeros((n_steps, n))
    n_days = day_starts.shape[0]
    for d in range(n_days):
        stop = day_starts[d + 1] if d + 1 < n_days else n_steps
        for src in range(day_starts[d], stop):
            lag_max = min(p, stop - src)
            for j in range(n):
                aj = a[src, j]
                if aj != 0.0:
                    for lag in range(lag_max):
                        t = src + lag
                        for i in range(n):
                            out[t, i] += dH[lag, i, j] * aj
    return out


propagate_numba = njit(_propagate_loop)


def propagate_numpy(a, dH, day_starts):
    n_steps = a.shape[0]
    out = np.zeros_like(a)
    bounds = list(day_starts) + [n_steps]
    for start, stop in zip(bounds[:-1], bounds[1:]):
        seg = a[start:stop]
        acc = out[start:stop]
        for lag in range(min(dH.shape[0], stop - start)):
            acc[lag:] += seg[: stop - start - lag] @ dH[lag].T
    return out


def propagate(a: np.ndarray, dH: np.ndarray, day_starts: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    dH = np.ascontiguousarray(dH, dtype=np.float64)
    day_starts = np.ascontiguousarray(day_starts, dtype=np.int64)
    if backend() == "numba":
        return propagate_numba(a, dH, day_starts)
    return propagate_numpy(a, dH, day_starts)


# ---------------------------------------------------------------------------
# Lagged cross moments  out[m, i, j] = sum_{t >= t0, t + m < T} b[t + m, i] a[t, j]
# ---------------------------------------------------------------------------

def _cross_moments_loop(a, b, maxlag, t0):
    n_steps, na = a.shape
    nb = b.shape[1]
    acc = np.zeros((maxlag, na, nb))
    for t in range(t0, n_steps):
        m_max = min(maxlag, n_steps - t)
        for j in range(na):
            aj = a[t, j]
            if aj != 0.0:
                for m in range(m_max):
                    for i in range(nb):
                        acc[m, j, i] += b[t + m, i] * aj
    out = np.empty((maxlag, nb, na))
    for m in range(maxlag):
        for i in range(nb):
            for j in range(na):
                out[m, i, j] = acc[m, j, i]
    return out


cross_moments_numba = njit(_cross_moments_loop)


def cross_moments_numpy(a, b, maxlag, t0):
    n_steps = a.shape[0]
    out = np.zeros((maxlag, b.shape[1], a.shape[1]))
    for m in range(min(maxlag, max(n_steps - t0, 0))):
        out[m] = b[t0 + m:].T @ a[t0:n_steps - m]
    return out


def cross_moments(a: np.ndarray, b: np.ndarray, maxlag: int, t0: int = 0) -> np.ndarray:
    """Sums of ``b[t+m] a[t]^T`` for ``m = 0..maxlag-1`` over ``t >= t0``."""
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    if backend() == "numba":
        return cross_moments_numba(a, b, int(maxlag), int(t0))
    return cross_moments_numpy(a, b, int(maxlag), int(t0))


# ---------------------------------------------------------------------------
# Block Levinson recursion for symmetric block-Toeplitz systems.
# Matrix blocks: T[r, c] = A(c - r), A(-m) = A(m)^T; blocks[m] = A(m).
# ---------------------------------------------------------------------------

def _levinson_loop(blocks, rhs):
    p, n, _ = blocks.shape
    k_rhs = rhs.shape[2]
    eye = np.eye(n)
    a0_inv = np.linalg.inv(blocks[0])
    fwd = np.zeros((p, n, n))
    bwd = np.zeros((p, n, n))
    x = np.zeros((p, n, k_rhs))
    fwd[0] = a0_inv
    bwd[0] = a0_inv
    x[0] = a0_inv @ rhs[0]
    new_fwd = np.zeros((p, n, n))
    new_bwd = np.zeros((p, n, n))
    for k in range(1, p):
        ef = np.zeros((n, n))
        eb = np.zeros((n, n))
        ex = np.zeros((n, k_rhs))
        for c in range(k):
            lower = np.ascontiguousarray(blocks[k - c].T)
            ef += lower @ fwd[c]
            eb += blocks[c + 1] @ bwd[c]
            ex += lower @ x[c]
        gx = np.linalg.inv(eye - eb @ ef)
        gy = -ef @ gx
        gv = np.linalg.inv(eye - ef @ eb)
        gu = -eb @ gv
        for c in range(k + 1):
            new_fwd[c] = 0.0
            new_bwd[c] = 0.0
        for c in range(k):
            new_fwd[c] += fwd[c] @ gx
            new_fwd[c + 1] += bwd[c] @ gy
            new_bwd[c] += fwd[c] @ gu
            new_bwd[c + 1] += bwd[c] @ gv
        for c in range(k + 1):
            fwd[c] = new_fwd[c]
            bwd[c] = new_bwd[c]
        resid = rhs[k] - ex
        for c in range(k + 1):
            x[c] += bwd[c] @ resid
    return x


block_levinson_numba = njit(_levinson_loop)


def block_levinson_numpy(blocks, rhs):
    p, n, _ = blocks.shape
    eye = np.eye(n)
    a0_inv = np.linalg.inv(blocks[0])
    fwd = a0_inv[None].copy()
    bwd = a0_inv[None].copy()
    x = (a0_inv @ rhs[0])[None]
    lower = np.transpose(blocks, (0, 2, 1))
    for k in range(1, p):
        # row k of the (k+1)-block matrix uses A(c - k) = A(k - c)^T
        low = lower[k:0:-1]
        ef = np.einsum("cij,cjk->ik", low, fwd)
        eb = np.einsum("cij,cjk->ik", blocks[1:k + 1], bwd)
        ex = np.einsum("cij,cjk->ik", low, x)
        gx = np.linalg.inv(eye - eb @ ef)
        gy = -ef @ gx
        gv = np.linalg.inv(eye - ef @ eb)
        gu = -eb @ gv
        zero = np.zeros((1, n, n))
        fwd_ext = np.concatenate([fwd, zero])
        bwd_ext = np.concatenate([zero, bwd])
        fwd, bwd = fwd_ext @ gx + bwd_ext @ gy, fwd_ext @ gu + bwd_ext @ gv
        x = np.concatenate([x, np.zeros((1,) + x.shape[1:])]) + bwd @ (rhs[k] - ex)
    return x


def block_levinson(blocks: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``T x = rhs`` for a symmetric block-Toeplitz ``T``.

    ``blocks`` has shape ``(p, n, n)`` with ``blocks[m] = A(m)`` (first block
    row of ``T``); ``rhs`` has shape ``(p, n, k)``.  Returns ``x`` with the
    same shape as ``rhs``.
    """
    blocks = np.ascontiguousarray(blocks, dtype=np.float64)
    rhs = np.ascontiguousarray(rhs, dtype=np.float64)
    if backend() == "numba":
        return block_levinson_numba(blocks, rhs)
    return block_levinson_numpy(blocks, rhs)
