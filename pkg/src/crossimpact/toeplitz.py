"""Symmetric block-Toeplitz systems: assembly, dense solve, Levinson fast path, ridge."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import _kernels
from .errors import NumericalError, ValidationError

RCOND_THRESHOLD = 1e-12
RIDGE_SCALE = 1e-10


class RegularizationWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SolveInfo:
    method: str
    rcond: float
    ridge: float

    def to_dict(self):
        return {"method": self.method, "rcond": self.rcond, "ridge": self.ridge}


def assemble(blocks: np.ndarray) -> np.ndarray:
    """Full ``(p n, p n)`` matrix with block ``(r, c)`` equal to ``A(c - r)``.

    Blocks below the diagonal use ``A(-m) = A(m)^T``, so the result is
    symmetric exactly whenever ``A(0)`` is.
    """
    blocks = np.asarray(blocks, dtype=float)
    p, n, _ = blocks.shape
    out = np.empty((p * n, p * n))
    for r in range(p):
        for c in range(p):
            blk = blocks[c - r] if c >= r else blocks[r - c].T
            out[r * n:(r + 1) * n, c * n:(c + 1) * n] = blk
    return out


def reciprocal_condition(mat: np.ndarray) -> float:
    ev = np.abs(np.linalg.eigvalsh(mat))
    top = ev.max()
    return float(ev.min() / top) if top > 0 else 0.0


def _ridge(mat: np.ndarray, allow: bool, threshold: float) -> tuple[float, float]:
    rc = reciprocal_condition(mat)
    if rc >= threshold:
        return rc, 0.0
    if not allow:
        raise NumericalError(
            f"block-Toeplitz matrix is ill-conditioned (reciprocal condition {rc:.3g} < {threshold:g})"
            " and regularization is disabled"
        )
    lam = RIDGE_SCALE * float(np.trace(mat)) / mat.shape[0]
    if lam <= 0:
        lam = RIDGE_SCALE
    warnings.warn(f"reciprocal condition {rc:.3g} below {threshold:g}; ridge {lam:.3g} applied",
                  RegularizationWarning, stacklevel=3)
    return rc, lam


def solve_dense(mat: np.ndarray, rhs: np.ndarray, *, allow_regularization: bool = True,
                threshold: float = RCOND_THRESHOLD) -> tuple[np.ndarray, SolveInfo]:
    """Solve a symmetric system by LDL^T (scipy ``assume_a='sym'``)."""
    mat = np.asarray(mat, dtype=float)
    rc, lam = _ridge(mat, allow_regularization, threshold)
    if lam:
        mat = mat + lam * np.eye(mat.shape[0])
    x = scipy.linalg.solve(mat, rhs, assume_a="sym", check_finite=True)
    return x, SolveInfo("dense", rc, lam)


def solve_block_toeplitz(blocks: np.ndarray, rhs: np.ndarray, method: str = "dense", *,
                         allow_regularization: bool = True,
                         threshold: float = RCOND_THRESHOLD) -> tuple[np.ndarray, SolveInfo]:
    """Solve ``T x = rhs`` with ``T = assemble(blocks)``.

    ``rhs`` and the returned ``x`` have shape ``(p, n, k)``.  ``method`` is
    ``"dense"`` (authoritative) or ``"levinson"`` (block Levinson recursion).
    """
    blocks = np.asarray(blocks, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    if blocks.ndim != 3 or blocks.shape[1] != blocks.shape[2]:
        raise ValidationError("blocks must have shape (p, n, n)")
    p, n, _ = blocks.shape
    if rhs.ndim == 2:
        rhs = rhs[:, :, None]
    if rhs.shape[:2] != (p, n):
        raise ValidationError(f"rhs must have shape ({p}, {n}, k)")
    if not np.allclose(blocks[0], blocks[0].T, rtol=0, atol=1e-14 * max(1.0, np.abs(blocks[0]).max())):
        raise ValidationError("lag-0 block must be symmetric")
    mat = assemble(blocks)
    if method == "dense":
        x, info = solve_dense(mat, rhs.reshape(p * n, -1), allow_regularization=allow_regularization,
                              threshold=threshold)
        return x.reshape(rhs.shape), info
    if method == "levinson":
        rc, lam = _ridge(mat, allow_regularization, threshold)
        b = blocks.copy()
        b[0] = 0.5 * (b[0] + b[0].T) + lam * np.eye(n)
        x = _kernels.block_levinson(b, rhs)
        if not np.all(np.isfinite(x)):
            raise NumericalError("block Levinson recursion broke down (singular leading minor)")
        return x, SolveInfo("levinson", rc, lam)
    raise ValidationError(f"unknown solve method {method!r}; expected 'dense' or 'levinson'")
