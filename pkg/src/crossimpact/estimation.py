"""Response functions, impact curves, propagator estimation and symmetry tests.

Conventions (combined trade time): ``X_t`` is the log mid just before step
``t``; ``r_t = X_{t+1} - X_t``; the signed flow is ``a_t = eps_t I_t`` (or
``eps_t W_t I_t`` in value mode) and the model is

    r^i_t = sum_{n >= 0} sum_j calH^{ij}(n) a^j_{t-n} + noise,

with the sum restricted to the current day.  ``H(l) = sum_{n < l} calH(n)``
so ``H(0) = 0`` and ``H(1) = calH(0)``.
"""

from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
import scipy.stats
from numpy.lib.stride_tricks import sliding_window_view

from . import _kernels
from .errors import NumericalError, ValidationError
from .model import KernelSpec, Linear, Permanent, Tabulated
from .tape import MarketTape
from .toeplitz import RegularizationWarning, SolveInfo, solve_block_toeplitz, solve_dense

log = logging.getLogger(__name__)

AGGREGATIONS = ("weekly", "biweekly", "monthly")
WEIGHTINGS = ("trades", "unweighted", "pooled")
MODES = ("events", "value")
ISOLATION_DEFAULT = (3.0, 2.0)


def _mode(mode: str) -> str:
    m = {"per_event": "events", "per_value": "value"}.get(mode, mode)
    if m not in MODES:
        raise ValidationError(f"unknown mode {mode!r}; expected 'events' or 'value'")
    return m


# ---------------------------------------------------------------------------
# Windows
# ---------------------------------------------------------------------------


def window_labels(tape: MarketTape, aggregation: str) -> np.ndarray:
    """Integer window label per day (ISO weeks, pairs of weeks, or months)."""
    dates = tape.day_dates()
    if aggregation in ("weekly", "biweekly"):
        # Monday-anchored week number since the epoch (1970-01-01 was a Thursday)
        week = (dates.astype(np.int64) + 3) // 7
        if aggregation == "biweekly":
            week = (week - week[0]) // 2
        return np.unique(week, return_inverse=True)[1]
    if aggregation == "monthly":
        return np.unique(dates.astype("datetime64[M]").astype(np.int64), return_inverse=True)[1]
    raise ValidationError(f"unknown aggregation {aggregation!r}; expected one of {', '.join(AGGREGATIONS)}")


# ---------------------------------------------------------------------------
# Response function
# ---------------------------------------------------------------------------


@dataclass
class ResponseFunction:
    lags: np.ndarray
    R: np.ndarray
    stderr: np.ndarray
    counts: np.ndarray
    asset_ids: tuple[str, ...]

    def rows(self):
        for k, lag in enumerate(self.lags):
            for i in range(self.R.shape[1]):
                for j in range(self.R.shape[2]):
                    yield int(lag), i, j, self.R[k, i, j], self.stderr[k, i, j], int(self.counts[k, j])


def _day_index(tape: MarketTape) -> np.ndarray:
    idx = np.zeros(tape.n_steps, dtype=np.int64)
    idx[tape.day_starts[1:]] = 1
    return np.cumsum(idx)


def response(tape: MarketTape, lags: Sequence[int], weighting: str = "trades") -> ResponseFunction:
    """Sign-conditioned return ``R^{ij}(lag) = E[(X^i_{t+lag} - X^i_t) eps^j_t I^j_t]``.

    Only pairs ``(t, t + lag)`` inside one day contribute.  ``weighting``
    ``"trades"`` pools all trades (days weighted by their trade counts in the
    triggering asset); ``"unweighted"`` averages daily means.
    """
    if weighting not in ("trades", "unweighted", "pooled"):
        raise ValidationError(f"unknown weighting {weighting!r}")
    lags = np.asarray(lags, dtype=np.int64).ravel()
    if lags.size == 0:
        raise ValidationError("at least one lag is required")
    if np.any(np.abs(lags) > tape.n_steps - 1):
        raise ValidationError(f"lags must lie within +/-{tape.n_steps - 1}")
    N = tape.n_assets
    X = tape.mid_log
    A = tape.signs.astype(float)
    day = _day_index(tape)
    R = np.full((lags.size, N, N), np.nan)
    SE = np.full((lags.size, N, N), np.nan)
    counts = np.zeros((lags.size, N), dtype=np.int64)
    for k, lag in enumerate(lags):
        if lag == 0:
            counts[k] = np.count_nonzero(A, axis=0)
            R[k] = 0.0
            SE[k] = 0.0
            continue
        t = np.arange(max(0, -lag), tape.n_steps - max(0, lag))
        t = t[day[t + lag] == day[t]]
        D = X[t + lag] - X[t]
        At = A[t]
        n = np.abs(At).sum(axis=0)
        counts[k] = n.astype(np.int64)
        with np.errstate(invalid="ignore", divide="ignore"):
            if weighting == "unweighted":
                dt = day[t]
                ud, inv = np.unique(dt, return_inverse=True)
                sums = np.zeros((ud.size, N, N))
                np.add.at(sums, inv, D[:, :, None] * At[:, None, :])
                nd = np.zeros((ud.size, N))
                np.add.at(nd, inv, np.abs(At))
                means = sums / nd[:, None, :]
                R[k] = np.nanmean(np.where(nd[:, None, :] > 0, means, np.nan), axis=0) if ud.size else np.nan
                m = np.sum(nd[:, None, :] > 0, axis=0)
                sd = np.nanstd(np.where(nd[:, None, :] > 0, means, np.nan), axis=0, ddof=1)
                SE[k] = sd / np.sqrt(m)
            else:
                s1 = D.T @ At
                s2 = (D * D).T @ np.abs(At)
                mean = s1 / n
                var = (s2 / n - mean**2) * n / (n - 1)
                R[k] = mean
                SE[k] = np.sqrt(np.maximum(var, 0) / n)
    return ResponseFunction(lags, R, SE, counts, tape.asset_ids)


# ---------------------------------------------------------------------------
# Impact curves
# ---------------------------------------------------------------------------


def n_bins(n_trades: int) -> int:
    return int(min(max(math.isqrt(max(n_trades, 0)) // 5, 5), 50))


@dataclass
class CurveCell:
    edges: np.ndarray
    centers: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    counts: np.ndarray
    slope: float
    slope_stderr: float


@dataclass
class ImpactCurve:
    horizon: float
    unit: str
    isolated: bool
    isolation_window: tuple[float, float] | None
    cells: dict[tuple[int, int], CurveCell]
    n_conditioning: np.ndarray
    asset_ids: tuple[str, ...]

    def rows(self):
        for (i, j), c in sorted(self.cells.items()):
            for b in range(c.mean.size):
                yield i, j, c.edges[b], c.edges[b + 1], c.centers[b], c.mean[b], c.stderr[b], int(c.counts[b])


def isolated_mask(tape: MarketTape, window: tuple[float, float]) -> np.ndarray:
    """True at steps carrying a single trade with no other step within ``window`` seconds."""
    before, after = (int(round(1000 * w)) for w in window)
    ts = tape.timestamps
    lo = np.searchsorted(ts, ts - before, side="left")
    hi = np.searchsorted(ts, ts + after, side="right")
    alone = (hi - lo) == 1
    return alone & (np.count_nonzero(tape.signs, axis=1) == 1)


def _future_mid(tape: MarketTape, horizon: float, unit: str):
    """Log mid at ``t + horizon`` for every step (NaN where it leaves the day)."""
    N = tape.n_assets
    day = _day_index(tape)
    out = np.full((tape.n_steps, N), np.nan)
    if unit == "steps":
        h = int(horizon)
        if h != horizon or h < 1:
            raise ValidationError("a step horizon must be a positive integer")
        if h >= tape.n_steps:
            raise ValidationError(f"horizon {h} exceeds the tape span ({tape.n_steps} steps)")
        t = np.arange(tape.n_steps - h)
        ok = day[t + h] == day[t]
        out[t[ok]] = tape.mid_log[t[ok] + h]
        return out
    h_ms = int(round(1000 * horizon))
    if h_ms <= 0:
        raise ValidationError("horizon must be positive")
    span = int(tape.timestamps[-1] - tape.timestamps[0])
    if h_ms > span:
        raise ValidationError(f"horizon {horizon} s exceeds the tape span ({span / 1000:g} s)")
    target = tape.timestamps + h_ms
    tday = target // 86_400_000
    sday = tape.timestamps // 86_400_000
    if tape.quotes is not None:
        for i in range(N):
            out[:, i] = tape.quotes.mid_before(i, target)
        out[tday != sday] = np.nan
        return out
    # without a quote stream: the mid just before the first step at or after the target
    k = np.searchsorted(tape.timestamps, target, side="left")
    ok = k < tape.n_steps
    ok[ok] &= day[k[ok]] == day[np.flatnonzero(ok)]
    out[ok] = tape.mid_log[k[ok]]
    return out


def _equal_count_edges(v: np.ndarray) -> np.ndarray:
    if v.size == 0:
        return np.array([0.0, 0.0])
    if np.ptp(v) == 0:
        return np.array([v[0], v[0]])
    edges = np.unique(np.quantile(v, np.linspace(0, 1, n_bins(v.size) + 1)))
    return edges


def impact_curve(tape: MarketTape, horizon: float, isolation_window: tuple[float, float] | None = None,
                 unit: str | None = None) -> ImpactCurve:
    """Volume-binned mean signed return ``E[(X^i_{t+h} - X^i_t) eps^j_t | V^j_t]``.

    ``horizon`` is in steps for synthetic tapes and seconds for ingested ones
    (override with ``unit``).  With ``isolation_window=(before, after)`` in
    seconds only trades with no other trade in that window condition the curve.
    """
    unit = unit or tape.time_unit
    if unit not in ("steps", "seconds"):
        raise ValidationError("unit must be 'steps' or 'seconds'")
    fut = _future_mid(tape, horizon, unit)
    ret = fut - tape.mid_log
    keep = np.ones(tape.n_steps, dtype=bool)
    if isolation_window is not None:
        keep = isolated_mask(tape, isolation_window)
    N = tape.n_assets
    cells = {}
    n_cond = np.zeros(N, dtype=np.int64)
    for j in range(N):
        t = np.flatnonzero((tape.signs[:, j] != 0) & keep & np.all(np.isfinite(ret), axis=1))
        n_cond[j] = t.size
        V = tape.volumes[t, j]
        eps = tape.signs[t, j].astype(float)
        edges = _equal_count_edges(V)
        nb = edges.size - 1
        b = np.clip(np.searchsorted(edges, V, side="right") - 1, 0, nb - 1) if t.size else np.zeros(0, int)
        cnt = np.bincount(b, minlength=nb)
        centers = np.bincount(b, weights=V, minlength=nb) / np.maximum(cnt, 1)
        for i in range(N):
            y = ret[t, i] * eps
            s1 = np.bincount(b, weights=y, minlength=nb)
            s2 = np.bincount(b, weights=y * y, minlength=nb)
            with np.errstate(invalid="ignore", divide="ignore"):
                mean = np.where(cnt > 0, s1 / cnt, np.nan)
                var = np.where(cnt > 1, (s2 - cnt * mean**2) / (cnt - 1), np.nan)
                se = np.sqrt(np.maximum(var, 0) / cnt)
            slope, slope_se = _slope_through_origin(V, y)
            cells[(i, j)] = CurveCell(edges, centers, mean, se, cnt, slope, slope_se)
    return ImpactCurve(float(horizon), unit, isolation_window is not None,
                       tuple(isolation_window) if isolation_window is not None else None,
                       cells, n_cond, tape.asset_ids)


def _slope_through_origin(x, y):
    sxx = float(np.dot(x, x))
    if x.size < 2 or sxx == 0:
        return float("nan"), float("nan")
    beta = float(np.dot(x, y)) / sxx
    resid = y - beta * x
    # heteroskedasticity-robust (HC0) standard error
    se = math.sqrt(float(np.dot(x * x, resid * resid))) / sxx
    return beta, se


# ---------------------------------------------------------------------------
# Propagator
# ---------------------------------------------------------------------------


@dataclass
class PropagatorEstimate:
    p: int
    mode: str
    S_tilde: np.ndarray | None
    C_tilde: np.ndarray | None
    calH: np.ndarray
    H: np.ndarray
    rcond: float
    ridge: float
    asset_ids: tuple[str, ...]
    weighting: str
    moments: str
    method: str
    aggregation: str | None = None
    window_labels: list[int] = field(default_factory=list)
    window_H: np.ndarray | None = None
    stderr: np.ndarray | None = None
    trade_counts: np.ndarray | None = None
    skipped_days: int = 0
    skipped_windows: int = 0
    regularized_windows: int = 0

    @property
    def n_assets(self) -> int:
        return self.H.shape[1]

    @property
    def kernel_name(self) -> str:
        return "K" if self.mode == "value" else "H"

    def rows(self):
        """(lag, i, j, H, stderr, count) with count = trades in the triggering asset."""
        for lag in range(self.H.shape[0]):
            for i in range(self.n_assets):
                for j in range(self.n_assets):
                    se = self.stderr[lag, i, j] if self.stderr is not None else float("nan")
                    cnt = int(self.trade_counts[j]) if self.trade_counts is not None else 0
                    yield lag, i, j, float(self.H[lag, i, j]), float(se), cnt

    def summary(self) -> dict[str, Any]:
        return {
            "p": self.p, "mode": self.mode, "kernel": self.kernel_name, "weighting": self.weighting,
            "moments": self.moments, "method": self.method, "rcond": self.rcond, "ridge": self.ridge,
            "aggregation": self.aggregation, "n_windows": len(self.window_labels),
            "skipped_days": self.skipped_days, "skipped_windows": self.skipped_windows,
            "regularized_windows": self.regularized_windows,
            "asset_ids": list(self.asset_ids), "H1": self.H[1].tolist(),
        }


class _Acc:
    """Weighted sums of daily moments for one window (or the full sample)."""

    def __init__(self, p, N, exact):
        self.exact = exact
        if exact:
            self.G = np.zeros((p * N, p * N))
            self.b = np.zeros((p * N, N))
        else:
            self.S_num = np.zeros((p, N, N))
            self.S_den = np.zeros((p, N, N))
            self.C_num = np.zeros((p, N, N))
            self.C_den = np.zeros((p, N, N))
        self.days = 0

    def add(self, st):
        self.days += 1
        if self.exact:
            self.G += st[0]
            self.b += st[1]
        else:
            sn, sd, cn, cd = st
            self.S_num += sn
            self.S_den += sd
            self.C_num += cn
            self.C_den += cd


def _toeplitz_day(a, r, p, weighting, n_tr):
    L = a.shape[0]
    burn = p - 1
    rm = r.copy()
    rm[:burn] = 0.0
    rm[L - 1] = 0.0
    c_sum = _kernels.cross_moments(a, a, p)
    s_sum = _kernels.cross_moments(a, rm, p)
    c_cnt = (L - np.arange(p)).astype(float)[:, None, None]
    s_cnt = float(L - 1 - burn)
    if weighting == "pooled":
        return s_sum, np.full_like(s_sum, s_cnt), c_sum, np.broadcast_to(c_cnt, c_sum.shape).copy()
    if weighting == "trades":
        ws = np.broadcast_to(n_tr[None, None, :], s_sum.shape).astype(float)
        wc = np.broadcast_to(np.sqrt(np.outer(n_tr, n_tr))[None], c_sum.shape).astype(float)
    else:
        ws = np.ones_like(s_sum)
        wc = np.ones_like(c_sum)
    return ws * s_sum / s_cnt, ws, wc * c_sum / c_cnt, wc


def _exact_day(a, r, p):
    L, N = a.shape
    pad = np.vstack([np.zeros((p - 1, N)), a])
    win = sliding_window_view(pad, p, axis=0)[: L - 1]  # (L-1, N, p): a[s-p+1..s]
    X = win[:, :, ::-1].transpose(0, 2, 1).reshape(L - 1, p * N)
    return X.T @ X, X.T @ r[: L - 1]


def _solve(acc: _Acc, p, N, method, allow_regularization):
    if acc.exact:
        x, info = solve_dense(acc.G, acc.b, allow_regularization=allow_regularization)
        calH = x.reshape(p, N, N).transpose(0, 2, 1)
        return None, None, calH, info
    with np.errstate(invalid="ignore", divide="ignore"):
        S = acc.S_num / acc.S_den
        C = acc.C_num / acc.C_den
    if not (np.all(np.isfinite(S)) and np.all(np.isfinite(C))):
        raise ValidationError("some asset has no trades in the sample; moments are undefined")
    C[0] = 0.5 * (C[0] + C[0].T)
    rhs = S.transpose(0, 2, 1)
    x, info = solve_block_toeplitz(C, rhs, method, allow_regularization=allow_regularization)
    calH = x.transpose(0, 2, 1)
    return S, C, calH, info


def _cumulative(calH):
    p, N, _ = calH.shape
    return np.concatenate([np.zeros((1, N, N)), np.cumsum(calH, axis=0)])


def estimate_propagator(tape: MarketTape, p: int = 128, mode: str = "events", *,
                        weighting: str = "trades", aggregation: str | None = "weekly",
                        method: str = "dense", moments: str = "toeplitz", demean: bool = False,
                        allow_regularization: bool = True, min_steps_factor: float = 10.0,
                        threads: int = 1) -> PropagatorEstimate:
    """Solve ``S~ = calH C~`` for the propagator increments.

    ``moments="toeplitz"`` builds ``S~`` and ``C~`` from daily sample averages
    (the first ``p - 1`` returns of each day are skipped so that every
    regressor lag lies in the day).  ``moments="exact"`` instead solves the
    pooled least-squares normal equations with regressors zero-padded at the
    day start, which reproduces noiseless data exactly.  When ``aggregation``
    is set, the same system is solved per window and the spread of window
    estimates gives standard errors for the full-sample ``H``.
    """
    mode = _mode(mode)
    p = int(p)
    if p < 1:
        raise ValidationError("p must be at least 1")
    if weighting not in WEIGHTINGS:
        raise ValidationError(f"unknown weighting {weighting!r}; expected one of {', '.join(WEIGHTINGS)}")
    if moments not in ("toeplitz", "exact"):
        raise ValidationError("moments must be 'toeplitz' or 'exact'")
    N = tape.n_assets
    if tape.n_steps < min_steps_factor * N * p:
        raise ValidationError(
            f"tape has {tape.n_steps} steps; at least {min_steps_factor:g} * N * p = "
            f"{int(min_steps_factor * N * p)} are required"
        )
    bounds = tape.day_bounds()
    longest = max(b - a for a, b in bounds)
    if p >= longest:
        raise ValidationError(f"p={p} must be smaller than the per-day step count ({longest})")
    exact = moments == "exact"
    flow = tape.signed_flow(mode)
    if demean:
        flow = flow - flow.mean(axis=0)
    ret = tape.returns()
    labels = window_labels(tape, aggregation) if aggregation else np.zeros(len(bounds), dtype=np.int64)
    n_win = int(labels.max()) + 1 if len(bounds) else 0
    full = _Acc(p, N, exact)
    wins = [_Acc(p, N, exact) for _ in range(n_win)]
    min_len = 2 if exact else p + 1

    def day_stats(d):
        d0, d1 = bounds[d]
        if d1 - d0 < min_len:
            return None
        a = flow[d0:d1]
        r = np.nan_to_num(ret[d0:d1])
        if exact:
            return _exact_day(a, r, p)
        n_tr = np.count_nonzero(tape.signs[d0:d1], axis=0).astype(float)
        return _toeplitz_day(a, r, p, weighting, n_tr)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            stats = list(ex.map(day_stats, range(len(bounds))))
    else:
        stats = [day_stats(d) for d in range(len(bounds))]
    skipped = 0
    for d, st in enumerate(stats):
        if st is None:
            skipped += 1
            continue
        full.add(st)
        wins[labels[d]].add(st)
    if full.days == 0:
        raise ValidationError(f"no day has more than p={p} steps")

    S, C, calH, info = _solve(full, p, N, method, allow_regularization)
    H = _cumulative(calH)

    window_H, used, skipped_w, regularized = [], [], 0, 0
    if aggregation:
        for w, acc in enumerate(wins):
            if acc.days == 0:
                skipped_w += 1
                continue
            try:
                with warnings.catch_warnings(record=True) as caught:
                    warnings.simplefilter("always", RegularizationWarning)
                    _, _, ch, winfo = _solve(acc, p, N, method, allow_regularization)
                if winfo.ridge:
                    regularized += 1
                if caught:
                    log.debug("window %d regularized", w)
            except (ValidationError, NumericalError, np.linalg.LinAlgError):
                skipped_w += 1
                continue
            window_H.append(_cumulative(ch))
            used.append(w)
    wH = np.array(window_H) if window_H else None
    stderr = None
    if wH is not None and wH.shape[0] >= 2:
        stderr = wH.std(axis=0, ddof=1) / math.sqrt(wH.shape[0])
    return PropagatorEstimate(
        p=p, mode=mode, S_tilde=S, C_tilde=C, calH=calH, H=H, rcond=info.rcond, ridge=info.ridge,
        asset_ids=tape.asset_ids, weighting=weighting, moments=moments, method=info.method,
        aggregation=aggregation, window_labels=used, window_H=wH, stderr=stderr,
        trade_counts=tape.trade_counts(), skipped_days=skipped, skipped_windows=skipped_w,
        regularized_windows=regularized,
    )


# ---------------------------------------------------------------------------
# Symmetry test
# ---------------------------------------------------------------------------


LEVELS = (0.01, 0.05, 0.10)


@dataclass
class PairTest:
    i: int
    j: int
    samples: np.ndarray
    t: float
    p_value: float
    df: int

    def rejected(self, level: float) -> bool:
        return bool(np.isfinite(self.p_value) and self.p_value < level)


@dataclass
class SymmetryTest:
    mode: str
    aggregation: str
    pairs: list[PairTest]
    n_windows: int
    skipped_windows: int
    asset_ids: tuple[str, ...]
    note: str = ""

    def rejection_rates(self) -> dict[float, float]:
        """Percentage of pairs rejected at each level (NaN when there are no testable pairs)."""
        valid = [pt for pt in self.pairs if np.isfinite(pt.p_value)]
        if not valid:
            return {lv: float("nan") for lv in LEVELS}
        return {lv: 100.0 * sum(pt.rejected(lv) for pt in valid) / len(valid) for lv in LEVELS}

    def rows(self):
        for pt in self.pairs:
            yield (self.asset_ids[pt.i], self.asset_ids[pt.j], float(np.mean(pt.samples)) if pt.samples.size
                   else float("nan"), pt.t, pt.p_value, pt.df)

    def summary(self):
        return {"mode": self.mode, "aggregation": self.aggregation, "n_windows": self.n_windows,
                "skipped_windows": self.skipped_windows, "n_pairs": len(self.pairs),
                "rejection_pct": {f"{int(lv * 100)}%": v for lv, v in self.rejection_rates().items()},
                "note": self.note}


def delta_h_samples(est: PropagatorEstimate) -> dict[tuple[int, int], np.ndarray]:
    """``H_w^{ij}(1) - H_w^{ji}(1)`` per window for each pair ``i < j``."""
    N = est.n_assets
    if est.window_H is None:
        return {(i, j): np.zeros(0) for i in range(N) for j in range(i + 1, N)}
    h1 = est.window_H[:, 1]
    return {(i, j): h1[:, i, j] - h1[:, j, i] for i in range(N) for j in range(i + 1, N)}


def t_test(samples: np.ndarray) -> tuple[float, float, int]:
    """One-sample two-sided t-test of zero mean; NaN when fewer than two samples."""
    samples = np.asarray(samples, dtype=float)
    if samples.size < 2:
        return float("nan"), float("nan"), max(samples.size - 1, 0)
    if np.all(samples == samples[0]):
        if samples[0] == 0:
            return float("nan"), float("nan"), samples.size - 1
        return math.copysign(math.inf, samples[0]), 0.0, samples.size - 1
    res = scipy.stats.ttest_1samp(samples, 0.0)
    return float(res.statistic), float(res.pvalue), samples.size - 1


def symmetry_from_estimate(est: PropagatorEstimate) -> SymmetryTest:
    pairs = []
    for (i, j), s in delta_h_samples(est).items():
        t, pv, df = t_test(s)
        pairs.append(PairTest(i, j, s, t, pv, df))
    n = len(est.window_labels)
    note = "" if n >= 2 else "fewer than 2 windows: t statistics undefined"
    return SymmetryTest(est.mode, est.aggregation or "", pairs, n, est.skipped_windows, est.asset_ids, note)


def symmetry_test(tape: MarketTape, p: int, aggregation: str = "weekly", mode: str = "events",
                  **kwargs) -> SymmetryTest:
    """Per-pair t-test of ``H^{ij}(1) = H^{ji}(1)`` across disjoint windows."""
    if aggregation not in AGGREGATIONS:
        raise ValidationError(f"unknown aggregation {aggregation!r}; expected one of {', '.join(AGGREGATIONS)}")
    est = estimate_propagator(tape, p, mode, aggregation=aggregation, **kwargs)
    return symmetry_from_estimate(est)


def rejection_table(tests: Sequence[SymmetryTest]) -> list[list[Any]]:
    """Rows ``[mode, aggregation, pct@1%, pct@5%, pct@10%]``."""
    rows = []
    for st in tests:
        rates = st.rejection_rates()
        rows.append([st.mode, st.aggregation] + [rates[lv] for lv in LEVELS])
    return rows


# ---------------------------------------------------------------------------
# Back to kernel form
# ---------------------------------------------------------------------------


@dataclass
class KernelConversion:
    spec: KernelSpec
    eta: np.ndarray
    unusable: list[tuple[int, int]]
    reasons: dict[tuple[int, int], str]


def to_kernel_spec(est: PropagatorEstimate) -> KernelConversion:
    """Linear impact ``eta = H(1)`` with tabulated decay ``G(l) = H(l+1)/H(1)``.

    Entries whose ``H(1)`` vanishes or whose normalized kernel changes sign
    are flagged as unusable and given a permanent kernel (their ``eta`` is
    kept) so the spec remains usable by the arbitrage checks.
    """
    N = est.n_assets
    H = est.H
    eta = H[1].copy()
    lags = np.arange(est.p, dtype=float)
    G, unusable, reasons = [], [], {}
    for i in range(N):
        row = []
        for j in range(N):
            h1 = eta[i, j]
            if h1 == 0 or not np.isfinite(h1):
                unusable.append((i, j))
                reasons[(i, j)] = "H(1) is zero"
                row.append(Permanent())
                continue
            g = H[1:, i, j] / h1
            if np.any(g < 0):
                unusable.append((i, j))
                reasons[(i, j)] = f"kernel changes sign (first at lag {int(np.argmax(g < 0)) + 1})"
                row.append(Permanent())
                continue
            row.append(Tabulated(tuple(lags), tuple(g)))
        G.append(row)
    f = [[Linear(float(eta[i, j])) for j in range(N)] for i in range(N)]
    return KernelConversion(KernelSpec(N, G, f), eta, unusable, reasons)
