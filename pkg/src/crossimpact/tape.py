"""Market tapes in combined trade time: container, CSV ingest and export.

A tape has one row per combined-time step (a unique trade timestamp) and one
column per asset.  ``mid_log[t, i]`` is the log mid-price of asset ``i`` just
before step ``t``; ``signs[t, i]`` is the signed trade indicator.

The canonical on-disk form is a ``trades.csv`` / ``quotes.csv`` pair::

    trades.csv   timestamp_ms, asset_id, price, face_volume[, sign]
    quotes.csv   timestamp_ms, asset_id, best_bid, best_ask
"""

from __future__ import annotations

import csv
import io
import logging
import math
import zipfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from ._io import atomic_write_bytes, atomic_write_text
from .errors import ValidationError

log = logging.getLogger(__name__)

MS_PER_DAY = 86_400_000
SESSION = (10 * 3_600_000, 17 * 3_600_000)


@dataclass(frozen=True)
class Quotes:
    """Quote stream kept alongside an ingested tape (for physical-time horizons)."""

    timestamps: np.ndarray
    asset: np.ndarray
    mid_log: np.ndarray

    def mid_before(self, asset: int, ts: np.ndarray) -> np.ndarray:
        """Log mid of ``asset`` from the last quote at or before each ``ts`` (NaN if none)."""
        mask = self.asset == asset
        qts = self.timestamps[mask]
        qmid = self.mid_log[mask]
        idx = np.searchsorted(qts, ts, side="right") - 1
        out = np.full(np.shape(ts), np.nan)
        ok = idx >= 0
        out[ok] = qmid[idx[ok]]
        return out


@dataclass(frozen=True, eq=False)
class MarketTape:
    asset_ids: tuple[str, ...]
    timestamps: np.ndarray
    signs: np.ndarray
    volumes: np.ndarray
    prices: np.ndarray
    mid_log: np.ndarray
    day_starts: np.ndarray
    spread_bp: np.ndarray | None = None
    quotes: Quotes | None = None
    time_unit: str = "steps"
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.asset_ids)
        ts = np.asarray(self.timestamps, dtype=np.int64)
        signs = np.asarray(self.signs, dtype=np.int8)
        T = ts.size
        for name, arr in (("signs", signs), ("volumes", self.volumes), ("prices", self.prices),
                          ("mid_log", self.mid_log)):
            if np.shape(arr) != (T, n):
                raise ValidationError(f"tape {name} must have shape ({T}, {n}), got {np.shape(arr)}")
        if T and np.any(np.diff(ts) <= 0):
            raise ValidationError("tape steps must have strictly increasing timestamps")
        if not np.all(np.isin(signs, (-1, 0, 1))):
            raise ValidationError("trade signs must be -1, 0 or +1")
        if T and np.any(~np.any(signs != 0, axis=1)):
            raise ValidationError("every step must carry at least one trade")
        ds = np.asarray(self.day_starts, dtype=np.int64)
        if T and (ds.size == 0 or ds[0] != 0 or np.any(np.diff(ds) <= 0) or ds[-1] >= T):
            raise ValidationError("day_starts must start at 0 and increase strictly within the tape")
        if self.time_unit not in ("steps", "seconds"):
            raise ValidationError("time_unit must be 'steps' or 'seconds'")
        object.__setattr__(self, "asset_ids", tuple(str(a) for a in self.asset_ids))
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "signs", signs)
        object.__setattr__(self, "volumes", np.asarray(self.volumes, dtype=float))
        object.__setattr__(self, "prices", np.asarray(self.prices, dtype=float))
        object.__setattr__(self, "mid_log", np.asarray(self.mid_log, dtype=float))
        object.__setattr__(self, "day_starts", ds)
        if self.spread_bp is not None:
            object.__setattr__(self, "spread_bp", np.asarray(self.spread_bp, dtype=float))
        for arr in (self.timestamps, self.signs, self.volumes, self.prices, self.mid_log, self.day_starts):
            arr.setflags(write=False)

    # -- derived views ------------------------------------------------------

    @property
    def n_steps(self) -> int:
        return int(self.timestamps.size)

    @property
    def n_assets(self) -> int:
        return len(self.asset_ids)

    @property
    def n_days(self) -> int:
        return int(self.day_starts.size)

    def day_bounds(self) -> list[tuple[int, int]]:
        ends = list(self.day_starts[1:]) + [self.n_steps]
        return [(int(a), int(b)) for a, b in zip(self.day_starts, ends)]

    def day_dates(self) -> np.ndarray:
        """Calendar date of each day as ``datetime64[D]``."""
        return (self.timestamps[self.day_starts] // MS_PER_DAY).astype("datetime64[D]")

    def trade_counts(self) -> np.ndarray:
        return np.count_nonzero(self.signs, axis=0)

    def signed_flow(self, mode: str = "events") -> np.ndarray:
        """Regressor ``eps I`` (events) or ``eps W I`` with ``W = price * volume`` (value)."""
        a = self.signs.astype(float)
        if mode in ("events", "per_event"):
            return a
        if mode in ("value", "per_value"):
            w = np.where(self.signs != 0, self.prices * self.volumes, 0.0)
            return a * np.nan_to_num(w)
        raise ValidationError(f"unknown mode {mode!r}; expected 'events' or 'value'")

    def returns(self) -> np.ndarray:
        """``r_t = X_{t+1} - X_t`` inside a day; NaN on the last step of each day."""
        r = np.full(self.mid_log.shape, np.nan)
        r[:-1] = np.diff(self.mid_log, axis=0)
        ends = np.concatenate([self.day_starts[1:], [self.n_steps]]) - 1
        r[ends] = np.nan
        return r

    def subset_days(self, days: Sequence[int]) -> "MarketTape":
        bounds = self.day_bounds()
        rows = np.concatenate([np.arange(*bounds[d]) for d in days]) if len(days) else np.arange(0)
        lengths = [bounds[d][1] - bounds[d][0] for d in days]
        starts = np.concatenate([[0], np.cumsum(lengths)[:-1]]).astype(np.int64) if lengths else np.arange(0)
        return MarketTape(self.asset_ids, self.timestamps[rows], self.signs[rows], self.volumes[rows],
                          self.prices[rows], self.mid_log[rows], starts, self.spread_bp, self.quotes,
                          self.time_unit, dict(self.meta))

    def same_core(self, other: "MarketTape", rtol: float = 1e-12) -> bool:
        """Equality of the canonical schema (ids, steps, trades, mids, days)."""
        if self.asset_ids != other.asset_ids or self.n_steps != other.n_steps:
            return False
        trade = self.signs != 0
        return bool(
            np.array_equal(self.timestamps, other.timestamps)
            and np.array_equal(self.signs, other.signs)
            and np.array_equal(self.day_starts, other.day_starts)
            and np.allclose(self.volumes[trade], other.volumes[trade], rtol=rtol, atol=0)
            and np.allclose(self.prices[trade], other.prices[trade], rtol=rtol, atol=0)
            and np.allclose(self.mid_log, other.mid_log, rtol=rtol, atol=0)
        )

    # -- binary cache ---------------------------------------------------------

    def save_npz(self, path) -> None:
        extra = {}
        if self.spread_bp is not None:
            extra["spread_bp"] = self.spread_bp
        if self.quotes is not None:
            extra.update(q_ts=self.quotes.timestamps, q_asset=self.quotes.asset, q_mid=self.quotes.mid_log)
        arrays = dict(asset_ids=np.array(self.asset_ids), timestamps=self.timestamps, signs=self.signs,
                      volumes=self.volumes, prices=self.prices, mid_log=self.mid_log,
                      day_starts=self.day_starts, time_unit=np.array(self.time_unit), **extra)
        _write_npz(path, arrays)

    @classmethod
    def load_npz(cls, path) -> "MarketTape":
        with np.load(path, allow_pickle=False) as z:
            quotes = Quotes(z["q_ts"], z["q_asset"], z["q_mid"]) if "q_ts" in z else None
            return cls(tuple(z["asset_ids"].tolist()), z["timestamps"], z["signs"], z["volumes"],
                       z["prices"], z["mid_log"], z["day_starts"],
                       z["spread_bp"] if "spread_bp" in z else None, quotes, str(z["time_unit"]))


def _write_npz(path, arrays: dict[str, np.ndarray]) -> None:
    """``np.savez_compressed`` with fixed zip timestamps so reruns are byte-identical."""
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w", compression=zipfile.ZIP_DEFLATED) as zf:
        for name, arr in arrays.items():
            info = zipfile.ZipInfo(f"{name}.npy", date_time=(1980, 1, 1, 0, 0, 0))
            info.compress_type = zipfile.ZIP_DEFLATED
            with zf.open(info, "w", force_zip64=True) as fh:
                np.lib.format.write_array(fh, np.asarray(arr), allow_pickle=False)
    atomic_write_bytes(path, buf.getvalue())


# ---------------------------------------------------------------------------
# CSV export
# ---------------------------------------------------------------------------


def export_csv(tape: MarketTape, trades_path, quotes_path) -> None:
    """Write the canonical trade/quote pair.

    Each step's pre-trade mid is written as a quote one millisecond before the
    step (only when it changed), with bid/ask set symmetrically around the mid
    using the tape's spread (1 bp if unknown).
    """
    spread = tape.spread_bp if tape.spread_bp is not None else np.ones(tape.n_assets)
    half = 0.5 * spread * 1e-4
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["timestamp_ms", "asset_id", "price", "face_volume", "sign"])
    steps, assets = np.nonzero(tape.signs)
    for t, i in zip(steps, assets):
        w.writerow([int(tape.timestamps[t]), tape.asset_ids[i], repr(float(tape.prices[t, i])),
                    repr(float(tape.volumes[t, i])), int(tape.signs[t, i])])
    atomic_write_text(trades_path, buf.getvalue())

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["timestamp_ms", "asset_id", "best_bid", "best_ask"])
    last = np.full(tape.n_assets, np.nan)
    for t in range(tape.n_steps):
        ts = int(tape.timestamps[t]) - 1
        for i in range(tape.n_assets):
            x = tape.mid_log[t, i]
            if x == last[i]:
                continue
            last[i] = x
            m = math.exp(x)
            w.writerow([ts, tape.asset_ids[i], repr(float(m * (1 - half[i]))), repr(float(m * (1 + half[i])))])
    atomic_write_text(quotes_path, buf.getvalue())


# ---------------------------------------------------------------------------
# CSV ingest
# ---------------------------------------------------------------------------


@dataclass
class IngestReport:
    trades_read: int = 0
    quotes_read: int = 0
    dropped_outside_session: int = 0
    dropped_excluded_window: int = 0
    dropped_no_quote: int = 0
    dropped_unclassified: int = 0
    dropped_netted: int = 0
    classified_quote_rule: int = 0
    classified_tick_test: int = 0
    aggregated_same_ms: int = 0
    steps: int = 0
    simultaneous_steps: int = 0

    def to_dict(self):
        return dict(self.__dict__)


def _read_rows(path: Path, required: Sequence[str], optional: Sequence[str] = ()):
    if not path.exists():
        raise ValidationError(f"file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValidationError(f"{path}: empty file")
        header = [h.strip() for h in header]
        missing = [c for c in required if c not in header]
        if missing:
            raise ValidationError(f"{path}: missing column(s) {', '.join(missing)}")
        cols = {c: header.index(c) for c in list(required) + [c for c in optional if c in header]}
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not x.strip() for x in row):
                continue
            if len(row) < len(header):
                raise ValidationError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            rows.append((lineno, {c: row[k].strip() for c, k in cols.items()}))
    return rows


def _num(path, lineno, field_name, text, kind=float):
    try:
        val = kind(text)
    except ValueError:
        raise ValidationError(f"{path}:{lineno}: field {field_name} is not numeric: {text!r}") from None
    if kind is float and not math.isfinite(val):
        raise ValidationError(f"{path}:{lineno}: field {field_name} is not finite")
    return val


def ingest_csv(trades_path, quotes_path, *, session: tuple[int, int] | None = SESSION,
               exclusion_windows: Sequence[tuple[int, int]] = (),
               asset_order: Sequence[str] | None = None) -> tuple[MarketTape, IngestReport]:
    """Build a tape from trade and quote CSVs.

    Quotes at the same millisecond as a trade count as before it.  Missing
    signs are set by the quote rule (at or above the ask: buy; at or below
    the bid: sell) with a tick test as fallback; trades still unclassified are
    dropped and counted.  Several trades of one asset in the same millisecond
    are merged into one net trade.  Trades outside ``session`` (ms after
    midnight, UTC) or inside an exclusion window are dropped.
    """
    trades_path, quotes_path = Path(trades_path), Path(quotes_path)
    rep = IngestReport()
    qrows = _read_rows(quotes_path, ["timestamp_ms", "asset_id", "best_bid", "best_ask"])
    if not qrows:
        raise ValidationError(f"{quotes_path}: quote file has no rows")
    trows = _read_rows(trades_path, ["timestamp_ms", "asset_id", "price", "face_volume"], ["sign"])
    if not trows:
        raise ValidationError(f"{trades_path}: trade file has no rows")
    rep.quotes_read, rep.trades_read = len(qrows), len(trows)

    q_ts = np.array([_num(quotes_path, ln, "timestamp_ms", r["timestamp_ms"], int) for ln, r in qrows],
                    dtype=np.int64)
    if np.any(np.diff(q_ts) < 0):
        bad = int(np.argmax(np.diff(q_ts) < 0)) + 1
        raise ValidationError(f"{quotes_path}:{qrows[bad][0]}: quotes are not sorted by timestamp")
    q_bid = np.array([_num(quotes_path, ln, "best_bid", r["best_bid"]) for ln, r in qrows])
    q_ask = np.array([_num(quotes_path, ln, "best_ask", r["best_ask"]) for ln, r in qrows])
    if np.any(q_bid <= 0) or np.any(q_ask < q_bid):
        bad = int(np.argmax((q_bid <= 0) | (q_ask < q_bid)))
        raise ValidationError(f"{quotes_path}:{qrows[bad][0]}: invalid quote (bid <= 0 or ask < bid)")
    q_ids = [r["asset_id"] for _, r in qrows]

    t_ts = np.array([_num(trades_path, ln, "timestamp_ms", r["timestamp_ms"], int) for ln, r in trows],
                    dtype=np.int64)
    if np.any(np.diff(t_ts) < 0):
        bad = int(np.argmax(np.diff(t_ts) < 0)) + 1
        raise ValidationError(f"{trades_path}:{trows[bad][0]}: trades are not sorted by timestamp")
    t_px = np.array([_num(trades_path, ln, "price", r["price"]) for ln, r in trows])
    t_vol = np.array([_num(trades_path, ln, "face_volume", r["face_volume"]) for ln, r in trows])
    if np.any(t_vol <= 0) or np.any(t_px <= 0):
        bad = int(np.argmax((t_vol <= 0) | (t_px <= 0)))
        raise ValidationError(f"{trades_path}:{trows[bad][0]}: price and face_volume must be positive")
    t_ids = [r["asset_id"] for _, r in trows]
    t_sign = np.zeros(len(trows), dtype=np.int8)
    for k, (ln, r) in enumerate(trows):
        s = r.get("sign", "")
        if s:
            v = _num(trades_path, ln, "sign", s, int)
            if v not in (-1, 1):
                raise ValidationError(f"{trades_path}:{ln}: sign must be -1 or +1, got {v}")
            t_sign[k] = v

    quoted = set(q_ids)
    traded = list(dict.fromkeys(t_ids))
    absent = [a for a in traded if a not in quoted]
    if absent:
        raise ValidationError(f"{quotes_path}: no quotes for traded asset(s) {', '.join(absent)}")
    ids = list(asset_order) if asset_order is not None else sorted(traded)
    index = {a: k for k, a in enumerate(ids)}
    unknown = [a for a in traded if a not in index]
    if unknown:
        raise ValidationError(f"asset(s) {', '.join(unknown)} not in the requested asset order")
    N = len(ids)
    q_asset = np.array([index.get(a, -1) for a in q_ids], dtype=np.int64)
    keep_q = q_asset >= 0
    quotes_mid = np.log(0.5 * (q_bid + q_ask))
    t_asset = np.array([index[a] for a in t_ids], dtype=np.int64)

    # per-asset quote lookup: last quote at or before the timestamp
    per_asset = []
    for i in range(N):
        m = keep_q & (q_asset == i)
        per_asset.append((q_ts[m], q_bid[m], q_ask[m], quotes_mid[m]))

    def quote_at(i, ts):
        qts = per_asset[i][0]
        k = np.searchsorted(qts, ts, side="right") - 1
        return k

    keep = np.ones(len(trows), dtype=bool)
    if session is not None:
        tod = t_ts % MS_PER_DAY
        out = (tod < session[0]) | (tod >= session[1])
        rep.dropped_outside_session = int(out.sum())
        keep &= ~out
    for lo, hi in exclusion_windows:
        inside = keep & (t_ts >= lo) & (t_ts < hi)
        rep.dropped_excluded_window += int(inside.sum())
        keep &= ~inside

    # sign classification; the tick test uses the previous trade of the asset
    last_px = np.full(N, np.nan)
    last_dir = np.zeros(N, dtype=np.int8)
    for k in range(len(trows)):
        i = t_asset[k]
        px = t_px[k]
        if not math.isnan(last_px[i]) and px != last_px[i]:
            tick = 1 if px > last_px[i] else -1
        else:
            tick = 0
        prev_dir = last_dir[i]
        if tick:
            last_dir[i] = tick
        last_px[i] = px
        if not keep[k] or t_sign[k] != 0:
            continue
        qk = quote_at(i, t_ts[k])
        if qk >= 0:
            bid, ask = per_asset[i][1][qk], per_asset[i][2][qk]
            if px >= ask:
                t_sign[k] = 1
                rep.classified_quote_rule += 1
                continue
            if px <= bid:
                t_sign[k] = -1
                rep.classified_quote_rule += 1
                continue
        direction = tick or prev_dir
        if direction:
            t_sign[k] = direction
            rep.classified_tick_test += 1
        else:
            keep[k] = False
            rep.dropped_unclassified += 1

    idx = np.flatnonzero(keep)
    step_ts = np.unique(t_ts[idx])
    T = step_ts.size
    signed_vol = np.zeros((T, N))
    tot_vol = np.zeros((T, N))
    notional = np.zeros((T, N))
    n_trades = np.zeros((T, N), dtype=np.int64)
    rows = np.searchsorted(step_ts, t_ts[idx])
    np.add.at(signed_vol, (rows, t_asset[idx]), t_sign[idx] * t_vol[idx])
    np.add.at(tot_vol, (rows, t_asset[idx]), t_vol[idx])
    np.add.at(notional, (rows, t_asset[idx]), t_px[idx] * t_vol[idx])
    np.add.at(n_trades, (rows, t_asset[idx]), 1)
    rep.aggregated_same_ms = int(np.sum(np.maximum(n_trades - 1, 0)))
    netted = (n_trades > 0) & (signed_vol == 0)
    rep.dropped_netted = int(netted.sum())
    signs = np.sign(signed_vol).astype(np.int8)
    with np.errstate(invalid="ignore", divide="ignore"):
        prices = np.where(signs != 0, notional / tot_vol, np.nan)
    volumes = np.where(signs != 0, tot_vol, 0.0)

    mid = np.full((T, N), np.nan)
    for i in range(N):
        k = quote_at(i, step_ts)
        ok = k >= 0
        mid[ok, i] = per_asset[i][3][k[ok]]
    good = np.all(np.isfinite(mid), axis=1) & np.any(signs != 0, axis=1)
    rep.dropped_no_quote = int(np.count_nonzero(signs[~good]))
    step_ts, signs, volumes, prices, mid = (a[good] for a in (step_ts, signs, volumes, prices, mid))
    rep.steps = int(step_ts.size)
    rep.simultaneous_steps = int(np.sum(np.count_nonzero(signs, axis=1) >= 2))
    if rep.steps == 0:
        raise ValidationError("no usable trades after filtering")
    day = step_ts // MS_PER_DAY
    day_starts = np.flatnonzero(np.concatenate([[True], np.diff(day) != 0]))
    quotes = Quotes(q_ts[keep_q], q_asset[keep_q], quotes_mid[keep_q])
    tape = MarketTape(tuple(ids), step_ts, signs, volumes, prices, mid, day_starts, None, quotes,
                      "seconds")
    return tape, rep


def load_tape(path) -> MarketTape:
    """Load a tape from ``.npz`` or from a directory holding the CSV pair (or a cache)."""
    path = Path(path)
    if path.is_dir():
        cache = path / "tape.npz"
        if cache.exists():
            return MarketTape.load_npz(cache)
        return ingest_csv(path / "trades.csv", path / "quotes.csv")[0]
    if path.suffix == ".npz":
        if not path.exists():
            raise ValidationError(f"tape file not found: {path}")
        return MarketTape.load_npz(path)
    raise ValidationError(f"cannot read a tape from {path}: expected a .npz file or a directory")
