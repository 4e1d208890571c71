"""Plot-ready aggregate tables from response, impact-curve and propagator artifacts."""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path

import numpy as np

from ._io import read_csv, write_csv
from .errors import ValidationError


def _table(path, required):
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"missing upstream artifact: {path}")
    header, rows = read_csv(path)
    missing = [c for c in required if c not in header]
    if missing:
        raise ValidationError(f"{path}: missing column(s) {', '.join(missing)}")
    cols = {c: header.index(c) for c in header}
    return [{c: r[k] for c, k in cols.items()} for r in rows]


def self_cross_by_lag(path, value_col="value"):
    """Per lag: count-weighted mean over self pairs (i == j) and cross pairs (i != j).

    Weights are the trade counts of the triggering asset ``j``.
    """
    rows = _table(path, ["lag", "i", "j", value_col, "count"])
    acc = defaultdict(lambda: np.zeros(4))
    for r in rows:
        v = float(r[value_col])
        w = float(r["count"])
        if not np.isfinite(v) or w <= 0:
            continue
        slot = acc[int(r["lag"])]
        k = 0 if r["i"] == r["j"] else 2
        slot[k] += w * v
        slot[k + 1] += w
    out = []
    for lag in sorted(acc):
        s = acc[lag]
        self_mean = s[0] / s[1] if s[1] else float("nan")
        cross_mean = s[2] / s[3] if s[3] else float("nan")
        out.append((lag, self_mean, cross_mean))
    return out


def impact_by_bucket(path, buckets: dict[str, str] | None = None):
    """Mean impact per (bucket of i, bucket of j, self/cross, volume bin).

    ``buckets`` maps asset ids to a group label such as a maturity bucket;
    assets not listed form their own bucket.
    """
    rows = _table(path, ["asset_i", "asset_j", "bin", "bin_center", "mean", "count"])
    buckets = buckets or {}
    acc = defaultdict(lambda: np.zeros(3))
    for r in rows:
        ai, aj = r["asset_i"], r["asset_j"]
        m, c, vc = float(r["mean"]), float(r["count"]), float(r["bin_center"])
        if c <= 0 or not np.isfinite(m):
            continue
        kind = "self" if ai == aj else "cross"
        key = (buckets.get(ai, ai), buckets.get(aj, aj), kind, int(r["bin"]))
        acc[key] += (c * vc, c * m, c)
    out = []
    for key in sorted(acc):
        s = acc[key]
        out.append(key + (s[0] / s[2], s[1] / s[2], int(s[2])))
    return out


def write_report(artifacts: dict[str, Path], out_dir: Path, buckets=None) -> dict[str, str]:
    """Write aggregate tables for whichever artifacts are present."""
    if not artifacts:
        raise ValidationError("no artifacts to report on")
    out_dir = Path(out_dir)
    written = {}
    if "response" in artifacts:
        rows = self_cross_by_lag(artifacts["response"])
        write_csv(out_dir / "report_response.csv", ["lag", "self_mean", "cross_mean"], rows)
        written["report_response"] = "report_response.csv"
    if "propagator" in artifacts:
        rows = self_cross_by_lag(artifacts["propagator"])
        write_csv(out_dir / "report_propagator.csv", ["lag", "self_H", "cross_H"], rows)
        written["report_propagator"] = "report_propagator.csv"
    if "impact_curve" in artifacts:
        rows = impact_by_bucket(artifacts["impact_curve"], buckets)
        write_csv(out_dir / "report_impact.csv",
                  ["bucket_i", "bucket_j", "kind", "bin", "volume", "impact", "count"], rows)
        written["report_impact"] = "report_impact.csv"
    if not written:
        raise ValidationError("none of the artifacts is a response, impact-curve or propagator table")
    return written
