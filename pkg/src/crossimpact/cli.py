"""Command-line entry point: ``crossimpact <subcommand> ...``.

Every run writes its artifacts plus ``manifest.json`` (config echo, library
version, input hashes) into the output directory.  Exit status is 0 on
success, 1 on invalid input and 2 on numerical failure.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import os
import sys
import warnings
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from ._io import fmt, read_csv, sha256_file, write_csv, write_json
from .arbitrage import constructive_search, size_bound_check, slippage_ratio, spectral_check
from .cost import cost
from .errors import CrossImpactError, NumericalError, ValidationError
from .estimation import (AGGREGATIONS, ISOLATION_DEFAULT, WEIGHTINGS, estimate_propagator, impact_curve,
                         rejection_table, response, symmetry_from_estimate, to_kernel_spec)
from .model import KernelSpec, Strategy, load_config
from .report import write_report
from .simulate import SimConfig, simulate
from .tape import MarketTape, export_csv, ingest_csv, load_tape

log = logging.getLogger("crossimpact")

OUT_ENV = "CROSSIMPACT_OUT"
DEFAULT_OUT = "crossimpact_out"


def data_path(name: str) -> Path:
    """Path of a bundled data file."""
    return Path(str(resources.files("crossimpact") / "data" / name))


# ---------------------------------------------------------------------------
# Run context: settings, inputs, outputs, manifest
# ---------------------------------------------------------------------------


class Run:
    def __init__(self, args: argparse.Namespace, defaults: dict[str, Any]):
        self.command = args.command
        self.inputs: dict[str, str] = {}
        self.outputs: dict[str, str] = {}
        cfg: dict[str, Any] = {}
        if getattr(args, "config", None) and self.command != "simulate":
            cfg = load_config(self.add_input(args.config))
        self.settings = dict(defaults)
        for key, val in cfg.items():
            key = key.replace("-", "_")
            if key not in defaults:
                raise ValidationError(f"{args.config}: unknown setting {key!r} for '{self.command}'")
            self.settings[key] = val
        for key in defaults:
            val = getattr(args, key, None)
            if val is not None:
                self.settings[key] = val
        out = args.out or os.environ.get(OUT_ENV) or DEFAULT_OUT
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)

    def __getitem__(self, key):
        return self.settings[key]

    def add_input(self, path) -> Path:
        path = Path(path)
        if not path.exists():
            raise ValidationError(f"input not found: {path}")
        if path.is_file():
            self.inputs[str(path)] = sha256_file(path)
        return path

    def path(self, name: str, filename: str) -> Path:
        self.outputs[name] = filename
        return self.out / filename

    def finish(self, extra: dict[str, Any] | None = None) -> None:
        manifest = {
            "command": self.command,
            "version": __version__,
            "settings": self.settings,
            "inputs": dict(sorted(self.inputs.items())),
            "outputs": dict(sorted(self.outputs.items())),
            "created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        }
        if extra:
            manifest.update(extra)
        write_json(self.out / "manifest.json", manifest)


def _tape_from(run: Run, args) -> MarketTape:
    if args.tape:
        src = Path(args.tape)
        if src.name.endswith(".json"):
            man = json.loads(run.add_input(src).read_text())
            rel = man.get("outputs", {}).get("tape")
            if rel is None:
                raise ValidationError(f"{src}: manifest lists no tape output")
            src = src.parent / rel
        if src.is_dir():
            cache = src / "tape.npz"
            if cache.exists():
                return load_tape(run.add_input(cache))
            run.add_input(src / "trades.csv")
            run.add_input(src / "quotes.csv")
            return load_tape(src)
        return load_tape(run.add_input(src))
    if args.trades or args.quotes:
        if not (args.trades and args.quotes):
            raise ValidationError("--trades and --quotes must be given together")
        tape, _ = ingest_csv(run.add_input(args.trades), run.add_input(args.quotes))
        return tape
    raise ValidationError("no input tape: pass --tape or --trades/--quotes")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_cost(args) -> None:
    run = Run(args, {"method": "auto", "three_phase": None})
    spec = KernelSpec.load(run.add_input(args.spec))
    if args.strategy:
        strat = Strategy.from_csv(run.add_input(args.strategy))
    elif run["three_phase"]:
        va, vb, T = (float(x) for x in run["three_phase"])
        strat = Strategy.three_phase(va, vb, T, n_assets=spec.n_assets)
    else:
        raise ValidationError("pass --strategy CSV or --three-phase VA VB T")
    res = cost(spec, strat, run["method"])
    write_json(run.path("cost", "cost.json"), res.to_dict())
    run.finish()
    print(f"cost = {fmt(res.total)} ({res.method})")


def cmd_check(args) -> None:
    run = Run(args, {"grid_size": 64, "threads": 1, "t_cap": None})
    spec = KernelSpec.load(run.add_input(args.spec))
    out: dict[str, Any] = {}
    search = constructive_search(spec, T_cap=run["t_cap"], threads=int(run["threads"]))
    out["constructive"] = search.to_dict()
    spectral = None
    if spec.is_all_linear() and spec.is_bounded():
        spectral = spectral_check(spec, grid_size=int(run["grid_size"]))
        out["spectral"] = spectral.to_dict()
        eta = spec.eta()
        if np.allclose(eta, eta.T, rtol=0, atol=0):
            out["size_bound"] = size_bound_check(eta).to_dict()
    binding = search if search.admits_manipulation else spectral
    if binding is None or not binding.admits_manipulation:
        binding = search
    out["admits_manipulation"] = binding.admits_manipulation
    out["binding_condition"] = binding.binding_condition
    out["certificate_cost"] = binding.certificate_cost
    write_json(run.path("check", "check.json"), out)
    if binding.certificate is not None:
        binding.certificate.to_csv(run.path("certificate", "certificate.csv"))
    run.finish()
    print(f"binding_condition = {binding.binding_condition}")


def cmd_simulate(args) -> None:
    run = Run(args, {"seed": None, "n_steps": None, "csv": True})
    cfg_path = run.add_input(args.config if args.config else data_path("mot_like.toml"))
    doc = load_config(cfg_path)
    if run["seed"] is not None:
        doc["seed"] = int(run["seed"])
    if run["n_steps"] is not None:
        doc["n_steps"] = int(run["n_steps"])
    cfg = SimConfig.from_dict(doc)
    run.settings["sim_config"] = cfg.to_dict()
    tape = simulate(cfg)
    tape.save_npz(run.path("tape", "tape.npz"))
    if run["csv"]:
        export_csv(tape, run.path("trades", "trades.csv"), run.path("quotes", "quotes.csv"))
    run.finish({"summary": {"n_steps": tape.n_steps, "n_days": tape.n_days,
                            "trade_counts": tape.trade_counts().tolist()}})
    print(f"simulated {tape.n_steps} steps over {tape.n_days} days -> {run.out}")


def cmd_ingest(args) -> None:
    run = Run(args, {"exclude": [], "session": True, "csv": False})
    windows = [tuple(int(x) for x in w) for w in run["exclude"]]
    tape, rep = ingest_csv(run.add_input(args.trades), run.add_input(args.quotes),
                           session=(36_000_000, 61_200_000) if run["session"] else None,
                           exclusion_windows=windows)
    tape.save_npz(run.path("tape", "tape.npz"))
    if run["csv"]:
        export_csv(tape, run.path("trades", "trades.csv"), run.path("quotes", "quotes.csv"))
    write_json(run.path("ingest_report", "ingest_report.json"), rep.to_dict())
    run.finish()
    print(f"ingested {rep.steps} steps; dropped {rep.dropped_unclassified} unclassified trades")


def cmd_response(args) -> None:
    run = Run(args, {"min_lag": -10, "max_lag": 100, "weighting": "trades"})
    tape = _tape_from(run, args)
    lags = np.arange(int(run["min_lag"]), int(run["max_lag"]) + 1)
    rf = response(tape, lags, run["weighting"])
    write_csv(run.path("response", "response.csv"), ["lag", "i", "j", "value", "stderr", "count"], rf.rows())
    write_json(run.path("summary", "response.json"),
               {"asset_ids": list(tape.asset_ids), "lags": [int(lags[0]), int(lags[-1])],
                "weighting": run["weighting"]})
    run.finish()
    print(f"response for lags {lags[0]}..{lags[-1]} -> {run.out}")


def cmd_impact_curve(args) -> None:
    run = Run(args, {"horizon": None, "unit": None, "isolated": False, "isolation_window": None})
    tape = _tape_from(run, args)
    unit = run["unit"] or tape.time_unit
    horizon = run["horizon"] if run["horizon"] is not None else (2.0 if unit == "seconds" else 1)
    if unit == "steps":
        horizon = int(horizon)
    window = run["isolation_window"] or (ISOLATION_DEFAULT if run["isolated"] else None)
    curve = impact_curve(tape, horizon, tuple(window) if window else None, unit)
    ids = tape.asset_ids
    rows = []
    for (i, j), c in sorted(curve.cells.items()):
        for b in range(c.mean.size):
            rows.append((ids[i], ids[j], i, j, b, c.edges[b], c.edges[b + 1], c.centers[b], c.mean[b],
                         c.stderr[b], int(c.counts[b])))
    write_csv(run.path("impact_curve", "impact_curve.csv"),
              ["asset_i", "asset_j", "i", "j", "bin", "bin_lo", "bin_hi", "bin_center", "mean", "stderr",
               "count"], rows)
    slopes = {f"{ids[i]}|{ids[j]}": {"slope": c.slope, "stderr": c.slope_stderr}
              for (i, j), c in sorted(curve.cells.items())}
    write_json(run.path("summary", "impact_curve.json"),
               {"horizon": horizon, "unit": unit, "isolated": curve.isolated,
                "isolation_window": list(window) if window else None,
                "n_conditioning": curve.n_conditioning.tolist(), "slopes": slopes})
    run.finish()
    print(f"impact curves at horizon {horizon} {unit} -> {run.out}")


_EST_DEFAULTS = {"p": 128, "mode": "events", "aggregation": "weekly", "weighting": "trades",
                 "method": "dense", "moments": "toeplitz", "demean": False, "regularize": True,
                 "threads": 1, "min_steps_factor": 10.0}


def _estimate(run: Run, tape: MarketTape, mode: str, aggregation: str | None):
    return estimate_propagator(
        tape, int(run["p"]), mode, weighting=run["weighting"], aggregation=aggregation,
        method=run["method"], moments=run["moments"], demean=bool(run["demean"]),
        allow_regularization=bool(run["regularize"]), min_steps_factor=float(run["min_steps_factor"]),
        threads=int(run["threads"]),
    )


def cmd_propagator(args) -> None:
    run = Run(args, dict(_EST_DEFAULTS))
    tape = _tape_from(run, args)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        est = _estimate(run, tape, run["mode"], run["aggregation"])
    for w in caught:
        log.warning("%s", w.message)
    write_csv(run.path("propagator", "propagator.csv"), ["lag", "i", "j", "value", "stderr", "count"],
              est.rows())
    conv = to_kernel_spec(est)
    write_json(run.path("kernel_spec", "kernel_spec.json"), conv.spec.to_dict())
    summary = est.summary()
    summary["unusable_entries"] = [[i, j, conv.reasons[(i, j)]] for i, j in conv.unusable]
    summary["warnings"] = [str(w.message) for w in caught]
    write_json(run.path("summary", "propagator.json"), summary)
    run.finish()
    print(f"{est.kernel_name} estimated with p={est.p} (rcond {est.rcond:.3g}) -> {run.out}")


def cmd_symmetry(args) -> None:
    run = Run(args, dict(_EST_DEFAULTS, mode=["events"], aggregation=["weekly"]))
    tape = _tape_from(run, args)
    modes = run["mode"] if isinstance(run["mode"], list) else [run["mode"]]
    aggs = run["aggregation"] if isinstance(run["aggregation"], list) else [run["aggregation"]]
    tests, pair_rows = [], []
    for mode in modes:
        for agg in aggs:
            if agg not in AGGREGATIONS:
                raise ValidationError(f"unknown aggregation {agg!r}")
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                st = symmetry_from_estimate(_estimate(run, tape, mode, agg))
            tests.append(st)
            for row in st.rows():
                pair_rows.append((mode, agg) + row)
    write_csv(run.path("symmetry_pairs", "symmetry_pairs.csv"),
              ["mode", "aggregation", "asset_i", "asset_j", "mean_delta_H1", "t", "p_value", "df"], pair_rows)
    write_csv(run.path("symmetry_table", "symmetry_table.csv"),
              ["mode", "aggregation", "reject_1pct", "reject_5pct", "reject_10pct"], rejection_table(tests))
    write_json(run.path("summary", "symmetry.json"), {"tests": [t.summary() for t in tests]})
    run.finish()
    for row in rejection_table(tests):
        print("  ".join(fmt(x) for x in row))


def _bond_rows(path: Path) -> dict[str, dict[str, str]]:
    header, rows = read_csv(path)
    for col in ("isin", "volume_per_trade_keur", "spread_bp"):
        if col not in header:
            raise ValidationError(f"{path}: missing column {col}")
    return {r[header.index("isin")]: dict(zip(header, r)) for r in rows}


def cmd_slippage(args) -> None:
    run = Run(args, {"delta_eta": None, "horizons": None, "reference_t": None})
    pair_doc = json.loads(run.add_input(args.pair_file or data_path("slippage_pair.json")).read_text())
    bonds = _bond_rows(run.add_input(args.bond_table or data_path("bond_table.csv")))
    a, b = pair_doc["pair"]
    for isin in (a, b):
        if isin not in bonds:
            raise ValidationError(f"bond {isin} not found in the bond table")
    d_eta = float(run["delta_eta"] if run["delta_eta"] is not None else pair_doc["delta_eta"])
    horizons = run["horizons"] or pair_doc.get("horizons", [3, 100])
    ref = float(run["reference_t"] if run["reference_t"] is not None else pair_doc.get("reference_T", 3))
    results = []
    for T in horizons:
        res = slippage_ratio(d_eta, float(bonds[a]["spread_bp"]), float(bonds[b]["spread_bp"]),
                             1e3 * float(bonds[a]["volume_per_trade_keur"]),
                             1e3 * float(bonds[b]["volume_per_trade_keur"]), float(T), reference_T=ref,
                             pair=(a, b))
        results.append(res)
    write_csv(run.path("slippage", "slippage.csv"), ["asset_a", "asset_b", "T", "delta_eta", "ratio", "profitable"],
              [(a, b, r.T, r.delta_eta, r.ratio, r.profitable) for r in results])
    write_json(run.path("summary", "slippage.json"), {"results": [r.to_dict() for r in results]})
    run.finish()
    for r in results:
        print(f"T={fmt(r.T)}: ratio={r.ratio:.3g}")


def cmd_report(args) -> None:
    run = Run(args, {"buckets": None})
    artifacts: dict[str, Path] = {}
    for src in args.inputs:
        src = Path(src)
        man_path = src / "manifest.json" if src.is_dir() else src
        man = json.loads(run.add_input(man_path).read_text())
        for key in ("response", "impact_curve", "propagator"):
            if key in man.get("outputs", {}):
                artifacts[key] = run.add_input(man_path.parent / man["outputs"][key])
    buckets = load_config(run.add_input(run["buckets"])) if run["buckets"] else None
    written = write_report(artifacts, run.out, buckets)
    run.outputs.update(written)
    run.finish()
    print("wrote " + ", ".join(sorted(written.values())))


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _tape_args(p):
    p.add_argument("--tape", help="tape .npz, a directory with tape.npz or trades/quotes CSVs, or a manifest.json")
    p.add_argument("--trades", help="raw trades CSV (used with --quotes)")
    p.add_argument("--quotes", help="raw quotes CSV (used with --trades)")


def _est_args(p, multi=False):
    p.add_argument("--p", type=int, help="lag cutoff (default 128)")
    if multi:
        p.add_argument("--mode", nargs="+", choices=["events", "value"])
        p.add_argument("--aggregation", nargs="+", choices=list(AGGREGATIONS))
    else:
        p.add_argument("--mode", choices=["events", "value"])
        p.add_argument("--aggregation", choices=list(AGGREGATIONS))
    p.add_argument("--weighting", choices=list(WEIGHTINGS))
    p.add_argument("--method", choices=["dense", "levinson"])
    p.add_argument("--moments", choices=["toeplitz", "exact"])
    p.add_argument("--demean", action="store_const", const=True, help="de-mean order flow")
    p.add_argument("--no-regularization", dest="regularize", action="store_const", const=False,
                   help="fail (exit 2) instead of applying a ridge to ill-conditioned systems")
    p.add_argument("--min-steps-factor", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crossimpact", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")
    common.add_argument("--config", help="TOML or JSON file with settings for this subcommand")
    common.add_argument("--threads", type=int, help="worker threads")
    common.add_argument("--log-level", default="WARNING", help="logging level (default WARNING)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cost", parents=[common], help="expected cost of a strategy under a kernel spec")
    p.add_argument("--spec", required=True)
    p.add_argument("--strategy", help="strategy CSV (phase_start, phase_end, rate_asset_i ...)")
    p.add_argument("--three-phase", nargs=3, metavar=("VA", "VB", "T"), type=float)
    p.add_argument("--method", choices=["auto", "closed_form", "quadrature"])
    p.set_defaults(func=cmd_cost)

    p = sub.add_parser("check", parents=[common], help="no-arbitrage checks with certificates")
    p.add_argument("--spec", required=True)
    p.add_argument("--grid-size", type=int)
    p.add_argument("--t-cap", type=float, help="largest strategy horizon tried")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("simulate", parents=[common], help="synthetic tape from a planted propagator")
    p.add_argument("--seed", type=int)
    p.add_argument("--n-steps", type=int)
    p.add_argument("--no-csv", dest="csv", action="store_const", const=False,
                   help="write only tape.npz, not the trade/quote CSVs")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("ingest", parents=[common], help="build a tape from trade and quote CSVs")
    p.add_argument("--trades", required=True)
    p.add_argument("--quotes", required=True)
    p.add_argument("--exclude", nargs=2, action="append", type=int, metavar=("START_MS", "END_MS"),
                   help="drop trades in [START_MS, END_MS) (repeatable)")
    p.add_argument("--no-session-filter", dest="session", action="store_const", const=False)
    p.add_argument("--csv", action="store_const", const=True, help="also write canonical CSVs")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("response", parents=[common], help="sign-conditioned response functions")
    _tape_args(p)
    p.add_argument("--min-lag", type=int)
    p.add_argument("--max-lag", type=int)
    p.add_argument("--weighting", choices=["trades", "unweighted"])
    p.set_defaults(func=cmd_response)

    p = sub.add_parser("impact-curve", parents=[common], help="volume-binned impact curves")
    _tape_args(p)
    p.add_argument("--horizon", type=float)
    p.add_argument("--unit", choices=["steps", "seconds"])
    p.add_argument("--isolated", action="store_const", const=True,
                   help="only trades with no other trade from 3 s before to 2 s after")
    p.add_argument("--isolation-window", nargs=2, type=float, metavar=("BEFORE_S", "AFTER_S"))
    p.set_defaults(func=cmd_impact_curve)

    p = sub.add_parser("propagator", parents=[common], help="estimate the propagator matrix")
    _tape_args(p)
    _est_args(p)
    p.set_defaults(func=cmd_propagator)

    p = sub.add_parser("symmetry", parents=[common], help="t-tests of propagator symmetry across windows")
    _tape_args(p)
    _est_args(p, multi=True)
    p.set_defaults(func=cmd_symmetry)

    p = sub.add_parser("slippage", parents=[common], help="cross-impact gain versus spread cost")
    p.add_argument("--pair-file", help="JSON with pair, delta_eta, horizons (default: bundled pair)")
    p.add_argument("--bond-table", help="bond descriptives CSV (default: bundled table)")
    p.add_argument("--delta-eta", type=float)
    p.add_argument("--horizons", nargs="+", type=float)
    p.add_argument("--reference-t", type=float)
    p.set_defaults(func=cmd_slippage)

    p = sub.add_parser("report", parents=[common], help="plot-ready aggregate tables")
    p.add_argument("inputs", nargs="+", help="run directories or manifest.json files")
    p.add_argument("--buckets", help="JSON/TOML mapping asset id -> bucket label")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (CrossImpactError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
