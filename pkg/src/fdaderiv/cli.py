"""Command-line interface: ``fdaderiv <subcommand> ... --out DIR``.

Every run writes its outputs plus ``manifest.json`` into the output
directory. The manifest records the resolved configuration, seed, inputs,
outputs (with SHA-256 digests), package version and wall-clock time.

Exit codes
----------
0  success
2  invalid configuration or command line
3  file-system error (unreadable input, unwritable output)
4  malformed input data
5  numerical degeneracy (every evaluation point or bandwidth singular)
"""

from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .covdiag import smoothness_report
from .estimator import cv_bandwidth, estimate_derivative, periodic_augment
from .exceptions import (
    ConfigError,
    DataFormatError,
    NoValidBandwidthError,
    NumericalError,
    SingularDesignError,
)
from .formats import (
    dataset_to_csv,
    dump_json,
    estimate_to_csv,
    fmt,
    rate_rows_to_csv,
    read_dataset,
    sweep_to_csv,
    write_text,
)
from .harness import (
    TABLE1_H,
    TABLE1_N,
    TABLE1_ROUGH,
    TABLE1_SMOOTH,
    SimConfig,
    bandwidth_sweep,
    clt_experiment,
    rate_slopes,
    rate_table,
    simulate_dataset,
)
from .weights import check_bandwidth

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_DATA = 4
EXIT_NUMERIC = 5

# ------------------------------------------------------------------ presets

SLOPE_H_GRID = [round(0.04 + 0.02 * k, 2) for k in range(21)]

PRESETS = {
    # Rough-vs-smooth rate table at the published bandwidths.
    "table1": {
        "experiment": "table",
        "kinds": ["rough", "smooth"],
        "n_list": list(TABLE1_N),
        "h_list": list(TABLE1_H),
        "p": 800,
        "N": 1000,
        "s": 1,
        "m": 3,
        "trim": 0.05,
        "seed": 0,
    },
    # Rate slopes with per-n optimal bandwidths from a sweep.
    "slopes": {
        "experiment": "slopes",
        "n_list": list(TABLE1_N),
        "h_grid": SLOPE_H_GRID,
        "p": 800,
        "N": 200,
        "sigma": 0.5,
        "s": 1,
        "m": 2,
        "trim": False,
        "seed": 0,
    },
    # Bandwidth comparison, n = 600 Brownian curves, several grid sizes.
    "bandwidths": {
        "p_list": [115, 175, 275, 400, 550, 1000],
        "n": 600,
        "h_grid": [round(0.03 * k, 2) for k in range(1, 11)],
        "mean": "sine_gauss",
        "process": {"kind": "bm"},
        "sigma": 0.5,
        "s": 1,
        "m": 3,
        "N": 1000,
        "trim": True,
        "seed": 0,
    },
    # Desk-scale central limit check for the derivative at x0 = 0.5.
    "clt": {
        "n": 400,
        "p": 400,
        "N": 500,
        "h": None,
        "x0": 0.5,
        "sigma": 0.1,
        "s": 1,
        "m": 5,
        "seed": 0,
    },
}

PRESET_COMMAND = {"table1": "rates", "slopes": "rates", "bandwidths": "sweep", "clt": "clt"}


class CLIError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


@dataclass
class RunManifest:
    """Provenance record written next to every output."""

    subcommand: str
    config: dict
    seed: int | None
    inputs: list = field(default_factory=list)
    outputs: dict = field(default_factory=dict)
    version: str = __version__
    started: str = ""
    wall_clock_seconds: float = 0.0
    workers: int = 1
    extra: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return dump_json(self.__dict__)


# ------------------------------------------------------------------ helpers

def _load_json(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CLIError(f"cannot read config {path}: {exc.strerror}", EXIT_IO) from None
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CLIError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}",
                       EXIT_CONFIG) from None
    if not isinstance(obj, dict):
        raise CLIError(f"{path}: config must be a JSON object", EXIT_CONFIG)
    return obj


def _resolve_config(args, command: str) -> dict:
    cfg = {}
    preset = getattr(args, "preset", None)
    if preset:
        if PRESET_COMMAND.get(preset) != command:
            raise CLIError(f"preset {preset!r} belongs to the "
                           f"{PRESET_COMMAND.get(preset, '?')!r} subcommand", EXIT_CONFIG)
        cfg.update(json.loads(json.dumps(PRESETS[preset])))
    if getattr(args, "config", None):
        cfg.update(_load_json(args.config))
    if not cfg:
        raise CLIError("need --config or --preset", EXIT_CONFIG)
    if args.seed is not None:
        cfg["seed"] = args.seed
    scale = getattr(args, "scale", None)
    if scale is not None:
        if not scale > 0:
            raise CLIError("--scale must be positive", EXIT_CONFIG)
        cfg["N"] = max(1, int(round(cfg.get("N", 1) * scale)))
    return cfg


def _pop(cfg: dict, key: str, default=None, kind=None):
    if key not in cfg:
        if default is None:
            raise ConfigError("missing required field", key)
        return default
    v = cfg[key]
    if kind is not None:
        try:
            return kind(v)
        except (TypeError, ValueError):
            raise ConfigError(f"cannot interpret {v!r}", key) from None
    return v


class _Run:
    """Collects outputs, hashes them and writes the manifest on success."""

    def __init__(self, args, subcommand: str, config: dict, seed=None):
        self.out = Path(args.out)
        try:
            self.out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise CLIError(f"cannot create output directory {self.out}: {exc.strerror}",
                           EXIT_IO) from None
        self.t0 = time.perf_counter()
        self.manifest = RunManifest(
            subcommand=subcommand,
            config=config,
            seed=seed,
            started=_dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
            workers=args.workers,
        )

    def input(self, path):
        self.manifest.inputs.append(
            {"path": str(path), "sha256": hashlib.sha256(Path(path).read_bytes()).hexdigest()}
        )

    def write(self, name: str, text: str):
        path = self.out / name
        try:
            write_text(path, text)
        except OSError as exc:
            raise CLIError(f"cannot write {path}: {exc.strerror}", EXIT_IO) from None
        self.manifest.outputs[name] = hashlib.sha256(text.encode()).hexdigest()

    def finish(self):
        self.manifest.wall_clock_seconds = round(time.perf_counter() - self.t0, 3)
        self.write("manifest.json", self.manifest.to_json())


def _read_data(path):
    try:
        return read_dataset(path)
    except OSError as exc:
        raise CLIError(f"cannot read {path}: {exc.strerror}", EXIT_IO) from None
    except DataFormatError as exc:
        raise CLIError(f"{path}: {exc}", EXIT_DATA) from None


def _parse_s(text: str, d: int):
    parts = [int(v) for v in str(text).split(",")]
    if len(parts) == 1 and d > 1:
        raise ConfigError(f"give one order per axis (d={d}), e.g. 1,0", "s")
    return parts[0] if d == 1 else tuple(parts)


# -------------------------------------------------------------- subcommands

def cmd_simulate(args) -> int:
    cfg_dict = _resolve_config(args, "simulate")
    cfg = SimConfig.from_dict(cfg_dict)
    run = _Run(args, "simulate", {**cfg.to_dict(), "replicate": args.replicate}, cfg.seed)
    if args.config:
        run.input(args.config)
    data = simulate_dataset(cfg, args.replicate)
    run.write("data.csv", dataset_to_csv(data))
    run.finish()
    return EXIT_OK


def cmd_estimate(args) -> int:
    data = _read_data(args.data)
    if args.periodic:
        try:
            data = periodic_augment(data, args.periodic)
        except ValueError as exc:
            raise ConfigError(str(exc), "periodic") from None
    grid = data.grid
    s = _parse_s(args.s, grid.d)
    extra = {}
    if args.cv:
        if args.h_grid:
            hs = [float(v) for v in args.h_grid.split(",")]
        else:
            lo = max(args.c + 1, args.m + 2) / grid.p_min
            hs = np.round(np.linspace(lo, args.h0, 20), 6).tolist()
        try:
            cv = cv_bandwidth(data, args.m, hs, c=args.c, h0=args.h0)
        except ValueError as exc:
            if isinstance(exc, NoValidBandwidthError):
                raise
            raise ConfigError(str(exc), "h_grid") from None
        h = cv.h
        extra["cv"] = {"selected_h": h, "scores": [[b, sc] for b, sc in cv.table()]}
    else:
        if args.h is None:
            raise ConfigError("give --h or --cv", "h")
        h = args.h
        try:
            check_bandwidth(h, grid.p_min, args.c, args.h0)
        except ValueError as exc:
            raise ConfigError(str(exc), "h") from None
    resolved = {
        "data": str(args.data), "s": s, "m": args.m, "h": h, "trim": args.trim,
        "periodic": args.periodic, "c": args.c, "h0": args.h0,
        "columns": int(grid.size),
    }
    # wrapped data: the original period is fully covered, so evaluate on all of it
    trim = 0.0 if args.periodic and args.trim else args.trim
    run = _Run(args, "estimate", resolved)
    run.input(args.data)
    run.manifest.extra = extra
    est = estimate_derivative(data, s, args.m, h, trim=trim)
    run.write("estimate.csv", estimate_to_csv(est))
    run.finish()
    if len(est) == 0 or np.all(est.flags):
        print("error: every evaluation point is degenerate", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def _rates_table(cfg: dict, workers: int):
    kinds = _pop(cfg, "kinds", ["rough", "smooth"], list)
    kw = dict(
        n_list=[int(v) for v in _pop(cfg, "n_list", kind=list)],
        p=_pop(cfg, "p", kind=int), N=_pop(cfg, "N", kind=int),
        h_list=[float(v) for v in _pop(cfg, "h_list", kind=list)],
        s=_pop(cfg, "s", 1, int), m=_pop(cfg, "m", 3, int), trim=cfg.get("trim", 0.05),
        seed=_pop(cfg, "seed", 0, int), workers=workers,
    )
    if len(kw["n_list"]) != len(kw["h_list"]):
        raise ConfigError("need one bandwidth per sample size", "h_list")
    rows = []
    summary = {}
    for kind in kinds:
        try:
            part = rate_table(kind, **kw)
        except ValueError as exc:
            raise ConfigError(str(exc), "kinds") from None
        rows += part
        summary[kind] = {"n": [r.n for r in part], "h": [r.h for r in part],
                         "scaled": [r.scaled for r in part]}
    if kw["n_list"] == list(TABLE1_N) and kw["h_list"] == list(TABLE1_H):
        summary["published"] = {"rough": list(TABLE1_ROUGH), "smooth": list(TABLE1_SMOOTH)}
    return {"rates.csv": rate_rows_to_csv(rows)}, summary


def _rates_slopes(cfg: dict, workers: int):
    res = rate_slopes(
        n_list=[int(v) for v in _pop(cfg, "n_list", kind=list)],
        p=_pop(cfg, "p", kind=int), N=_pop(cfg, "N", kind=int),
        h_grid=[float(v) for v in _pop(cfg, "h_grid", kind=list)],
        sigma=_pop(cfg, "sigma", 0.5, float), s=_pop(cfg, "s", 1, int),
        m=_pop(cfg, "m", 2, int), trim=cfg.get("trim", False),
        seed=_pop(cfg, "seed", 0, int), workers=workers,
    )
    lines = ["kind,n,h,mean_sup"]
    for kind in ("rough", "smooth"):
        r = res[kind]
        lines += [f"{kind},{n},{fmt(h)},{fmt(e)}" for n, h, e in zip(r["n"], r["h"], r["mean_sup"])]
    summary = {k: {"slope": v["slope"], "h": v["h"]} for k, v in res.items()}
    return {"slopes.csv": "\n".join(lines) + "\n"}, summary


def cmd_rates(args) -> int:
    cfg = _resolve_config(args, "rates")
    experiment = cfg.get("experiment", "table")
    run = _Run(args, "rates", cfg, cfg.get("seed"))
    if args.config:
        run.input(args.config)
    if experiment == "table":
        files, summary = _rates_table(cfg, args.workers)
    elif experiment == "slopes":
        files, summary = _rates_slopes(cfg, args.workers)
    else:
        raise ConfigError("must be 'table' or 'slopes'", "experiment")
    for name, text in files.items():
        run.write(name, text)
    run.write("summary.json", dump_json(summary))
    run.finish()
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _resolve_config(args, "sweep")
    p_list = cfg.pop("p_list", None) or [cfg.get("p", SimConfig.p)]
    configs = [SimConfig.from_dict({**cfg, "p": int(p)}) for p in p_list]
    run = _Run(args, "sweep", {**configs[0].to_dict(), "p_list": list(p_list)}, configs[0].seed)
    if args.config:
        run.input(args.config)
    results = [bandwidth_sweep(c, args.workers, keys=("sweep", c.p)) for c in configs]
    run.write("sweep.csv", sweep_to_csv(results))
    run.write("summary.json", dump_json({
        "best_h": {str(r.p): r.best_h for r in results},
        "identity_residual": max(r.identity_residual for r in results),
    }))
    run.finish()
    return EXIT_OK


def cmd_clt(args) -> int:
    cfg = _resolve_config(args, "clt")
    known = {"n", "p", "N", "h", "x0", "sigma", "s", "m", "seed", "mean", "smooth", "window"}
    unknown = set(cfg) - known
    if unknown:
        raise ConfigError(f"unknown field(s) {sorted(unknown)}", sorted(unknown)[0])
    run = _Run(args, "clt", cfg, cfg.get("seed"))
    if args.config:
        run.input(args.config)
    res = clt_experiment(**cfg, workers=args.workers)
    run.write("clt.csv", "statistic\n" + "".join(fmt(v) + "\n" for v in res.statistics))
    run.write("summary.json", dump_json(res.summary()))
    run.finish()
    return EXIT_OK


def cmd_diagnose(args) -> int:
    data = _read_data(args.data)
    if data.n < 2:
        raise CLIError(f"{args.data}: covariance estimation needs at least two curves "
                       f"(found {data.n})", EXIT_DATA)
    if data.grid.d != 1:
        raise CLIError(f"{args.data}: the diagnostic needs a one-dimensional design", EXIT_DATA)
    resolved = {"data": str(args.data), "h": args.h, "m": args.m,
                "mean_h": args.mean_h, "mean_m": args.mean_m}
    run = _Run(args, "diagnose", resolved)
    run.input(args.data)
    report = smoothness_report(data, args.h, args.m, args.mean_h, args.mean_m)
    run.write("report.csv", report.to_csv())
    run.write("summary.json", dump_json(report.summary()))
    run.finish()
    return EXIT_OK


# ------------------------------------------------------------------- parser

def _add_common(p, seed=True):
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1,
                   help="worker threads (results do not depend on it)")
    if seed:
        p.add_argument("--seed", type=int, default=None, help="override the master seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fdaderiv", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate one dataset from a config")
    p.add_argument("--config", required=True)
    p.add_argument("--replicate", type=int, default=0)
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="estimate a mean derivative from a wide CSV")
    p.add_argument("data")
    p.add_argument("-s", default="1", help="derivative order; comma list for d > 1")
    p.add_argument("-m", type=int, default=3, help="local polynomial order")
    p.add_argument("--h", type=float, default=None, help="bandwidth")
    p.add_argument("--cv", action="store_true", help="choose h by leave-one-curve-out CV")
    p.add_argument("--h-grid", default=None, help="comma-separated CV bandwidths")
    p.add_argument("--trim", action=argparse.BooleanOptionalAction, default=True,
                   help="evaluate only on [h, 1-h] (default) or on every design point")
    p.add_argument("--periodic", type=int, default=0, metavar="PAD",
                   help="wrap PAD columns from the neighbouring curves onto each side; "
                        "with --trim the whole original period is then evaluated")
    p.add_argument("--c", type=float, default=2.0, help="lower bandwidth constant, h > c/p")
    p.add_argument("--h0", type=float, default=0.5, help="largest admissible bandwidth")
    _add_common(p, seed=False)
    p.set_defaults(func=cmd_estimate, seed=None)

    for name, func, text in (("rates", cmd_rates, "rate table or rate slopes"),
                             ("sweep", cmd_sweep, "bandwidth sweep with error decomposition"),
                             ("clt", cmd_clt, "central limit check at one point")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config")
        names = sorted(k for k, v in PRESET_COMMAND.items() if v == name)
        p.add_argument("--preset", choices=names)
        p.add_argument("--scale", type=float, default=None,
                       help="multiply the replicate count N by this factor")
        _add_common(p)
        p.set_defaults(func=func)

    p = sub.add_parser("diagnose", help="covariance smoothness diagnostic")
    p.add_argument("data")
    p.add_argument("--h", type=float, required=True)
    p.add_argument("-m", type=int, default=2)
    p.add_argument("--mean-h", type=float, default=None)
    p.add_argument("--mean-m", type=int, default=None)
    _add_common(p, seed=False)
    p.set_defaults(func=cmd_diagnose, seed=None)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "workers", 1) < 1:
        parser.error("--workers must be at least 1")
    try:
        return args.func(args)
    except CLIError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataFormatError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (SingularDesignError, NoValidBandwidthError, NumericalError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
