"""Batch experiment runner.

    heatobs <kind> --config cfg.json --out DIR [--seed S] [--workers W]
    heatobs plot-data --report DIR/<kind>.csv --out DIR

A config is a JSON object::

    {"schema_version": 1, "kind": "spectral-sweep",
     "grid": {"n": 1, "side_length": 20, "samples": 1024},
     "set": {"kind": "stripes", "axis": 0, "width": 0.5, "period": 1.0},
     "params": {"N": [2, 4, 8]},
     "seed": 0, "workers": 1}

List-valued sweep parameters are expanded into a Cartesian product, one
report row per tuple.  Exit codes: 0 clean, 2 config error, 3 flagged rows.
"""
from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import counterexample as cx
from .constants import corollary_chain
from .errors import (OK, ConfigError, ConstantEffectivelyInfinite, HeatObsError,
                     NotConverged)
from .grid import GridFunction, make_grid
from .observability import interpolation_constant, obs_constant_estimate, time_quadrature
from .sets import rasterize, spec_from_dict, thickness_profile
from .spectral import random_bandlimited, spectral_constant_estimate
from .weak_obs import DESCRIPTORS, audit_inequality

SCHEMA_VERSION = 1
WORKERS_ENV = "HEATOBS_WORKERS"
KINDS = ("thickness", "spectral-sweep", "obs-estimate", "interpolation", "counterexample",
         "constants-chain", "audit")
EXIT_OK, EXIT_CONFIG, EXIT_FLAGGED = 0, 2, 3
MARGIN_BELOW_ONE = "MarginBelowOne"

TOP_KEYS = {"schema_version", "kind", "grid", "set", "params", "seed", "workers"}

# kind -> (sweep keys, scalar keys with defaults); sweep keys accept a number or a list
PARAMS = {
    "thickness": ({"L"}, {"bins": 10}),
    "spectral-sweep": ({"N"}, {"tol": 1e-8}),
    "obs-estimate": ({"T"}, {"K": 64, "scheme": "trapezoid", "tol": 1e-8}),
    "interpolation": ({"T", "theta"}, {"probes": 20, "N": 3.0}),
    "counterexample": ({"k"}, {"n": 1, "T": 1.0, "r": 1.0, "r_prime": 2.0, "method": "kernel"}),
    "constants-chain": ({"gamma", "L", "theta", "T"}, {"n": 1, "generic_C": 1.0}),
    "audit": (set(), {"descriptor": None, "function": None, "inputs": {}, "knobs": {}}),
}
NEEDS_GRID = {"thickness", "spectral-sweep", "obs-estimate", "interpolation", "audit"}
NEEDS_SET = {"thickness", "spectral-sweep", "obs-estimate", "interpolation"}

PLOT_COLUMNS = {
    "thickness": ("L", "gamma_min"),
    "spectral-sweep": ("N", "ln_C_est"),
    "obs-estimate": ("T", "ln_C_obs"),
    "interpolation": ("T", "c_hold_max"),
    "counterexample": ("k", "ratio", "bound"),
    "constants-chain": ("gamma", "log_c_obs"),
    "audit": ("id", "ln_margin"),
}


# ---------------------------------------------------------------- config

def _positive_number(value, path):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigError(f"{path}: expected a finite number, got {value!r}")
    return value


def _sweep_values(value, path):
    vals = value if isinstance(value, list) else [value]
    if not vals:
        raise ConfigError(f"{path}: empty sweep")
    return [_positive_number(v, f"{path}[{i}]") for i, v in enumerate(vals)]


def validate_config(cfg) -> dict:
    """Check a parsed config; return it with defaults filled in.  Raises ConfigError."""
    if not isinstance(cfg, dict):
        raise ConfigError("config: expected a JSON object")
    extra = set(cfg) - TOP_KEYS
    if extra:
        raise ConfigError(f"config: unknown key(s) {sorted(extra)}")
    if cfg.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"schema_version: unsupported value {cfg.get('schema_version')!r} (expected {SCHEMA_VERSION})")
    kind = cfg.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"kind: unknown experiment kind {kind!r}")
    out = {"schema_version": SCHEMA_VERSION, "kind": kind}
    if kind in NEEDS_GRID:
        g = cfg.get("grid")
        if not isinstance(g, dict) or set(g) != {"n", "side_length", "samples"}:
            raise ConfigError("grid: expected exactly the keys n, side_length, samples")
        try:
            make_grid(g["n"], g["side_length"], g["samples"])
        except (HeatObsError, TypeError) as exc:
            raise ConfigError(f"grid: {exc}") from exc
        out["grid"] = dict(g)
    elif "grid" in cfg:
        raise ConfigError(f"grid: not used by kind {kind!r}")
    if kind in NEEDS_SET:
        if "set" not in cfg:
            raise ConfigError("set: required for this kind")
        spec_from_dict(cfg["set"], "set")
        out["set"] = cfg["set"]
    elif "set" in cfg:
        raise ConfigError(f"set: not used by kind {kind!r}")
    sweep, scalars = PARAMS[kind]
    params = cfg.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("params: expected an object")
    unknown = set(params) - sweep - set(scalars)
    if unknown:
        raise ConfigError(f"params: unknown key(s) {sorted(unknown)}")
    p = dict(scalars)
    for key in sweep:
        if key not in params:
            raise ConfigError(f"params.{key}: required")
        p[key] = _sweep_values(params[key], f"params.{key}")
    for key in scalars:
        if key in params:
            p[key] = params[key]
    if kind == "audit":
        _validate_audit(p)
    if kind == "counterexample" and p["method"] not in ("kernel", "spectral"):
        raise ConfigError("params.method: expected 'kernel' or 'spectral'")
    out["params"] = p
    seed = cfg.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2 ** 64:
        raise ConfigError("seed: expected an integer in [0, 2^64)")
    out["seed"] = seed
    workers = cfg.get("workers")
    if workers is not None and (not isinstance(workers, int) or workers < 1):
        raise ConfigError("workers: expected a positive integer")
    out["workers"] = workers
    return out


def _validate_audit(p):
    if p["descriptor"] not in DESCRIPTORS:
        raise ConfigError(f"params.descriptor: unknown descriptor {p['descriptor']!r}")
    if not isinstance(p["inputs"], dict):
        raise ConfigError("params.inputs: expected an object")
    for key, value in p["inputs"].items():
        if isinstance(value, str):
            continue
        p["inputs"][key] = _sweep_values(value, f"params.inputs.{key}")
    desc = DESCRIPTORS[p["descriptor"]]
    bad = set(p["knobs"]) - set(desc.knobs)
    if bad:
        raise ConfigError(f"params.knobs: unknown knob(s) {sorted(bad)} for {desc.id}")
    if p["descriptor"] != "SERIES_SUM":
        fn = p["function"]
        if not isinstance(fn, dict) or fn.get("kind") not in ("gaussian", "bandlimited"):
            raise ConfigError("params.function: expected {'kind': 'gaussian'|'bandlimited', ...}")
        allowed = {"gaussian": {"kind", "width", "center", "truncate"},
                   "bandlimited": {"kind", "N", "window"}}[fn["kind"]]
        if set(fn) - allowed:
            raise ConfigError(f"params.function: unknown key(s) {sorted(set(fn) - allowed)}")


# ---------------------------------------------------------------- rows

def tuple_seed(master: int, index: int) -> int:
    """Seed for one parameter tuple, independent of scheduling."""
    return int(np.random.SeedSequence([master, index]).generate_state(1, dtype=np.uint32)[0])


def _grid(cfg):
    g = cfg["grid"]
    return make_grid(g["n"], g["side_length"], g["samples"])


def _mask(cfg):
    return rasterize(spec_from_dict(cfg["set"]), _grid(cfg))


def _tuples(cfg):
    kind, p = cfg["kind"], cfg["params"]
    if kind == "audit":
        keys = sorted(k for k, v in p["inputs"].items() if not isinstance(v, str))
        vals = [p["inputs"][k] for k in keys]
    else:
        keys = sorted(PARAMS[kind][0])
        vals = [p[k] for k in keys]
    return [dict(zip(keys, combo)) for combo in itertools.product(*vals)]


def _audit_function(cfg, seed):
    fn = cfg["params"]["function"]
    grid = _grid(cfg)
    if fn["kind"] == "gaussian":
        width = float(fn.get("width", 1.0))
        center = tuple(np.zeros(grid.n) + np.asarray(fn.get("center", 0.0), dtype=float))
        vals = np.exp(-grid.displacement_sq(center, periodic=False) / (4 * width))
        if "truncate" in fn:
            vals = np.where(grid.displacement_sq(center, periodic=False) < fn["truncate"] ** 2, vals, 0.0)
        return GridFunction(grid, vals)
    f = random_bandlimited(grid, fn.get("N", 3.0), seed)
    window = float(fn.get("window", 8.0))
    return GridFunction(grid, f.values * np.exp(-grid.radius_sq / window))


def _row_thickness(cfg, tup, seed):
    rep = thickness_profile(_mask(cfg), tup["L"], bins=int(cfg["params"]["bins"]))
    return {"gamma_min": rep.gamma_min, "gamma_uncertainty": rep.gamma_uncertainty,
            "argmin_offset": " ".join(str(int(i)) for i in rep.argmin_offset)}, []


def _row_spectral(cfg, tup, seed):
    try:
        est = spectral_constant_estimate(_mask(cfg), tup["N"], tol=cfg["params"]["tol"], seed=seed)
        flags = []
    except ConstantEffectivelyInfinite as exc:
        est, flags = exc.estimate, ["ConstantEffectivelyInfinite"]
    return {"lambda_min": est.eigenvalue, "C_est": est.value, "iterations": est.iterations,
            "residual": est.residual}, flags


def _row_obs(cfg, tup, seed):
    p = cfg["params"]
    quad = time_quadrature(tup["T"], scheme=p["scheme"], K=int(p["K"]))
    est = obs_constant_estimate(_mask(cfg), tup["T"], quad=quad, tol=p["tol"], seed=seed)
    return {"C_obs": est.value, "iterations": est.iterations, "residual": est.residual}, list(est.flags)


def _row_interp(cfg, tup, seed):
    mask = _mask(cfg)
    rng = np.random.default_rng(seed)
    worst = -math.inf
    for _ in range(int(cfg["params"]["probes"])):
        f = random_bandlimited(mask.grid, cfg["params"]["N"], int(rng.integers(2 ** 31)))
        worst = max(worst, interpolation_constant(f, mask, tup["T"], tup["theta"]))
    return {"c_hold_max": worst}, []


def _row_counter(cfg, tup, seed):
    p = cfg["params"]
    res = cx.ratio_numeric(int(p["n"]), p["T"], p["r"], p["r_prime"], tup["k"], method=p["method"])
    return {"num": res.num, "den": res.den, "ratio": res.ratio,
            "bound": math.nan if res.bound is None else res.bound}, list(res.flags)


def _row_chain(cfg, tup, seed):
    p = cfg["params"]
    ch = corollary_chain(int(p["n"]), tup["gamma"], tup["L"], tup["theta"], tup["T"], p["generic_C"])
    return {"c_spec": ch.c_spec, "c_hold": ch.c_hold, "log_c_obs": ch.c_obs.log,
            "c_hold_corollary": ch.c_hold_corollary, "log_c_obs_corollary": ch.c_obs_corollary.log}, list(ch.flags)


def _row_audit(cfg, tup, seed):
    p = cfg["params"]
    inputs = dict(tup)
    inputs.update({k: v for k, v in p["inputs"].items() if isinstance(v, str)})
    if p["descriptor"] != "SERIES_SUM":
        key = "f" if p["descriptor"] in ("DERIV_SUP", "SMALLNESS_ANNULUS", "RING_CHAIN", "WEIGHTED_DECAY") else "u0"
        inputs[key] = _audit_function(cfg, seed)
    rep = audit_inequality(p["descriptor"], inputs, p["knobs"])
    flags = list(rep.flags)
    if not rep.holds:
        flags.append(MARGIN_BELOW_ONE)
    mgc = rep.minimal_generic_constant
    return {"lhs": rep.lhs, "rhs": rep.rhs, "margin": rep.margin, "log_lhs": rep.log_lhs,
            "log_rhs": rep.log_rhs, "minimal_generic_constant": math.nan if mgc is None else mgc}, flags


ROW_FUNCS = {
    "thickness": _row_thickness,
    "spectral-sweep": _row_spectral,
    "obs-estimate": _row_obs,
    "interpolation": _row_interp,
    "counterexample": _row_counter,
    "constants-chain": _row_chain,
    "audit": _row_audit,
}


def _run_row(args):
    cfg, index, tup = args
    seed = tuple_seed(cfg["seed"], index)
    t0 = time.perf_counter()
    try:
        out, flags = ROW_FUNCS[cfg["kind"]](cfg, tup, seed)
    except NotConverged:
        out, flags = {}, ["NotConverged"]
    except HeatObsError as exc:
        out, flags = {}, [type(exc).__name__]
    return index, tup, out, flags, time.perf_counter() - t0


# ---------------------------------------------------------------- output

def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "%.16e" % float(value)
    return str(value)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(r.get(h, math.nan)) for h in header])
    return buf.getvalue()


def default_workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"{WORKERS_ENV}: expected a positive integer, got {env!r}")
        if n < 1:
            raise ConfigError(f"{WORKERS_ENV}: expected a positive integer, got {env!r}")
        return n
    return os.cpu_count() or 1


def run_config(cfg: dict, out_dir, seed=None, workers=None) -> int:
    """Run a validated config and write ``<kind>.csv``, ``<kind>.meta.json`` and
    ``<kind>.timings.csv`` into ``out_dir``.  Returns the process exit code.

    Wall times go to the timings file so the main report is byte-stable.
    """
    cfg = dict(cfg)
    if seed is not None:
        cfg["seed"] = seed
    workers = workers or cfg.get("workers") or default_workers()
    tuples = _tuples(cfg)
    jobs = [(cfg, i, t) for i, t in enumerate(tuples)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_row, jobs))
    else:
        results = [_run_row(j) for j in jobs]
    results.sort(key=lambda r: r[0])
    keys = sorted(tuples[0]) if tuples else []
    out_cols = []
    rows, flagged = [], False
    for index, tup, out, flags, _ in results:
        for c in out:
            if c not in out_cols:
                out_cols.append(c)
        flagged |= bool(flags)
        row = {"id": index, **tup, **out, "flags": ";".join(flags) if flags else OK}
        if cfg["kind"] == "spectral-sweep":
            row["ln_C_est"] = math.log(out["C_est"]) if out.get("C_est", 0) > 0 else math.nan
        if cfg["kind"] == "obs-estimate":
            row["ln_C_obs"] = math.log(out["C_obs"]) if out.get("C_obs", 0) > 0 else math.nan
        if cfg["kind"] == "audit":
            m = out.get("margin", math.nan)
            row["ln_margin"] = math.log(m) if m and m > 0 and math.isfinite(m) else math.nan
        rows.append(row)
    extra = [c for c in ("ln_C_est", "ln_C_obs", "ln_margin") if any(c in r for r in rows)]
    header = ["id"] + keys + out_cols + extra + ["flags"]
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    kind = cfg["kind"]
    (out_dir / f"{kind}.csv").write_text(_csv_text(header, rows))
    (out_dir / f"{kind}.meta.json").write_text(json.dumps({"kind": kind, "config": cfg}, sort_keys=True, indent=2) + "\n")
    (out_dir / f"{kind}.timings.csv").write_text(
        _csv_text(["id", "wall_time"], [{"id": r[0], "wall_time": r[4]} for r in results]))
    return EXIT_FLAGGED if flagged else EXIT_OK


def emit_plot_data(report, kind: str, out_dir) -> Path:
    """Write a whitespace-separated numeric file of the kind's plot columns."""
    report = Path(report)
    with report.open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ConfigError(f"{report}: report has no rows")
    cols = PLOT_COLUMNS[kind]
    missing = [c for c in cols if c not in rows[0]]
    if missing:
        raise ConfigError(f"{report}: missing column(s) {missing}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{kind}.plot.dat"
    lines = ["# " + " ".join(cols)]
    lines += [" ".join("%.16e" % float(r[c]) for c in cols) for r in rows]
    path.write_text("\n".join(lines) + "\n")
    return path


# ---------------------------------------------------------------- entry

def _parser():
    ap = argparse.ArgumentParser(prog="heatobs", description="Heat observability experiments.")
    sub = ap.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        sp = sub.add_parser(kind, help=f"run a {kind} config")
        sp.add_argument("--config", required=True, help="path to a JSON config")
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--seed", type=int, default=None, help="master seed (overrides the config)")
        sp.add_argument("--workers", type=int, default=None,
                        help=f"worker processes (default: config, then ${WORKERS_ENV}, then CPU count)")
    pd = sub.add_parser("plot-data", help="turn a report into plot-ready columns")
    pd.add_argument("--report", required=True, help="path to <kind>.csv")
    pd.add_argument("--out", required=True, help="output directory")
    pd.add_argument("--kind", default=None, help="report kind (default: read from the .meta.json file)")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "plot-data":
            kind = args.kind
            if kind is None:
                meta = Path(args.report).with_suffix(".meta.json")
                kind = json.loads(meta.read_text())["kind"] if meta.exists() else Path(args.report).stem
            if kind not in PLOT_COLUMNS:
                raise ConfigError(f"kind: unknown report kind {kind!r}")
            if not Path(args.report).exists():
                raise ConfigError(f"report: {args.report} not found")
            print(emit_plot_data(args.report, kind, args.out))
            return EXIT_OK
        try:
            raw = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"config: {exc}") from exc
        cfg = validate_config(raw)
        if cfg["kind"] != args.command:
            raise ConfigError(f"kind: config is {cfg['kind']!r} but subcommand is {args.command!r}")
        if args.seed is not None and not 0 <= args.seed < 2 ** 64:
            raise ConfigError("--seed: expected an integer in [0, 2^64)")
        if args.workers is not None and args.workers < 1:
            raise ConfigError("--workers: expected a positive integer")
        return run_config(cfg, args.out, seed=args.seed, workers=args.workers)
    except ConfigError as exc:
        print(f"heatobs: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
