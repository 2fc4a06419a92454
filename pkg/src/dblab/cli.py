"""Command line driver: config ingestion, experiment dispatch, reports.

Every command reads a JSON config (validated against a per-command
schema), applies flag overrides, runs the experiment, and writes a
deterministic ``report.json`` into the output directory.  All volatile
fields (timestamp, wall time) live under the single ``meta`` key, so
byte comparison of reports modulo that subtree is the determinism
contract.  ``--format csv`` additionally writes the command's grid
tables as ``*.csv``.

Exit codes: 0 success, 2 config or schema error, 3 numeric failure
(diagnostic payload still written).
"""

from __future__ import annotations

import argparse
import csv
import datetime
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np
import jsonschema

from . import __version__
from .spaces import (PhaseProfile, PhaseRangeError, UnboundedIntervalError,
                     space_from_json)
from .sequences import (RealSequence, WindowMassError, density,
                        generate_by_phase, sequence_from_file)
from .regularity import regularity_report
from .kernels import (EigensolverError, IllPosedWindowError, QuadGridError,
                      frame_bounds, min_norm_interpolant, on_nodes,
                      riesz_bounds)
from . import construct
from .construct import (DensityMarginError, IllConditionedError,
                        MomentMatchError, MomentOverflowError, PaddingError,
                        PlanError, PotentialField, block_moment_residuals,
                        build_plan, lagrange_interpolate, peak_decay_fit,
                        peak_function, peak_lambda, peak_mass_profile,
                        verify_multiplier)
from .acceptance import run_suite

NUMERIC_ERRORS = (PhaseRangeError, UnboundedIntervalError, WindowMassError,
                  EigensolverError, IllPosedWindowError, QuadGridError,
                  MomentMatchError, MomentOverflowError, DensityMarginError,
                  PaddingError, PlanError, IllConditionedError,
                  FloatingPointError, np.linalg.LinAlgError)


class ConfigError(Exception):
    """Anything wrong with the config file, flags, or environment."""


# ---------------------------------------------------------------------------
# schemas
# ---------------------------------------------------------------------------

_SPACE = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["pw", "zeros", "geometric"]},
        "a": {"type": "number"},
        "zeros": {"type": "array",
                  "items": {"type": "array", "items": {"type": "number"},
                            "minItems": 2, "maxItems": 2}},
        "base": {"type": "number"},
        "depth": {"type": "integer"},
        "eps": {"type": "number"},
    },
    "required": ["kind"],
}

_WINDOW = {"type": "array", "items": {"type": "number"},
           "minItems": 2, "maxItems": 2}

_SEQUENCE = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["explicit", "phase", "on_nodes", "file"]},
        "points": {"type": "array", "items": {"type": "number"}},
        "step": {"type": "number"},
        "alpha": {"type": "number"},
        "path": {"type": "string"},
    },
    "required": ["kind"],
}

_VALUES = {
    "anyOf": [
        {"type": "array", "items": {"type": "number"}, "minItems": 1},
        {"type": "object",
         "properties": {"kind": {"enum": ["delta", "random"]},
                        "index": {"type": "integer"}},
         "required": ["kind"]},
    ]
}


def _schema(properties, required):
    props = {"space": _SPACE, "window": _WINDOW, "seed": {"type": "integer"}}
    props.update(properties)
    return {"type": "object", "properties": props, "required": required,
            "additionalProperties": False}


SCHEMAS = {
    "phase": _schema({"grid_n": {"type": "integer", "minimum": 2}},
                     ["space", "window"]),
    "doubling": _schema({"scales": {"type": "array",
                                    "items": {"type": "number"}},
                         "grid_n": {"type": "integer", "minimum": 3},
                         "centers_per_scale": {"type": "integer",
                                               "minimum": 1},
                         "pairs": {"type": "integer", "minimum": 1}},
                        ["space", "window"]),
    "density": _schema({"sequence": _SEQUENCE,
                        "r_values": {"type": "array",
                                     "items": {"type": "number"},
                                     "minItems": 1}},
                       ["space", "window", "sequence", "r_values"]),
    "frame": _schema({"sequence": _SEQUENCE,
                      "trim_margin": {"type": "integer", "minimum": 0},
                      "alpha": {"type": "number"},
                      "basis_window": _WINDOW},
                     ["space", "window", "sequence"]),
    "riesz": _schema({"sequence": _SEQUENCE},
                     ["space", "window", "sequence"]),
    "interpolate": _schema({"sequence": _SEQUENCE, "values": _VALUES,
                            "method": {"enum": ["min_norm", "lagrange",
                                                "both"]},
                            "eval_grid_n": {"type": "integer", "minimum": 0}},
                           ["space", "window", "sequence", "values"]),
    "multiplier": _schema({"sequence": _SEQUENCE,
                           "epsilon_margin": {"type": "number",
                                              "exclusiveMinimum": 0,
                                              "exclusiveMaximum": 1},
                           "n": {"type": "integer", "minimum": 1},
                           "M": {"type": "integer", "minimum": 1},
                           "gamma": {"type": "number",
                                     "exclusiveMinimum": 0},
                           "protect": {"type": "array",
                                       "items": {"type": "number"}},
                           "with_potential": {"type": "boolean"}},
                          ["space", "window", "sequence", "epsilon_margin"]),
    "peak": _schema({"x0": {"type": "number"},
                     "m_poles": {"type": "integer", "minimum": 1},
                     "epsilon_margin": {"type": "number",
                                        "exclusiveMinimum": 0,
                                        "exclusiveMaximum": 1},
                     "d_fit": _WINDOW, "d_cut": {"type": "number"},
                     "d_max": {"type": "number"}},
                    ["space", "window", "x0", "m_poles"]),
    "suite": {"type": "object",
              "properties": {"criteria": {"type": "array",
                                          "items": {"type": "integer",
                                                    "minimum": 1,
                                                    "maximum": 11}},
                             "seed": {"type": "integer"}},
              "additionalProperties": False},
}


# ---------------------------------------------------------------------------
# config plumbing
# ---------------------------------------------------------------------------

def _load_config(path):
    if path is None:
        return {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    return cfg


def _apply_overrides(cfg, args):
    if args.window is not None:
        parts = args.window.split(",")
        if len(parts) != 2:
            raise ConfigError("--window expects 'lo,hi'")
        try:
            cfg["window"] = [float(parts[0]), float(parts[1])]
        except ValueError as exc:
            raise ConfigError(f"--window values must be numbers: {exc}") from exc
    if args.seed is not None:
        cfg["seed"] = args.seed
    return cfg


def _threads_from_env():
    raw = os.environ.get("DBLAB_THREADS")
    if raw is None:
        return 1
    try:
        val = int(raw)
    except ValueError as exc:
        raise ConfigError(f"DBLAB_THREADS must be an integer, got {raw!r}") \
            from exc
    if val < 1:
        raise ConfigError("DBLAB_THREADS must be >= 1")
    return val


def _profile_from(cfg) -> PhaseProfile:
    try:
        spec = space_from_json(cfg["space"])
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad space config: {exc}") from exc
    eps = cfg["space"].get("eps", 1e-12)
    return PhaseProfile(spec, eps_eval=float(eps))


def _resolve_sequence(cfg_seq, profile, window) -> RealSequence:
    kind = cfg_seq["kind"]
    try:
        if kind == "explicit":
            return RealSequence(tuple(float(p) for p in cfg_seq["points"]))
        if kind == "phase":
            return generate_by_phase(profile, window,
                                     step=float(cfg_seq["step"]),
                                     alpha=float(cfg_seq.get("alpha", 0.0)))
        if kind == "on_nodes":
            return on_nodes(profile, window,
                            alpha=float(cfg_seq.get("alpha", math.pi / 2)))
        if kind == "file":
            return sequence_from_file(cfg_seq["path"])
    except NUMERIC_ERRORS:
        raise
    except (KeyError, ValueError, OSError) as exc:
        raise ConfigError(f"bad sequence config: {exc}") from exc
    raise ConfigError(f"unknown sequence kind {kind!r}")


# ---------------------------------------------------------------------------
# command handlers: return (payload, {csv_name: (header, rows)})
# ---------------------------------------------------------------------------

def _run_phase(cfg, rng):
    profile = _profile_from(cfg)
    lo, hi = cfg["window"]
    n = cfg.get("grid_n", 1001)
    xs = np.linspace(lo, hi, n)
    phi = profile.phase(xs)
    dphi = profile.phase_derivative(xs)
    curv = profile.phase_second(xs) / dphi ** 2
    p_lo, p_hi = profile.phase_range()
    payload = {
        "window": [lo, hi], "grid_n": int(n),
        "phase_lo": float(phi[0]), "phase_hi": float(phi[-1]),
        "mass": float(phi[-1] - phi[0]),
        # infinities are not strict JSON; null marks an unbounded side
        "phase_range": [None if math.isinf(p_lo) else p_lo,
                        None if math.isinf(p_hi) else p_hi],
        "dphi_min": float(np.min(dphi)), "dphi_max": float(np.max(dphi)),
        "curvature_sup": float(np.max(np.abs(curv))),
    }
    rows = [(float(x), float(p), float(d), float(c))
            for x, p, d, c in zip(xs, phi, dphi, curv)]
    return payload, {"phase_profile": (("x", "phase", "phase_derivative",
                                        "curvature"), rows)}


def _run_doubling(cfg, rng):
    profile = _profile_from(cfg)
    rep = regularity_report(profile, cfg["window"],
                            scales=cfg.get("scales"),
                            centers_per_scale=cfg.get("centers_per_scale", 16),
                            grid_n=cfg.get("grid_n", 4001),
                            pairs=cfg.get("pairs", 400),
                            seed=cfg.get("seed", 0))
    rows = [(p.center, p.scale, p.ratio) for p in rep.doubling.probes]
    return rep.to_json(), {"doubling_probes": (("center", "scale", "ratio"),
                                               rows)}


def _run_density(cfg, rng):
    profile = _profile_from(cfg)
    seq = _resolve_sequence(cfg["sequence"], profile, cfg["window"])
    rep = density(profile, seq, cfg["window"], cfg["r_values"])
    rows = []
    for r, (wmin, wmax) in zip(rep.r_values, rep.witnesses):
        rows.append((r, "min", wmin.lo, wmin.hi, wmin.count))
        rows.append((r, "max", wmax.lo, wmax.hi, wmax.count))
    payload = rep.to_json()
    payload["points_used"] = len(seq)
    return payload, {"density_witnesses": (("r", "side", "lo", "hi", "count"),
                                           rows)}


def _run_frame(cfg, rng):
    profile = _profile_from(cfg)
    seq = _resolve_sequence(cfg["sequence"], profile, cfg["window"])
    rep = frame_bounds(profile, seq,
                       basis_window=cfg.get("basis_window"),
                       trim_margin=cfg.get("trim_margin", 4),
                       alpha=cfg.get("alpha", math.pi / 2))
    rows = list(enumerate(rep.witness))
    return rep.to_json(), {"frame_witness": (("index", "coefficient"), rows)}


def _run_riesz(cfg, rng):
    profile = _profile_from(cfg)
    seq = _resolve_sequence(cfg["sequence"], profile, cfg["window"])
    rep = riesz_bounds(profile, seq)
    rows = list(enumerate(rep.witness))
    return rep.to_json(), {"riesz_witness": (("index", "coefficient"), rows)}


def _resolve_values(cfg_values, count, rng):
    if isinstance(cfg_values, list):
        vals = np.asarray(cfg_values, dtype=float)
        if len(vals) != count:
            raise ConfigError(f"values length {len(vals)} != node count {count}")
        return vals
    if cfg_values["kind"] == "delta":
        idx = int(cfg_values.get("index", count // 2))
        if not 0 <= idx < count:
            raise ConfigError(f"delta index {idx} outside 0..{count - 1}")
        vals = np.zeros(count)
        vals[idx] = 1.0
        return vals
    return rng.standard_normal(count)


def _run_interpolate(cfg, rng):
    profile = _profile_from(cfg)
    seq = _resolve_sequence(cfg["sequence"], profile, cfg["window"])
    values = _resolve_values(cfg["values"], len(seq), rng)
    method = cfg.get("method", "both")
    payload = {"nodes": len(seq), "values": [float(v) for v in values],
               "method": method}
    tables = {}
    span = (seq.points[0] - 6.0, seq.points[-1] + 6.0)
    mn = lg = None
    if method in ("min_norm", "both"):
        mn = min_norm_interpolant(profile, seq, values)
        payload["min_norm"] = {
            "residual_max": float(np.max(np.abs(mn.residuals(values)))),
            "norm_sq": mn.norm_sq,
        }
    if method in ("lagrange", "both"):
        lg = lagrange_interpolate(profile, seq, values)
        node_arr = np.asarray(seq.points)
        payload["lagrange"] = {
            "residual_max": float(np.max(np.abs(lg(node_arr) - values))),
            "norm_windowed": lg.norm_windowed(span),
        }
    if mn is not None and lg is not None and mn.norm_sq > 0:
        payload["norm_ratio"] = payload["lagrange"]["norm_windowed"] / mn.norm_sq
    grid_n = cfg.get("eval_grid_n", 0)
    if grid_n:
        xs = np.linspace(span[0], span[1], grid_n)
        cols = ["x"]
        data = [xs]
        if mn is not None:
            cols.append("min_norm")
            data.append(np.atleast_1d(mn(xs)))
        if lg is not None:
            cols.append("lagrange")
            data.append(np.atleast_1d(lg(xs)))
        rows = list(zip(*[[float(v) for v in col] for col in data]))
        tables["interpolant_grid"] = (tuple(cols), rows)
    return payload, tables


def _run_multiplier(cfg, rng):
    profile = _profile_from(cfg)
    seq = _resolve_sequence(cfg["sequence"], profile, cfg["window"])
    plan = build_plan(profile, seq, cfg["window"],
                      epsilon_density_margin=cfg["epsilon_margin"],
                      n=cfg.get("n"), M=cfg.get("M"), gamma=cfg.get("gamma"),
                      protect=tuple(cfg.get("protect", ())))
    residuals = block_moment_residuals(profile, plan)
    payload = {"plan": plan.to_json(),
               "block_moment_residuals": residuals,
               "block_moment_max": max((max(r) for r in residuals if r),
                                       default=0.0)}
    rows = [("lambda", float(p), 0.0, -1.0) for p in plan.lambda_used]
    for blk in plan.padded:
        rows.extend(("padded", float(p), 0.0, -1.0) for p in blk)
    for blk in plan.sigma:
        rows.extend(("sigma", z.real, z.imag, -float(m)) for z, m in blk)
    tables = {"plan_masses": (("kind", "re", "im", "weight"), rows)}
    if cfg.get("with_potential", True):
        field = PotentialField(profile, plan)
        payload["verify"] = verify_multiplier(profile, field).to_json()
    return payload, tables


def _run_peak(cfg, rng):
    profile = _profile_from(cfg)
    x0 = float(cfg["x0"])
    lam = peak_lambda(profile, x0, cfg["window"])
    plan = build_plan(profile, lam, cfg["window"],
                      epsilon_density_margin=cfg.get("epsilon_margin", 0.5),
                      protect=(x0,))
    field = PotentialField(profile, plan)
    peak = peak_function(profile, field, x0, m_poles=int(cfg["m_poles"]))
    d_fit = cfg.get("d_fit", [5.0, 50.0])
    fit = peak_decay_fit(profile, peak, d_lo=float(d_fit[0]),
                         d_hi=float(d_fit[1]))
    mass = peak_mass_profile(profile, peak, d_cut=cfg.get("d_cut", 50.0),
                             d_max=cfg.get("d_max", 200.0))
    payload = {"x0": x0, "poles": list(peak.poles),
               "normalization": float(peak(x0)),
               "decay_fit": fit, "mass_profile": mass,
               "plan": {"M": plan.M, "n": plan.n, "eta": plan.eta,
                        "blocks": plan.block_count}}
    t0 = construct.psi(profile, x0)
    y_lo = max(x0 - mass["d_max"], plan.window[0])
    y_hi = min(x0 + mass["d_max"], plan.window[1])
    rows = []
    for y in np.linspace(y_lo, y_hi, 801):
        rows.append((float(construct.psi(profile, y) - t0), float(peak(y))))
    return payload, {"peak_profile": (("d_psi", "value"), rows)}


def _run_suite(cfg, rng):
    suite = run_suite(cfg.get("criteria"))
    for line in suite.lines():
        print(line)
    rows = [(r.number, r.name, int(r.passed), r.runtime_s)
            for r in suite.results]
    payload = suite.to_json()
    return payload, {"suite_results": (("number", "name", "passed",
                                        "runtime_s"), rows)}


HANDLERS = {
    "phase": _run_phase, "doubling": _run_doubling, "density": _run_density,
    "frame": _run_frame, "riesz": _run_riesz, "interpolate": _run_interpolate,
    "multiplier": _run_multiplier, "peak": _run_peak, "suite": _run_suite,
}


# ---------------------------------------------------------------------------
# report emission
# ---------------------------------------------------------------------------

def _write_report(out_dir: Path, report: dict) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "report.json"
    path.write_text(json.dumps(report, sort_keys=True, indent=2) + "\n")
    return path


def _write_tables(out_dir: Path, tables: dict):
    for name, (header, rows) in tables.items():
        with open(out_dir / f"{name}.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="dblab",
        description="Numerical laboratory for sampling and interpolation "
                    "in de Branges spaces with doubling phase.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in HANDLERS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None,
                       help="path to a JSON config file")
        p.add_argument("--window", default=None, help="override: 'lo,hi'")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--format", choices=("json", "csv"), default="json",
                       help="csv additionally writes grid tables")
    args = parser.parse_args(argv)

    t_start = time.perf_counter()
    try:
        threads = _threads_from_env()
        cfg = _apply_overrides(_load_config(args.config), args)
        jsonschema.validate(cfg, SCHEMAS[args.command])
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except jsonschema.ValidationError as exc:
        print(f"config error: {exc.message}", file=sys.stderr)
        return 2

    rng = np.random.default_rng(cfg.get("seed", 0))
    status = 0
    tables = {}
    try:
        payload, tables = HANDLERS[args.command](cfg, rng)
        if args.command == "suite" and not payload["passed"]:
            status = 3
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NUMERIC_ERRORS as exc:
        payload = {"error": {"type": type(exc).__name__, "message": str(exc)}}
        status = 3
        print(f"numeric failure: {type(exc).__name__}: {exc}",
              file=sys.stderr)

    report = {
        "command": args.command,
        "config": cfg,
        "results": payload,
        "meta": {
            "timestamp": datetime.datetime.now(datetime.timezone.utc)
            .isoformat(),
            "wall_time_s": time.perf_counter() - t_start,
            "tool_version": __version__,
            "threads": threads,
        },
    }
    out_dir = Path(args.out)
    path = _write_report(out_dir, report)
    if args.format == "csv":
        _write_tables(out_dir, tables)
    if args.command != "suite":
        print(f"{args.command}: report written to {path}"
              + ("" if status == 0 else " (numeric failure)"))
    return status


if __name__ == "__main__":
    sys.exit(main())
