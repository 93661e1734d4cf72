"""Command line interface.

    transition-response [global options] <command> [options]

Commands: density, tails, response, simulate, zeta, reproduce.  Settings come
from built-in defaults, then the ``--config`` JSON file (one block per command
plus an optional ``global`` block), then command-line flags.

Exit codes: 0 success, 1 usage or configuration error, 2 numerical failure
(a JSON error report is printed and written to ``<out>/error.json``).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (
    ConvergenceError,
    DomainError,
    IllConditionedFit,
    NonConvergence,
    TailNotSummable,
)
from .io import OutputBundle, json_text, jsonable, metadata, write_json_atomic

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2


class ConfigError(ValueError):
    pass


GLOBAL_DEFAULTS = {"out": ".", "format": "json", "seed": 0, "threads": 1}

DEFAULTS = {
    "density": {"alpha": None, "grid_size": 1024, "k_max": 10_000, "tol": 1e-10,
                "max_iter": 500, "ulam": False, "ulam_cells": 4096},
    "tails": {"alpha": None, "grid_size": 1024, "k_max": 10_000,
              "n_window": [1000, 100_000], "n_points": 40},
    "response": {"potential": "x", "alpha_grid": None, "j_min": 4, "j_max": 10,
                 "k_max": 10_000, "grid_size": 1024, "srb_k_max": 200_000, "n_nodes": 32,
                 "fit_window": [1000, 100_000], "order": 2},
    "simulate": {"mode": "birkhoff", "alpha": 0.8, "n_steps": 1_000_000, "n_orbits": 16,
                 "initial_law": "unit", "burn_in": 1000, "potential": "x", "radius": 0.05,
                 "bins": 0, "alpha_grid": [0.875, 0.9375], "n_schedule": [10_000, 100_000,
                                                                         1_000_000]},
    "zeta": {"s": [2.0], "a": 1.0},
    "reproduce": {"checks": None, "n_steps": 10_000_000, "n_orbits": 64, "strict": False},
}

# alpha range accepted by the solvers
ALPHA_RANGE = (0.05, 2.0)


# --------------------------------------------------------------------------
# argument parsing


def _global_parent(suppress: bool):
    p = argparse.ArgumentParser(add_help=False)
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--config", default=d, help="JSON config file")
    p.add_argument("--out", default=d, help="output directory")
    p.add_argument("--format", choices=("csv", "json"), default=d,
                   help="format of tabular outputs")
    p.add_argument("--seed", type=int, default=d)
    p.add_argument("--threads", type=int, default=d)
    return p


def _floats(s):
    return [float(v) for v in s.split(",") if v.strip()]


def _ints(s):
    return [int(float(v)) for v in s.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="transition-response", parents=[_global_parent(False)],
                                 description=__doc__.split("\n\n")[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    g = [_global_parent(True)]
    S = argparse.SUPPRESS

    p = sub.add_parser("density", parents=g, help="induced invariant density")
    p.add_argument("--alpha", type=float, default=S)
    p.add_argument("--grid-size", dest="grid_size", type=int, default=S)
    p.add_argument("--k-max", dest="k_max", type=int, default=S)
    p.add_argument("--tol", type=float, default=S)
    p.add_argument("--max-iter", dest="max_iter", type=int, default=S)
    p.add_argument("--ulam", action="store_true", default=S, help="compare with the Ulam oracle")
    p.add_argument("--ulam-cells", dest="ulam_cells", type=int, default=S)

    p = sub.add_parser("tails", parents=g, help="return-time tails and Kac sum")
    p.add_argument("--alpha", type=float, default=S)
    p.add_argument("--grid-size", dest="grid_size", type=int, default=S)
    p.add_argument("--k-max", dest="k_max", type=int, default=S)
    p.add_argument("--n-window", dest="n_window", type=_ints, default=S, metavar="LO,HI")
    p.add_argument("--n-points", dest="n_points", type=int, default=S)

    p = sub.add_parser("response", parents=g, help="response curve and one-sided derivative")
    p.add_argument("--potential", action="append", default=S,
                   help="builtin name or expression in x; repeatable")
    p.add_argument("--alpha-grid", dest="alpha_grid", type=_floats, default=S)
    p.add_argument("--j-min", dest="j_min", type=int, default=S)
    p.add_argument("--j-max", dest="j_max", type=int, default=S)
    p.add_argument("--k-max", dest="k_max", type=int, default=S)
    p.add_argument("--grid-size", dest="grid_size", type=int, default=S)
    p.add_argument("--srb-k-max", dest="srb_k_max", type=int, default=S)
    p.add_argument("--n-nodes", dest="n_nodes", type=int, default=S)
    p.add_argument("--fit-window", dest="fit_window", type=_ints, default=S, metavar="LO,HI")
    p.add_argument("--order", type=int, default=S)

    p = sub.add_parser("simulate", parents=g, help="orbit ensembles")
    p.add_argument("--mode", choices=("birkhoff", "esslim"), default=S)
    p.add_argument("--alpha", type=float, default=S)
    p.add_argument("--n-steps", dest="n_steps", type=int, default=S)
    p.add_argument("--n-orbits", dest="n_orbits", type=int, default=S)
    p.add_argument("--initial-law", dest="initial_law", choices=("unit", "Y"), default=S)
    p.add_argument("--burn-in", dest="burn_in", type=int, default=S)
    p.add_argument("--potential", default=S)
    p.add_argument("--radius", type=float, default=S)
    p.add_argument("--bins", type=int, default=S)
    p.add_argument("--alpha-grid", dest="alpha_grid", type=_floats, default=S)
    p.add_argument("--n-schedule", dest="n_schedule", type=_ints, default=S)

    p = sub.add_parser("zeta", parents=g, help="Hurwitz zeta values")
    p.add_argument("--s", type=_floats, default=S, metavar="S1,S2,...")
    p.add_argument("--a", type=float, default=S)

    p = sub.add_parser("reproduce", parents=g, help="run the acceptance checks")
    p.add_argument("--checks", type=lambda s: [v.strip() for v in s.split(",")], default=S)
    p.add_argument("--n-steps", dest="n_steps", type=int, default=S)
    p.add_argument("--n-orbits", dest="n_orbits", type=int, default=S)
    p.add_argument("--strict", action="store_true", default=S,
                   help="exit 2 when a check fails")
    return ap


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    for block, vals in cfg.items():
        allowed = GLOBAL_DEFAULTS if block == "global" else DEFAULTS.get(block)
        if allowed is None:
            raise ConfigError(f"unknown config block '{block}'")
        if not isinstance(vals, dict):
            raise ConfigError(f"config block '{block}' must be an object")
        bad = sorted(set(vals) - set(allowed))
        if bad:
            raise ConfigError(f"unknown key(s) in '{block}': {', '.join(bad)}")
    return cfg


def resolve(args: argparse.Namespace) -> tuple[dict, dict]:
    """Effective (global, command) settings: defaults < config file < flags."""
    ns = vars(args).copy()
    cmd = ns.pop("command")
    file_cfg = load_config(ns["config"]) if ns.get("config") else {}
    ns.pop("config", None)
    glob = dict(GLOBAL_DEFAULTS)
    glob.update(file_cfg.get("global", {}))
    local = dict(DEFAULTS[cmd])
    local.update(file_cfg.get(cmd, {}))
    for k, v in ns.items():
        if k in GLOBAL_DEFAULTS:
            if v is not None:
                glob[k] = v
        else:
            local[k] = v
    _validate(cmd, glob, local)
    return glob, local


def _positive(d, *keys):
    for k in keys:
        v = d.get(k)
        if v is None or not isinstance(v, (int, float)) or not v > 0:
            raise ConfigError(f"{k} must be positive, got {v!r}")


def _alpha_ok(a, name="alpha"):
    if a is None:
        raise ConfigError(f"{name} is required")
    if not ALPHA_RANGE[0] <= float(a) <= ALPHA_RANGE[1]:
        raise ConfigError(f"{name}={a} outside [{ALPHA_RANGE[0]}, {ALPHA_RANGE[1]}]")


def _window_ok(w, name):
    if not isinstance(w, (list, tuple)) or len(w) != 2 or not 1 <= int(w[0]) < int(w[1]):
        raise ConfigError(f"{name} must be [lo, hi] with 1 <= lo < hi, got {w!r}")


def _validate(cmd, glob, c):
    if glob["format"] not in ("csv", "json"):
        raise ConfigError("format must be csv or json")
    if not isinstance(glob["seed"], int) or not 0 <= glob["seed"] < 2**64:
        raise ConfigError("seed must be a 64-bit unsigned integer")
    _positive(glob, "threads")
    if cmd == "density":
        _alpha_ok(c["alpha"])
        _positive(c, "grid_size", "k_max", "tol", "max_iter", "ulam_cells")
    elif cmd == "tails":
        _alpha_ok(c["alpha"])
        _positive(c, "grid_size", "k_max", "n_points")
        _window_ok(c["n_window"], "n_window")
    elif cmd == "response":
        _positive(c, "k_max", "grid_size", "srb_k_max", "n_nodes", "order")
        _window_ok(c["fit_window"], "fit_window")
        if c["alpha_grid"] is not None:
            if not c["alpha_grid"]:
                raise ConfigError("alpha_grid must not be empty")
            for a in c["alpha_grid"]:
                if not 0.0 < a < 1.0:
                    raise ConfigError(f"alpha_grid entries must lie in (0, 1), got {a}")
        elif not 1 <= c["j_min"] <= c["j_max"]:
            raise ConfigError("need 1 <= j_min <= j_max")
    elif cmd == "simulate":
        _positive(c, "n_steps", "n_orbits")
        if c["mode"] not in ("birkhoff", "esslim"):
            raise ConfigError("mode must be birkhoff or esslim")
        if c["initial_law"] not in ("unit", "Y"):
            raise ConfigError("initial_law must be unit or Y")
        if c["burn_in"] < 0:
            raise ConfigError("burn_in must be >= 0")
        if c["mode"] == "birkhoff":
            _alpha_ok(c["alpha"])
        else:
            if not c["alpha_grid"] or not all(0.0 < a < 1.0 for a in c["alpha_grid"]):
                raise ConfigError("esslim needs alpha_grid inside (0, 1)")
            if not c["n_schedule"] or min(c["n_schedule"]) < 1:
                raise ConfigError("n_schedule must hold positive step counts")
        if c["radius"] is not None and not 0.0 < c["radius"] <= 1.0:
            raise ConfigError("radius must lie in (0, 1]")
    elif cmd == "reproduce":
        from .acceptance import CHECKS

        if c["checks"] is not None:
            bad = [k for k in c["checks"] if k not in CHECKS]
            if bad:
                raise ConfigError(f"unknown check(s): {', '.join(bad)}")
        _positive(c, "n_steps", "n_orbits")


# --------------------------------------------------------------------------
# commands


def _potentials(spec):
    from .response import parse_potential

    specs = spec if isinstance(spec, list) else [spec]
    try:
        return [parse_potential(s) for s in specs]
    except (ValueError, SyntaxError, TypeError, KeyError) as exc:
        raise ConfigError(f"bad potential {spec!r}: {exc}") from exc


def cmd_density(glob, c, bundle):
    from .density_solver import solve_density, ulam_oracle
    from .induced_system import InducedSystem
    from .lsv_maps import MapParams

    params = MapParams.lsv(c["alpha"])
    sys_ = InducedSystem(params, k_max=c["k_max"])
    d = solve_density(sys_, grid_size=c["grid_size"], tol=c["tol"], max_iter=c["max_iter"])
    ulam = None
    if c["ulam"]:
        u = ulam_oracle(params, cells=c["ulam_cells"], k_max=c["k_max"])
        ulam = {"cells": u.cells, "l1_gap": u.l1_distance(d), "iterations": u.iterations,
                "residual": u.residual}
    bounds = {"truncation": d.tail_bound, "residual": d.residual}
    meta = metadata({"command": "density", **glob, **c}, glob["seed"], bounds)
    summary = {
        "meta": meta, "alpha": d.alpha, "h_half": d.at_half, "rho_half": 2.0 * d.at_half,
        "norm_convention": d.norm_convention, "residual": d.residual,
        "iterations": d.iterations, "second_start_gap": d.second_start_gap,
        "total_mass": d.total_mass(), "min": d.bounds[0], "max": d.bounds[1],
        "tail_bound": d.tail_bound, "ulam": ulam,
    }
    rows = list(zip(d.grid, d.values, 2.0 * d.values))
    _emit(bundle, glob, "density", summary, ["x", "h_tilde", "rho"], rows, meta)
    return summary


def cmd_tails(glob, c, bundle):
    from .density_solver import solve_density
    from .induced_system import InducedSystem
    from .lsv_maps import MapParams, y_sequence
    from .tail_analysis import fit_tail, kac_sum

    params = MapParams.lsv(c["alpha"])
    sys_ = InducedSystem(params, k_max=c["k_max"])
    d = solve_density(sys_, grid_size=c["grid_size"], second_start=False)
    lo, hi = (int(v) for v in c["n_window"])
    yseq = y_sequence(params, max(hi, sys_.yseq.n_max))
    prof = fit_tail(d, yseq, (lo, hi), c["n_points"])
    kac = kac_sum(d, sys_.yseq)
    meta = metadata({"command": "tails", **glob, **c}, glob["seed"],
                    {"kac": kac.bound, "fit_residual": prof.fit_residual})
    summary = {
        "meta": meta, "alpha": prof.alpha, "fit_window": [lo, hi],
        "fitted_c": prof.fitted_c, "fitted_exponent": prof.fitted_exponent,
        "predicted_exponent": 1.0 / prof.alpha, "predicted_c": prof.predicted_c,
        "predicted_c_half_slope": prof.predicted_c_half_slope, "h_half": prof.h_half,
        "rho_half": 2.0 * prof.h_half, "fit_residual": prof.fit_residual,
        "second_order_slope": prof.second_order_slope,
        "kac": {"finite": kac.finite, "n_max": kac.n_max, "partial": kac.partial,
                "total": kac.total, "bound": kac.bound,
                "growth_log_slope": kac.growth_log_slope},
    }
    rows = list(zip(prof.n_values.tolist(), prof.tail_masses, prof.model(prof.n_values)))
    _emit(bundle, glob, "tails", summary, ["n", "tail_mass", "fit"], rows, meta)
    return summary


def cmd_response(glob, c, bundle):
    from .response import build_response_curve, one_sided_derivative

    phis = _potentials(c["potential"])
    grid = c["alpha_grid"] or [1.0 - 2.0**-j for j in range(c["j_min"], c["j_max"] + 1)]
    curves = build_response_curve(phis, grid, k_max=c["k_max"], grid_size=c["grid_size"],
                                  srb_k_max=c["srb_k_max"], n_nodes=c["n_nodes"],
                                  fit_window=tuple(c["fit_window"]))
    out, rows = [], []
    for cv in curves:
        est = one_sided_derivative(cv, order=c["order"]) if len(grid) < 2 or _geometric(grid) \
            else None
        if est is None:
            est_d = {"estimate": float(cv.derivative_estimates[-1]),
                     "richardson_extrapolate": None, "flag": "grid_not_geometric"}
        else:
            est_d = {k: v for k, v in jsonable(est).items() if k != "table"}
        out.append({"potential": cv.potential, "phi0": cv.phi0,
                    "srb_at_one": cv.srb_at_one, "srb_at_one_bound": cv.srb_at_one_bound,
                    "analytic_target": cv.analytic_target,
                    "analytic_target_half_slope": cv.analytic_target_half_slope,
                    "derivative": est_d})
        for i, r in enumerate(cv.rows()):
            rows.append((cv.potential,) + r + (float(cv.srb_bounds[i]),))
    k = curves[0].constants
    meta = metadata({"command": "response", **glob, **c}, glob["seed"],
                    {"srb_max": max(float(np.max(cv.srb_bounds)) for cv in curves)})
    summary = {"meta": meta, "alpha_grid": sorted(grid), "constants": jsonable(k),
               "curves": out}
    _emit(bundle, glob, "response", summary,
          ["potential", "alpha", "r_srb", "kac", "r_phy", "quotient", "srb_bound"], rows, meta)
    return summary


def _geometric(grid):
    s = 1.0 - np.sort(np.asarray(grid))
    return bool(np.allclose(s[:-1] / s[1:], 2.0, rtol=1e-9))


def cmd_simulate(glob, c, bundle):
    from .orbit_sim import OrbitEnsembleConfig, esslim_demo, run_ensemble

    phi = _potentials(c["potential"])[0]
    if c["mode"] == "esslim":
        rows = esslim_demo(phi, c["alpha_grid"], c["n_schedule"], n_orbits=c["n_orbits"],
                           seed=glob["seed"], threads=glob["threads"], burn_in=c["burn_in"])
        meta = metadata({"command": "simulate", **glob, **c}, glob["seed"])
        summary = {"meta": meta, "mode": "esslim", "potential": phi.name, "rows": rows}
        cols = ["alpha", "n", "median", "mean", "std_error"]
        _emit(bundle, glob, "simulate", summary, cols, [[r[k] for k in cols] for r in rows],
              meta, table_name="esslim")
        return summary
    cfg = OrbitEnsembleConfig(c["alpha"], c["n_steps"], c["n_orbits"], glob["seed"],
                              c["initial_law"], c["burn_in"], threads=glob["threads"])
    run = run_ensemble(cfg, [phi], radius=c["radius"], bins=c["bins"])
    v = run.averages()
    occ = run.occupation() if c["radius"] is not None else None
    n = v.size
    se = float(v.std(ddof=1) / math.sqrt(n)) if n > 1 else None
    meta = metadata({"command": "simulate", **glob, **c}, glob["seed"])
    summary = {
        "meta": meta, "mode": "birkhoff", "alpha": cfg.alpha, "potential": phi.name,
        "mean": float(v.mean()), "std_error": se, "median": float(np.median(v)),
        "occupation": None if occ is None else {
            "radius": c["radius"], "mean": float(occ.mean()),
            "std_error": float(occ.std(ddof=1) / math.sqrt(n)) if n > 1 else None},
        "histogram": None if not c["bins"] else (run.hist.sum(axis=0) /
                                                 (n * cfg.n_steps)).tolist(),
        "floor_hits": int(run.floor_hits.sum()),
    }
    rows = list(zip(range(n), v))
    _emit(bundle, glob, "simulate", summary, ["orbit_id", "time_average"], rows, meta,
          table_name="ensemble")
    return summary


def cmd_zeta(glob, c, bundle):
    from .tail_analysis import hurwitz_zeta

    vals = []
    for s in c["s"]:
        z = float(hurwitz_zeta(float(s), float(c["a"])))
        vals.append({"s": float(s), "a": float(c["a"]), "zeta": z,
                     "pole_product": (s - 1.0) * z})
    meta = metadata({"command": "zeta", **glob, **c}, glob["seed"])
    summary = {"meta": meta, "values": vals}
    for v in vals:
        print(f"zeta({v['s']!r}, {v['a']!r}) = {v['zeta']!r}")
    _emit(bundle, glob, "zeta", summary, ["s", "a", "zeta", "pole_product"],
          [[v["s"], v["a"], v["zeta"], v["pole_product"]] for v in vals], meta)
    return summary


def cmd_reproduce(glob, c, bundle):
    from .acceptance import AcceptanceRun, run_checks

    run = AcceptanceRun(seed=glob["seed"], threads=glob["threads"], n_steps=c["n_steps"],
                        n_orbits=c["n_orbits"])
    res = run_checks(c["checks"], run, log=lambda s: print(s, flush=True))
    meta = metadata({"command": "reproduce", **glob, **c}, glob["seed"])
    summary = {"meta": meta, "all_passed": all(r.passed for r in res),
               "results": [r.to_dict() for r in res]}
    bundle.add_json("acceptance.json", summary)
    npass = sum(r.passed for r in res)
    print(f"{npass}/{len(res)} checks passed")
    return summary


def _emit(bundle, glob, name, summary, header, rows, meta, table_name=None):
    tname = table_name or name
    if glob["format"] == "csv":
        bundle.add_csv(f"{tname}.csv", header, rows, meta)
    else:
        summary["table"] = {"columns": header, "rows": jsonable([list(r) for r in rows])}
    bundle.add_json(f"{name}.json", summary)


COMMANDS = {"density": cmd_density, "tails": cmd_tails, "response": cmd_response,
            "simulate": cmd_simulate, "zeta": cmd_zeta, "reproduce": cmd_reproduce}

NUMERIC_ERRORS = (NonConvergence, ConvergenceError, TailNotSummable, IllConditionedFit,
                  FloatingPointError, np.linalg.LinAlgError)


def _error_report(out, exc, code, glob=None):
    rep = {"meta": metadata(glob or {}, (glob or {}).get("seed")),
           "error": {"type": type(exc).__name__, "message": str(exc), "exit_code": code}}
    if getattr(exc, "trace", None) is not None:
        rep["error"]["trace"] = jsonable(list(exc.trace)[-20:])
    print(json_text(rep), file=sys.stderr, end="")
    if out is not None:
        try:
            write_json_atomic(Path(out) / "error.json", rep)
        except OSError:
            pass


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    cmd = args.command
    try:
        glob, local = resolve(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    bundle = OutputBundle(glob["out"])
    try:
        summary = COMMANDS[cmd](glob, local, bundle)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DomainError as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NUMERIC_ERRORS as exc:
        _error_report(glob["out"], exc, EXIT_NUMERIC, {"command": cmd, **glob, **local})
        return EXIT_NUMERIC
    bundle.commit()
    if cmd == "reproduce" and local["strict"] and not summary["all_passed"]:
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
