"""Command-line front end.

Subcommands: classify, solve, eval, sweep, reproduce, verify, simulate.
Global flags: --config <path>, --out <path>, --format json|csv,
--seed <u64>.  Exit codes: 0 ok, 1 reproduction/verification mismatch,
2 validation failure, 3 numerical failure.

The CLI emits data only (JSON documents and CSV tables for external
plotting); all numeric work happens in the library modules.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import closed_form
from .closed_form import Regime, classify, solve, strategy
from .errors import (BranchError, ClassificationError, ConfigError,
                     DivBarrierError, HypothesisError, NumericalError,
                     SignError, ValidationError)
from .goldens import TOL_BSTAR, TOL_W0, table_rows
from .params import load_config, params_from_config
from .simulate import (SimConfig, simulate_aggregate, simulate_two_lines,
                       write_path_csv)
from .verify import run_verify

_VALIDATION_ERRORS = (ValidationError, ConfigError)
_NUMERICAL_ERRORS = (NumericalError, SignError, BranchError,
                     ClassificationError, HypothesisError)


def _emit(args, text: str) -> None:
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
            if not text.endswith("\n"):
                fh.write("\n")
    else:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")


def _emit_json(args, doc) -> None:
    # json's default encoder spells non-finite floats Infinity/NaN,
    # which round-trips through json.load
    _emit(args, json.dumps(doc, indent=2))


def _emit_rows(args, header: list[str], rows: list[list]) -> None:
    if args.format == "json":
        docs = [dict(zip(header, row)) for row in rows]
        _emit_json(args, docs)
        return
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(header)
    w.writerows(rows)
    _emit(args, buf.getvalue())


def _require_config(args):
    if not args.config:
        raise ConfigError("--config is required for this command")
    return load_config(args.config)


def _cell(x) -> object:
    """CSV cell: empty for None/non-finite, plain repr otherwise."""
    if x is None:
        return ""
    xf = float(x)
    if not math.isfinite(xf):
        return ""
    return repr(xf)


# ---------------------------------------------------------------- classify

def cmd_classify(args) -> int:
    params = _require_config(args)
    doc = classify(params, root_policy=args.root_policy)
    if not args.dump_psi:
        doc.pop("psi_coeffs", None)
    elif doc.get("psi_coeffs"):
        doc["psi_coeffs"] = {f"c{i}": c for i, c in enumerate(doc["psi_coeffs"])}
    _emit_json(args, doc)
    return 0


# ------------------------------------------------------------------- solve

def cmd_solve(args) -> int:
    params = _require_config(args)
    sol = solve(params, root_policy=args.root_policy)
    _emit_json(args, sol.report_dict())
    return 0


# -------------------------------------------------------------------- eval

def cmd_eval(args) -> int:
    params = _require_config(args)
    sol = solve(params, root_policy=args.root_policy)
    x_max = args.x_max if args.x_max is not None else (
        2.0 * sol.bstar if sol.bstar > 0 else 2.0)
    if x_max <= args.x_min or args.n < 2:
        raise ConfigError("eval needs x_max > x_min and n >= 2")
    xs = np.linspace(args.x_min, x_max, args.n)
    g = sol.g(xs)
    gp = sol.g_prime(xs)
    rows = []
    for i, x in enumerate(xs):
        pt = strategy(sol, float(x), allow_sentinel=True)
        strat = ["", "", "", "", ""] if pt.irrelevant else [
            repr(pt.pi1), repr(pt.pi2), repr(pt.theta1), repr(pt.theta2),
            repr(pt.entropy_rate)]
        gp_cell = repr(float(gp[i])) if math.isfinite(gp[i]) else "inf"
        rows.append([repr(float(x)), repr(float(g[i])), gp_cell, *strat])
    _emit_rows(args, ["x", "g", "g_prime", "pi1", "pi2", "theta1", "theta2",
                      "entropy_rate"], rows)
    return 0


# ------------------------------------------------------------------- sweep

def _parse_axis(spec: str):
    parts = spec.split(":")
    if len(parts) != 4:
        raise ConfigError(
            "axis spec must be name:min:max:count, e.g. beta1:0:40:200")
    name = parts[0]
    if name not in ("mu1", "mu2", "sigma1", "sigma2", "rho", "delta",
                    "a1", "beta1", "beta2"):
        raise ConfigError(f"cannot sweep over {name!r}")
    try:
        lo, hi, num = float(parts[1]), float(parts[2]), int(parts[3])
    except ValueError as exc:
        raise ConfigError(f"bad axis spec {spec!r}: {exc}") from None
    if not (math.isfinite(lo) and math.isfinite(hi)) or num < 2:
        raise ConfigError("axis range must be finite with count >= 2")
    return name, np.linspace(lo, hi, num)


def _sweep_point(base_cfg: dict, assignment: dict):
    cfg = dict(base_cfg)
    cfg.update(assignment)
    if "a1" in assignment:
        cfg.pop("a2", None)
    try:
        sol = solve(params_from_config(cfg))
    except DivBarrierError:
        return ["Error", "", "", "", ""]
    d = sol.report_dict()
    if sol.regime is Regime.Degenerate:
        return [d["regime"], "", _cell(d["bstar"]), "", ""]
    return [d["regime"], _cell(d["w0"]), _cell(d["bstar"]),
            _cell(d["w1"]), _cell(d["w2"])]


def cmd_sweep(args) -> int:
    params = _require_config(args)
    base_cfg = params.as_dict()
    name1, vals1 = _parse_axis(args.axis1)
    if args.axis2:
        name2, vals2 = _parse_axis(args.axis2)
        if name2 == name1:
            raise ConfigError("axis2 must differ from axis1")
        grid = [{name1: float(v1), name2: float(v2)}
                for v1 in vals1 for v2 in vals2]
        axis_names = [name1, name2]
    else:
        grid = [{name1: float(v1)} for v1 in vals1]
        axis_names = [name1]

    with ThreadPoolExecutor() as pool:
        results = list(pool.map(lambda a: _sweep_point(base_cfg, a), grid))

    rows = []
    for assignment, res in zip(grid, results):
        rows.append([repr(assignment[n]) for n in axis_names] + res)
    _emit_rows(args, axis_names + ["regime", "w0", "bstar", "w1", "w2"], rows)
    return 0


# --------------------------------------------------------------- reproduce

def cmd_reproduce(args) -> int:
    rows = table_rows(args.table)
    out_rows = []
    all_ok = True
    for cfg, w0_ref, bstar_ref in rows:
        sol = solve(params_from_config(cfg))
        d_w0 = abs(sol.thresholds.w0 - w0_ref)
        d_b = abs(sol.bstar - bstar_ref)
        ok = d_w0 <= TOL_W0 and d_b <= TOL_BSTAR
        all_ok &= ok
        out_rows.append((cfg["beta1"], cfg["beta2"], sol.thresholds.w0,
                         w0_ref, d_w0, sol.bstar, bstar_ref, d_b, ok))
    lines = [f"{args.table} table reproduction",
             f"{'beta1':>6} {'beta2':>6} {'w0':>12} {'w0_ref':>12} "
             f"{'|dw0|':>9} {'bstar':>12} {'bstar_ref':>12} {'|db|':>9}  result"]
    for b1, b2, w0, w0r, dw, bs, bsr, db, ok in out_rows:
        lines.append(f"{b1:>6g} {b2:>6g} {w0:>12.7f} {w0r:>12.7f} "
                     f"{dw:>9.2e} {bs:>12.6f} {bsr:>12.6f} {db:>9.2e}  "
                     f"{'pass' if ok else 'FAIL'}")
    lines.append("PASS" if all_ok else "FAIL")
    _emit(args, "\n".join(lines))
    return 0 if all_ok else 1


# ------------------------------------------------------------------ verify

def cmd_verify(args) -> int:
    params = _require_config(args)
    report = run_verify(params, n_grid=args.grid_n)
    _emit_json(args, report.as_dict())
    return 0 if report.passed else 1


# ---------------------------------------------------------------- simulate

def _sim_config(args) -> SimConfig:
    policy: object = "Optimal"
    if args.policy_pi and args.policy_theta:
        raise ConfigError("give at most one of --policy-pi / --policy-theta")
    if args.policy_pi:
        policy = {"pi": _pair(args.policy_pi)}
    elif args.policy_theta:
        policy = {"theta": _pair(args.policy_theta)}
    return SimConfig(
        x0=args.x0, x1=args.x1, x2=args.x2, dt=args.dt, n_paths=args.n_paths,
        t_max=args.t_max, seed=args.seed, mode=args.mode, policy=policy,
        antithetic=args.antithetic, penalty_stride=args.penalty_stride,
        dtype=args.dtype, keep_paths=bool(args.paths_csv))


def _pair(text: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise ConfigError("expected two comma-separated numbers")
    try:
        return (float(parts[0]), float(parts[1]))
    except ValueError as exc:
        raise ConfigError(f"bad number in {text!r}") from None


def cmd_simulate(args) -> int:
    params = _require_config(args)
    sol = solve(params, root_policy=args.root_policy)
    cfg = _sim_config(args)
    if cfg.mode == "TwoLine":
        res = simulate_two_lines(sol, cfg)
        x_ref = float(cfg.x1) + float(cfg.x2)
    elif cfg.mode == "Aggregate":
        res = simulate_aggregate(sol, cfg)
        x_ref = float(cfg.x0)
    else:
        raise ConfigError("mode must be Aggregate or TwoLine")
    if args.paths_csv:
        write_path_csv(args.paths_csv, res)
    doc = res.as_dict()
    doc["g_exact"] = float(sol.g(x_ref))
    _emit_json(args, doc)
    return 0


# -------------------------------------------------------------------- main

def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="divbarrier",
        description="Closed-form robust dividend/reinsurance solver: "
                    "classification, thresholds, verification, simulation.")
    ap.add_argument("--config", help="JSON config file (model parameters, "
                    "or a solve output document)")
    ap.add_argument("--out", help="write output to this file instead of stdout")
    ap.add_argument("--format", choices=["json", "csv"], default=None,
                    help="output format where applicable")
    ap.add_argument("--seed", type=int, default=0, help="simulation seed")
    ap.add_argument("--root-policy", choices=["smallest", "largest", "table"],
                    default="smallest",
                    help="which root of the quartic to use for gamma1")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("classify", help="regime classification")
    sp.add_argument("--dump-psi", action="store_true",
                    help="include the quartic coefficients c0..c4")
    sp.set_defaults(func=cmd_classify, default_format="json")

    sp = sub.add_parser("solve", help="closed-form solution document")
    sp.set_defaults(func=cmd_solve, default_format="json")

    sp = sub.add_parser("eval", help="tabulate g, strategies, entropy rate")
    sp.add_argument("--x-min", type=float, default=0.0)
    sp.add_argument("--x-max", type=float, default=None,
                    help="default 2*bstar")
    sp.add_argument("--n", type=int, default=501)
    sp.set_defaults(func=cmd_eval, default_format="csv")

    sp = sub.add_parser("sweep", help="grid sweep over one or two parameters")
    sp.add_argument("--axis1", required=True, help="name:min:max:count")
    sp.add_argument("--axis2", default=None, help="name:min:max:count")
    sp.set_defaults(func=cmd_sweep, default_format="csv")

    sp = sub.add_parser("reproduce", help="recompute a reference table")
    sp.add_argument("table", choices=["ambiguity", "symmetric"])
    sp.set_defaults(func=cmd_reproduce, default_format="text")

    sp = sub.add_parser("verify", help="check the solution against the "
                        "dynamic-programming equation")
    sp.add_argument("--grid-n", type=int, default=512)
    sp.set_defaults(func=cmd_verify, default_format="json")

    sp = sub.add_parser("simulate", help="Monte Carlo estimate of the objective")
    sp.add_argument("--x0", type=float, default=None)
    sp.add_argument("--x1", type=float, default=None)
    sp.add_argument("--x2", type=float, default=None)
    sp.add_argument("--mode", choices=["Aggregate", "TwoLine"],
                    default="Aggregate")
    sp.add_argument("--dt", type=float, default=1e-3)
    sp.add_argument("--n-paths", type=int, default=10000)
    sp.add_argument("--t-max", type=float, default=None)
    sp.add_argument("--antithetic", action="store_true")
    sp.add_argument("--penalty-stride", type=int, default=1)
    sp.add_argument("--dtype", choices=["float32", "float64"],
                    default="float32")
    sp.add_argument("--policy-pi", default=None, metavar="P1,P2",
                    help="pin the retention pair; adversary responds")
    sp.add_argument("--policy-theta", default=None, metavar="T1,T2",
                    help="pin the distortion pair; retention optimal")
    sp.add_argument("--paths-csv", default=None,
                    help="dump per-path outcomes to this CSV file")
    sp.set_defaults(func=cmd_simulate, default_format="json")

    return ap


def main(argv=None) -> int:
    ap = _build_parser()
    args = ap.parse_args(argv)
    if args.format is None:
        args.format = args.default_format
    elif args.format == "csv" and args.default_format == "json":
        print("error: this command emits JSON only", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except _VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
