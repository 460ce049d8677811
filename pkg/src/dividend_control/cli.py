"""Command-line entry point: ``solve``, ``verify``, ``simulate``, ``oracle``, ``sweep``.

Every command reads model parameters from ``--config`` (JSON) and/or the
per-parameter flags, writes a JSON report (or a CSV table) to ``--out`` or
stdout, and echoes the merged configuration into the report.

Exit codes: 0 success, 1 a check failed, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from importlib import resources

import numpy as np

from .grid_oracle import SCHEMES, compare_with_closed_form, default_truncation, solve_grid
from .model import PARAM_NAMES, ParameterError, derived_constants, validate_params
from .simulation import ConfigError, SimConfig, horizon_for, parse_policy, simulate_paths
from .tables import ROW_FIELDS, sweep, sweep_values
from .value import build_value, eval_value, perturb_value
from .verification import verify_all

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

SIM_DEFAULTS = {"dt": 1e-3, "horizon": None, "n_paths": 10_000, "seed": 0, "x0": None, "antithetic": False,
                "policy": "optimal"}
ORACLE_DEFAULTS = {"L": None, "n": 4000, "scheme": "hybrid"}
SWEEP_DEFAULTS = {"param": "M", "from": None, "to": None, "steps": 21, "boundaries": True}

# CSV column order per command (documented in the README)
CSV_COLUMNS = {
    "solve": ("x", "V", "dV", "a_star", "c_star"),
    "verify": ("check", "passed", "lhs", "rhs", "detail"),
    "simulate": ("policy", "x0", "mean", "std_error", "ruin_fraction", "truncation_bound", "V", "z"),
    "oracle": ("x", "V_grid", "V_exact", "a_grid", "c_grid"),
    "sweep": ROW_FIELDS,
}


class UsageError(Exception):
    pass


def _num(x, digits: int = 17):
    """JSON-safe float: ``inf``/``nan`` become strings, others keep ``digits`` significant digits."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return float(f"{x:.{digits}g}")


def _clean(obj, digits: int = 17):
    if isinstance(obj, dict):
        return {k: _clean(v, digits) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v, digits) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v, digits) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _num(obj, digits)
    return obj


def _grid(values):
    return _clean(np.asarray(values, dtype=float), 6)


def load_schema() -> dict:
    return json.loads(resources.files("dividend_control").joinpath("schema/report.schema.json").read_text())


# -- configuration ----------------------------------------------------------

def _read_config(path):
    if path is None:
        return {}
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"malformed JSON in {path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise UsageError(f"config {path} must hold a JSON object")
    # a previous report can be fed back in: its echoed config carries everything
    if "config" in raw and isinstance(raw["config"], dict) and "params" in raw["config"]:
        inner = raw["config"]
        return {**inner["params"], **{k: v for k, v in inner.items() if k != "params"}}
    if "params" in raw and isinstance(raw["params"], dict):
        return {**raw["params"], **{k: v for k, v in raw.items() if k != "params"}}
    return raw


def _merge(block_defaults: dict, file_block, flag_values: dict) -> dict:
    out = dict(block_defaults)
    if file_block is not None:
        if not isinstance(file_block, dict):
            raise UsageError("command blocks in the config must be JSON objects")
        unknown = set(file_block) - set(block_defaults)
        if unknown:
            raise UsageError(f"unknown option(s): {', '.join(sorted(unknown))}")
        out.update(file_block)
    out.update({k: v for k, v in flag_values.items() if v is not None})
    return out


def build_run_config(args) -> dict:
    raw = _read_config(args.config)
    params = {name: raw.get(name) for name in PARAM_NAMES}
    for name in PARAM_NAMES:
        flag = getattr(args, f"param_{name}", None)
        if flag is not None:
            params[name] = flag
    missing = [n for n, v in params.items() if v is None]
    if missing:
        raise UsageError(f"missing parameter(s): {', '.join(missing)} (use --config or --{missing[0]})")
    try:
        p = validate_params(params)
    except ParameterError as exc:
        raise UsageError(f"invalid parameters: {exc}") from exc
    cfg = {"command": args.command, "params": p.as_dict(), "format": args.format}
    if args.command == "simulate":
        cfg["simulate"] = _merge(SIM_DEFAULTS, raw.get("simulate"), {
            "dt": args.dt, "horizon": args.horizon, "n_paths": args.n_paths, "seed": args.seed,
            "x0": args.x0, "antithetic": True if args.antithetic else None, "policy": args.policy})
    elif args.command == "oracle":
        cfg["oracle"] = _merge(ORACLE_DEFAULTS, raw.get("oracle"), {"L": args.L, "n": args.n, "scheme": args.scheme})
    elif args.command == "sweep":
        cfg["sweep"] = _merge(SWEEP_DEFAULTS, raw.get("sweep"), {
            "param": args.param, "from": args.start, "to": args.stop, "steps": args.steps,
            "boundaries": False if args.no_boundaries else None})
    elif args.command == "verify":
        cfg["verify"] = {"n": args.n, "perturb": args.perturb, "perturb_segment": args.perturb_segment}
    elif args.command == "solve":
        cfg["solve"] = {"samples": args.samples}
    return cfg


# -- commands -----------------------------------------------------------------

def _describe_x(x):
    return _num(x)


def cmd_solve(cfg: dict):
    p = validate_params(cfg["params"])
    v = build_value(p)
    fc = v.curve
    upper = v.x1 + 10.0 / abs(v.tail_rate)
    xs = np.linspace(0.0, upper, int(cfg["solve"]["samples"]))
    segments = v.describe()
    report = {
        "command": "solve",
        "config": cfg,
        "regime": {"label": v.regime.label, "debt_case": v.regime.debt_case.value,
                   "subcase": v.regime.m_subcase, "tail": v.regime.tail.value},
        "constants": _clean(derived_constants(p).as_dict()),
        "x_alpha": _describe_x(fc.x_alpha),
        "x_beta": _describe_x(fc.x_beta),
        "x1": _describe_x(v.x1),
        "breakpoints": _clean(v.breakpoints),
        "segments": _clean(segments),
        "samples": {
            "x": _grid(xs),
            "V": _grid(eval_value(v, xs)),
            "dV": _grid(eval_value(v, xs, 1)),
            "a_star": _grid(fc(xs)),
            "c_star": _grid(np.where(xs >= v.x1, p.M, 0.0)),
        },
    }
    rows = list(zip(*(report["samples"][k] for k in CSV_COLUMNS["solve"])))
    return report, rows, EXIT_OK


def cmd_verify(cfg: dict):
    p = validate_params(cfg["params"])
    v = build_value(p)
    opts = cfg["verify"]
    if opts.get("perturb"):
        v = perturb_value(v, rel=float(opts["perturb"]), segment=int(opts.get("perturb_segment") or 0))
    res = verify_all(v, n=int(opts.get("n") or 1000))
    report = {"command": "verify", "config": cfg, "regime": v.regime.label, **_clean(res)}
    rows = [(c["name"], c["passed"], c["lhs"], c["rhs"], c["detail"]) for c in report["identities"] + report["shape"]]
    rows.append(("hjb_residual", res["residual_pass"], report["residual"]["max_abs_residual"], 1e-7, ""))
    rows.append(("smooth_fit", res["smooth_fit_pass"], len(res["failing_breakpoints"]), 0, ""))
    if not res["passed"]:
        where = ", ".join(f"x={b:.17g}" for b in res["failing_breakpoints"]) or "no breakpoint"
        failed = [c["name"] for c in report["identities"] + report["shape"] if not c["passed"]]
        msg = f"verification failed at breakpoint(s) {where}"
        if failed:
            msg += f"; failed checks: {', '.join(failed)}"
        print(msg, file=sys.stderr)
    return report, rows, EXIT_OK if res["passed"] else EXIT_FAIL


def cmd_simulate(cfg: dict):
    p = validate_params(cfg["params"])
    v = build_value(p)
    opts = cfg["simulate"]
    horizon = opts["horizon"] if opts["horizon"] is not None else horizon_for(p, 1e-3 * p.payout_cap)
    x0s = opts["x0"] or ([0.5 * v.x1, v.x1, 2.0 * v.x1] if v.x1 > 0 else [0.5, 1.0, 2.0])
    sim = SimConfig(float(opts["dt"]), float(horizon), int(opts["n_paths"]), int(opts["seed"]), bool(opts["antithetic"]))
    pol = parse_policy(str(opts["policy"]), v)
    opts["horizon"] = horizon
    results = []
    for x0 in x0s:
        est = simulate_paths(pol, float(x0), p, sim)
        V = float(eval_value(v, float(x0)))
        z = (est.mean - V) / est.std_error if est.std_error > 0 else 0.0
        results.append({"policy": pol.name, "x0": float(x0), **est.as_dict(), "V": V, "z": z})
    report = {"command": "simulate", "config": cfg, "regime": v.regime.label, "results": _clean(results)}
    rows = [tuple(r[k] for k in CSV_COLUMNS["simulate"]) for r in report["results"]]
    return report, rows, EXIT_OK


def cmd_oracle(cfg: dict):
    p = validate_params(cfg["params"])
    v = build_value(p)
    opts = cfg["oracle"]
    L = float(opts["L"]) if opts["L"] is not None else default_truncation(v)
    opts["L"] = L
    if opts["scheme"] not in SCHEMES:
        raise UsageError(f"scheme must be one of {', '.join(SCHEMES)}")
    g = solve_grid(p, L, int(opts["n"]), scheme=opts["scheme"])
    err = compare_with_closed_form(g, v)
    exact = eval_value(v, g.x_grid)
    report = {
        "command": "oracle",
        "config": cfg,
        "regime": v.regime.label,
        "iterations": g.iterations,
        "L": _num(L),
        "max_rel_error": _num(err),
        "nodes": {"x": _grid(g.x_grid), "V_grid": _grid(g.values), "V_exact": _grid(exact),
                  "a_grid": _grid(g.risk), "c_grid": _grid(g.dividends)},
    }
    rows = list(zip(*(report["nodes"][k] for k in CSV_COLUMNS["oracle"])))
    return report, rows, EXIT_OK


def cmd_sweep(cfg: dict):
    p = validate_params(cfg["params"])
    opts = cfg["sweep"]
    param = opts["param"]
    if param not in PARAM_NAMES:
        raise UsageError(f"sweep parameter must be one of {', '.join(PARAM_NAMES)}")
    base = getattr(p, param)
    start = float(opts["from"]) if opts["from"] is not None else 0.05 * base
    stop = float(opts["to"]) if opts["to"] is not None else 2.0 * base
    opts["from"], opts["to"] = start, stop
    values = sweep_values(p, param, start, stop, int(opts["steps"]), bool(opts["boundaries"]) and param == "M")
    try:
        table = sweep(p, param, values)
    except ParameterError as exc:
        raise UsageError(f"sweep leaves the valid parameter range: {exc}") from exc
    rows_dict = [_clean(r.as_dict()) for r in table]
    report = {"command": "sweep", "config": cfg, "rows": rows_dict}
    rows = [tuple(r[k] for k in ROW_FIELDS) for r in rows_dict]
    return report, rows, EXIT_OK


COMMANDS = {"solve": cmd_solve, "verify": cmd_verify, "simulate": cmd_simulate, "oracle": cmd_oracle, "sweep": cmd_sweep}


# -- argument parsing and output ------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with parameters and command blocks")
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--seed", type=int, help="RNG seed (simulate)")
    for name in PARAM_NAMES:
        common.add_argument(f"--{name}", dest=f"param_{name}", type=float, help=f"override {name}")

    parser = argparse.ArgumentParser(prog="dividend-control", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    s = sub.add_parser("solve", parents=[common], help="closed-form solution report")
    s.add_argument("--samples", type=int, default=201, help="points in the V/V'/a* sample grid")
    s = sub.add_parser("verify", parents=[common], help="residual, smooth-fit, identity and shape checks")
    s.add_argument("--n", type=int, default=1000, help="interior residual grid size")
    s.add_argument("--perturb", type=float, help="scale one segment coefficient by 1+PERTURB (negative control)")
    s.add_argument("--perturb-segment", type=int, default=0)
    s = sub.add_parser("simulate", parents=[common], help="Monte Carlo estimate of the performance functional")
    s.add_argument("--dt", type=float)
    s.add_argument("--horizon", type=float)
    s.add_argument("--n-paths", type=int)
    s.add_argument("--x0", type=float, action="append", help="initial reserve (repeatable)")
    s.add_argument("--antithetic", action="store_true")
    s.add_argument("--policy", help="optimal | constant:a=A,c=C | shifted:X | reversed")
    s = sub.add_parser("oracle", parents=[common], help="policy-iteration grid solve and comparison")
    s.add_argument("--L", type=float)
    s.add_argument("--n", type=int)
    s.add_argument("--scheme", choices=SCHEMES)
    s = sub.add_parser("sweep", parents=[common], help="qualitative regime table over one parameter")
    s.add_argument("--param", choices=PARAM_NAMES)
    s.add_argument("--from", dest="start", type=float)
    s.add_argument("--to", dest="stop", type=float)
    s.add_argument("--steps", type=int)
    s.add_argument("--no-boundaries", action="store_true", help="do not insert the M subcase boundaries")
    return parser


def render(report: dict, rows, command: str, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(report, indent=2, allow_nan=False) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS[command])
    for row in rows:
        w.writerow([repr(x) if isinstance(x, float) else x for x in row])
    return buf.getvalue()


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        cfg = build_run_config(args)
        report, rows, code = COMMANDS[args.command](cfg)
        text = render(report, rows, args.command, args.format)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.out:
        try:
            with open(args.out, "w") as fh:
                fh.write(text)
        except OSError as exc:
            print(f"error: cannot write {args.out}: {exc.strerror}", file=sys.stderr)
            return EXIT_USAGE
    else:
        try:
            sys.stdout.write(text)
            sys.stdout.flush()
        except BrokenPipeError:
            sys.stderr.close()  # reader went away (e.g. piped into head)
    return code


if __name__ == "__main__":
    sys.exit(main())
