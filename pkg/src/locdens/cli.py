"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 numerical failure.  Every subcommand
writes one JSON document to ``--out`` (standard output by default).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys

import numpy as np

from .errors import LocdensError

DEFAULT_PARAMS = {"normal": "0,1", "uniform": "0,1", "mixture": "0.5,-1,0.5,0.5,1,0.5"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def __init__(self, *a, **kw):
        kw.setdefault("allow_abbrev", False)
        super().__init__(*a, **kw)

    def error(self, message):
        raise UsageError(message)


# -- JSON ------------------------------------------------------------------

def _fmt_float(v: float) -> str:
    if not math.isfinite(v):
        return "null"
    s = format(v, ".17g")
    if "e" not in s and "." not in s:
        s += ".0"
    return s


def to_json(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON with every float written to 17 significant digits."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{to_json(str(k))}: {to_json(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, np.integer, np.floating, bool)) or v is None for v in obj):
            return "[" + ", ".join(to_json(v) for v in obj) + "]"
        items = [pad + to_json(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _emit(report, out):
    text = to_json(report) + "\n"
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out, "w") as fh:
            fh.write(text)


# -- flag parsing ------------------------------------------------------------

def _floats(text, flag):
    try:
        vals = [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"{flag}: cannot parse {text!r}") from None
    if not vals or not all(math.isfinite(v) for v in vals):
        raise UsageError(f"{flag}: expected finite decimals, got {text!r}")
    return vals


def _ints(text, flag):
    vals = _floats(text, flag)
    if any(v != int(v) or v < 1 for v in vals):
        raise UsageError(f"{flag}: expected positive integers, got {text!r}")
    return [int(v) for v in vals]


def _model_flags(p, need_h=True, need_x0=True):
    if need_x0:
        p.add_argument("--x0", default="0")
    if need_h:
        p.add_argument("--h", required=True)
    p.add_argument("--degree", type=int, required=True)
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--kernel", default="indicator", choices=["indicator", "epanechnikov", "tgauss"])
    p.add_argument("--quad-order", type=int, default=0)
    p.add_argument("--grid", type=int, default=None)


def _oracle_flags(p, required=True):
    p.add_argument("--density", choices=["uniform", "normal", "mixture"], required=required)
    p.add_argument("--params", default=None)


def _build_parser():
    top = _Parser(prog="locdens", description="Local likelihood density estimation with finite-sample certificates.")
    sub = top.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("estimate", help="fit the local model to a data file")
    p.add_argument("--data", required=True)
    _model_flags(p)
    p.add_argument("--out", default=None)

    p = sub.add_parser("constants", help="model constants c1, c2")
    _model_flags(p, need_h=False, need_x0=False)
    p.add_argument("--out", default=None)

    p = sub.add_parser("certify", help="population summary and certificate for an oracle")
    _oracle_flags(p)
    _model_flags(p)
    p.add_argument("--n", required=True)
    p.add_argument("--z", default="2")
    p.add_argument("--zeta-factor", type=float, default=1.0)
    p.add_argument("--out", default=None)

    p = sub.add_parser("simulate", help="Monte-Carlo checks of the certificate bounds")
    _oracle_flags(p)
    _model_flags(p)
    p.add_argument("--n", required=True)
    p.add_argument("--reps", type=int, default=200)
    p.add_argument("--z", default="2")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--zeta-factor", type=float, default=1.0)
    p.add_argument("--dump-reps", default=None)
    p.add_argument("--out", default=None)

    p = sub.add_parser("bandwidth", help="bias/variance bandwidth selection")
    _oracle_flags(p, required=False)
    p.add_argument("--data", default=None)
    _model_flags(p, need_h=False)
    p.add_argument("--n", default=None)
    p.add_argument("--z", default="2")
    p.add_argument("--h-min", type=float, default=0.01)
    p.add_argument("--h-max", type=float, default=1.0)
    p.add_argument("--h-count", type=int, default=200)
    p.add_argument("--mode", choices=["oracle", "plugin"], default=None)
    p.add_argument("--out", default=None)
    return top


def _model(args, h=None):
    from .model import make_model

    x0 = _floats(getattr(args, "x0", "0"), "--x0")
    dim = args.dim or len(x0)
    if len(x0) not in (1, dim):
        raise UsageError("--x0 must have one value or --dim values")
    if h is None:
        h = _floats(args.h, "--h")[0]
    if args.degree < 1 or dim < 1:
        raise UsageError("--degree and --dim must be >= 1")
    if args.quad_order and args.quad_order < 2:
        raise UsageError("--quad-order must be >= 2")
    try:
        return make_model(x0, h, args.degree, dim, args.kernel, args.quad_order)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _oracle(args, dim):
    from .population import make_oracle

    params = _floats(args.params or DEFAULT_PARAMS[args.density], "--params")
    try:
        return make_oracle(args.density, params, dim)
    except ValueError as exc:
        raise UsageError(f"--params: {exc}") from None


def _z_values(args):
    zs = _floats(args.z, "--z")
    if any(z <= 0 for z in zs):
        raise UsageError("--z must be positive")
    return zs


# -- subcommands -------------------------------------------------------------

def _cmd_estimate(args):
    from .likelihood import fit_mle, load_sample

    model = _model(args)
    try:
        data = load_sample(args.data, model.d)
    except OSError as exc:
        raise UsageError(f"--data: {exc}") from None
    except ValueError as exc:
        raise UsageError(f"--data: {exc}") from None
    th, diag = fit_mle(data, model)
    derivs = {}
    for j, alpha in enumerate(model.basis.index_set):
        fact = math.prod(math.factorial(a) for a in alpha)
        derivs["".join(str(a) for a in alpha)] = th.theta[j] * fact / model.h ** sum(alpha)
    return {
        "command": "estimate",
        "model": _model_echo(model),
        "n": data.n,
        "theta_mle": th.theta,
        "f_hat": math.exp(th.theta[0]),
        "derivative_estimates": derivs,
        "diagnostics": {
            "iterations": diag.iterations, "final_grad_norm": diag.final_grad_norm,
            "window_count": diag.window_count, "converged": diag.converged,
            "warnings": diag.warnings,
        },
    }


def _model_echo(model):
    return {
        "x0": list(model.x0), "h": model.h, "degree": model.basis.degree, "dim": model.d,
        "p": model.p, "kernel": model.kernel.kind, "quad_order": model.quad_order,
        "index_set": [list(a) for a in model.basis.index_set],
    }


def _cmd_constants(args):
    from .certificates import c1_squared, c2_squared

    args.x0 = "0"
    model = _model(args, h=1.0)
    c1s, c2s = c1_squared(model, args.grid), c2_squared(model, args.grid)
    return {
        "command": "constants",
        "model": {k: v for k, v in _model_echo(model).items() if k not in ("x0", "h")},
        "I_K": model.kernel.integral,
        "c1_squared": c1s, "c2_squared": c2s,
        "c1": math.sqrt(c1s), "c2": math.sqrt(c2s),
    }


def _summary_dict(s):
    return {
        "theta_star": s.theta_star.theta, "theta_bullet": s.theta_bullet.theta,
        "theta_circ": s.theta_circ.theta, "D2": s.D2, "V2": s.V2, "d02": s.d02,
        "c_fh": s.c_fh, "B_ph": s.B_ph, "pr1": s.pr1, "pr2": s.pr2, "f0": s.f0,
    }


def _cmd_certify(args):
    from .certificates import check_conditions, theorem_bounds
    from .population import summarize

    model = _model(args)
    oracle = _oracle(args, model.d)
    n = _ints(args.n, "--n")[0]
    s = summarize(oracle, model, n, args.grid)
    rows = []
    for z in _z_values(args):
        cert = check_conditions(s, model, n, z, oracle, zeta_factor=args.zeta_factor,
                                enforce_z_guard=False, grid=args.grid)
        rows.append({"z": z, "certificate": cert.to_dict(), "theorem_bounds": theorem_bounds(cert)})
    return {"command": "certify", "model": _model_echo(model), "n": n,
            "population": _summary_dict(s), "certificates": rows}


def _cmd_simulate(args):
    from .montecarlo import ExperimentPlan, default_threads, records_table, simulate

    model = _model(args)
    oracle = _oracle(args, model.d)
    ns = _ints(args.n, "--n")
    if args.reps < 1:
        raise UsageError("--reps must be >= 1")
    threads = args.threads if args.threads is not None else default_threads()
    if threads < 1:
        raise UsageError("--threads must be >= 1")
    zs = tuple(_z_values(args))
    plans = [ExperimentPlan(oracle, model, n, args.reps, zs, args.seed, cell=i,
                            zeta_factor=args.zeta_factor) for i, n in enumerate(ns)]
    report, cells = simulate(plans, threads, keep_records=bool(args.dump_reps))
    if args.dump_reps:
        with open(args.dump_reps, "w", newline="") as fh:
            w = csv.writer(fh)
            for i, cell in enumerate(cells):
                head, rows = records_table(cell)
                if i == 0:
                    w.writerow(head)
                for row in rows:
                    w.writerow(["" if v is None else (format(v, ".17g") if isinstance(v, float) else v)
                                for v in row])
    return {"command": "simulate", "seeds": {"seed": args.seed, "cells": list(range(len(ns)))},
            **report.to_dict()}


def _cmd_bandwidth(args):
    from .bandwidth import geometric_grid, select_bandwidth
    from .likelihood import load_sample

    mode = args.mode or ("plugin" if args.data else "oracle")
    hs = geometric_grid(args.h_min, args.h_max, args.h_count) if args.h_min > 0 else None
    if hs is None:
        raise UsageError("--h-min must be positive")
    model = _model(args, h=float(hs[-1]))
    z = _z_values(args)[0]
    if mode == "oracle":
        if not args.density:
            raise UsageError("--density is required in oracle mode")
        if args.n is None:
            raise UsageError("--n is required in oracle mode")
        src = _oracle(args, model.d)
        n = _ints(args.n, "--n")[0]
    else:
        if not args.data:
            raise UsageError("--data is required in plugin mode")
        try:
            src = load_sample(args.data, model.d)
        except (OSError, ValueError) as exc:
            raise UsageError(f"--data: {exc}") from None
        n = src.n if args.n is None else _ints(args.n, "--n")[0]
    rep = select_bandwidth(src, model, n, z, hs, mode, args.grid)
    out = rep.to_dict()
    out["table"] = {"columns": ["h", "bias", "stoch", "total"], "rows": rep.table()}
    return {"command": "bandwidth", "n": n, "z": z, "model": _model_echo(model), **out}


COMMANDS = {
    "estimate": _cmd_estimate,
    "constants": _cmd_constants,
    "certify": _cmd_certify,
    "simulate": _cmd_simulate,
    "bandwidth": _cmd_bandwidth,
}


def run(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
        report = COMMANDS[args.command](args)
        _emit(report, args.out)
    except UsageError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        return 1
    except LocdensError as exc:
        sys.stderr.write(f"{type(exc).__name__}: {exc}\n")
        return 2
    except OSError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        return 1
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
