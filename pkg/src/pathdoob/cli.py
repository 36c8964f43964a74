"""Batch front end.

Exit codes: 0 when everything holds, 1 when some report is violated or
inconclusive, 2 on usage or validation errors. ``sharpness`` sweeps sit
exactly on the equality boundary, so there only a nonzero closed-form gap
or a ``violated`` Monte Carlo verdict gives 1.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path as FsPath
from typing import Iterable, Sequence

import numpy as np

from pathdoob.azema_yor import AlphaConfig, closed_form_norms, equality_attainment_report
from pathdoob.models import PathSampler, TreeModel, doob_decompose
from pathdoob.path_core import read_path
from pathdoob.pathwise_ineq import check_path_l1, check_path_l2, check_path_lp
from pathdoob.pathwise_integral import (
    PartitionSequence,
    integration_by_parts_discrete,
    pathwise_integral,
    read_sampled,
    resample,
)
from pathdoob.verification import ALL_SUITES, SUITES, PathEnsemble, run_suites

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

SHARPNESS_COLUMNS = [
    "alpha", "p", "norm_ST", "norm_SbarT", "rhs_sharkdoob", "gap",
    "mc_norm_ST", "mc_norm_SbarT", "mc_stderr", "capped_fraction",
]


class UsageError(Exception):
    pass


def _load_config(filename: str) -> dict:
    path = FsPath(filename)
    text = path.read_text()
    if path.suffix.lower() == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:  # Python < 3.11
            import tomli as tomllib
        cfg = tomllib.loads(text)
    else:
        cfg = json.loads(text)
    if not isinstance(cfg, dict):
        raise UsageError(f"{filename}: config must be a table/object")
    return {k.replace("-", "_"): v for k, v in cfg.items()}


def parse_range(spec: str) -> list[float]:
    """``start:stop:step`` (inclusive) or a comma separated list."""
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise UsageError(f"range {spec!r} must look like start:stop:step")
        start, stop, step = map(float, parts)
        if step <= 0 or stop < start:
            raise UsageError(f"range {spec!r} is empty")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + k * step, 12) for k in range(count)]
    return [float(v) for v in spec.split(",") if v.strip()]


def parse_int_range(spec: str) -> list[int]:
    if ":" in spec:
        lo, hi = spec.split(":")
        return list(range(int(lo), int(hi) + 1))
    return [int(v) for v in spec.split(",") if v.strip()]


def _json_safe(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, dict):
        return {k: _json_safe(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_safe(x) for x in v]
    if isinstance(v, np.generic):
        return _json_safe(v.item())
    return v


def _render(rows: Sequence[dict], fmt: str, columns: Sequence[str] | None = None) -> str:
    if fmt == "csv":
        columns = list(columns or (rows[0].keys() if rows else []))
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow(["" if row.get(c) is None else _csv_cell(row.get(c)) for c in columns])
        return buf.getvalue()
    return "".join(json.dumps(_json_safe(r)) + "\n" for r in rows)


def _csv_cell(v):
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return v


def _emit(text: str, out: str | None) -> None:
    if out:
        FsPath(out).write_text(text)
    else:
        sys.stdout.write(text)


# -- commands -----------------------------------------------------------------

def cmd_check_path(args) -> int:
    path = read_path(args.file)
    ps = args.p or ([] if (args.l1 or args.l2) else [2.0])
    reports = []
    if args.l2:
        reports.append(check_path_l2(path, tol_scale=args.tol_scale))
    for p in ps:
        reports.append(check_path_lp(path, p, tol_scale=args.tol_scale))
    if args.l1:
        reports.append(check_path_l1(path, tol_scale=args.tol_scale))
    _emit(_render([r.to_dict() for r in reports], args.format), args.out)
    return EXIT_OK if all(r.holds for r in reports) else EXIT_FAIL


def _build_source(args):
    if args.model == "tree":
        if not args.tree:
            raise UsageError("--model tree needs --tree FILE")
        return TreeModel.from_json(args.tree)
    params = {}
    for key in ("s0", "sigma", "mu", "step", "up_prob", "boundary"):
        val = getattr(args, key)
        if val is not None:
            params[key] = val
    sampler = PathSampler(args.model, seed=args.seed, steps=args.steps, horizon=args.horizon, params=params)
    return PathEnsemble.from_sampler(sampler, args.n, n_jobs=args.n_jobs)


def cmd_verify(args) -> int:
    suites = []
    for s in args.suite or ["all"]:
        suites.extend(ALL_SUITES if s == "all" else [s])
    if "quallp" in suites and args.model != "tree":
        raise UsageError("the quallp suite needs an exact tree model (tree model required)")
    source = _build_source(args)
    reports = run_suites(source, suites, args.p or [2.0], tol_scale=args.tol_scale)
    rows = [r.to_dict() for r in reports]
    if args.format == "csv":
        for r in rows:
            r.pop("details", None)
    _emit(_render(rows, args.format), args.out)
    return EXIT_OK if all(r.verdict in ("holds", "holds-with-equality") for r in reports) else EXIT_FAIL


def cmd_sharpness(args) -> int:
    p = args.p
    alphas = parse_range(args.alpha)
    if not alphas:
        raise UsageError("no alpha values given")
    bound = p / (p - 1.0) if p > 1 else math.inf
    for a in alphas:
        if not 1 < a < bound:
            raise UsageError(
                f"alpha={a} outside (1, p/(p-1)) = (1, {bound:g}): the stopped value is not p-integrable there"
            )
    rows, status = [], EXIT_OK
    for a in sorted(alphas):
        cfg = AlphaConfig(
            alpha=a, p=p, dt=args.dt, t_max=args.t_max, seed=args.seed, bridge_correction=not args.no_bridge
        )
        rep = equality_attainment_report(cfg, args.n, n_jobs=args.n_jobs)
        row = rep.row()
        rows.append(row)
        cf = closed_form_norms(p, a)
        if abs(cf["gap"]) > 1e-12 * args.tol_scale * (1.0 + cf["norm_SbarT"]):
            status = EXIT_FAIL
        if rep.sharkdoob is not None and rep.sharkdoob.verdict == "violated":
            status = EXIT_FAIL
    _emit(_render(rows, args.format, SHARPNESS_COLUMNS), args.out)
    return status


def cmd_integral(args) -> int:
    f = read_sampled(args.f)
    g = read_sampled(args.g)
    g, f = resample(g, f)
    n = f.times.size - 1
    parts = PartitionSequence.dyadic(n, parse_int_range(args.depths))
    est = pathwise_integral(g, f, parts)
    residuals, tols = [], []
    for idx in parts:
        lhs, rhs = integration_by_parts_discrete(g, f, idx)
        residuals.append(abs(lhs - rhs))
        scale = float(np.max(np.abs(f.values[idx])) * np.max(np.abs(g.values[idx])))
        tols.append(1e-9 * args.tol_scale * (1.0 + scale * (idx.size - 1)))
    doc = {"estimate": est.to_dict(), "ibp_residuals": residuals, "ibp_tolerances": tols}
    _emit(json.dumps(_json_safe(doc)) + "\n", args.out)
    return EXIT_OK if all(r <= t for r, t in zip(residuals, tols)) else EXIT_FAIL


def cmd_decompose(args) -> int:
    model = TreeModel.from_json(args.tree)
    dec = doob_decompose(model)
    _emit(json.dumps(dec.to_dict()) + "\n", args.out)
    return EXIT_OK


# -- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default=None, help="write output here instead of stdout")
    common.add_argument("--format", choices=("json", "csv"), default=None)
    common.add_argument("--tol-scale", type=float, default=1.0)
    common.add_argument("--config", default=None, help="TOML/JSON file mirroring the flags; flags win")

    parser = argparse.ArgumentParser(prog="pathdoob", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check-path", parents=[common], help="check pathwise inequalities on one path")
    p.add_argument("file")
    p.add_argument("--p", type=float, action="append", help="exponent for the L^p check (repeatable)")
    p.add_argument("--l1", action="store_true")
    p.add_argument("--l2", action="store_true")
    p.set_defaults(func=cmd_check_path)

    p = sub.add_parser("verify", parents=[common], help="expectation-level inequality suites")
    p.add_argument("--model", choices=("tree", "gbm", "walk"), default="gbm")
    p.add_argument("--tree", help="TreeModel JSON file")
    p.add_argument("--n", type=int, default=10000)
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--horizon", type=float, default=1.0)
    p.add_argument("--s0", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--mu", type=float)
    p.add_argument("--step", type=float)
    p.add_argument("--up-prob", type=float)
    p.add_argument("--boundary", choices=("none", "absorbed", "reflected"))
    p.add_argument("--suite", action="append", choices=sorted(SUITES) + ["all"])
    p.add_argument("--p", type=float, action="append")
    p.add_argument("--n-jobs", type=int, default=1)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sharpness", parents=[common], help="stopped Brownian motion sweep over alpha")
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--alpha", default="1.1:1.9:0.1", help="start:stop:step or comma list")
    p.add_argument("--n", type=int, default=0, help="Monte Carlo samples per alpha (0: closed form only)")
    p.add_argument("--dt", type=float, default=1e-4)
    p.add_argument("--t-max", type=float, default=1e3)
    p.add_argument("--no-bridge", action="store_true", help="disable the Brownian-bridge crossing correction")
    p.add_argument("--n-jobs", type=int, default=1)
    p.set_defaults(func=cmd_sharpness, format_default="csv")

    p = sub.add_parser("integral", parents=[common], help="pathwise integral along dyadic partitions")
    p.add_argument("--f", required=True, help="integrator CSV (t,value)")
    p.add_argument("--g", required=True, help="monotone integrand CSV (t,value)")
    p.add_argument("--depths", default="4:14")
    p.set_defaults(func=cmd_integral)

    p = sub.add_parser("decompose", parents=[common], help="Doob decomposition of a tree")
    p.add_argument("--tree", required=True)
    p.set_defaults(func=cmd_decompose)
    return parser


def _config_path(argv: Sequence[str]) -> str | None:
    for i, a in enumerate(argv):
        if a == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if a.startswith("--config="):
            return a.split("=", 1)[1]
    return None


def main(argv: Iterable[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        cfg_file = _config_path(argv)
        if cfg_file:
            cfg = _load_config(cfg_file)
            command = next((a for a in argv if not a.startswith("-")), None)
            subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
            if command in subparsers.choices:
                subparsers.choices[command].set_defaults(**cfg)
        args = parser.parse_args(argv)
        if args.format is None:
            args.format = getattr(args, "format_default", "json")
        return args.func(args)
    except (UsageError, ValueError, TypeError, KeyError, OSError) as exc:
        print(f"pathdoob: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
