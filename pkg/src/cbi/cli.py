"""Command-line entry point ``cbi``.

Exit codes: 0 success, 1 runtime failure (including failed validation checks),
2 usage or configuration error.  ``CBI_THREADS`` caps experiment workers.
"""
from __future__ import annotations

import argparse
import logging
import sys
from contextlib import contextmanager

import numpy as np

from . import __version__
from .affine import IntegrationError, char_functional, char_M1
from .datafiles import dumps_json, read_json, read_path_csv, write_path_csv, write_rows_csv
from .estimate import estimate
from .harness import ConfigError, ExperimentConfig, ExperimentError, run_experiment
from .limits import LimitKind, LimitLawSpec, sample_limit
from .model import CbiParams, derive, limit_matrices, limit_variances, supercriticality
from .rng import make_rng
from .simulate import Scheme, simulate
from .validation import SUITES, run_suite

log = logging.getLogger("cbi")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _load_params(path) -> CbiParams:
    try:
        return CbiParams.from_dict(read_json(path))
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"invalid parameters in {path}: {exc}") from exc


@contextmanager
def _output(path):
    if path in (None, "-"):
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            yield fh


def _emit_json(obj, path=None):
    with _output(path) as fh:
        fh.write(dumps_json(obj))


def cmd_derive(args) -> int:
    p = _load_params(args.config)
    d = derive(p)
    out = {"derived": d.to_dict(), "criticality": supercriticality(d).value}
    if d.B > 0:
        out["limit_variances"] = limit_variances(d).to_dict()
        if args.w is not None:
            lm = limit_matrices(d, args.w)
            out["limit_matrices"] = {"w": args.w, "S": lm.S, "S_tilde": lm.S_tilde, "R": lm.R, "kappa": lm.kappa}
    elif args.w is not None:
        raise UsageError("limit matrices need a supercritical model (B > 0)")
    _emit_json(out, args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    p = _load_params(args.config)
    if args.n < 1:
        raise UsageError("--n must be at least 1")
    try:
        path = simulate(p, args.n, args.scheme, make_rng(args.seed), args.substeps)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    with _output(args.out) as fh:
        write_path_csv(path, fh)
    return EXIT_OK


def cmd_estimate(args) -> int:
    d = derive(_load_params(args.params)) if args.params else None
    try:
        path = read_path_csv(args.path)
    except OSError as exc:
        raise UsageError(f"cannot read {args.path}: {exc}") from exc
    except ValueError as exc:
        raise UsageError(f"invalid path file {args.path}: {exc}") from exc
    _emit_json(estimate(path, d).to_dict(), args.out)
    return EXIT_OK


def _theta_grid(args) -> np.ndarray:
    """``--theta-grid`` as ``lo:hi:count`` or a comma list; else the min/max/points options."""
    spec = args.theta_grid
    try:
        if spec is None:
            lo, hi, count = args.theta_min, args.theta_max, args.points
        elif ":" in spec:
            lo, hi, count = spec.split(":")
            lo, hi, count = float(lo), float(hi), int(count)
        else:
            return np.array([float(v) for v in spec.split(",")])
    except ValueError as exc:
        raise UsageError(f"invalid theta grid {spec!r}: {exc}") from exc
    if count < 1:
        raise UsageError("the theta grid needs at least one point")
    return np.linspace(lo, hi, count)


def cmd_charfn(args) -> int:
    p = _load_params(args.config)
    theta = _theta_grid(args)
    try:
        if args.kind == "M1":
            values = char_M1(p, theta)
        else:
            x = p.x0 if args.x is None else args.x
            values = char_functional(p, args.t, x, theta)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    with _output(args.out) as fh:
        write_rows_csv(["theta", "re", "im"], ((t, v.real, v.imag) for t, v in zip(theta, values)), fh)
    return EXIT_OK


def cmd_limits_sample(args) -> int:
    p = _load_params(args.params)
    if args.n < 1:
        raise UsageError("--n must be at least 1")
    try:
        spec = LimitLawSpec(args.kind, derive(p), args.w, nu=p.nu, tol=args.tol)
        draws = sample_limit(spec, make_rng(args.seed), args.n)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    with _output(args.out) as fh:
        if draws.ndim == 2:
            write_rows_csv(["draw", "first", "second"], ((i, float(a), float(b)) for i, (a, b) in enumerate(draws)), fh)
        else:
            write_rows_csv(["draw", "value"], ((i, float(v)) for i, v in enumerate(draws)), fh)
    return EXIT_OK


def cmd_experiment(args) -> int:
    try:
        cfg = ExperimentConfig.from_dict(read_json(args.config))
    except OSError as exc:
        raise UsageError(f"cannot read {args.config}: {exc}") from exc
    except (ConfigError, TypeError, ValueError) as exc:
        raise UsageError(f"invalid experiment config: {exc}") from exc
    report = run_experiment(cfg)
    _emit_json(report.to_dict(include_runtime=not args.no_runtime), args.out)
    if args.csv:
        with _output(args.csv) as fh:
            write_rows_csv(["replicate", "statistic", "value", "defined"], report.rows(), fh)
    return EXIT_OK


def cmd_validate(args) -> int:
    summary = run_suite(args.suite)
    _emit_json(summary, args.out)
    for check in summary["checks"]:
        log.info("check %d %s: %s", check["id"], check["name"], "pass" if check["passed"] else "FAIL")
    return EXIT_OK if summary["passed"] else EXIT_RUNTIME


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cbi", description="Simulation and CLS estimation for supercritical CBI processes.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("derive", help="derived constants and limit variances")
    s.add_argument("--config", required=True, help="parameter JSON")
    s.add_argument("--w", type=float, help="also evaluate the limit matrices at this w")
    s.add_argument("--out")
    s.set_defaults(func=cmd_derive)

    s = sub.add_parser("simulate", help="simulate a path and write k,X_k CSV")
    s.add_argument("--config", required=True, help="parameter JSON")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--scheme", choices=[m.value for m in Scheme], required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--substeps", type=int, default=200, help="Euler substeps per unit time")
    s.add_argument("--out")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("estimate", help="CLS and weighted CLS estimates for a path CSV")
    s.add_argument("--path", required=True)
    s.add_argument("--params", help="parameter JSON (needed for the weighted estimator)")
    s.add_argument("--out")
    s.set_defaults(func=cmd_estimate)

    s = sub.add_parser("charfn", help="characteristic function on a theta grid, CSV theta,re,im")
    s.add_argument("--config", required=True, help="parameter JSON")
    s.add_argument("--kind", choices=["X", "M1"], default="X", help="law of X_t given X_0 = x, or of the innovation M_1 (C = 0)")
    s.add_argument("--t", type=float, default=1.0)
    s.add_argument("--x", type=float, help="initial value (default x0 from the config)")
    s.add_argument("--theta-min", type=float, default=-3.0)
    s.add_argument("--theta-max", type=float, default=3.0)
    s.add_argument("--points", type=int, default=61)
    s.add_argument("--theta-grid", help="'lo:hi:count' or comma-separated values, overriding min/max/points (write --theta-grid=-1:1:5 when lo is negative)")
    s.add_argument("--out")
    s.set_defaults(func=cmd_charfn)

    s = sub.add_parser("limits", help="limit-law utilities")
    lsub = s.add_subparsers(dest="limits_command", required=True)
    ls = lsub.add_parser("sample", help="draws from a limit law as CSV")
    ls.add_argument("--kind", choices=[k.value for k in LimitKind], required=True)
    ls.add_argument("--params", required=True, help="parameter JSON")
    ls.add_argument("--n", type=int, default=100_000)
    ls.add_argument("--w", type=float, default=1.0)
    ls.add_argument("--tol", type=float, default=1e-4, help="series truncation tolerance")
    ls.add_argument("--seed", type=int, default=0)
    ls.add_argument("--out")
    ls.set_defaults(func=cmd_limits_sample)

    s = sub.add_parser("experiment", help="Monte Carlo experiment with KS comparisons")
    s.add_argument("--config", required=True, help="experiment JSON")
    s.add_argument("--out", help="report JSON")
    s.add_argument("--csv", help="per-replicate statistics CSV")
    s.add_argument("--no-runtime", action="store_true", help="omit wall-clock metadata from the report")
    s.set_defaults(func=cmd_experiment)

    s = sub.add_parser("validate", help="run pinned-seed validation suites")
    s.add_argument("suite", choices=sorted(SUITES))
    s.add_argument("--out", help="summary JSON (default stdout)")
    s.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"cbi: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ExperimentError, IntegrationError, OSError, ArithmeticError) as exc:
        print(f"cbi: runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
