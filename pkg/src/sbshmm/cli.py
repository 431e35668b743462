"""Command-line interface: ``sbshmm <subcommand> ...``.

Every subcommand reads and writes the versioned CSV/JSON formats of
:mod:`sbshmm.io`.  On failure a JSON record ``{"error", "message"}`` is
printed on stderr and the exit status is nonzero.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from . import io
from .bases import Basis
from .calibration import CalibrationMode, calibrate, calibrated_selection
from .campaign import SimConfig, rates_from_rows, run_campaign
from .crossval import cv_select
from .diagnostics import hdet_diagnostic
from .leastsq import ls_family
from .moments import read_observations
from .params import HmmParams
from .selection import PenaltyKind, Variant, align_family, penalty_shape, select_models
from .simulation import benchmark_truth, sample_hmm
from .spectral import spectral_family

USAGE_ERROR = 2
RUNTIME_ERROR = 1


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_grid(p):
    p.add_argument("--K", type=int, default=3, help="number of hidden states")
    p.add_argument("--basis", choices=["trig", "dirac_trig"], default="trig")
    p.add_argument("--M-min", type=int, default=3)
    p.add_argument("--M-max", type=int, default=300)
    p.add_argument("--m", type=int, default=20, help="rows of the moment tensors")


def _add_obs(p):
    p.add_argument("--obs", required=True, help="observation file (txt or csv)")
    p.add_argument("--column", default=None, help="CSV column name or index")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sbshmm", description=__doc__.splitlines()[0])
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--threads", type=int, default=1, help="worker pool size")
    parser.add_argument("--log-level", default="WARNING")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="sample the benchmark HMM")
    p.add_argument("--config", help="SimConfig JSON (defaults if absent)")
    p.add_argument("--n", type=int, help="sample size (default: first n of the config)")
    p.add_argument("--out", help="observation CSV")
    p.add_argument("--campaign", help="run the whole campaign and write this results CSV")

    p = sub.add_parser("estimate", help="fit an estimator family over a model grid")
    _add_obs(p)
    _add_grid(p)
    p.add_argument("--method", choices=["spectral", "ls"], default="spectral")
    p.add_argument("--reference", type=int, default=None, help="alignment reference model")
    p.add_argument("--out", required=True)

    p = sub.add_parser("select", help="state-by-state model selection")
    p.add_argument("--family", required=True)
    p.add_argument("--variant", choices=[v.value for v in Variant], default="standard")
    p.add_argument("--calibration", default="eachjump",
                   choices=[c.value for c in CalibrationMode] + ["none"])
    p.add_argument("--rho", type=float, default=None, help="penalty constant when --calibration none")
    p.add_argument("--penalty", choices=[k.value for k in PenaltyKind], default=None,
                   help="penalty shape (default follows the family's method)")
    p.add_argument("--out", required=True)
    p.add_argument("--csv", help="also write (state, M, A, criterion) rows")

    p = sub.add_parser("calibrate", help="dimension-jump curves and constants")
    p.add_argument("--family", required=True)
    p.add_argument("--mode", choices=[c.value for c in CalibrationMode], default="eachjump")
    p.add_argument("--variant", choices=[v.value for v in Variant], default="standard")
    p.add_argument("--penalty", choices=[k.value for k in PenaltyKind], default=None)
    p.add_argument("--out", required=True, help="jump-curve CSV")
    p.add_argument("--json", help="constants and jump positions")

    p = sub.add_parser("cv", help="blocked cross-validation baseline")
    _add_obs(p)
    _add_grid(p)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--gap", type=int, default=30)
    p.add_argument("--out", required=True)

    p = sub.add_parser("rates", help="convergence-rate regression from a results CSV")
    p.add_argument("--results", required=True)
    p.add_argument("--nmin", type=float, default=None)
    p.add_argument("--method", default="spectral")
    p.add_argument("--variant", default=None)
    p.add_argument("--calibration", default=None)
    p.add_argument("--out", help="JSON report (stdout if absent)")

    p = sub.add_parser("diagnose", help="nondegeneracy Hessian check")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--family", help="use one model of this family")
    src.add_argument("--truth", action="store_true", help="use the benchmark parameters")
    p.add_argument("--M", type=int, default=None)
    p.add_argument("--step", type=float, default=1e-4)
    p.add_argument("--out", help="JSON report (stdout if absent)")
    return parser


def _grid(args):
    if not 1 <= args.M_min <= args.M_max:
        raise UsageError("need 1 <= M-min <= M-max")
    return list(range(args.M_min, args.M_max + 1))


def _emit(doc, path):
    if path:
        io.write_json(path, doc)
    else:
        print(json.dumps(io._jsonable(doc), indent=1))


def cmd_simulate(args):
    config = SimConfig.from_dict(io.read_json(args.config)) if args.config else SimConfig()
    if args.campaign:
        rows = run_campaign(config, progress=lambda n, r: logging.info("done n=%d rep=%d", n, r))
        io.write_results_csv(rows, args.campaign)
    if args.out:
        n = args.n or config.n_grid[0]
        y = sample_hmm(benchmark_truth(), n, seed=args.seed)
        np.savetxt(args.out, y, fmt="%.17g", header="y", comments="")
    if not (args.out or args.campaign):
        raise UsageError("simulate needs --out and/or --campaign")


def cmd_estimate(args):
    grid = _grid(args)
    y = read_observations(args.obs, args.column)
    basis = Basis(args.basis, args.M_max)
    if args.method == "spectral":
        fam = spectral_family(y, basis, args.K, grid, m=args.m, seed=args.seed, workers=args.threads)
    else:
        fam = ls_family(y, basis, args.K, grid, seed=args.seed)
    io.save_family(align_family(fam, args.reference), args.out)


def _penalty(args, fam):
    return args.penalty or ("ls" if fam.method == "ls" else "spectral")


def cmd_select(args):
    fam = io.load_family(args.family)
    kind = _penalty(args, fam)
    if args.calibration == "none":
        if args.rho is None:
            raise UsageError("--calibration none requires --rho")
        sigma = args.rho * penalty_shape(kind, np.array(fam.model_grid), fam.n)
        res = select_models(fam, sigma, args.variant,
                            {"shape": kind, "rho": [args.rho] * fam.K, "calibration": "none"})
    else:
        res, _ = calibrated_selection(fam, kind, args.calibration, args.variant)
    io.write_json(args.out, io.selection_to_dict(res))
    if args.csv:
        io.write_selection_csv(res, args.csv)


def cmd_calibrate(args):
    fam = io.load_family(args.family)
    cal = calibrate(fam, _penalty(args, fam), args.mode, None, args.variant)
    io.write_jump_curves_csv(cal.curves, args.out)
    if args.json:
        io.write_json(args.json, {
            "schema_version": io.SCHEMA_VERSION, "mode": cal.mode.value,
            "constants": cal.constants.tolist(),
            "rho_jump": [c.rho_jump for c in cal.curves],
            "jump_size": [c.jump_size for c in cal.curves],
            "has_jump": [c.has_jump for c in cal.curves],
        })


def cmd_cv(args):
    grid = _grid(args)
    y = read_observations(args.obs, args.column)
    res = cv_select(y, Basis(args.basis, args.M_max), grid, args.K, args.folds, args.gap,
                    args.m, args.seed)
    io.write_cv_csv(res.E_curve, res.M_hat, args.out)


def cmd_rates(args):
    rows = io.read_results_csv(args.results)
    rep = rates_from_rows(rows, args.nmin, args.method, args.variant, args.calibration)
    doc = {"schema_version": io.SCHEMA_VERSION,
           "per_state": {s: {"slope": f.slope, "stderr": f.stderr, "intercept": f.intercept,
                             "points": len(f.points)} for s, f in rep.per_state.items()}}
    _emit(doc, args.out)


def cmd_diagnose(args):
    if args.truth:
        truth = benchmark_truth()
        params = truth.params(Basis("trig", args.M or 30), args.M or 30)
    else:
        fam = io.load_family(args.family)
        M = args.M if args.M is not None else fam.reference_model or fam.model_grid[0]
        if M not in fam.models:
            raise UsageError(f"model {M} not in the family")
        e = fam.models[M]
        params = HmmParams(e.pi, e.Q, e.O, fam.basis)
    _emit({"schema_version": io.SCHEMA_VERSION, **hdet_diagnostic(params, args.step).to_dict()},
          args.out)


COMMANDS = {"simulate": cmd_simulate, "estimate": cmd_estimate, "select": cmd_select,
            "calibrate": cmd_calibrate, "cv": cmd_cv, "rates": cmd_rates, "diagnose": cmd_diagnose}


def _fail(kind: str, exc: BaseException, status: int) -> int:
    print(json.dumps({"error": kind, "message": str(exc)}), file=sys.stderr)
    return status


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        return _fail("usage", exc, USAGE_ERROR)
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except UsageError as exc:
        return _fail("usage", exc, USAGE_ERROR)
    except io.SchemaError as exc:
        return _fail("schema", exc, USAGE_ERROR)
    except OSError as exc:
        return _fail("io", exc, USAGE_ERROR)
    except (ValueError, RuntimeError, ArithmeticError) as exc:
        return _fail(type(exc).__name__, exc, RUNTIME_ERROR)
    return 0


if __name__ == "__main__":
    sys.exit(main())
