"""Command line interface: ``misscusum detect|simulate|benchmark``.

Exit codes: 0 success, 2 invalid input or arguments, 3 the estimator
could not run on the data (penalty too large, or no coordinate observed
on both sides of any split). Errors are also printed as JSON on stdout.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .benchmark import PRESETS, fit_slopes, load_grid, preset_cells, slopes_csv
from .detect import LambdaRule, Variant, estimate_sigma
from .errors import DegeneratePenalty, MissCusumError
from .io import read_csv, write_csv
from .projection import SolverConfig
from .segmentation import binary_segmentation
from .simulation import THETA_SHAPES, CampaignCell, ModelSpec, run_campaign, simulate

SCHEMA = "misscusum/1"
EXIT_OK, EXIT_INVALID, EXIT_DEGENERATE = 0, 2, 3


class CliError(Exception):
    def __init__(self, code: str, message: str, exit_code: int = EXIT_INVALID, **extra):
        super().__init__(message)
        self.code = code
        self.exit_code = exit_code
        self.extra = extra


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False, allow_nan=False) + "\n"


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _positive(kind):
    def parse(s):
        x = kind(s)
        if not x > 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {s}")
        return x
    return parse


# --------------------------------------------------------------------------
# detect


def build_report(args) -> dict:
    try:
        m = read_csv(args.input, transpose=args.transpose, header=args.header, index_col=args.index_col)
    except OSError as exc:
        raise CliError("invalid_input", str(exc)) from None
    except ValueError as exc:
        raise CliError("invalid_input", str(exc)) from None

    variant = Variant(args.variant)
    if args.sigma is not None:
        sigma, source = args.sigma, "supplied"
    elif args.lam is not None:
        sigma, source = None, None
    else:
        try:
            sigma = estimate_sigma(m)
        except ValueError as exc:
            raise CliError("invalid_input", str(exc)) from None
        source = "estimated"
        if sigma == 0:
            raise CliError("invalid_input", "estimated noise scale is 0; pass --sigma or --lambda")
    started = time.perf_counter()
    try:
        rule = LambdaRule(scale=args.lambda_scale, sigma=sigma, value=args.lam, split_basis=args.split_basis)
        config = SolverConfig(max_iter=args.max_iter, tol=args.tol)
        result = binary_segmentation(
            m, rule,
            max_changepoints=args.max_changepoints,
            min_segment=args.min_segment,
            threshold=args.threshold,
            variant=variant,
            config=config,
            per_segment_sigma=False,
        )
    except ValueError as exc:
        raise CliError("invalid_arguments", str(exc)) from None
    elapsed = time.perf_counter() - started

    if not result.changepoints:
        root = next((d for d in result.diagnostics if d["depth"] == 0), None)
        if root is not None:
            extra = {k: root[k] for k in ("lambda", "two_to_inf_norm") if k in root}
            raise CliError(root["error"], root["message"], EXIT_DEGENERATE, **extra)
        # only reachable when the root falls below --threshold
    ranked = result.by_prominence()
    root_cp = next((c for c in result.changepoints if c.depth == 0), None)

    report = {
        "schema": SCHEMA,
        "n": m.n,
        "p": m.p,
        "variant": variant.value,
        "z_hats": [c.z_hat for c in ranked],
        "prominences": [c.prominence for c in ranked],
        "time_labels": [m.labels[c.z_hat - 1] for c in ranked] if m.labels else None,
        "lambda_used": root_cp.lam if root_cp else rule.penalty(m, variant, sigma),
        "lambda_scale": None if args.lam is not None else args.lambda_scale,
        "lambda_basis": ("fixed" if args.lam is not None
                         else ("n1" if variant is Variant.SPLIT and args.split_basis == "n1" else "n")),
        "sigma_used": {"value": sigma, "source": source},
        "v_hat": None,
        "solver": None,
        "segmentation": {
            "method": "binary_segmentation",
            "max_changepoints": args.max_changepoints,
            "min_segment": args.min_segment,
            "threshold": args.threshold,
            "changepoints": [
                {"z_hat": c.z_hat, "prominence": c.prominence, "depth": c.depth,
                 "segment": list(c.segment), "lambda": c.lam}
                for c in ranked
            ],
            "diagnostics": result.diagnostics,
        },
    }
    if root_cp is not None:
        proj = root_cp.estimate.projection
        support = np.flatnonzero(proj.v_hat)
        report["v_hat"] = {
            "index": [int(j) + 1 for j in support],
            "weight": [float(proj.v_hat[j]) for j in support],
            "labels": [m.row_labels[j] for j in support] if m.row_labels else None,
        }
        report["solver"] = {
            "iterations": proj.iterations,
            "converged": proj.converged,
            "init_iterations": proj.init_iterations,
            "objective": proj.objective,
        }
    if args.timing:
        report["timing_seconds"] = elapsed
    return report


def cmd_detect(args) -> int:
    _emit(_dump(build_report(args)), args.out)
    return EXIT_OK


# --------------------------------------------------------------------------
# simulate


def _spec_from_args(args) -> tuple:
    cell = CampaignCell(
        n=args.n, p=args.p, z=args.z, k=args.k, signal=args.signal, sigma=args.sigma,
        q=args.q, q_signal=args.q_signal, q_noise=args.q_noise, q_beta_nu=args.q_beta_nu,
        theta_shape=args.theta_shape,
    )
    theta = cell.theta()
    q = cell.rates(args.seed, theta)
    spec = ModelSpec(n=args.n, p=args.p, z=args.z, theta=theta, sigma=args.sigma, q=q, seed=args.seed)
    return cell, spec


def cmd_simulate(args) -> int:
    try:
        cell, spec = _spec_from_args(args)
        m = simulate(spec)
    except ValueError as exc:
        raise CliError("invalid_spec", str(exc)) from None
    write_csv(m, args.out)
    truth_path = args.truth or str(Path(args.out).with_suffix(".json"))
    truth = {
        "schema": SCHEMA,
        "n": spec.n, "p": spec.p, "z": spec.z, "k": spec.k,
        "signal": args.signal, "sigma": spec.sigma, "seed": spec.seed,
        "theta_shape": args.theta_shape,
        "theta": spec.theta.tolist(),
        "q": spec.q.tolist(),
    }
    Path(truth_path).write_text(_dump(truth))
    return EXIT_OK


# --------------------------------------------------------------------------
# benchmark


def cmd_benchmark(args) -> int:
    if (args.preset is None) == (args.grid is None):
        raise CliError("invalid_arguments", "give exactly one of --preset or --grid")
    try:
        cells = preset_cells(args.preset) if args.preset else load_grid(args.grid)
    except (OSError, ValueError, TypeError) as exc:
        raise CliError("invalid_arguments", str(exc)) from None
    reps = args.reps or (PRESETS[args.preset][1] if args.preset else 1)
    try:
        result = run_campaign(cells, reps, base_seed=args.base_seed, threads=args.threads)
    except ValueError as exc:
        raise CliError("invalid_arguments", str(exc)) from None
    _emit(result.to_csv(), args.out)
    if args.slopes_out or args.preset == "fig3":
        fits = fit_slopes(result.rows, "abs_error_mean") + fit_slopes(result.rows, "sine_mean")
        text = slopes_csv(fits)
        if args.slopes_out:
            Path(args.slopes_out).write_text(text)
        else:
            sys.stderr.write(text)
    return EXIT_OK


# --------------------------------------------------------------------------


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="misscusum", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    d = sub.add_parser("detect", help="estimate changepoints in a CSV file")
    d.add_argument("input", help="CSV file; rows are coordinates unless --transpose")
    d.add_argument("--transpose", action="store_true", help="file rows are time points")
    hdr = d.add_mutually_exclusive_group()
    hdr.add_argument("--header", dest="header", action="store_const", const=True, default=None,
                     help="first line holds labels (default: auto-detect)")
    hdr.add_argument("--no-header", dest="header", action="store_const", const=False)
    d.add_argument("--index-col", action="store_true", help="first column holds labels")
    d.add_argument("--lambda-scale", type=_positive(float), default=0.5)
    d.add_argument("--lambda", dest="lam", type=_positive(float), default=None,
                   help="fixed penalty; overrides --lambda-scale and --sigma")
    d.add_argument("--sigma", type=_positive(float), default=None,
                   help="noise scale (default: estimated from the data)")
    d.add_argument("--variant", choices=[v.value for v in Variant], default="full")
    d.add_argument("--split-basis", choices=["n1", "n"], default="n1",
                   help="length used in the split-variant penalty")
    d.add_argument("--max-changepoints", type=_positive(int), default=1)
    d.add_argument("--min-segment", type=int, default=10)
    d.add_argument("--threshold", type=float, default=None)
    d.add_argument("--seed", type=int, default=0, help="reserved; the estimator is deterministic")
    d.add_argument("--max-iter", type=_positive(int), default=100)
    d.add_argument("--tol", type=_positive(float), default=1e-8)
    d.add_argument("--timing", action="store_true", help="add wall-clock timing to the report")
    d.add_argument("--out", default=None, help="write the JSON report here instead of stdout")
    d.set_defaults(func=cmd_detect)

    s = sub.add_parser("simulate", help="draw a data set from the single-changepoint model")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--p", type=int, required=True)
    s.add_argument("--z", type=int, required=True)
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--signal", type=float, required=True, help="l2 norm of the mean change")
    s.add_argument("--sigma", type=float, default=1.0)
    s.add_argument("--q", type=float, default=None, help="common observation rate")
    s.add_argument("--q-signal", type=float, default=None)
    s.add_argument("--q-noise", type=float, default=None)
    s.add_argument("--q-beta-nu", type=float, default=None, help="q_j ~ Beta(10 nu, 10 (1 - nu))")
    s.add_argument("--theta-shape", choices=sorted(THETA_SHAPES), default="flat")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True, help="data CSV path")
    s.add_argument("--truth", default=None, help="truth JSON path (default: OUT with .json)")
    s.set_defaults(func=cmd_simulate)

    b = sub.add_parser("benchmark", help="run a Monte Carlo campaign")
    b.add_argument("--preset", choices=sorted(PRESETS), default=None)
    b.add_argument("--grid", default=None, help="JSON file of campaign cells")
    b.add_argument("--reps", type=_positive(int), default=None)
    b.add_argument("--base-seed", type=int, default=0)
    b.add_argument("--threads", type=int, default=None,
                   help="worker processes (default: MISSCUSUM_THREADS, 0 = all cores)")
    b.add_argument("--out", default=None, help="campaign CSV path (default: stdout)")
    b.add_argument("--slopes-out", default=None, help="write log-log slope fits here")
    b.set_defaults(func=cmd_benchmark)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        err = {"schema": SCHEMA, "error": exc.code, "message": str(exc), **exc.extra}
        sys.stdout.write(_dump(err))
        sys.stderr.write(f"misscusum: {exc}\n")
        return exc.exit_code
    except DegeneratePenalty as exc:
        err = {"schema": SCHEMA, "error": exc.code, "message": str(exc),
               "lambda": exc.lam, "two_to_inf_norm": exc.norm}
        sys.stdout.write(_dump(err))
        sys.stderr.write(f"misscusum: {exc}\n")
        return EXIT_DEGENERATE
    except MissCusumError as exc:
        sys.stdout.write(_dump({"schema": SCHEMA, "error": exc.code, "message": str(exc)}))
        sys.stderr.write(f"misscusum: {exc}\n")
        return EXIT_DEGENERATE


if __name__ == "__main__":
    sys.exit(main())
