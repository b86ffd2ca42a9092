"""Command-line surface: threshold inspection, estimation on CSV data,
Monte-Carlo experiments, calibration, and reference-table reproduction.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numeric failure.
Every file the tool writes starts with a header embedding the version, the
resolved configuration, and the base seed, so any output can be reproduced
byte-for-byte from its own header.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from contextlib import contextmanager
from dataclasses import replace

import numpy as np

from . import __version__
from .calibration import calibrate_delta
from .errors import ConfigError, DataError, NumericError, SpikecountError
from .estimators import EstimatorKind, EstimatorSpec, estimate_spikes
from .rmt import penalty_alpha, signal_strength, signal_strength_large_c, thresholds
from .simulation import (
    DEFAULT_BASE_SEED,
    plan_from_dict,
    preset_names,
    preset_plan,
    run_monte_carlo,
    write_header_comment,
)
from .spectra import Divisor, spectrum_from_data

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems with exit code 1."""

    def error(self, message):  # noqa: D102 - argparse hook
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def _thread_count(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    try:
        return max(1, int(os.environ.get("SPIKECOUNT_THREADS", "1")))
    except ValueError:
        return 1


@contextmanager
def _open_out(path: str | None):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--seed", type=int, default=None,
                     help=f"base seed for all derived random streams "
                          f"(default {DEFAULT_BASE_SEED}, or the plan's)")
    sub.add_argument("--out", default=None, help="output path (default: stdout)")
    sub.add_argument("--format", choices=("csv", "json", "text"), default=None,
                     help="output format (default depends on the command)")
    sub.add_argument("--threads", type=int, default=None,
                     help="worker threads for replications (results unaffected; "
                          "defaults to SPIKECOUNT_THREADS or 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="spikecount", description=__doc__)
    parser.add_argument("--version", action="version", version=f"spikecount {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    p_rmt = subs.add_parser("rmt", parents=[], help="detection thresholds and penalty levels")
    p_rmt.add_argument("--c", type=float, required=True, help="aspect ratio p/n")
    p_rmt.add_argument("--x", type=float, default=None,
                       help="also evaluate the signal-strength scale at x")
    p_rmt.add_argument("--delta", type=float, default=None,
                       help="also report the penalty level alpha(c, delta)")
    _add_common(p_rmt)

    p_est = subs.add_parser("estimate", help="estimate the spike count of a CSV data matrix")
    p_est.add_argument("data", help="dense numeric CSV, rows = observations")
    p_est.add_argument("--estimator", default="aic",
                       choices=("aic", "aic-star", "aic-double-star", "py"))
    p_est.add_argument("--delta", type=float, default=None, help="gap parameter for aic-star")
    p_est.add_argument("--gamma", type=float, default=None,
                       help="scale of the aic-double-star schedule gamma * n**-0.25")
    p_est.add_argument("--beta", type=float, default=None,
                       help="scale of the py gap threshold beta * n**-0.625")
    p_est.add_argument("--candidates", type=int, default=None,
                       help="number of models searched (q), or the py scan bound (s)")
    p_est.add_argument("--divisor", choices=("n-1", "n"), default=None,
                       help="covariance divisor (default: the estimator's convention)")
    p_est.add_argument("--center", action="store_true", help="subtract column means first")
    _add_common(p_est)

    p_sim = subs.add_parser("simulate", help="run a Monte-Carlo comparison experiment")
    src = p_sim.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", default=None,
                     help=f"named plan: {', '.join(preset_names())}")
    src.add_argument("--plan", default=None, help="JSON plan file")
    p_sim.add_argument("--reps", type=int, default=None, help="override replications")
    p_sim.add_argument("--n-grid", default=None,
                       help="override the n grid, comma-separated (e.g. 400,600)")
    p_sim.add_argument("--calibration-reps", type=int, default=None,
                       help="override replications used to calibrate deltas")
    _add_common(p_sim)

    p_cal = subs.add_parser("calibrate", help="calibrate delta_n on the null model")
    p_cal.add_argument("--p", type=int, required=True)
    p_cal.add_argument("--n", type=int, required=True)
    p_cal.add_argument("--reps", type=int, default=500)
    p_cal.add_argument("--target", type=float, default=0.02)
    p_cal.add_argument("--step", type=float, default=0.01)
    p_cal.add_argument("--delta-max", type=float, default=2.0)
    _add_common(p_cal)

    p_tab = subs.add_parser("tables", help="reproduce the reference tables")
    p_tab.add_argument("--which", required=True,
                       help="1 (delta_n calibration) or 2 (zero-gap estimator accuracy)")
    p_tab.add_argument("--pairs", default="200x200,400x400,200x400",
                       help="PxN pairs for table 1, comma-separated")
    p_tab.add_argument("--reps", type=int, default=None)
    _add_common(p_tab)

    return parser


# ---------------------------------------------------------------------------
# commands


def cmd_rmt(args) -> int:
    if args.c <= 0 or not math.isfinite(args.c):
        raise ConfigError("c must be positive")
    rep = thresholds(args.c)
    pairs: list[tuple[str, float]] = [
        ("c", rep.c),
        ("bbp", rep.bbp),
        ("b", rep.b),
        ("lambda_c", rep.lambda_c),
        ("gap", rep.gap),
    ]
    if args.x is not None:
        try:
            if args.c <= 1.0:
                pairs.append(("signal_strength(x)", signal_strength(args.c, args.x)))
            else:
                pairs.append(("signal_strength(x)", signal_strength_large_c(args.c, args.x)))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    if args.delta is not None:
        if args.delta < 0:
            raise ConfigError("delta must be >= 0")
        pairs.append(("alpha", penalty_alpha(args.c, args.delta)))

    config = {"command": "rmt", "c": args.c, "x": args.x, "delta": args.delta}
    with _open_out(args.out) as fh:
        if (args.format or "text") == "csv":
            write_header_comment(fh, config, args.seed or DEFAULT_BASE_SEED)
            fh.write(",".join(name for name, _ in pairs) + "\n")
            fh.write(",".join(_fmt(val) for _, val in pairs) + "\n")
        else:
            for name, val in pairs:
                fh.write(f"{name} = {_fmt(val)}\n")
    return EXIT_OK


def read_csv_matrix(path: str) -> np.ndarray:
    """Dense numeric CSV with an optional single auto-detected header row."""
    rows: list[list[float]] = []
    width: int | None = None
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    with fh:
        for lineno, cells in enumerate(csv.reader(fh), start=1):
            if not cells or all(not cell.strip() for cell in cells):
                continue
            try:
                parsed = [float(cell) for cell in cells]
            except ValueError as exc:
                if lineno == 1 and not rows:
                    continue  # header row
                raise DataError(f"row {lineno}: {exc}") from exc
            if width is None:
                width = len(parsed)
            elif len(parsed) != width:
                raise DataError(
                    f"row {lineno}: expected {width} columns, got {len(parsed)}"
                )
            rows.append(parsed)
    if len(rows) < 2:
        raise DataError("need at least 2 data rows")
    return np.asarray(rows, dtype=float)


def _estimator_from_args(args) -> EstimatorSpec:
    kind = EstimatorKind(args.estimator.replace("-", "_"))
    kwargs: dict = {"kind": kind, "candidates": args.candidates}
    if kind is EstimatorKind.AIC_STAR:
        if args.delta is None:
            raise ConfigError("aic-star needs --delta (calibrate with `spikecount calibrate`)")
        kwargs["delta"] = args.delta
    if args.gamma is not None:
        g = args.gamma
        kwargs["delta_schedule"] = lambda n, g=g: g * n ** -0.25
    if args.beta is not None:
        b = args.beta
        kwargs["dn_schedule"] = lambda n, b=b: b * n ** -0.625
    return EstimatorSpec(**kwargs)


def cmd_estimate(args) -> int:
    y = read_csv_matrix(args.data)
    spec = _estimator_from_args(args)
    divisor = Divisor(args.divisor) if args.divisor else (
        Divisor.N if spec.kind is EstimatorKind.PY else Divisor.N_MINUS_1
    )
    spectrum = spectrum_from_data(y, divisor, center=args.center)
    result = estimate_spikes(spectrum, spec)

    top = spectrum.values[: min(10, spectrum.p)]
    config = {
        "command": "estimate", "data": args.data, "estimator": args.estimator,
        "delta": args.delta, "gamma": args.gamma, "beta": args.beta,
        "candidates": args.candidates, "divisor": divisor.value, "center": args.center,
    }
    with _open_out(args.out) as fh:
        if (args.format or "text") == "csv":
            write_header_comment(fh, config, args.seed or DEFAULT_BASE_SEED)
            fh.write(f"# k_hat: {result.k_hat}\n")
            if result.profile is not None:
                fh.write(f"# alpha: {_fmt(result.profile.alpha)}\n")
                fh.write("j,criterion\n")
                for j, val in enumerate(result.profile.values):
                    fh.write(f"{j},{_fmt(val)}\n")
            else:
                fh.write("k_hat,saturated\n")
                fh.write(f"{result.k_hat},{result.saturated}\n")
        else:
            fh.write(f"n x p        : {y.shape[0]} x {y.shape[1]}\n")
            fh.write(f"estimator    : {spec.display_label}\n")
            fh.write(f"k_hat        : {result.k_hat}\n")
            if result.saturated:
                fh.write("warning      : gap scan saturated at its bound s\n")
            if result.profile is not None:
                fh.write(f"alpha        : {_fmt(result.profile.alpha)}\n")
                vals = ", ".join(_fmt(v) for v in result.profile.values)
                fh.write(f"profile      : {vals}\n")
            fh.write(f"top eigenvalues: {', '.join(_fmt(v) for v in top)}\n")
    return EXIT_OK


def _parse_n_grid(text: str) -> tuple[int, ...]:
    try:
        grid = tuple(int(tok) for tok in text.split(",") if tok.strip())
    except ValueError as exc:
        raise ConfigError(f"bad n grid {text!r}: {exc}") from exc
    if not grid:
        raise ConfigError("n grid is empty")
    return grid


def cmd_simulate(args) -> int:
    if args.preset:
        plan = preset_plan(
            args.preset,
            replications=args.reps,
            n_grid=_parse_n_grid(args.n_grid) if args.n_grid else None,
            base_seed=args.seed,
            calibration_replications=args.calibration_reps,
        )
    else:
        try:
            with open(args.plan) as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise DataError(f"cannot read plan {args.plan}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"plan {args.plan} is not valid JSON: {exc}") from exc
        plan = plan_from_dict(doc)
        overrides: dict = {}
        if args.reps is not None:
            overrides["replications"] = args.reps
        if args.n_grid is not None:
            overrides["n_grid"] = _parse_n_grid(args.n_grid)
        if args.calibration_reps is not None:
            overrides["calibration_replications"] = args.calibration_reps
        if args.seed is not None:
            overrides["base_seed"] = args.seed
        if overrides:
            plan = replace(plan, **overrides)

    report = run_monte_carlo(plan, threads=_thread_count(args))
    with _open_out(args.out) as fh:
        if (args.format or "csv") == "json":
            report.to_json(fh)
        else:
            report.to_csv(fh)
    return EXIT_OK


def cmd_calibrate(args) -> int:
    if args.p < 2 or args.n < 2:
        raise ConfigError("need --p >= 2 and --n >= 2")
    if args.reps < 1:
        raise ConfigError("--reps must be >= 1")
    seed = args.seed if args.seed is not None else DEFAULT_BASE_SEED
    result = calibrate_delta(
        args.p, args.n,
        replications=args.reps, target=args.target,
        grid_step=args.step, base_seed=seed, delta_max=args.delta_max,
    )
    config = {
        "command": "calibrate", "p": args.p, "n": args.n, "reps": args.reps,
        "target": args.target, "step": args.step, "delta_max": args.delta_max,
    }
    with _open_out(args.out) as fh:
        write_header_comment(fh, config, seed)
        fh.write("p,n,delta_n,srmse,replications\n")
        fh.write(
            f"{result.p},{result.n},{_fmt(result.delta_n)},"
            f"{_fmt(result.srmse_at_delta)},{result.replications}\n"
        )
    print(
        f"delta_n(p={result.p}, n={result.n}) = {result.delta_n:.2f} "
        f"(SRMSE {result.srmse_at_delta:.4f} over {result.replications} replications)",
        file=sys.stderr,
    )
    return EXIT_OK


def _parse_pairs(text: str) -> list[tuple[int, int]]:
    pairs = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        try:
            p_str, n_str = tok.lower().split("x")
            pairs.append((int(p_str), int(n_str)))
        except ValueError as exc:
            raise ConfigError(f"bad pair {tok!r}; expected PxN like 200x400") from exc
    if not pairs:
        raise ConfigError("no (p, n) pairs given")
    return pairs


def cmd_tables(args) -> int:
    seed = args.seed if args.seed is not None else DEFAULT_BASE_SEED
    if args.which == "1":
        reps = args.reps if args.reps is not None else 500
        pairs = _parse_pairs(args.pairs)
        config = {"command": "tables", "which": 1, "pairs": args.pairs, "reps": reps}
        with _open_out(args.out) as fh:
            write_header_comment(fh, config, seed)
            fh.write("p,n,delta_n\n")
            for p, n in pairs:
                result = calibrate_delta(p, n, replications=reps, base_seed=seed)
                fh.write(f"{p},{n},{_fmt(result.delta_n)}\n")
        return EXIT_OK
    if args.which == "2":
        plan = preset_plan("table-2", replications=args.reps, base_seed=seed)
        report = run_monte_carlo(plan, threads=_thread_count(args))
        config = {"command": "tables", "which": 2, "reps": plan.replications}
        with _open_out(args.out) as fh:
            write_header_comment(fh, config, seed)
            fh.write("n,accuracy,avg_k_hat\n")
            for row in report.rows:
                fh.write(f"{row.n},{_fmt(row.accuracy)},{_fmt(row.mean_k_hat)}\n")
        return EXIT_OK
    raise ConfigError(f"unknown table {args.which!r}; available: 1, 2")


_COMMANDS = {
    "rmt": cmd_rmt,
    "estimate": cmd_estimate,
    "simulate": cmd_simulate,
    "calibrate": cmd_calibrate,
    "tables": cmd_tables,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericError, ValueError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except SpikecountError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
