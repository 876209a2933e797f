"""Command-line entry point ``pmgp``.

Exit codes: 0 on success, 2 on input errors, 3 on numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from .errors import ConditioningError, InputError, PMGPError, UnsupportedOrderError
from .harness import (
    MODEL_NAMES,
    VALUE_SCALINGS,
    SCORINGS,
    TIME_ENCODINGS,
    RunConfig,
    forecast_report,
    ingest_csv,
    loglik_report,
    run_benchmark,
    sweep,
    theta_from_vector,
    write_plot_data,
    write_report,
)

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3


def _common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--input", required=True, help="CSV file with header t,y")
    sub.add_argument("--p", type=int, default=2, help="Matérn smoothness index (nu = p + 1/2)")
    sub.add_argument("--components", type=int, default=4, help="number of spectral components K")
    sub.add_argument("--c", type=float, default=100.0, help="PA aggressiveness")
    sub.add_argument("--eps", type=float, default=0.0, help="PA tolerance")
    sub.add_argument("--trend", choices=("constant", "linear"), default="linear")
    sub.add_argument("--fs", type=float, default=None, help="sampling frequency override")
    sub.add_argument("--time-encoding", choices=TIME_ENCODINGS, default="raw")
    sub.add_argument("--value-scaling", choices=VALUE_SCALINGS, default="none")
    sub.add_argument("--scoring", choices=SCORINGS, default="instep")
    sub.add_argument("--no-learn", action="store_true", help="keep the initial hyperparameters")
    sub.add_argument("--out", default=None, help="output JSON path (default: stdout)")
    sub.add_argument("-v", "--verbose", action="store_true")


def _config(args, **extra) -> RunConfig:
    return RunConfig(
        p=args.p,
        n_components=args.components,
        c=args.c,
        eps=args.eps,
        trend=args.trend,
        fs=args.fs,
        time_encoding=args.time_encoding,
        scoring=args.scoring,
        value_scaling=args.value_scaling,
        learn=not args.no_learn,
        **extra,
    )


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _models(text: str) -> tuple[str, ...]:
    names = tuple(v.strip() for v in text.split(",") if v.strip())
    bad = [n for n in names if n not in MODEL_NAMES]
    if bad or not names:
        raise argparse.ArgumentTypeError(f"unknown models {bad}; choose from {', '.join(MODEL_NAMES)}")
    return names


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pmgp", description="Online spectral Matérn GP forecasting")
    subs = parser.add_subparsers(dest="command", required=True)

    f = subs.add_parser("forecast", help="online pM-GP run plus forecasts past the last point")
    _common(f)
    f.add_argument("--horizon", type=int, default=1)

    b = subs.add_parser("benchmark", help="one-step-ahead NMAE of pM-GP and AR baselines")
    _common(b)
    b.add_argument("--models", type=_models, default=("pmgp", "pa-ar2", "pa-ar10", "blr-ar2", "blr-ar10"))
    b.add_argument("--plot-data", default=None, help="tidy CSV of running NMAE curves")
    b.add_argument("--theta-trace", action="store_true", help="include the hyperparameter trace")
    b.add_argument("--timings", action="store_true", help="record wall-clock runtimes")

    ll = subs.add_parser("loglik", help="log marginal likelihood under fixed hyperparameters")
    _common(ll)
    ll.add_argument("--exact", action="store_true", help="also compute the dense GPR value")
    ll.add_argument("--theta", default=None, help="JSON file holding the flat hyperparameter vector")

    sc = subs.add_parser("sweep-c", help="pM-GP NMAE for several aggressiveness values")
    _common(sc)
    sc.add_argument("--values", type=_floats, default=[0.01, 0.1, 1.0, 10.0, 100.0])

    sk = subs.add_parser("sweep-k", help="pM-GP NMAE for several component counts")
    _common(sk)
    sk.add_argument("--values", type=_ints, default=[1, 2, 4, 6, 8])
    return parser


def _emit(obj, out) -> None:
    if out is None:
        sys.stdout.write(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    else:
        write_report(obj, out)


def _dispatch(args) -> None:
    records = ingest_csv(args.input)
    if args.command == "forecast":
        _emit(forecast_report(records, _config(args), args.horizon), args.out)
    elif args.command == "benchmark":
        cfg = _config(args, models=args.models, record_theta=args.theta_trace, timings=args.timings)
        report, results = run_benchmark(records, cfg, source=str(args.input))
        _emit(report, args.out)
        if args.plot_data:
            write_plot_data(results, args.plot_data)
    elif args.command == "loglik":
        cfg = _config(args)
        theta = None
        if args.theta:
            try:
                with open(args.theta) as fh:
                    theta = theta_from_vector(json.load(fh), cfg)
            except (OSError, json.JSONDecodeError) as exc:
                raise InputError(f"cannot read theta from {args.theta}: {exc}") from exc
        _emit(loglik_report(records, cfg, theta, exact=args.exact), args.out)
    else:
        param = "c" if args.command == "sweep-c" else "n_components"
        rows = sweep(records, _config(args), param, args.values)
        _emit({"param": param, "rows": rows}, args.out)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        _dispatch(args)
    except (InputError, UnsupportedOrderError) as exc:
        print(f"pmgp: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ConditioningError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"pmgp: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except PMGPError as exc:
        print(f"pmgp: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
