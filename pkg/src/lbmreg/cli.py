"""Command-line front end.

Exit codes: 0 success, 1 configuration error, 2 estimator failure, 3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys

import numpy as np

from . import contam, harness
from .exceptions import ConfigError, LbmregError

EXIT_OK, EXIT_CONFIG, EXIT_ESTIMATOR, EXIT_IO = 0, 1, 2, 3


def _auto(cast):
    def parse(text):
        return None if text == "auto" else cast(text)
    parse.__name__ = cast.__name__
    return parse


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lbmreg", description="Robust nonparametric regression under contamination.")
    parser.add_argument("--print-config", action="store_true",
                        help="print the default experiment configuration and exit")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command")

    for name, text in (("simulate", "run a Monte Carlo experiment and write a report"),
                       ("rate", "like simulate, then print fitted log-log slopes")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True)
        p.add_argument("--out", required=True)

    p = sub.add_parser("estimate", help="fit one estimator to a data file and predict at query points")
    p.add_argument("--data", required=True, help="CSV with columns x_1..x_d, y on the design grid")
    p.add_argument("--estimator", required=True, choices=harness.ESTIMATORS)
    p.add_argument("--query", required=True, help="CSV of query points (x_1..x_d)")
    p.add_argument("--out", required=True)
    p.add_argument("--m", type=_auto(int), default=None)
    p.add_argument("--h", type=_auto(float), default=None)
    p.add_argument("--ell", type=_auto(int), default=None)
    p.add_argument("--kernel", default="triangular")
    p.add_argument("--trunc-L", type=_auto(float), default=None)
    p.add_argument("--trunc-c", type=float, default=3.0)
    p.add_argument("--beta", type=float, default=1.0, help="smoothness for auto rules")
    p.add_argument("--L", type=float, default=1.0, help="smoothness constant for auto rules")
    p.add_argument("--occupancy", type=float, default=8.0)

    sub.add_parser("selftest", help="run randomised checks of the median and kernel identities")
    return parser


def _read_points(path: str, d: int) -> np.ndarray:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows:
        return np.zeros((0, d))
    try:
        [float(v) for v in rows[0]]
        header, body = None, rows
    except ValueError:
        header, body = rows[0], rows[1:]
    if header is not None and any(c.startswith("x_") for c in header):
        cols = [header.index(f"x_{k + 1}") for k in range(d)]
    else:
        cols = list(range(d))
    pts = np.array([[float(r[c]) for c in cols] for r in body], dtype=float)
    return pts.reshape(-1, d)


def _estimate(args) -> int:
    try:
        obs = contam.read_observations_csv(args.data)
    except (OSError, ValueError, LbmregError) as exc:
        print(f"error: cannot read data {args.data}: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        query = _read_points(args.query, obs.grid.d)
    except (OSError, ValueError, IndexError) as exc:
        print(f"error: cannot read queries {args.query}: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        settings = harness.EstimatorSettings(
            key=args.estimator, m=args.m, h=args.h, ell=args.ell, kernel=args.kernel,
            trunc_L=args.trunc_L, trunc_c=args.trunc_c)
        if args.kernel not in harness.postprocess.KERNELS:
            raise ConfigError(f"unknown kernel {args.kernel!r}")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        pred = harness.build_predictor(settings, obs.grid, obs.y, args.beta, args.L,
                                       occupancy=args.occupancy)
        values = harness.evaluate(pred, query) if len(query) else np.zeros(0)
    except LbmregError as exc:
        print(f"error: {args.estimator} failed: {exc}", file=sys.stderr)
        return EXIT_ESTIMATOR
    try:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow([f"x_{k + 1}" for k in range(obs.grid.d)] + ["estimate"])
            for pt, v in zip(query, values):
                w.writerow([repr(float(c)) for c in pt] + [repr(float(v))])
    except OSError as exc:
        print(f"error: cannot write {args.out}: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def _simulate(args, rate: bool) -> int:
    try:
        cfg = harness.load_config(args.config)
        if rate and len(cfg.n_values) < 3:
            raise ConfigError("a rate run needs at least three n values")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    report = harness.run_experiment(cfg)
    try:
        files = harness.emit_report(report, args.out)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    for path in files:
        print(path)
    if rate:
        for est, slope, se in report.rates():
            print(f"{est}: slope {slope:.4f} +/- {se:.4f}")
    if not report.complete:
        print(f"error: {len(report.failures)} estimator cells failed; see failures.csv",
              file=sys.stderr)
        return EXIT_ESTIMATOR
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    if args.print_config:
        sys.stdout.write(harness.DEFAULT_CONFIG)
        return EXIT_OK
    if args.command == "estimate":
        return _estimate(args)
    if args.command in ("simulate", "rate"):
        return _simulate(args, rate=args.command == "rate")
    if args.command == "selftest":
        from .selftest import run_selftest
        return EXIT_OK if run_selftest() else EXIT_ESTIMATOR
    parser.print_help()
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
