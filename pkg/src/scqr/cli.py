"""Command-line front end: ``fit``, ``tune`` and ``bench``.

Exit codes: 0 success, 2 usage or I/O problems, 3 invalid data.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import bench
from .core import Kernel, quantile_grid
from .estimator import fit_model
from .tuning import METHOD_ADMM, METHOD_SCQR

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


def read_table(path: str, response: str) -> Tuple[np.ndarray, np.ndarray, List[str]]:
    """Read a headed numeric CSV; returns (X, y, covariate names)."""
    if not os.path.isfile(path):
        raise UsageError(f"input file not found: {path}")
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except (OSError, UnicodeDecodeError) as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise DataError("input has no header row")
    header = [h.strip() for h in rows[0]]
    if response not in header:
        shown = ", ".join(header[:8]) + (", ..." if len(header) > 8 else "")
        raise DataError(f"response column {response!r} not found; columns are {shown}")
    body = [r for r in rows[1:] if r]
    if not body:
        raise DataError("input has no data rows")
    values = np.empty((len(body), len(header)))
    for i, row in enumerate(body, start=1):
        if len(row) != len(header):
            raise DataError(f"row {i}: expected {len(header)} cells, found {len(row)}")
        for j, cell in enumerate(row):
            cell = cell.strip()
            if cell == "":
                raise DataError(f"row {i}, column {header[j]!r}: empty cell")
            try:
                v = float(cell)
            except ValueError:
                raise DataError(f"row {i}, column {header[j]!r}: non-numeric value {cell!r}") from None
            if not math.isfinite(v):
                raise DataError(f"row {i}, column {header[j]!r}: non-finite value {cell!r}")
            values[i - 1, j] = v
    k = header.index(response)
    names = [h for j, h in enumerate(header) if j != k]
    if not names:
        raise DataError("no covariate columns besides the response")
    return np.delete(values, k, axis=1), values[:, k], names


def _bandwidth(text: str) -> Optional[float]:
    if text == "auto":
        return None
    try:
        h = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bandwidth must be 'auto' or a number, got {text!r}")
    if not h > 0:
        raise argparse.ArgumentTypeError("bandwidth must be positive")
    return h


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", required=True, help="CSV file with a header row")
    p.add_argument("--response", required=True, help="name of the response column")
    p.add_argument("--method", choices=(METHOD_ADMM, METHOD_SCQR), default=METHOD_SCQR)
    p.add_argument("--penalty", choices=("l1", "scad", "mcp"), default="l1")
    p.add_argument("--q", type=_positive_int, default=19, help="number of quantile levels")
    p.add_argument("--h", type=_bandwidth, default=None, metavar="{auto,FLOAT}",
                   help="smoothing bandwidth (default auto)")
    p.add_argument("--kernel", choices=[k.value for k in Kernel], default="gaussian")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=_positive_int, default=1)
    p.add_argument("--output", help="result file (default: standard output)")
    p.add_argument("--format", choices=("json", "csv"), default="json")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scqr", description="Penalized smoothed composite quantile regression.")
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="fit at a fixed or tuned lambda")
    _add_model_flags(fit)
    g = fit.add_mutually_exclusive_group()
    g.add_argument("--lambda", dest="lam", type=float)
    g.add_argument("--tune", choices=("cv", "bic", "pivotal"))

    tune = sub.add_parser("tune", help="select lambda and report the criterion path")
    _add_model_flags(tune)
    tune.add_argument("--tune", choices=("cv", "bic", "pivotal"), required=True)

    b = sub.add_parser("bench", help="run a named simulation preset")
    b.add_argument("scenario", help="preset name: " + ", ".join(bench.PRESETS))
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--threads", type=_positive_int, default=1)
    b.add_argument("--output", help="path prefix for <prefix>.csv and <prefix>.jsonl")
    b.add_argument("--replications", type=int, help="override evaluation replications")
    b.add_argument("--pilot", type=int, help="override oracle-scan pilot replications")
    b.add_argument("--filter", default="", help="keep scenarios whose id contains this text")
    return parser


def _fit_document(res, names: Sequence[str]) -> dict:
    doc = res.to_dict()
    doc["covariates"] = list(names)
    doc["support_names"] = [names[j] for j in res.support]
    return doc


def _emit(doc: dict, res, names, args) -> None:
    if args.format == "json":
        text = json.dumps(doc, indent=2) + "\n"
    else:
        lines = ["term,value"]
        for k, t in enumerate(quantile_grid(res.q).tau):
            lines.append(f"intercept[{float(t)!r}],{float(res.alpha[k])!r}")
        for name, b in zip(names, res.beta):
            lines.append(f"{name},{float(b)!r}")
        text = "\n".join(lines) + "\n"
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _run_model(args, tune: Optional[str], lam: Optional[float]):
    X, y, names = read_table(args.input, args.response)
    if X.shape[0] < 2:
        raise DataError("need at least two data rows")
    try:
        res = fit_model(X, y, method=args.method, penalty=args.penalty, lam=lam, tune=tune,
                        q=args.q, h=args.h, kernel=args.kernel, seed=args.seed, folds=args.folds)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    return res, names


def cmd_fit(args) -> int:
    if args.lam is not None and not (args.lam > 0 and math.isfinite(args.lam)):
        raise UsageError("--lambda must be positive and finite")
    res, names = _run_model(args, args.tune, args.lam)
    _emit(_fit_document(res, names), res, names, args)
    return EXIT_OK


def cmd_tune(args) -> int:
    res, names = _run_model(args, args.tune, None)
    report = res.tune
    doc = {
        "mode": report.method,
        "chosen_lambda": report.chosen_lambda,
        "path": [
            {"lambda": r.lam, "criterion": None if math.isnan(r.criterion) else r.criterion,
             "support_size": r.support_size, "converged": r.converged, "degenerate": r.degenerate}
            for r in report.records
        ],
        "settings": {k: v for k, v in report.extras.items()},
        "fit": _fit_document(res, names),
    }
    if args.format == "csv":
        rows = ["lambda,criterion"] + [f"{r.lam!r},{r.criterion!r}" for r in report.records]
        text = "\n".join(rows) + "\n"
    else:
        text = json.dumps(doc, indent=2) + "\n"
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_bench(args) -> int:
    if args.scenario not in bench.PRESETS:
        raise UsageError(f"unknown scenario {args.scenario!r}; available: {', '.join(bench.PRESETS)}")
    for flag in ("replications", "pilot"):
        v = getattr(args, flag)
        if v is not None and v < (1 if flag == "pilot" else 0):
            raise UsageError(f"--{flag} is out of range")
    scenarios = [s for s in bench.preset(args.scenario, args.seed, args.replications, args.pilot)
                 if args.filter in s.id]
    if not scenarios:
        raise UsageError(f"no scenario id in {args.scenario!r} contains {args.filter!r}")
    results = [bench.run_benchmark(s, threads=args.threads) for s in scenarios]
    if args.scenario.startswith("figure1"):
        header, rows = bench.FIGURE_COLUMNS, bench.figure_rows(results)
    else:
        header, rows = bench.AGGREGATE_COLUMNS, bench.aggregate_rows(results)
    prefix = args.output or f"bench-{args.scenario}"
    bench.write_csv(prefix + ".csv", header, rows)
    bench.write_jsonl(prefix + ".jsonl", results)
    _print_table(header, rows)
    excluded = sum(r.excluded for r in results)
    if excluded:
        print(f"{excluded} non-converged replication(s) excluded from aggregates")
    return EXIT_OK


def _print_table(header, rows) -> None:
    def short(cell):
        try:
            v = float(cell)
        except ValueError:
            return cell
        return cell if v.is_integer() and "." not in cell else f"{v:.4g}"

    table = [list(header)] + [[short(c) for c in r] for r in rows]
    widths = [max(len(r[j]) for r in table) for j in range(len(header))]
    for r in table:
        print("  ".join(c.rjust(w) for c, w in zip(r, widths)))


COMMANDS = {"fit": cmd_fit, "tune": cmd_tune, "bench": cmd_bench}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"invalid data: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
