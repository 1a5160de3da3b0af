"""Command-line interface: ``covstat {test,gen,basis,mc}``.

Exit codes: 0 completed, 2 input error, 3 degenerate series, 4 configuration
error. All randomness flows from ``--seed``.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import re
import sys
from pathlib import Path

import numpy as np

from covstat.basis import BasisKind, basis_matrix
from covstat.bootstrap import BootstrapConfig, Variant, run_test
from covstat.dgp import DgpSpec, generate
from covstat.exceptions import (
    ConfigurationError,
    CovStatError,
    DegenerateSeriesError,
    InputError,
)
from covstat.mc import McConfig, run_mc, schedule_lookup
from covstat.stats import Grid

EXIT_OK, EXIT_INPUT, EXIT_DEGENERATE, EXIT_CONFIG = 0, 2, 3, 4
MIN_INPUT_LENGTH = 16
WORKERS_ENV = "COVSTAT_WORKERS"

_MISSING = {"", "na", "nan", "null", "none", "."}


def read_series(path: str | os.PathLike, column: str | None = None) -> np.ndarray:
    """Read a numeric column from CSV; a header row is optional for one column."""
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    if not rows:
        raise InputError(f"{path} contains no data")

    def numeric(cell: str) -> bool:
        try:
            float(cell)
        except ValueError:
            return False
        return cell.strip().lower() not in _MISSING

    has_header = not all(numeric(c) or c.strip().lower() in _MISSING for c in rows[0])
    header = [c.strip() for c in rows[0]] if has_header else None
    body = rows[1:] if has_header else rows
    width = len(rows[0])
    if column is not None:
        if header is None:
            raise InputError("--column needs a CSV header row")
        if column not in header:
            raise InputError(f"column {column!r} not found; available: {', '.join(header)}")
        idx = header.index(column)
    elif width == 1:
        idx = 0
    else:
        raise InputError(f"{path} has {width} columns; select one with --column")

    values = []
    for lineno, row in enumerate(body, start=2 if has_header else 1):
        cell = row[idx].strip() if idx < len(row) else ""
        if cell.lower() in _MISSING:
            raise InputError(f"missing value on line {lineno}")
        try:
            v = float(cell)
        except ValueError:
            raise InputError(f"non-numeric value {cell!r} on line {lineno}") from None
        if not math.isfinite(v):
            raise InputError(f"non-finite value on line {lineno}")
        values.append(v)
    return np.array(values)


def _parse_grid(text: str, bases, T: int) -> dict[BasisKind, Grid]:
    text = text.strip().lower()
    if text in ("case1", "case2"):
        return {b: schedule_lookup(text, b, T) for b in bases}
    m = re.fullmatch(r"(\d+)\s*[,x:]\s*(\d+)", text)
    if not m:
        raise ConfigurationError(f"grid must be case1, case2 or H,K; got {text!r}")
    g = Grid(int(m.group(1)), int(m.group(2)))
    for b in bases:
        g.validate(T, b)
    return {b: g for b in bases}


def _parse_bases(text: str) -> list[BasisKind]:
    if text.lower() == "both":
        return [BasisKind.WALSH, BasisKind.HAAR]
    return [BasisKind.parse(text)]


def _parse_generate(text: str) -> DgpSpec:
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigurationError("--generate takes MODEL:ERRORS:T, e.g. alt8:gauss:512")
    try:
        T = int(parts[2])
    except ValueError:
        raise ConfigurationError(f"bad sample length {parts[2]!r}") from None
    return DgpSpec(parts[0], parts[1], T)


def _write_diff_tsv(path: str, result) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("basis\th\tk\tdiff\tcov_diff\n")
        for kind, D in result.diffs.items():
            H1, K = D.entries.shape
            for h in range(H1):
                for k in range(K):
                    fh.write(f"{kind.value}\t{h}\t{k + 1}\t{D.entries[h, k]:.12g}\t"
                             f"{D.cross[h, k]:.12g}\n")


def _write_draws_tsv(path: str, result) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("replication\tdraw\n")
        for i, d in enumerate(result.draws):
            fh.write(f"{i}\t{d:.12g}\n")


def cmd_test(args) -> int:
    if args.generate:
        spec = _parse_generate(args.generate)
        x = generate(spec, np.random.default_rng(args.seed))
    else:
        x = read_series(args.input, args.column)
    if x.shape[0] < MIN_INPUT_LENGTH:
        raise InputError(f"series has {x.shape[0]} observations; at least {MIN_INPUT_LENGTH} needed")
    if np.ptp(x) == 0:
        raise DegenerateSeriesError("degenerate series: zero sample variance")
    bases = _parse_bases(args.basis)
    grids = _parse_grid(args.grid, bases, x.shape[0])
    cfg = BootstrapConfig(M=args.M, seed=args.seed, block_size=args.block_size,
                          centering=args.centering)
    res = run_test(x, grids, bases, Variant.parse(args.variant), cfg)
    decision = "reject" if res.reject(args.alpha) else "fail to reject"
    grid_text = ", ".join(f"{k.value}: H={g.max_lag} K={g.max_counter}" for k, g in grids.items())
    print(f"T           {x.shape[0]}")
    print(f"grid        {grid_text}")
    print(f"variant     {res.variant.name}")
    print(f"block size  {res.block_size}")
    print(f"statistic   {res.statistic:.6f}")
    print(f"p-value     {res.p_value:.6f}  (M={cfg.M})")
    print(f"argmax      h={res.argmax[0]} k={res.argmax[1]} ({res.basis.value})")
    print(f"decision    {decision} at alpha={args.alpha:g} (p-value {res.p_value:.6f} "
          f"{'<' if res.reject(args.alpha) else '>='} {args.alpha:g})")
    if args.diff_out:
        _write_diff_tsv(args.diff_out, res)
    if args.draws_out:
        _write_draws_tsv(args.draws_out, res)
    return EXIT_OK


def cmd_gen(args) -> int:
    spec = DgpSpec(args.model, args.errors, args.t, args.burn_in)
    x = generate(spec, np.random.default_rng(args.seed))
    text = "x\n" + "".join(f"{v!r}\n" for v in x.tolist())
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_basis(args) -> int:
    B = basis_matrix(args.kind, args.k, args.t)
    sys.stdout.write("".join("\t".join(str(int(v)) for v in row) + "\n" for row in B.entries))
    return EXIT_OK


def _load_config(path: str) -> dict:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    if path.endswith(".json"):
        try:
            return json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{path}: {exc}") from None
    try:
        import tomllib
    except ModuleNotFoundError:  # Python < 3.11
        import tomli as tomllib
    try:
        return tomllib.loads(raw.decode())
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"{path}: {exc}") from None


def cmd_mc(args) -> int:
    data = _load_config(args.config)
    if args.seed is not None:
        data["seed"] = args.seed
    if args.paper_scale:
        data["reps"] = 1000
        data.setdefault("bootstrap", {})["M"] = 500
    cfg = McConfig.from_mapping(data)
    workers = args.workers if args.workers is not None else int(os.environ.get(WORKERS_ENV, "1"))
    report = run_mc(cfg, workers=workers)
    if args.out:
        Path(args.out).write_text(report.to_tsv())
        sys.stdout.write(report.to_table())
    else:
        sys.stdout.write(report.to_tsv())
        sys.stderr.write(report.to_table())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="covstat",
                                description="Bootstrapped max-correlation test of covariance stationarity.")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("test", help="test one series")
    src = t.add_mutually_exclusive_group(required=True)
    src.add_argument("input", nargs="?", help="CSV file with the series")
    src.add_argument("--generate", metavar="MODEL:ERRORS:T",
                     help="simulate the series instead of reading it")
    t.add_argument("--column", help="column name in a multi-column CSV")
    t.add_argument("--basis", default="walsh", help="walsh, haar or both (max-max)")
    t.add_argument("--grid", default="case1", help="case1, case2 or explicit H,K")
    t.add_argument("--variant", default="plain",
                   help="plain, penalized(a), sqrtprod, weighted, weighted-penalized(a), ljungbox, jww")
    t.add_argument("--M", type=int, default=500, help="bootstrap replications")
    t.add_argument("--block-size", type=int, default=None)
    t.add_argument("--centering", choices=("product", "own"), default="product")
    t.add_argument("--alpha", type=float, default=0.05)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--diff-out", help="write the difference matrix as TSV")
    t.add_argument("--draws-out", help="write the bootstrap draws as TSV")
    t.set_defaults(func=cmd_test)

    g = sub.add_parser("gen", help="simulate one series as CSV")
    g.add_argument("--model", required=True, help="null1..null4, alt1..alt9")
    g.add_argument("--errors", default="gauss", help="gauss, t5 or garch")
    g.add_argument("--t", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--burn-in", action="store_true",
                   help="also discard a burn-in for alternative models")
    g.add_argument("--out")
    g.set_defaults(func=cmd_gen)

    b = sub.add_parser("basis", help="dump a discretized basis as TSV")
    b.add_argument("--kind", required=True, help="walsh or haar")
    b.add_argument("--k", type=int, required=True)
    b.add_argument("--t", type=int, required=True)
    b.set_defaults(func=cmd_basis)

    m = sub.add_parser("mc", help="run a Monte Carlo experiment")
    m.add_argument("--config", required=True, help="TOML or JSON experiment file")
    m.add_argument("--seed", type=int, default=None)
    m.add_argument("--workers", type=int, default=None,
                   help=f"worker processes (default ${WORKERS_ENV} or 1)")
    m.add_argument("--paper-scale", action="store_true", help="1000 replications, M=500")
    m.add_argument("--out", help="write the TSV report here")
    m.set_defaults(func=cmd_mc)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DegenerateSeriesError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InputError, CovStatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
