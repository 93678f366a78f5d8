"""Command-line entry point: ``llbdf2 <subcommand> [--config FILE] [--key value ...]``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import KEYS, PRESETS, build_study, read_config
from .io import (export_csv, export_field, export_field_csv, export_stability_csv,
                 read_points_csv)
from .studies import converge_mms, converge_reference, fit_order, run_single, stability_table

SUBCOMMAND_MODES = {
    "converge-mms": ("mms-1d", "mms-3d"),
    "converge-ref": ("reference-1d",),
    "stability": ("stability-1d", "stability-3d"),
    "run": ("single-run",),
}


def _study_parser(sub, name, help_text):
    p = sub.add_parser(name, help=help_text)
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--preset", choices=sorted(PRESETS), help="configuration of one of the published tables")
    for key in sorted(KEYS - {"quick"}):
        p.add_argument(f"--{key}", dest=key, default=None)
    p.add_argument("--quick", action="store_true", help="stop the ladder at k = 1/128")
    p.add_argument("-v", "--verbose", action="count", default=0)
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="llbdf2", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    _study_parser(sub, "converge-mms", "manufactured-solution convergence ladder")
    _study_parser(sub, "converge-ref", "self-convergence against a fine reference run")
    _study_parser(sub, "stability", "error over a grid of (k, h) pairs")
    _study_parser(sub, "run", "single run, optionally writing a field snapshot")
    p = sub.add_parser("fit-order", help="least-squares order of a step,error CSV")
    p.add_argument("path")
    return parser


def _collect(args) -> dict:
    values = {}
    if args.preset:
        values.update(PRESETS[args.preset])
    if args.config:
        values.update(read_config(args.config))
    for key in KEYS - {"quick"}:
        if getattr(args, key) is not None:
            values[key] = getattr(args, key)
    if args.quick:
        values["quick"] = "1"
    allowed = SUBCOMMAND_MODES[args.command]
    if "mode" not in values:
        dim = values.get("dim", "1")
        values["mode"] = next((m for m in allowed if m.endswith(f"{dim}d")), allowed[0])
    if values["mode"] not in allowed:
        raise ValueError(f"mode {values['mode']!r} does not belong to '{args.command}'")
    return values


def _print_table(table, out):
    out.write(f"{'k':>12} {'h':>12} {'err_inf':>12} {'err_l2':>12} {'err_h1':>12}\n")
    for row in table.rows:
        out.write(" ".join(f"{v:12.4e}" for v in row) + "\n")
    if table.orders:
        out.write(f"{'order':>12} {'':>12} " + " ".join(f"{o:12.3f}" for o in table.orders) + "\n")


def _run_command(args, out) -> int:
    if args.command == "fit-order":
        out.write(f"{fit_order(read_points_csv(args.path)):.6f}\n")
        return 0
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose, format="%(levelname)s %(name)s: %(message)s")
    config = build_study(_collect(args))
    if args.command in ("converge-mms", "converge-ref"):
        table = converge_mms(config) if args.command == "converge-mms" else converge_reference(config)
        _print_table(table, out)
        if config.out_table:
            export_csv(table, config.out_table)
    elif args.command == "stability":
        table = stability_table(config)
        out.write("k \\ h " + " ".join(f"{h:11.4e}" for h in table.hs) + "\n")
        for k, row in zip(table.ks, table.err_inf):
            out.write(f"{k:10.4e} " + " ".join(f"{v:11.4e}" for v in row) + "\n")
        if config.out_table:
            export_stability_csv(table, config.out_table)
    else:
        state, norms = run_single(config)
        out.write(f"t = {state.t_curr:.6g} after {state.n + 1} steps\n")
        if norms:
            out.write("err_inf {:.4e}  err_l2 {:.4e}  err_h1 {:.4e}\n".format(*norms))
        if config.out_field:
            path = Path(config.out_field)
            if path.suffix == ".vtk":
                export_field(state.m_curr, path)
            else:
                export_field_csv(state.m_curr, path)
    return 0


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        return _run_command(args, out)
    except Exception as exc:  # report any failed run as a diagnostic and a nonzero exit
        sys.stderr.write(f"llbdf2 {args.command}: error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
