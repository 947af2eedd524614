"""Command line entry point.

    adiabatic-error run   --config <path> --out <dir>
    adiabatic-error fit   --in <csv> --schedule <name> --T <v>
    adiabatic-error ratio --config <path> [--out <dir>]

Exit codes: 0 success, 2 config/input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from .errors import ConfigError, SimulationError
from .harness import (
    FitError,
    fit_scaling,
    load_config,
    ratio_study,
    read_csv,
    run_experiment,
    write_csv,
    write_json,
    write_plot_data,
    write_ratio,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    rows = run_experiment(cfg, workers=args.workers)
    elapsed = time.perf_counter() - t0
    write_csv(rows, out / "results.csv")
    write_json(rows, out / "results.json")
    write_plot_data(rows, out)
    # timing lives apart from results.csv so repeated runs stay byte-identical
    (out / "run_meta.json").write_text(json.dumps({"rows": len(rows), "seconds": elapsed}) + "\n")
    failed = [r for r in rows if r.error]
    for r in failed:
        print(f"row {r.schedule} lambda={r.lam:g} T={r.T:g}: {r.error}", file=sys.stderr)
    print(f"wrote {len(rows)} rows to {out / 'results.csv'} ({elapsed:.1f} s)")
    return EXIT_NUMERIC if failed else EXIT_OK


def _cmd_fit(args) -> int:
    rows = read_csv(args.infile)
    try:
        fit = fit_scaling(rows, schedule=args.schedule, T=args.T)
    except FitError as exc:
        print(f"fit failed: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print(f"exponent  {fit.exponent:.6f}")
    print(f"prefactor {fit.prefactor:.6e}")
    print(f"r_squared {fit.r_squared:.12f}")
    print(f"points    {len(fit.points)}")
    return EXIT_OK


def _cmd_ratio(args) -> int:
    cfg = load_config(args.config)
    study = ratio_study(cfg)
    print(f"lambda={study.lam:g} {study.resonant} vs quadratic (detuning {study.detuning:g})")
    print(f"{'T':>8} {'prefactor ratio':>18} {'exact ratio':>18} {'slope res':>10} {'slope quad':>10}")
    for r in study.rows:
        print(f"{r.T:8g} {r.ratio_prefactor:18.10g} {r.ratio_exact:18.10g} {r.slope_resonant:10.4f} {r.slope_quadratic:10.4f}")
    print(f"prefactor ratio strictly increasing: {study.prefactor_increasing}")
    print(f"exact ratio strictly increasing:     {study.exact_increasing}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_ratio(study, out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="adiabatic-error", description=__doc__.split("\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="sweep (schedule, lambda, T) and write CSV/JSON")
    r.add_argument("--config", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--workers", type=int, default=1)
    r.set_defaults(func=_cmd_run)

    f = sub.add_parser("fit", help="log-log fit of eps_exact against lambda")
    f.add_argument("--in", dest="infile", required=True)
    f.add_argument("--schedule", required=True)
    f.add_argument("--T", type=float, required=True)
    f.set_defaults(func=_cmd_fit)

    q = sub.add_parser("ratio", help="resonant/quadratic error ratio over a T grid")
    q.add_argument("--config", required=True)
    q.add_argument("--out")
    q.set_defaults(func=_cmd_ratio)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SimulationError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
