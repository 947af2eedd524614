"""Sweep lambda for each schedule in a config and fit eps_exact ~ lambda^k.

    python3 scripts/scaling_sweep.py scripts/configs/reference_scaling.cfg --out runs/reference

Prints one fit per (schedule, T) plus the residual halving ratios, which
expose whether the remainder is cubic or (for parity-symmetric systems) quartic.
"""

import argparse
from pathlib import Path

from adiabatic_error import fit_scaling, run_experiment
from adiabatic_error.harness import FitError, load_config, write_csv, write_plot_data


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("config")
    ap.add_argument("--out", default=None)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    cfg = load_config(args.config)
    rows = run_experiment(cfg, workers=args.workers)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_csv(rows, out / "results.csv")
        write_plot_data(rows, out)

    for sched in dict.fromkeys(r.schedule for r in rows):
        for T in dict.fromkeys(r.T for r in rows):
            sel = sorted((r for r in rows if r.schedule == sched and r.T == T), key=lambda r: -r.lam)
            try:
                fit = fit_scaling(sel)
                head = f"exponent {fit.exponent:.4f}  prefactor {fit.prefactor:.4e}"
            except FitError as exc:
                head = f"no fit ({exc})"
            res = [r.eps_abs_residual for r in sel]
            ratios = " ".join(f"{a / b:.2f}" for a, b in zip(res, res[1:]) if b > 0)
            print(f"{sched:<24} T={T:<6g} {head}  residual ratios {ratios}")


if __name__ == "__main__":
    main()
