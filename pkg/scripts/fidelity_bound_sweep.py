"""Randomized check that the direct overlap never falls below sqrt(1 - eps/l2').

    python3 scripts/fidelity_bound_sweep.py --runs 500 --seed 7
"""

import argparse

import numpy as np

from adiabatic_error import parse_config, random_system
from adiabatic_error.harness import run_row


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--runs", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--max-dim", type=int, default=8)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    cfg = parse_config("steps = 2048\n")
    margins = []
    for k in range(args.runs):
        n = int(rng.integers(2, args.max_dim + 1))
        H1, dH = random_system(n, int(rng.integers(0, 2**31)))
        T = float(rng.uniform(1.0, 30.0))
        lam = float(10 ** rng.uniform(-3, 0.5))
        kind = ["linear", "quadratic", f"resonant:g={rng.uniform(-0.8, 0.8):.4f},lc={rng.uniform(0.2, 3):.4f}"][k % 3]
        row = run_row(H1, dH, kind, lam, T, cfg)
        if row.error:
            print(f"run {k}: {row.error}")
            continue
        margins.append(row.fidelity_direct - row.fidelity_bound)
    m = np.array(margins)
    print(f"{len(m)} runs, min margin {m.min():.3e}, median {np.median(m):.3e}, below -1e-12: {int(np.sum(m < -1e-12))}")


if __name__ == "__main__":
    main()
