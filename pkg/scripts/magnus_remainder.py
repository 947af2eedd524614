"""State error of truncated Magnus expansions against the exact propagator.

    python3 scripts/magnus_remainder.py --T 10 --schedule linear
"""

import argparse

import numpy as np

from adiabatic_error import evolve, magnus_evolve, parse_schedule, random_system, reference_system


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--T", type=float, default=10.0)
    ap.add_argument("--schedule", default="linear")
    ap.add_argument("--n", type=int, default=0, help="random system size; 0 uses the two-level reference")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    H1, dH = random_system(args.n, args.seed) if args.n else reference_system()
    sched = parse_schedule(args.schedule, args.T)
    print(f"{'lambda':>8} {'order 1':>12} {'order 2':>12} {'order 3':>12}")
    prev = None
    for lam in (0.04, 0.02, 0.01, 0.005):
        exact = evolve(H1, dH, lam, sched).final_state.amplitudes
        errs = [np.linalg.norm(magnus_evolve(H1, dH, lam, sched, order=k).final_state.amplitudes - exact) for k in (1, 2, 3)]
        tail = "" if prev is None else "   ratios " + " ".join(f"{p / e:.2f}" for p, e in zip(prev, errs))
        print(f"{lam:8g} " + " ".join(f"{e:12.3e}" for e in errs) + tail)
        prev = errs


if __name__ == "__main__":
    main()
