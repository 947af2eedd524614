"""Resonant/quadratic error ratio as T grows, from prefactors and from exact runs.

    python3 scripts/ratio_divergence.py scripts/configs/ratio.cfg --out runs/ratio
"""

import argparse
from pathlib import Path

from adiabatic_error import ratio_study
from adiabatic_error.harness import load_config, write_ratio


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("config")
    ap.add_argument("--out", default=None)
    args = ap.parse_args()

    study = ratio_study(load_config(args.config))
    print(f"{study.resonant} vs quadratic at lambda={study.lam:g}, detuning {study.detuning:g}")
    print(f"{'T':>6} {'prefactor res':>14} {'prefactor quad':>14} {'ratio':>12} {'exact ratio':>12}")
    for r in study.rows:
        print(
            f"{r.T:6g} {r.prefactor_resonant:14.6g} {r.prefactor_quadratic:14.6g} "
            f"{r.ratio_prefactor:12.6g} {r.ratio_exact:12.6g}"
        )
    print(f"strictly increasing: prefactor {study.prefactor_increasing}, exact {study.exact_increasing}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_ratio(study, out)


if __name__ == "__main__":
    main()
