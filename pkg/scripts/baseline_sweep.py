"""Heuristic-stepsize convergence percentages of DGD, GT and Prox-PDA on the quartic pair.

    python scripts/baseline_sweep.py --runs 100 --out sweep.csv
"""

import argparse
import csv

from decentopt.harness.sweep import benchmark_sweep


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--runs", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--max-iters", type=int, default=20000)
    ap.add_argument("--out", default=None, help="CSV destination")
    args = ap.parse_args()

    rows = benchmark_sweep(runs=args.runs, seed=args.seed, max_iters=args.max_iters)
    for r in rows:
        print(f"{r.algorithm:>9}  c={r.c:<6g} converged {r.converged_pct:5.1f}%  not diverged {r.not_diverged_pct:5.1f}%")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0].as_dict()))
            w.writeheader()
            w.writerows(r.as_dict() for r in rows)


if __name__ == "__main__":
    main()
