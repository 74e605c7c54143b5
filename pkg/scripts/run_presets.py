"""Run one or more presets and print their tallies.

    python scripts/run_presets.py                 # every preset
    python scripts/run_presets.py expII_quartic --set runs=5
"""

import argparse

from decentopt.harness.config import apply_overrides
from decentopt.harness.presets import list_presets, preset
from decentopt.harness.runner import run_experiment


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("names", nargs="*", default=None)
    ap.add_argument("--set", dest="overrides", action="append", default=[])
    ap.add_argument("--root", default="out")
    args = ap.parse_args()

    for name in args.names or list_presets():
        cfg = apply_overrides(preset(name), args.overrides).validate()
        summary = run_experiment(cfg, output=f"{args.root}/{name}")
        print(name)
        for label, t in summary["tally"].items():
            print(f"  {label:>20}: {t['converged']} converged, {t['diverged']} diverged, {t['undecided']} undecided")


if __name__ == "__main__":
    main()
