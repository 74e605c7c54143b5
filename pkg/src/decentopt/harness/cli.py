"""Command-line entry point.

    decentopt run CONFIG.json [--set key=value ...] [--out DIR]
    decentopt preset NAME [--set key=value ...] [--out DIR] [--dump]
    decentopt list-presets
    decentopt sweep [--runs N] [--seed S] [--max-iters M] [--out FILE]

Exit code 0 on success, 2 on a configuration error, 3 on an I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys

from .config import ConfigError, apply_overrides, load_config
from .presets import list_presets, preset
from .runner import SUMMARY_FILE, TRACE_FILE, run_experiment
from .sweep import benchmark_sweep


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="decentopt", description="Decentralized non-convex optimization experiments.")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment from a JSON config")
    run.add_argument("config")
    run.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    run.add_argument("--out", default=None, help="output directory (overrides the config)")

    pre = sub.add_parser("preset", help="run a named preset")
    pre.add_argument("name", choices=list_presets())
    pre.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    pre.add_argument("--out", default=None)
    pre.add_argument("--dump", action="store_true", help="print the config as JSON instead of running it")

    sub.add_parser("list-presets", help="print preset names")

    sw = sub.add_parser("sweep", help="heuristic-stepsize convergence table on the quartic pair")
    sw.add_argument("--runs", type=int, default=100)
    sw.add_argument("--seed", type=int, default=0)
    sw.add_argument("--max-iters", type=int, default=20000)
    sw.add_argument("--out", default=None, help="write the rows as JSON here")
    return ap


def _report(summary: dict, out: str) -> None:
    print(f"wrote {out}/{TRACE_FILE} and {out}/{SUMMARY_FILE}")
    for label, t in summary["tally"].items():
        print(f"{label:>20}: {t['converged']:4d} converged {t['diverged']:4d} diverged {t['undecided']:4d} undecided ({t['converged_pct']:.1f}%)")


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "list-presets":
            print("\n".join(list_presets()))
            return 0
        if args.command == "sweep":
            rows = benchmark_sweep(runs=args.runs, seed=args.seed, max_iters=args.max_iters)
            for r in rows:
                print(f"{r.algorithm:>9} c={r.c:<6g} converged {r.converged_pct:5.1f}%  not diverged {r.not_diverged_pct:5.1f}%")
            if args.out:
                with open(args.out, "w") as fh:
                    json.dump([r.as_dict() for r in rows], fh, indent=2)
            return 0
        cfg = load_config(args.config) if args.command == "run" else preset(args.name)
        cfg = apply_overrides(cfg, args.overrides).validate()
        if args.command == "preset" and args.dump:
            print(cfg.to_json())
            return 0
        out = args.out if args.out is not None else cfg.output
        _report(run_experiment(cfg, output=out), out)
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
