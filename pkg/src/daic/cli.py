"""Command line entry point: ``daic run``."""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

from .config import ORACLE_MODES, parse_config
from .cycle import run_experiment
from .exceptions import DaicError
from .results import emit_results, summarize

IO_EXIT = 10

log = logging.getLogger("daic")


def build_parser():
    parser = argparse.ArgumentParser(prog="daic", description="Iterative DNN accuracy assessment and improvement.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run the assessment cycle experiment")
    run.add_argument("--config", type=Path, help="TOML file of dotted keys; defaults apply without one")
    run.add_argument("--cycles", type=int)
    run.add_argument("--repetitions", type=int)
    run.add_argument("--oracle", choices=ORACLE_MODES, dest="oracle_mode")
    run.add_argument("--seed", type=int, dest="master_seed")
    run.add_argument("--out", dest="out")
    run.add_argument("--dataset", choices=("mnist", "synthetic"))
    run.add_argument("--mnist-images")
    run.add_argument("--mnist-labels")
    run.add_argument("-q", "--quiet", action="store_true")
    return parser


def overrides_from_args(args):
    return {
        "cycles": args.cycles,
        "repetitions": args.repetitions,
        "oracle_mode": args.oracle_mode,
        "master_seed": args.master_seed,
        "output.dir": args.out,
        "dataset.kind": args.dataset,
        "dataset.mnist_images": args.mnist_images,
        "dataset.mnist_labels": args.mnist_labels,
    }


def _print_summary(rows, out=None):
    out = out or sys.stdout
    print("cycle  verification  actual  predicted  estimated  triggered", file=out)
    for row in rows:
        est = row["estimated_acc_mean"]
        print(
            f"{row['cycle']:>5}  {row['verification_acc_mean']:>12.3f}  {row['actual_acc_mean']:>6.3f}"
            f"  {row['predicted_acc_mean']:>9.3f}  {'untriggered' if est is None else f'{est:.3f}':>11}"
            f"  {row['triggered']}/{row['repetitions']}",
            file=out,
        )


def cmd_run(args):
    config = parse_config(args.config, overrides_from_args(args))
    start = time.perf_counter()
    records = run_experiment(config)
    elapsed = time.perf_counter() - start
    paths = emit_results(records, config.output.dir, config=config, wall_time=elapsed)
    if not args.quiet:
        _print_summary(summarize(records))
        print(f"wrote {paths['records']} ({len(records)} records, {elapsed:.1f}s)")
    return 0


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if getattr(args, "quiet", False) else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return cmd_run(args)
    except DaicError as exc:
        print(f"error [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error [IO]: {exc}", file=sys.stderr)
        return IO_EXIT


if __name__ == "__main__":
    sys.exit(main())
