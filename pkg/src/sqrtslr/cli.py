"""Command-line harness: ``simulate``, ``experiment``, ``aggregate``.

Exit code 0 on completion (recorded downdate failures included); nonzero
only for configuration or I/O errors.
"""

from __future__ import annotations

import argparse
import csv
import sys

from .bench import (
    ConfigError,
    EmptyInput,
    ExperimentConfig,
    aggregate,
    emit_csv,
    mean_path,
    read_records,
    run_experiment,
)
from .ct_model import CtParams, simulate_trajectory

_PRECISION_ALIASES = {"32": "binary32", "64": "binary64",
                      "binary32": "binary32", "binary64": "binary64"}


def _csv_list(text: str) -> tuple[str, ...]:
    return tuple(part.strip() for part in text.split(",") if part.strip())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sqrtslr",
        description="Square-root SLR smoother benchmark on the coordinated-turn model",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="simulate one ground-truth trajectory")
    sim.add_argument("--length", type=int, default=101)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--sigma0", choices=("variance", "stddev"), default="variance")
    sim.add_argument("--out", required=True, help="output CSV path")

    exp = sub.add_parser("experiment", help="run the Monte Carlo comparison")
    exp.add_argument("--trials", type=int, default=100)
    exp.add_argument("--length", type=int, default=101)
    exp.add_argument("--iterations", type=int, default=10)
    exp.add_argument("--methods", type=_csv_list, default=("proposed", "reference"),
                     help="comma list from {proposed,reference}")
    exp.add_argument("--precisions", type=_csv_list, default=("32", "64"),
                     help="comma list from {32,64}")
    exp.add_argument("--rule", default="cubature",
                     help="cubature | gh:<order> | ut:<kappa>")
    exp.add_argument("--seed", type=int, default=0)
    exp.add_argument("--sigma0", choices=("variance", "stddev"), default="variance")
    exp.add_argument("--out", required=True, help="records CSV path")

    agg = sub.add_parser("aggregate", help="recompute per-step means from a records CSV")
    agg.add_argument("--in", dest="in_path", required=True, help="records CSV path")
    agg.add_argument("--out", required=True, help="aggregate CSV path")
    return parser


def _cmd_simulate(args) -> None:
    states, observations = simulate_trajectory(
        CtParams(), args.length, args.seed, args.sigma0 == "stddev"
    )
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time", "p1", "p2", "v1", "v2", "omega", "range", "bearing"])
        for t in range(args.length):
            row = [t] + [format(v, ".17g") for v in states[t]]
            row += [format(v, ".17g") for v in observations[t]]
            writer.writerow(row)


def _cmd_experiment(args) -> None:
    try:
        precisions = tuple(_PRECISION_ALIASES[p] for p in args.precisions)
    except KeyError as err:
        raise ConfigError(f"unknown precision {err.args[0]!r}") from err
    config = ExperimentConfig(
        trials=args.trials,
        length=args.length,
        iterations=args.iterations,
        methods=tuple(args.methods),
        precisions=precisions,
        rule=args.rule,
        seed=args.seed,
        output_path=args.out,
        sigma0_reading=args.sigma0,
    )
    records = run_experiment(config)
    emit_csv(records, aggregate(records), args.out)
    failed = sum(1 for r in records if r.status != "ok")
    print(f"wrote {len(records)} records to {args.out} "
          f"(and means to {mean_path(args.out)}); {failed} cell failure(s)")


def _cmd_aggregate(args) -> None:
    records = read_records(args.in_path)
    rows = aggregate(records)
    from .bench import MEAN_CSV_HEADER, _fmt

    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MEAN_CSV_HEADER)
        for row in rows:
            writer.writerow(
                [row.method, row.precision, _fmt(row.time), _fmt(row.pos_err),
                 _fmt(row.vel_err), _fmt(row.omega_err), row.n_ok, row.failures]
            )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            _cmd_simulate(args)
        elif args.command == "experiment":
            _cmd_experiment(args)
        elif args.command == "aggregate":
            _cmd_aggregate(args)
    except (ConfigError, EmptyInput) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"I/O error: {err}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
