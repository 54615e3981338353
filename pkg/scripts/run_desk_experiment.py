#!/usr/bin/env python3
"""Run the desk-scale mixed-precision comparison and write results CSV.

Thin wrapper over the ``sqrtslr experiment`` subcommand with the settings
used by the acceptance suite (20 trials, 101 states, 10 iterations,
spherical-radial rule).  Pass ``--full`` for the 100-trial version; any
extra arguments are forwarded to the CLI verbatim.
"""

import sys

from sqrtslr.cli import main

DESK = ["--trials", "20", "--length", "101", "--iterations", "10",
        "--rule", "cubature", "--seed", "2024"]
FULL = ["--trials", "100", "--length", "101", "--iterations", "10",
        "--rule", "cubature", "--seed", "2024"]

if __name__ == "__main__":
    args = sys.argv[1:]
    scale = FULL if "--full" in args else DESK
    extra = [a for a in args if a != "--full"]
    if not any(a == "--out" for a in extra):
        extra += ["--out", "results.csv"]
    sys.exit(main(["experiment", *scale, *extra]))
