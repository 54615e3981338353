"""Monte Carlo benchmark harness for the coordinated-turn experiment.

Simulates ground truth in float64, runs the proposed (QR) and reference
(update/downdate) iterated smoothers in the requested precisions, records
per-step error norms for position, velocity, and turn rate, and writes
machine-readable CSV.  A downdate failure in a cell is recorded, never
fatal: the run exits cleanly with the failure noted in the records.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace

import numpy as np

from .ct_model import CtParams, coordinated_turn_model, initial_state, simulate_trajectory
from .cubature import CubatureRule, gauss_hermite, spherical_radial, unscented
from .estimators import ipls
from .linalg import DowndateFailure

METHODS = ("proposed", "reference")
PRECISIONS = ("binary32", "binary64")
_ROUTE = {"proposed": "qr", "reference": "downdate"}
_DTYPE = {"binary32": np.float32, "binary64": np.float64}

CSV_HEADER = [
    "trial",
    "time",
    "method",
    "precision",
    "pos_err",
    "vel_err",
    "omega_err",
    "status",
    "failure_step",
]
MEAN_CSV_HEADER = [
    "method",
    "precision",
    "time",
    "pos_err",
    "vel_err",
    "omega_err",
    "n_ok",
    "failures",
]


class ConfigError(Exception):
    """Invalid experiment configuration."""


class EmptyInput(Exception):
    """No records to aggregate."""


@dataclass(frozen=True)
class ExperimentConfig:
    trials: int = 100
    length: int = 101
    iterations: int = 10
    methods: tuple[str, ...] = METHODS
    precisions: tuple[str, ...] = PRECISIONS
    rule: str = "cubature"
    seed: int = 0
    output_path: str | None = None
    sigma0_reading: str = "variance"
    params: CtParams = field(default_factory=CtParams)

    def validate(self) -> None:
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.length < 2:
            raise ConfigError("length must be >= 2")
        if self.iterations < 1:
            raise ConfigError("iterations must be >= 1")
        if not self.methods or any(m not in METHODS for m in self.methods):
            raise ConfigError(f"methods must be a nonempty subset of {METHODS}")
        if not self.precisions or any(p not in PRECISIONS for p in self.precisions):
            raise ConfigError(f"precisions must be a nonempty subset of {PRECISIONS}")
        if self.sigma0_reading not in ("variance", "stddev"):
            raise ConfigError("sigma0_reading must be 'variance' or 'stddev'")
        make_rule(self.rule, 5)  # raises ConfigError on a bad spec


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    time: int
    method: str
    precision: str
    pos_err: float | None
    vel_err: float | None
    omega_err: float | None
    status: str = "ok"
    failure_step: int | None = None


def make_rule(spec: str, dim: int) -> CubatureRule:
    """Parse a rule spec: ``cubature``, ``gh:<order>``, or ``ut:<kappa>``."""
    try:
        if spec == "cubature":
            return spherical_radial(dim)
        if spec.startswith("gh:"):
            return gauss_hermite(dim, int(spec[3:]))
        if spec.startswith("ut:"):
            return unscented(dim, float(spec[3:]))
    except (ValueError, TypeError) as err:
        raise ConfigError(f"bad rule spec {spec!r}: {err}") from err
    raise ConfigError(f"unknown rule spec {spec!r}")


def _trial_seed(master: int, trial: int) -> np.random.SeedSequence:
    # counter-based split: independent of execution order
    return np.random.SeedSequence(entropy=master, spawn_key=(trial,))


def run_experiment(config: ExperimentConfig) -> list[TrialRecord]:
    """All (trial, method, precision) cells of the experiment.

    Ground truth is simulated once per trial in float64; each cell casts the
    model, initial state, and observations to its precision before running
    the iterated smoother.  Errors are Euclidean norms per component group,
    measured against the float64 truth.
    """
    config.validate()
    stddev = config.sigma0_reading == "stddev"
    records: list[TrialRecord] = []
    for trial in range(config.trials):
        states, observations = simulate_trajectory(
            config.params, config.length, _trial_seed(config.seed, trial), stddev
        )
        for method in config.methods:
            for precision in config.precisions:
                dtype = _DTYPE[precision]
                model = coordinated_turn_model(config.params, dtype)
                init = initial_state(config.params, dtype, stddev)
                rule = make_rule(config.rule, 5)
                obs = observations[1:].astype(dtype)
                try:
                    smoothed = ipls(
                        init, list(obs), model, rule, config.iterations,
                        _ROUTE[method],
                    )
                except DowndateFailure as err:
                    step = err.time_index if err.time_index is not None else 0
                    records.append(
                        TrialRecord(trial, step, method, precision,
                                    None, None, None, "downdate_failure", step)
                    )
                    continue
                for t in range(config.length):
                    est = np.asarray(smoothed[t].mean, dtype=np.float64)
                    err_vec = est - states[t]
                    records.append(
                        TrialRecord(
                            trial, t, method, precision,
                            float(np.linalg.norm(err_vec[0:2])),
                            float(np.linalg.norm(err_vec[2:4])),
                            float(abs(err_vec[4])),
                        )
                    )
    records.sort(key=lambda r: (r.trial, r.time, r.method, r.precision))
    return records


@dataclass(frozen=True)
class AggregateRow:
    method: str
    precision: str
    time: int | None
    pos_err: float | None
    vel_err: float | None
    omega_err: float | None
    n_ok: int
    failures: int


def aggregate(records: list[TrialRecord]) -> list[AggregateRow]:
    """Per-(method, precision, time) means over the trials that completed,
    plus the per-cell failure count.  A cell whose every trial failed yields
    a single row with absent means."""
    if not records:
        raise EmptyInput("no records to aggregate")
    failures: dict[tuple[str, str], int] = {}
    sums: dict[tuple[str, str, int], list] = {}
    for r in records:
        cell = (r.method, r.precision)
        if r.status != "ok":
            failures[cell] = failures.get(cell, 0) + 1
            continue
        key = (r.method, r.precision, r.time)
        acc = sums.setdefault(key, [0.0, 0.0, 0.0, 0])
        acc[0] += r.pos_err
        acc[1] += r.vel_err
        acc[2] += r.omega_err
        acc[3] += 1
    rows = [
        AggregateRow(
            m, p, t, acc[0] / acc[3], acc[1] / acc[3], acc[2] / acc[3],
            acc[3], failures.get((m, p), 0),
        )
        for (m, p, t), acc in sums.items()
    ]
    done = {(row.method, row.precision) for row in rows}
    for cell, count in failures.items():
        if cell not in done:
            rows.append(AggregateRow(cell[0], cell[1], None, None, None, None, 0, count))
    rows.sort(key=lambda r: (r.method, r.precision, -1 if r.time is None else r.time))
    return rows


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def emit_csv(records: list[TrialRecord], aggregates: list[AggregateRow], path: str) -> None:
    """Records to ``path`` and aggregates to a sibling ``*_mean`` file.

    Floats are written with 17 significant digits so binary64 values
    round-trip exactly; records are already order-normalized.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for r in records:
            writer.writerow(
                [r.trial, r.time, r.method, r.precision, _fmt(r.pos_err),
                 _fmt(r.vel_err), _fmt(r.omega_err), r.status, _fmt(r.failure_step)]
            )
    with open(mean_path(path), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MEAN_CSV_HEADER)
        for row in aggregates:
            writer.writerow(
                [row.method, row.precision, _fmt(row.time), _fmt(row.pos_err),
                 _fmt(row.vel_err), _fmt(row.omega_err), row.n_ok, row.failures]
            )


def mean_path(path: str) -> str:
    stem, dot, ext = path.rpartition(".")
    if not dot:
        return path + "_mean"
    return f"{stem}_mean.{ext}"


def read_records(path: str) -> list[TrialRecord]:
    """Parse a records CSV produced by :func:`emit_csv`."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CSV_HEADER:
            raise ConfigError(f"unexpected CSV header in {path}: {header}")
        records = []
        for row in reader:
            records.append(
                TrialRecord(
                    int(row[0]), int(row[1]), row[2], row[3],
                    float(row[4]) if row[4] else None,
                    float(row[5]) if row[5] else None,
                    float(row[6]) if row[6] else None,
                    row[7],
                    int(row[8]) if row[8] else None,
                )
            )
    return records
