"""Render the benchmark records CSV as a three-panel error figure.

Reads the per-trial CSV written by the benchmark harness (an external
interface: this package never imports the estimator code) and draws
position, velocity, and turn-rate error curves over time -- transparent
per-trial traces with an opaque mean line per method/precision cell.
Cells whose every trial failed are omitted from the figure.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

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

_METHOD_SHORT = {"proposed": "prop", "reference": "ref"}
_PRECISION_SHORT = {"binary32": "32", "binary64": "64"}
ALL_CELLS = tuple(
    (m, p) for m in ("proposed", "reference") for p in ("binary32", "binary64")
)

PANELS = (
    ("pos_err", "position error"),
    ("vel_err", "velocity error"),
    ("omega_err", "turn-rate error"),
)


class ParseError(Exception):
    """The input CSV does not conform to the records format."""


class InconsistentMeans(Exception):
    """prop64 and ref64 mean curves disagree beyond tolerance."""


@dataclass(frozen=True)
class Record:
    trial: int
    time: int
    method: str
    precision: str
    pos_err: float | None
    vel_err: float | None
    omega_err: float | None
    status: str


@dataclass(frozen=True)
class PlotSpec:
    input_csv: str
    output_image: str
    cells: tuple[tuple[str, str], ...] = ALL_CELLS
    log_y: bool = False


def cell_label(method: str, precision: str) -> str:
    return _METHOD_SHORT[method] + _PRECISION_SHORT[precision]


def parse_cell(label: str) -> tuple[str, str]:
    for method, precision in ALL_CELLS:
        if cell_label(method, precision) == label.strip():
            return method, precision
    raise ParseError(f"unknown cell label {label!r} (expected e.g. prop32, ref64)")


def read_records(path: str) -> list[Record]:
    """Parse the records CSV, failing loudly on any malformed content."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CSV_HEADER:
            raise ParseError(f"unexpected CSV header in {path}: {header}")
        records = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(CSV_HEADER):
                raise ParseError(f"{path}:{lineno}: expected {len(CSV_HEADER)} fields")
            try:
                records.append(
                    Record(
                        int(row[0]), int(row[1]), row[2], row[3],
                        float(row[4]) if row[4] else None,
                        float(row[5]) if row[5] else None,
                        float(row[6]) if row[6] else None,
                        row[7],
                    )
                )
            except ValueError as err:
                raise ParseError(f"{path}:{lineno}: {err}") from err
    return records


@dataclass
class CellSeries:
    """Per-trial error curves and their pointwise mean for one cell."""

    times: np.ndarray
    trials: dict[int, np.ndarray] = field(default_factory=dict)  # (T, 3) each

    @property
    def mean(self) -> np.ndarray:
        return np.mean(list(self.trials.values()), axis=0)


def cell_series(records: list[Record], method: str, precision: str) -> CellSeries | None:
    """Error curves for one cell, or None if no trial completed."""
    ok = [r for r in records
          if r.method == method and r.precision == precision and r.status == "ok"]
    if not ok:
        return None
    times = np.array(sorted({r.time for r in ok}))
    index = {t: i for i, t in enumerate(times)}
    series = CellSeries(times)
    for r in ok:
        curve = series.trials.setdefault(r.trial, np.full((len(times), 3), np.nan))
        curve[index[r.time]] = (r.pos_err, r.vel_err, r.omega_err)
    for trial, curve in series.trials.items():
        if np.isnan(curve).any():
            raise ParseError(
                f"trial {trial} of {cell_label(method, precision)} has missing steps"
            )
    return series


def check_binary64_agreement(series_by_cell, tol=1e-6) -> float:
    """Max relative gap between the prop64 and ref64 mean curves.

    Raises InconsistentMeans beyond ``tol``; these are the same algorithm in
    exact arithmetic, so a visible gap means the input is not trustworthy.
    """
    a = series_by_cell.get(("proposed", "binary64"))
    b = series_by_cell.get(("reference", "binary64"))
    if a is None or b is None:
        return 0.0
    if len(a.times) != len(b.times) or (a.times != b.times).any():
        raise InconsistentMeans("prop64 and ref64 cover different time grids")
    gap = float(np.max(np.abs(a.mean - b.mean) / np.maximum(np.abs(a.mean), 1e-300)))
    if gap > tol:
        raise InconsistentMeans(
            f"prop64 and ref64 means differ by {gap:.3g} relative (tolerance {tol})"
        )
    return gap


def render_figure(spec: PlotSpec) -> None:
    records = read_records(spec.input_csv)
    series_by_cell = {}
    for method, precision in spec.cells:
        series = cell_series(records, method, precision)
        if series is not None:
            series_by_cell[(method, precision)] = series
    check_binary64_agreement(series_by_cell)

    fig, axes = plt.subplots(3, 1, figsize=(7, 8), sharex=True)
    if not series_by_cell:
        for ax in axes:
            ax.set_xticks([])
            ax.set_yticks([])
        axes[1].text(0.5, 0.5, "no data", ha="center", va="center",
                     transform=axes[1].transAxes, fontsize=14)
    else:
        colors = plt.rcParams["axes.prop_cycle"].by_key()["color"]
        for idx, ((method, precision), series) in enumerate(
            sorted(series_by_cell.items())
        ):
            color = colors[idx % len(colors)]
            mean = series.mean
            for panel, ax in enumerate(axes):
                for curve in series.trials.values():
                    ax.plot(series.times, curve[:, panel], color=color,
                            alpha=0.15, linewidth=0.8)
                ax.plot(series.times, mean[:, panel], color=color, linewidth=2,
                        label=cell_label(method, precision) if panel == 0 else None)
        for ax, (_, ylabel) in zip(axes, PANELS):
            ax.set_ylabel(ylabel)
            if spec.log_y:
                ax.set_yscale("log")
        axes[0].legend(loc="upper right")
    axes[-1].set_xlabel("time step")
    fig.tight_layout()
    fig.savefig(spec.output_image, dpi=150, metadata={"Software": "benchfig"})
    plt.close(fig)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="benchfig", description="Render benchmark error curves from a records CSV"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    render = sub.add_parser("render", help="render the three-panel figure")
    render.add_argument("--in", dest="in_path", required=True, help="records CSV path")
    render.add_argument("--out", required=True, help="output image path")
    render.add_argument("--cells", default="prop32,prop64,ref32,ref64",
                        help="comma list of cells, e.g. prop32,prop64,ref64")
    render.add_argument("--log-y", action="store_true",
                        help="logarithmic error axes (default linear)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cells = tuple(parse_cell(c) for c in args.cells.split(",") if c.strip())
        render_figure(PlotSpec(args.in_path, args.out, cells, args.log_y))
    except (ParseError, InconsistentMeans) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"I/O error: {err}", file=sys.stderr)
        return 3
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
