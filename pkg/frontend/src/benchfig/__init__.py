from .plot import (
    CSV_HEADER,
    InconsistentMeans,
    ParseError,
    PlotSpec,
    Record,
    cell_label,
    cell_series,
    check_binary64_agreement,
    main,
    parse_cell,
    read_records,
    render_figure,
)

__all__ = [
    "CSV_HEADER",
    "InconsistentMeans",
    "ParseError",
    "PlotSpec",
    "Record",
    "cell_label",
    "cell_series",
    "check_binary64_agreement",
    "main",
    "parse_cell",
    "read_records",
    "render_figure",
]
