"""Report rendering: grouped text tables (blank-on-repeat group headers),
crosstabs, chart series extraction, and delimited / structured exports.

All money values render as plain integers (millimes); an optional divisor
displays dinars. Rendering is deterministic: same grid + spec, same bytes.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import Optional, Sequence

from .errors import ReportError
from .query import GridRow, ResultGrid


@dataclass(frozen=True)
class ReportSpec:
    row_axes: tuple[str, ...] = ()  # dimension names, outermost first
    column_axes: tuple[str, ...] = ()  # crosstab columns
    blank_on_repeat: bool = True
    thousands: bool = False
    totals: bool = False
    dinar: bool = False  # display amounts / 1000


@dataclass(frozen=True)
class ChartData:
    categories: tuple[str, ...]
    series: tuple[tuple[str, tuple[int, ...]], ...]  # (name, values per category)


def _format_value(value, thousands: bool, dinar: bool) -> str:
    if isinstance(value, float):
        return f"{value:.3f}"
    if dinar:
        value = value // 1000
    if thousands:
        return f"{value:,}"
    return str(value)


def _axis_positions(grid: ResultGrid, names: Sequence[str]) -> list[int]:
    dims = [d for d, _ in grid.axes]
    out = []
    for name in names:
        if name not in dims:
            raise ReportError(f"axis {name!r} is not grouped in this grid")
        out.append(dims.index(name))
    return out


def render_table(grid: ResultGrid, spec: Optional[ReportSpec] = None) -> list[str]:
    """Fixed-width text table; group headers print once per group by default."""
    spec = spec or ReportSpec()
    row_axes = spec.row_axes or tuple(d for d, _ in grid.axes)
    declared = set(row_axes) | set(spec.column_axes)
    grid_dims = {d for d, _ in grid.axes}
    if declared != grid_dims:
        raise ReportError(
            f"report axes {sorted(declared)} must partition grid axes {sorted(grid_dims)}"
        )

    if spec.column_axes:
        return _render_crosstab(grid, spec, row_axes)

    row_pos = _axis_positions(grid, row_axes)
    headers = [f"{grid.axes[p][0]}.{grid.axes[p][1]}" for p in row_pos]
    headers += list(grid.measure_columns)

    ordered = sorted(
        grid.rows,
        key=lambda r: tuple(r.labels[p] for p in row_pos) + tuple(str(k) for k in r.keys),
    )
    body = []
    previous: Optional[tuple] = None
    for row in ordered:
        labels = [row.labels[p] for p in row_pos]
        display = list(labels)
        if spec.blank_on_repeat and previous is not None:
            for i in range(len(display)):
                if labels[: i + 1] == list(previous[: i + 1]):
                    display[i] = ""
                else:
                    break
        previous = tuple(labels)
        values = [_format_value(v, spec.thousands, spec.dinar) for v in row.values]
        body.append(display + values)

    if spec.totals and grid.rows:
        totals_row = [""] * len(row_pos)
        for i in range(len(grid.measure_columns)):
            column_values = [r.values[i] for r in grid.rows]
            if any(isinstance(v, float) for v in column_values):
                totals_row.append("")
            else:
                totals_row.append(
                    _format_value(sum(column_values), spec.thousands, spec.dinar)
                )
        if totals_row[:1]:
            totals_row[0] = "TOTAL"
        body.append(totals_row)

    widths = [len(h) for h in headers]
    for line in body:
        for i, cell in enumerate(line):
            widths[i] = max(widths[i], len(cell))
    n_axes = len(row_pos)

    def fmt(cells: list[str]) -> str:
        parts = []
        for i, cell in enumerate(cells):
            parts.append(cell.ljust(widths[i]) if i < n_axes else cell.rjust(widths[i]))
        return "  ".join(parts).rstrip()

    return [fmt(headers)] + [fmt(line) for line in body]


def _render_crosstab(grid: ResultGrid, spec: ReportSpec, row_axes: tuple[str, ...]) -> list[str]:
    row_pos = _axis_positions(grid, row_axes)
    col_pos = _axis_positions(grid, spec.column_axes)

    col_combos = sorted({tuple(r.labels[p] for p in col_pos) for r in grid.rows})
    cells: dict[tuple, dict[tuple, GridRow]] = {}
    row_keys = []
    for row in grid.rows:
        rk = tuple(row.labels[p] for p in row_pos)
        ck = tuple(row.labels[p] for p in col_pos)
        if rk not in cells:
            cells[rk] = {}
            row_keys.append(rk)
        cells[rk][ck] = row
    row_keys.sort()

    headers = [f"{grid.axes[p][0]}.{grid.axes[p][1]}" for p in row_pos]
    for combo in col_combos:
        for m in grid.measure_columns:
            prefix = "/".join(combo)
            headers.append(f"{prefix} {m}" if prefix else m)

    body = []
    previous: Optional[tuple] = None
    for rk in row_keys:
        display = list(rk)
        if spec.blank_on_repeat and previous is not None:
            for i in range(len(display)):
                if rk[: i + 1] == previous[: i + 1]:
                    display[i] = ""
                else:
                    break
        previous = rk
        line = display
        for combo in col_combos:
            row = cells[rk].get(combo)
            for i in range(len(grid.measure_columns)):
                line.append(
                    "" if row is None else _format_value(row.values[i], spec.thousands, spec.dinar)
                )
        body.append(line)

    widths = [len(h) for h in headers]
    for line in body:
        for i, cell in enumerate(line):
            widths[i] = max(widths[i], len(cell))
    n_axes = len(row_pos)

    def fmt(cells_line: list[str]) -> str:
        parts = []
        for i, cell in enumerate(cells_line):
            parts.append(cell.ljust(widths[i]) if i < n_axes else cell.rjust(widths[i]))
        return "  ".join(parts).rstrip()

    return [fmt(headers)] + [fmt(line) for line in body]


def chart_data(grid: ResultGrid, category_dimension: str,
               measure_column: int = 0) -> ChartData:
    """One category per member of the charted dimension; values are the grid sums
    totalled over the other grouped dimensions."""
    dims = [d for d, _ in grid.axes]
    if category_dimension not in dims:
        raise ReportError(f"dimension {category_dimension!r} is not grouped in this grid")
    pos = dims.index(category_dimension)
    totals: dict[str, int] = {}
    for row in grid.rows:
        label = row.labels[pos]
        value = row.values[measure_column]
        totals[label] = totals.get(label, 0) + value
    categories = tuple(sorted(totals))
    name = grid.measure_columns[measure_column]
    values = tuple(totals[c] for c in categories)
    return ChartData(categories=categories, series=((name, values),))


def export(grid: ResultGrid, fmt: str = "delimited") -> bytes:
    """``delimited``: RFC-4180 CSV, UTF-8, stable column order. ``structured``:
    the HTTP response grid document."""
    if fmt == "delimited":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\r\n")
        writer.writerow(grid.columns)
        for row in grid.rows:
            writer.writerow(list(row.labels) + [v for v in row.values])
        return buf.getvalue().encode("utf-8")
    if fmt == "structured":
        return json.dumps(grid.to_doc(), indent=2, ensure_ascii=False).encode("utf-8")
    raise ReportError(f"unknown export format {fmt!r}")


def parse_delimited_export(data: bytes) -> tuple[list[str], list[list[str]]]:
    """Inverse of export('delimited') for round-trip checks; cells stay strings."""
    text = data.decode("utf-8")
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        return [], []
    return rows[0], rows[1:]
