"""File extractors for the three staging source kinds.

``fixed_width`` reads mainframe-style fixed-record files (byte offsets, zoned
sign encoding on amounts); ``delimited`` reads header-bearing CSV-style text;
``sheet_export`` is spreadsheet data saved as delimited text (semicolon default,
BOM tolerated). Unparseable fields degrade to missing cells; unparseable
records are rejected with a reason, never silently dropped.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from ..errors import SourceError

SOURCE_KINDS = ("delimited", "fixed_width", "sheet_export")
FIELD_KINDS = ("text", "integer", "date_yyyymmdd", "zoned_amount")

# COBOL zoned-decimal overpunch: the last digit carries the sign.
_ZONED_POSITIVE = {"{": 0, "A": 1, "B": 2, "C": 3, "D": 4, "E": 5, "F": 6, "G": 7, "H": 8, "I": 9}
_ZONED_NEGATIVE = {"}": 0, "J": 1, "K": 2, "L": 3, "M": 4, "N": 5, "O": 6, "P": 7, "Q": 8, "R": 9}


@dataclass(frozen=True)
class FixedWidthLayout:
    record_length: int
    fields: tuple[tuple[str, int, int, str], ...]  # (name, offset, width, kind)

    def validate(self) -> None:
        if self.record_length < 1:
            raise SourceError("record_length must be positive")
        spans = []
        for name, offset, width, kind in self.fields:
            if kind not in FIELD_KINDS:
                raise SourceError(f"field {name!r}: unknown kind {kind!r}")
            if offset < 0 or width < 1 or offset + width > self.record_length:
                raise SourceError(
                    f"field {name!r}: span [{offset}, {offset + width}) outside record "
                    f"of {self.record_length} bytes"
                )
            spans.append((offset, offset + width, name))
        spans.sort()
        for (_, prev_end, prev_name), (start, _, name) in zip(spans, spans[1:]):
            if start < prev_end:
                raise SourceError(f"fields {prev_name!r} and {name!r} overlap")
        names = [f[0] for f in self.fields]
        if len(set(names)) != len(names):
            raise SourceError("duplicate field names in layout")


@dataclass(frozen=True)
class SourceSpec:
    id: str
    kind: str
    path: str
    target: str  # dimension name or "fact"
    priority: int = 0
    layout: Optional[FixedWidthLayout] = None  # fixed_width only
    delimiter: Optional[str] = None  # delimited/sheet_export
    header: bool = True

    def __post_init__(self):
        if self.kind not in SOURCE_KINDS:
            raise SourceError(f"source {self.id!r}: unknown kind {self.kind!r}")
        if self.kind == "fixed_width":
            if self.layout is None:
                raise SourceError(f"source {self.id!r}: fixed_width needs a layout")
            self.layout.validate()
        elif self.layout is not None:
            raise SourceError(f"source {self.id!r}: layout is only valid for fixed_width")

    @property
    def effective_delimiter(self) -> str:
        if self.delimiter is not None:
            return self.delimiter
        return ";" if self.kind == "sheet_export" else ","


@dataclass
class StagingBatch:
    source_id: str
    target: str
    priority: int
    fields: tuple[str, ...]
    rows: list[dict] = field(default_factory=list)
    provenance: list[tuple[str, int]] = field(default_factory=list)  # (source id, line)
    rejects: list[tuple[int, str, str]] = field(default_factory=list)  # (line, reason, raw)
    degraded_cells: int = 0

    @property
    def extracted(self) -> int:
        return len(self.rows)


def parse_zoned_amount(text: str) -> int:
    """Decode a zoned amount: plain digits, explicit sign, or sign overpunch."""
    text = text.strip()
    if not text:
        raise ValueError("empty amount")
    sign = 1
    if text[0] in "+-":
        sign = -1 if text[0] == "-" else 1
        text = text[1:]
    if not text:
        raise ValueError("lone sign")
    last = text[-1]
    if last in _ZONED_POSITIVE:
        text = text[:-1] + str(_ZONED_POSITIVE[last])
    elif last in _ZONED_NEGATIVE:
        sign = -1
        text = text[:-1] + str(_ZONED_NEGATIVE[last])
    if not text.isdigit():
        raise ValueError(f"bad amount {text!r}")
    return sign * int(text)


def parse_yyyymmdd(text: str) -> str:
    """Strict yyyymmdd to ISO day; raises ValueError on an impossible date."""
    text = text.strip()
    if len(text) != 8 or not text.isdigit():
        raise ValueError(f"bad date {text!r}")
    from datetime import date

    d = date(int(text[:4]), int(text[4:6]), int(text[6:8]))
    return d.isoformat()


def _convert(raw: str, kind: str) -> tuple[object, bool]:
    """Field text to (scalar or None, degraded): blank is plain missing,
    malformed content degrades to missing and is counted."""
    stripped = raw.strip()
    if stripped == "":
        return None, False
    if kind == "text":
        return stripped, False
    if kind == "integer":
        try:
            return int(stripped), False
        except ValueError:
            return None, True
    if kind == "date_yyyymmdd":
        try:
            return parse_yyyymmdd(stripped), False
        except ValueError:
            return None, True
    if kind == "zoned_amount":
        try:
            return parse_zoned_amount(stripped), False
        except ValueError:
            return None, True
    raise SourceError(f"unknown field kind {kind!r}")


def _extract_fixed_width(source: SourceSpec, data: bytes) -> StagingBatch:
    layout = source.layout
    batch = StagingBatch(
        source_id=source.id,
        target=source.target,
        priority=source.priority,
        fields=tuple(f[0] for f in layout.fields),
    )
    if b"\n" in data:
        records = data.split(b"\n")
        if records and records[-1] == b"":
            records.pop()
    else:
        if data and len(data) % layout.record_length != 0:
            raise SourceError(
                f"source {source.id!r}: {len(data)} bytes is not a multiple of the "
                f"{layout.record_length}-byte record length"
            )
        records = [
            data[i:i + layout.record_length]
            for i in range(0, len(data), layout.record_length)
        ]
    for line_no, record in enumerate(records, start=1):
        record = record.rstrip(b"\r")
        if len(record) != layout.record_length:
            raise SourceError(
                f"source {source.id!r} line {line_no}: record is {len(record)} bytes, "
                f"layout says {layout.record_length}"
            )
        text = record.decode("latin-1")
        row = {}
        for name, offset, width, kind in layout.fields:
            value, degraded = _convert(text[offset:offset + width], kind)
            if degraded:
                batch.degraded_cells += 1
            row[name] = value
        batch.rows.append(row)
        batch.provenance.append((source.id, line_no))
    return batch


def _extract_delimited(source: SourceSpec, data: bytes) -> StagingBatch:
    text = data.decode("utf-8-sig")
    reader = csv.reader(io.StringIO(text), delimiter=source.effective_delimiter)
    rows = list(reader)
    if not source.header:
        raise SourceError(f"source {source.id!r}: headerless delimited files unsupported")
    if not rows:
        raise SourceError(f"source {source.id!r}: missing header row")
    header = [h.strip() for h in rows[0]]
    batch = StagingBatch(
        source_id=source.id,
        target=source.target,
        priority=source.priority,
        fields=tuple(header),
    )
    for line_no, record in enumerate(rows[1:], start=2):
        if not record or all(cell.strip() == "" for cell in record):
            continue
        if len(record) != len(header):
            batch.rejects.append(
                (line_no, f"expected {len(header)} fields, got {len(record)}",
                 source.effective_delimiter.join(record))
            )
            continue
        row = {}
        for name, cell in zip(header, record):
            value = cell.strip()
            row[name] = value if value != "" else None
        batch.rows.append(row)
        batch.provenance.append((source.id, line_no))
    return batch


def extract(source: SourceSpec, base_dir: Optional[Path] = None) -> StagingBatch:
    """Extract one staging batch; fatal errors (missing file, layout mismatch) raise."""
    path = Path(source.path)
    if base_dir is not None and not path.is_absolute():
        path = base_dir / path
    if not path.exists():
        raise SourceError(f"source {source.id!r}: file not found: {path}")
    data = path.read_bytes()
    if source.kind == "fixed_width":
        return _extract_fixed_width(source, data)
    return _extract_delimited(source, data)
