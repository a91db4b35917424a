"""Canonical in-memory table model, file parsing, and schema fingerprinting.

A parsed ``Table`` is immutable; every cell carries its detected kind
(number, datetime, text, empty) plus surface flags (percent suffix, currency
prefix) that downstream feature extraction relies on. Field types follow the
five-way scheme Unknown/String/Year/DateTime/Decimal.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import re
from dataclasses import dataclass
from datetime import datetime
from enum import Enum

from fieldmeta.errors import EmptyTable, MalformedInput

# Symbols recognized as currency prefixes at parse time. The taxonomy module's
# Money unit lexicon includes the same symbols; tests assert the overlap.
CURRENCY_SYMBOLS = frozenset({"$", "€", "£", "¥"})

DEFAULT_ROW_LIMIT = 10_000

YEAR_MIN, YEAR_MAX = 1000, 2100


class CellKind(Enum):
    EMPTY = "empty"
    TEXT = "text"
    NUMBER = "number"
    DATETIME = "datetime"


class FieldType(Enum):
    UNKNOWN = "Unknown"
    STRING = "String"
    YEAR = "Year"
    DATETIME = "DateTime"
    DECIMAL = "Decimal"


class TableFormat(Enum):
    CSV = "csv"
    TSV = "tsv"
    JSON_RECORDS = "json"


@dataclass(frozen=True)
class CellValue:
    """One typed cell. ``raw`` is the trimmed source text ("" for empty cells)."""

    kind: CellKind
    raw: str
    number: float | None = None
    timestamp: datetime | None = None
    is_percent: bool = False
    currency: str | None = None
    had_separators: bool = False
    # (year, month, day) presence for datetime cells
    date_parts: tuple[bool, bool, bool] = (False, False, False)

    @property
    def year_candidate(self) -> bool:
        """Integer in [1000, 2100], written plainly (no separators or markers)."""
        return (
            self.kind is CellKind.NUMBER
            and self.number is not None
            and self.number.is_integer()
            and YEAR_MIN <= self.number <= YEAR_MAX
            and not self.had_separators
            and not self.is_percent
            and self.currency is None
        )


@dataclass(frozen=True)
class Field:
    index: int
    header: str
    cells: tuple[CellValue, ...]
    field_type: FieldType

    def non_empty_cells(self) -> list[CellValue]:
        return [c for c in self.cells if c.kind is not CellKind.EMPTY]


@dataclass(frozen=True)
class Table:
    id: str
    fields: tuple[Field, ...]
    n_rows: int

    def __post_init__(self) -> None:
        for f in self.fields:
            if len(f.cells) != self.n_rows:
                raise MalformedInput(
                    f"field {f.index} has {len(f.cells)} cells, expected {self.n_rows}"
                )


@dataclass(frozen=True)
class SchemaFingerprint:
    digest: bytes

    @property
    def hex(self) -> str:
        return self.digest.hex()


_NUMBER_RE = re.compile(
    r"""^
    (?P<currency>[^\w\s+-])?        # optional leading symbol (signs excluded)
    (?P<sign>[+-])?
    (?P<body>\d{1,3}(?:,\d{3})+|\d+)  # grouped or plain integer part
    (?P<frac>\.\d+)?
    (?P<exp>[eE][+-]?\d+)?
    (?P<percent>%)?
    $""",
    re.VERBOSE,
)

# (strptime format, (year, month, day) mask); tried in order.
_DATETIME_FORMATS: tuple[tuple[str, tuple[bool, bool, bool]], ...] = (
    ("%Y-%m-%d", (True, True, True)),
    ("%Y-%m-%dT%H:%M:%S", (True, True, True)),
    ("%Y-%m-%d %H:%M:%S", (True, True, True)),
    ("%Y-%m-%d %H:%M", (True, True, True)),
    ("%Y/%m/%d", (True, True, True)),
    ("%m/%d/%Y", (True, True, True)),
    ("%d %b %Y", (True, True, True)),
    ("%b %d, %Y", (True, True, True)),
    ("%B %d, %Y", (True, True, True)),
    ("%Y-%m", (True, True, False)),
    ("%b %Y", (True, True, False)),
)


def parse_cell(text: object) -> CellValue:
    """Detect the kind of one cell from its raw value.

    Accepts str (trimmed), numbers (from JSON records), bools, and None.
    Empty-after-trim text parses to an Empty cell.
    """
    if text is None:
        return CellValue(CellKind.EMPTY, "")
    if isinstance(text, bool):
        return CellValue(CellKind.TEXT, "true" if text else "false")
    if isinstance(text, (int, float)):
        num = float(text)
        if num != num or num in (float("inf"), float("-inf")):
            return CellValue(CellKind.TEXT, str(text))
        return CellValue(CellKind.NUMBER, _format_number(num), number=num)
    raw = str(text).strip()
    if not raw:
        return CellValue(CellKind.EMPTY, "")

    m = _NUMBER_RE.match(raw)
    if m:
        currency = m.group("currency")
        if currency is not None and currency not in CURRENCY_SYMBOLS:
            return CellValue(CellKind.TEXT, raw)
        body = m.group("body")
        had_separators = "," in body
        literal = (m.group("sign") or "") + body.replace(",", "") + (m.group("frac") or "") + (m.group("exp") or "")
        try:
            num = float(literal)
        except ValueError:  # pragma: no cover - regex guarantees parseability
            return CellValue(CellKind.TEXT, raw)
        if num != num or num in (float("inf"), float("-inf")):
            return CellValue(CellKind.TEXT, raw)
        return CellValue(
            CellKind.NUMBER,
            raw,
            number=num,
            is_percent=m.group("percent") is not None,
            currency=currency,
            had_separators=had_separators,
        )

    ts, parts = _parse_datetime(raw)
    if ts is not None:
        return CellValue(CellKind.DATETIME, raw, timestamp=ts, date_parts=parts)
    return CellValue(CellKind.TEXT, raw)


def _parse_datetime(raw: str) -> tuple[datetime | None, tuple[bool, bool, bool]]:
    if not any(ch.isdigit() for ch in raw):
        return None, (False, False, False)
    for fmt, parts in _DATETIME_FORMATS:
        try:
            return datetime.strptime(raw, fmt), parts
        except ValueError:
            continue
    return None, (False, False, False)


def _format_number(num: float) -> str:
    if num.is_integer() and abs(num) < 1e15:
        return str(int(num))
    return repr(num)


def detect_field_type(field: Field) -> FieldType:
    """Majority vote over non-empty cells; ties break DateTime > Year > Decimal > String.

    A numeric winner is Year only when every numeric cell is a year candidate
    and the column has more than one distinct value; otherwise Decimal.
    """
    non_empty = field.non_empty_cells()
    if not non_empty:
        return FieldType.UNKNOWN
    counts = {CellKind.DATETIME: 0, CellKind.NUMBER: 0, CellKind.TEXT: 0}
    for cell in non_empty:
        counts[cell.kind] += 1
    # precedence order doubles as the tie-break
    winner = max(
        (CellKind.DATETIME, CellKind.NUMBER, CellKind.TEXT),
        key=lambda k: (counts[k], -_PRECEDENCE[k]),
    )
    if winner is CellKind.DATETIME:
        return FieldType.DATETIME
    if winner is CellKind.TEXT:
        return FieldType.STRING
    numeric = [c for c in non_empty if c.kind is CellKind.NUMBER]
    distinct = {c.number for c in numeric}
    if numeric and all(c.year_candidate for c in numeric) and len(distinct) > 1:
        return FieldType.YEAR
    return FieldType.DECIMAL


_PRECEDENCE = {CellKind.DATETIME: 0, CellKind.NUMBER: 1, CellKind.TEXT: 2}


def is_numeric_field(field: Field) -> bool:
    """True when the field consists purely of numbers (all non-empty cells numeric)."""
    non_empty = field.non_empty_cells()
    return bool(non_empty) and all(c.kind is CellKind.NUMBER for c in non_empty)


def cardinality_ratio(field: Field) -> float:
    """Distinct values over non-empty count; 1.0 means all unique, 0.0 all empty."""
    keys = [c.raw for c in field.non_empty_cells()]
    if not keys:
        return 0.0
    return len(set(keys)) / len(keys)


def build_field(index: int, header: str, raw_cells: list[object]) -> Field:
    cells = tuple(parse_cell(c) for c in raw_cells)
    stub = Field(index=index, header=header.strip(), cells=cells, field_type=FieldType.UNKNOWN)
    return Field(index=index, header=header.strip(), cells=cells, field_type=detect_field_type(stub))


def parse_table(
    source: bytes | str | io.IOBase,
    fmt: TableFormat = TableFormat.CSV,
    table_id: str | None = None,
    row_limit: int = DEFAULT_ROW_LIMIT,
) -> Table:
    """Parse CSV/TSV/JSON-records content into a Table.

    The first row (CSV/TSV) or the record keys (JSON) are headers. Rows beyond
    ``row_limit`` are dropped (head truncation). Raises MalformedInput for
    ragged rows or undecodable bytes, EmptyTable when no non-empty data row
    survives.
    """
    text = _decode(source)
    if table_id is None:
        table_id = hashlib.sha1(text.encode("utf-8")).hexdigest()[:12]

    if fmt in (TableFormat.CSV, TableFormat.TSV):
        headers, rows = _parse_delimited(text, "\t" if fmt is TableFormat.TSV else ",")
    elif fmt is TableFormat.JSON_RECORDS:
        headers, rows = _parse_json_records(text)
    else:  # pragma: no cover - enum is closed
        raise MalformedInput(f"unsupported format: {fmt}")

    rows = rows[:row_limit]
    if not rows:
        raise EmptyTable(f"{table_id}: no data rows")
    fields = tuple(
        build_field(i, headers[i], [row[i] for row in rows]) for i in range(len(headers))
    )
    if all(c.kind is CellKind.EMPTY for f in fields for c in f.cells):
        raise EmptyTable(f"{table_id}: all cells empty")
    return Table(id=table_id, fields=fields, n_rows=len(rows))


def _decode(source: bytes | str | io.IOBase) -> str:
    if isinstance(source, str):
        return source
    if isinstance(source, bytes):
        try:
            return source.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedInput(f"not valid UTF-8: {exc}") from exc
    data = source.read()
    return _decode(data)


def _parse_delimited(text: str, delimiter: str) -> tuple[list[str], list[list[str]]]:
    reader = csv.reader(io.StringIO(text), delimiter=delimiter)
    try:
        rows = [row for row in reader]
    except csv.Error as exc:
        raise MalformedInput(f"csv error: {exc}") from exc
    rows = [row for row in rows if row]  # blank physical lines
    if not rows:
        raise EmptyTable("no header row")
    headers, data = rows[0], rows[1:]
    if not headers:
        raise EmptyTable("empty header row")
    for lineno, row in enumerate(data, start=2):
        if len(row) != len(headers):
            raise MalformedInput(f"line {lineno}: {len(row)} cells, expected {len(headers)}")
    return headers, data


def _parse_json_records(text: str) -> tuple[list[str], list[list[object]]]:
    try:
        records = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedInput(f"bad JSON: {exc}") from exc
    if not isinstance(records, list) or any(not isinstance(r, dict) for r in records):
        raise MalformedInput("expected a JSON array of objects")
    headers: list[str] = []
    for record in records:
        for key in record:
            if key not in headers:
                headers.append(key)
    rows = []
    for record in records:
        for value in record.values():
            if isinstance(value, (dict, list)):
                raise MalformedInput("nested values are not supported")
        rows.append([record.get(h) for h in headers])
    return headers, rows


def schema_fingerprint(table: Table) -> SchemaFingerprint:
    """Digest of (field count, per-field (type, header)); value-independent."""
    payload = json.dumps(
        [len(table.fields), [[f.field_type.value, f.header] for f in table.fields]],
        ensure_ascii=False,
        separators=(",", ":"),
    )
    return SchemaFingerprint(hashlib.sha256(payload.encode("utf-8")).digest())


def table_to_json(table: Table) -> dict:
    """Canonical serialized form: {id, n_rows, fields:[{index, header, field_type, cells}]}."""
    return {
        "id": table.id,
        "n_rows": table.n_rows,
        "fields": [
            {
                "index": f.index,
                "header": f.header,
                "field_type": f.field_type.value,
                "cells": [c.raw for c in f.cells],
            }
            for f in table.fields
        ],
    }


def table_from_json(doc: dict) -> Table:
    """Inverse of table_to_json; cell kinds are re-detected from raw text."""
    try:
        fields = tuple(
            build_field(f["index"], f["header"], list(f["cells"])) for f in doc["fields"]
        )
        return Table(id=doc["id"], fields=fields, n_rows=doc["n_rows"])
    except (KeyError, TypeError) as exc:
        raise MalformedInput(f"bad table document: {exc}") from exc


def serialize_table(table: Table) -> str:
    return json.dumps(table_to_json(table), ensure_ascii=False, indent=2)
