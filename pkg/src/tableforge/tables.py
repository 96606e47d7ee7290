"""Canonical in-memory table model.

Tables are immutable after construction and safe to share across workers.
Cells are kept as text even when they look numeric; numeric interpretation
happens on demand through :func:`cell_is_numeric` and
:func:`infer_column_kinds`.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Sequence


class TableError(ValueError):
    """A table record is malformed or violates a structural invariant."""


class ColumnKind(Enum):
    NUMERICAL = "numerical"
    TEXTUAL = "textual"


class RecordSource(Enum):
    ANCHOR = "anchor"
    GENERATED = "generated"
    BACKGROUND = "background"


# integer or decimal, optional exponent; commas are stripped before matching
_NUMERIC_RE = re.compile(r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")

# default fraction of non-empty cells that must look numeric for a column
# to count as numerical; real tables carry stray sentinel strings
NUMERIC_CELL_FRACTION = 0.9


def cell_is_numeric(cell: str) -> bool:
    """True when the cell parses as an integer or decimal number.

    Thousands separators (commas) are stripped first; exponent notation
    counts as numeric.
    """
    s = cell.strip().replace(",", "")
    return bool(s) and _NUMERIC_RE.fullmatch(s) is not None


def coerce_cell(value: object) -> str:
    """Coerce a JSON scalar to its text cell form.

    Tables store text uniformly; numbers and booleans arriving from JSON
    are rendered, ``null`` becomes the empty cell.
    """
    if isinstance(value, str):
        return value
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    raise TableError(f"cell value {value!r} is not a scalar")


@dataclass(frozen=True)
class Table:
    """One table: id, title, description, column names, and cell rows."""

    id: str
    title: str
    description: str
    column_names: tuple[str, ...]
    rows: tuple[tuple[str, ...], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "column_names", tuple(self.column_names))
        object.__setattr__(self, "rows", tuple(tuple(r) for r in self.rows))
        if not self.id:
            raise TableError("field 'id' must be a non-empty string")
        if not self.column_names:
            raise TableError("field 'column_names' must be non-empty")
        width = len(self.column_names)
        for i, row in enumerate(self.rows):
            if len(row) != width:
                raise TableError(
                    f"row {i} has {len(row)} cells but the table has "
                    f"{width} columns"
                )

    @property
    def n_columns(self) -> int:
        return len(self.column_names)

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def column(self, j: int) -> tuple[str, ...]:
        """Cells of column ``j``, top to bottom."""
        return tuple(row[j] for row in self.rows)

    def with_id(self, new_id: str) -> "Table":
        return replace(self, id=new_id)


def parse_table(raw: str) -> Table:
    """Parse one JSON table record (one JSONL line) into a :class:`Table`.

    Required keys: ``id``, ``column_names``, ``rows``. ``title`` and
    ``description`` default to the empty string. Malformed fields raise
    :class:`TableError` naming the offending field.
    """
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as e:
        raise TableError(f"record is not valid JSON: {e}") from e
    if not isinstance(obj, dict):
        raise TableError("record is not a JSON object")
    return table_from_fields(obj)


def table_from_fields(obj: dict) -> Table:
    """Build a Table from a decoded record dict, validating each field."""
    table_id = obj.get("id")
    if not isinstance(table_id, str) or not table_id:
        raise TableError("field 'id' must be a non-empty string")

    title = obj.get("title", "")
    if not isinstance(title, str):
        try:
            title = coerce_cell(title)
        except TableError:
            raise TableError("field 'title' must be a string") from None

    description = obj.get("description", "")
    if not isinstance(description, str):
        try:
            description = coerce_cell(description)
        except TableError:
            raise TableError("field 'description' must be a string") from None

    names = obj.get("column_names")
    if not isinstance(names, list) or not names:
        raise TableError("field 'column_names' must be a non-empty list")
    try:
        column_names = tuple(coerce_cell(c) for c in names)
    except TableError:
        raise TableError(
            "field 'column_names' must contain only scalars"
        ) from None

    rows_in = obj.get("rows")
    if not isinstance(rows_in, list):
        raise TableError("field 'rows' must be a list of cell rows")
    rows = []
    for i, row in enumerate(rows_in):
        if not isinstance(row, list):
            raise TableError(f"field 'rows' item {i} is not a list")
        try:
            rows.append(tuple(coerce_cell(c) for c in row))
        except TableError as e:
            raise TableError(f"field 'rows' item {i}: {e}") from None

    return Table(
        id=table_id,
        title=title,
        description=description,
        column_names=column_names,
        rows=tuple(rows),
    )


def write_table(t: Table) -> str:
    """Serialize a Table to its one-line JSON record form.

    ``parse_table(write_table(t))`` reproduces ``t`` exactly.
    """
    obj = {
        "id": t.id,
        "title": t.title,
        "description": t.description,
        "column_names": list(t.column_names),
        "rows": [list(r) for r in t.rows],
    }
    return json.dumps(obj, ensure_ascii=False)


def infer_column_kinds(
    t: Table, numeric_fraction: float = NUMERIC_CELL_FRACTION
) -> list[ColumnKind]:
    """Classify every column as numerical or textual.

    A column is numerical iff at least ``numeric_fraction`` of its
    non-empty cells parse as numbers; a column with no non-empty cells is
    textual.
    """
    kinds = []
    for j in range(t.n_columns):
        non_empty = [c for c in t.column(j) if c.strip()]
        if not non_empty:
            kinds.append(ColumnKind.TEXTUAL)
            continue
        numeric = sum(1 for c in non_empty if cell_is_numeric(c))
        if numeric / len(non_empty) >= numeric_fraction:
            kinds.append(ColumnKind.NUMERICAL)
        else:
            kinds.append(ColumnKind.TEXTUAL)
    return kinds


def is_numerical_table(
    t: Table, numeric_fraction: float = NUMERIC_CELL_FRACTION
) -> bool:
    """True iff the table has at least one numerical column."""
    return any(
        k is ColumnKind.NUMERICAL
        for k in infer_column_kinds(t, numeric_fraction)
    )


@dataclass(frozen=True)
class CorpusRecord:
    """A table plus where it came from.

    Generated records carry the provenance of the plan that produced them;
    anchor and background records do not.
    """

    table: Table
    source: RecordSource
    provenance: str | None = None

    def __post_init__(self) -> None:
        if self.source is RecordSource.GENERATED and not self.provenance:
            raise ValueError("generated records must carry provenance")
        if self.source is not RecordSource.GENERATED and self.provenance:
            raise ValueError(
                f"{self.source.value} records must not carry provenance"
            )
