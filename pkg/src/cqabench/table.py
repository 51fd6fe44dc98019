"""The user-feature table: a numeric matrix with an explicit missingness mask.

Masked cells hold NaN as a sentinel, but the boolean mask is authoritative:
a NaN that appears in real data is treated as missing only if the mask says
so. Tables are immutable; every transformation returns a new table.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ParseError, SchemaError
from .schema import FeatureSchema, Role


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.asarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class UserFeatureTable:
    schema: FeatureSchema
    values: np.ndarray  # (n_rows, n_cols) float64, NaN at masked cells
    missing: np.ndarray  # (n_rows, n_cols) bool

    def __post_init__(self) -> None:
        values = _frozen(np.asarray(self.values, dtype=np.float64))
        missing = _frozen(np.asarray(self.missing, dtype=bool))
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "missing", missing)
        n_cols = len(self.schema.columns)
        if values.ndim != 2 or values.shape[1] != n_cols:
            raise SchemaError(
                f"value matrix shape {values.shape} does not match "
                f"{n_cols}-column schema"
            )
        if missing.shape != values.shape:
            raise SchemaError("missingness mask shape differs from value matrix")

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]

    def column(self, name: str) -> np.ndarray:
        """Column values with NaN at masked cells."""
        return self.values[:, self.schema.index(name)]

    def column_missing(self, name: str) -> np.ndarray:
        return self.missing[:, self.schema.index(name)]

    def observed(self, name: str) -> np.ndarray:
        """Only the observed (unmasked) values of a column."""
        j = self.schema.index(name)
        return self.values[~self.missing[:, j], j]

    def replace_column(self, name: str, values: np.ndarray,
                       missing: np.ndarray | None = None) -> "UserFeatureTable":
        j = self.schema.index(name)
        new_values = self.values.copy()
        new_missing = self.missing.copy()
        new_values[:, j] = values
        new_missing[:, j] = False if missing is None else missing
        return UserFeatureTable(self.schema, new_values, new_missing)

    def without_columns(self, names: set[str]) -> "UserFeatureTable":
        for n in names:
            self.schema.index(n)  # raises on unknown names
        keep = [j for j, c in enumerate(self.schema.columns) if c.name not in names]
        return UserFeatureTable(
            self.schema.without(set(names)),
            self.values[:, keep],
            self.missing[:, keep],
        )

    def take_rows(self, idx: np.ndarray) -> "UserFeatureTable":
        return UserFeatureTable(self.schema, self.values[idx], self.missing[idx])

    def matrix(self, names: list[str] | tuple[str, ...]) -> np.ndarray:
        cols = [self.schema.index(n) for n in names]
        return self.values[:, cols]

    def predictor_matrix(self) -> tuple[np.ndarray, tuple[str, ...]]:
        names = self.schema.predictor_names()
        return self.matrix(list(names)), names


def empty_table(schema: FeatureSchema) -> UserFeatureTable:
    n_cols = len(schema.columns)
    return UserFeatureTable(
        schema,
        np.empty((0, n_cols), dtype=np.float64),
        np.zeros((0, n_cols), dtype=bool),
    )


def _encode_nominal(raw: list[str], name: str) -> dict[str, float]:
    """Map a two-category text column onto {0.0, 1.0} in sorted label order."""
    labels = sorted({v for v in raw if v != ""})
    numericish = all(_is_number(v) for v in labels)
    if numericish:
        return {}
    if len(labels) > 2:
        raise ParseError(
            f"nominal column {name!r} has {len(labels)} categories; expected 2"
        )
    return {label: float(i) for i, label in enumerate(labels)}


def _is_number(text: str) -> bool:
    try:
        float(text)
        return True
    except ValueError:
        return False


def load_table(source: str | Path, schema: FeatureSchema,
               delimiter: str = ",") -> UserFeatureTable:
    """Read a delimiter-separated file into a table under ``schema``.

    Blank cells (and non-numeric cells in numeric columns) become masked
    missing values. Nominal columns are encoded 0/1 in sorted label order.
    Raises ``SchemaError`` if a schema column is absent from the header and
    ``ParseError`` with the offending row index on malformed rows.
    """
    path = Path(source)
    with path.open("r", encoding="utf-8", newline="") as fh:
        return _parse_table(fh, schema, delimiter, str(path))


def parse_table_text(text: str, schema: FeatureSchema,
                     delimiter: str = ",") -> UserFeatureTable:
    return _parse_table(io.StringIO(text), schema, delimiter, "<string>")


def _parse_table(fh, schema: FeatureSchema, delimiter: str,
                 origin: str) -> UserFeatureTable:
    reader = csv.reader(fh, delimiter=delimiter)
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError(f"{origin}: empty file, header row required") from None
    header = [h.strip() for h in header]
    positions = {}
    for col in schema.columns:
        if col.name not in header:
            raise SchemaError(f"{origin}: missing required column {col.name!r}")
        positions[col.name] = header.index(col.name)

    rows: list[list[str]] = []
    for i, row in enumerate(reader):
        if not row or all(cell.strip() == "" for cell in row):
            continue
        if len(row) < len(header):
            raise ParseError(f"{origin}: row {i + 1} has {len(row)} cells, "
                             f"expected {len(header)}")
        rows.append(row)

    n, m = len(rows), len(schema.columns)
    values = np.full((n, m), np.nan, dtype=np.float64)
    mask = np.zeros((n, m), dtype=bool)

    nominal_maps: dict[int, dict[str, float]] = {}
    for j, col in enumerate(schema.columns):
        if col.nominal:
            raw = [row[positions[col.name]].strip() for row in rows]
            nominal_maps[j] = _encode_nominal(raw, col.name)

    for i, row in enumerate(rows):
        for j, col in enumerate(schema.columns):
            cell = row[positions[col.name]].strip()
            if cell == "":
                mask[i, j] = True
                continue
            encoding = nominal_maps.get(j)
            if encoding:
                try:
                    values[i, j] = encoding[cell]
                except KeyError:
                    raise ParseError(
                        f"{origin}: row {i + 1}: unknown category {cell!r} "
                        f"in column {col.name!r}"
                    ) from None
                continue
            try:
                values[i, j] = float(cell)
            except ValueError:
                mask[i, j] = True  # non-numeric cell in a numeric column
    return UserFeatureTable(schema, values, mask)


def save_table(table: UserFeatureTable, target: str | Path,
               delimiter: str = ",") -> None:
    """Write a table; masked cells become empty fields, floats use repr
    (shortest exact form) so a load round-trips the matrix bit-for-bit."""
    path = Path(target)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter=delimiter)
        writer.writerow(table.schema.names)
        for i in range(table.n_rows):
            row = [
                "" if table.missing[i, j] else repr(float(table.values[i, j]))
                for j in range(table.n_cols)
            ]
            writer.writerow(row)


def validate_complete(table: UserFeatureTable, names: list[str]) -> None:
    """Raise unless every listed column is fully observed."""
    for name in names:
        if table.column_missing(name).any():
            raise SchemaError(f"column {name!r} still has missing values")


def predictor_design(table: UserFeatureTable,
                     exclude: set[str] = frozenset()) -> tuple[np.ndarray, list[str]]:
    """Matrix of predictor columns (composites and targets excluded)."""
    names = [
        c.name for c in table.schema.columns
        if c.role is Role.PREDICTOR and c.name not in exclude
    ]
    return table.matrix(names), names
