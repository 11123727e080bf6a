"""Tabular input and design-matrix construction.

Factors use treatment coding: a factor with ``m`` levels contributes ``m - 1``
indicator columns, one per non-reference level, in sorted level order.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import DataError

NUMERIC = "numeric"
CATEGORICAL = "categorical"


@dataclass(frozen=True)
class RawTable:
    """Column-oriented table.

    Numeric columns are float arrays; categorical columns are arrays of
    ``str`` labels.
    """

    names: tuple[str, ...]
    columns: Mapping[str, np.ndarray]

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise DataError(f"duplicate column names in {self.names}")
        if set(self.names) != set(self.columns):
            raise DataError("column names do not match column data")
        lengths = {len(self.columns[name]) for name in self.names}
        if len(lengths) > 1:
            raise DataError(f"columns have unequal lengths {sorted(lengths)}")

    @property
    def n_rows(self) -> int:
        if not self.names:
            return 0
        return len(self.columns[self.names[0]])

    def kind(self, name: str) -> str:
        return NUMERIC if self.columns[name].dtype.kind == "f" else CATEGORICAL

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self.columns[name]
        except KeyError:
            raise DataError(f"unknown column {name!r}") from None

    @classmethod
    def from_columns(cls, data: Mapping[str, Sequence]) -> "RawTable":
        """Build a table from plain sequences; numbers become numeric columns."""
        columns = {}
        for name, values in data.items():
            arr = np.asarray(values)
            if arr.dtype.kind in "biuf":
                columns[name] = arr.astype(float)
            else:
                columns[name] = arr.astype(str)
        return cls(tuple(data), columns)


@dataclass(frozen=True)
class ModelSpec:
    """Which columns enter the model and how.

    ``factors`` holds ``(column, reference_level)`` pairs; the reference
    level is given as its label (numeric levels use ``%g`` formatting, so
    level ``2.0`` is ``"2"``).
    """

    outcome: str
    numeric: tuple[str, ...] = ()
    factors: tuple[tuple[str, str], ...] = ()
    intercept: bool = True


@dataclass(frozen=True, eq=False)
class DesignData:
    y: np.ndarray
    X: np.ndarray
    labels: tuple[str, ...]
    intercept: bool = True

    def __post_init__(self):
        if self.X.ndim != 2 or self.X.shape[0] != self.y.shape[0]:
            raise DataError(f"X shape {self.X.shape} incompatible with y length {self.y.shape[0]}")
        if len(self.labels) != self.X.shape[1]:
            raise DataError("one label per design column is required")
        if not np.all((self.y == 0) | (self.y == 1)):
            raise DataError("outcome must be coded 0/1")
        if self.intercept and not np.all(self.X[:, 0] == 1.0):
            raise DataError("first design column must be the intercept")
        self.y.setflags(write=False)
        self.X.setflags(write=False)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def k(self) -> int:
        return self.X.shape[1]


def _parse_float(text: str) -> float | None:
    try:
        return float(text)
    except ValueError:
        return None


def read_csv(path: str | Path, schema: Mapping[str, str] | None = None) -> RawTable:
    """Read a comma-separated file with a header row.

    A column is numeric when every field parses as a decimal number, unless
    ``schema`` maps its name to ``"numeric"`` or ``"categorical"``. Empty
    fields are rejected; there is no imputation.
    """
    schema = dict(schema or {})
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    body = [r for r in rows[1:] if r]
    if not body:
        raise DataError(f"{path}: empty table")
    for lineno, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise DataError(f"{path}: row {lineno} has {len(row)} fields, expected {len(header)}")
        for name, value in zip(header, row):
            if not value.strip():
                raise DataError(f"{path}: missing value in column {name!r} at row {lineno}")
    unknown = set(schema) - set(header)
    if unknown:
        raise DataError(f"schema hints for unknown columns {sorted(unknown)}")

    columns = {}
    for idx, name in enumerate(header):
        raw = [row[idx].strip() for row in body]
        hint = schema.get(name)
        if hint not in (None, NUMERIC, CATEGORICAL):
            raise DataError(f"unknown column kind {hint!r} for {name!r}")
        parsed = [_parse_float(v) for v in raw]
        if hint == CATEGORICAL or (hint is None and any(v is None for v in parsed)):
            columns[name] = np.array(raw, dtype=str)
        elif any(v is None for v in parsed):
            bad = next(i for i, v in enumerate(parsed) if v is None)
            raise DataError(f"{path}: non-numeric value {raw[bad]!r} in numeric column {name!r} at row {bad + 2}")
        else:
            columns[name] = np.array(parsed, dtype=float)
    return RawTable(tuple(header), columns)


def _level_labels(values: np.ndarray) -> tuple[np.ndarray, list[str]]:
    """Per-row labels and the sorted distinct levels of a factor column."""
    if values.dtype.kind == "f":
        levels = np.unique(values)
        labels = np.array([format(v, "g") for v in values], dtype=str)
        return labels, [format(v, "g") for v in levels]
    return values, sorted(set(values.tolist()))


def build_design(table: RawTable, spec: ModelSpec) -> DesignData:
    """Expand ``table`` into an outcome vector and design matrix.

    Column order is intercept, then ``spec.numeric`` terms, then each factor's
    indicators, labelled ``"<column>=<level>"``.
    """
    y = table[spec.outcome]
    if table.kind(spec.outcome) != NUMERIC or not np.all((y == 0) | (y == 1)):
        raise DataError(f"outcome {spec.outcome!r} must be coded 0/1")

    n = table.n_rows
    cols = []
    labels = []
    if spec.intercept:
        cols.append(np.ones(n))
        labels.append("(Intercept)")
    for name in spec.numeric:
        values = table[name]
        if table.kind(name) != NUMERIC:
            raise DataError(f"numeric term {name!r} is categorical; use it as a factor")
        cols.append(values.astype(float))
        labels.append(name)
    for name, ref in spec.factors:
        row_labels, levels = _level_labels(table[name])
        if len(levels) < 2:
            raise DataError(f"factor {name!r} has a single level {levels}")
        if ref not in levels:
            raise DataError(f"reference level {ref!r} not found in factor {name!r} (levels {levels})")
        for level in levels:
            if level == ref:
                continue
            cols.append((row_labels == level).astype(float))
            labels.append(f"{name}={level}")

    if not cols:
        raise DataError("model has no terms")
    X = np.column_stack(cols)
    return DesignData(y=y.astype(float).copy(), X=X, labels=tuple(labels), intercept=spec.intercept)
