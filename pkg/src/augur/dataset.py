"""Ingestion, cleaning, standardization, windowing, and text serialization
of multivariate time series.

A :class:`TimeSeriesWindow` is the unit of analysis everywhere else in the
package: a T x N matrix of floats plus per-variable metadata. Loading is
CSV-only (header row, one timestamp column, numeric value columns; empty
cells or "NaN" mark missing values).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, RowParseError, SchemaError, UnimputableError

__all__ = [
    "VariableMeta",
    "TimeSeriesWindow",
    "StandardizationStats",
    "load_csv",
    "impute",
    "standardize",
    "destandardize",
    "serialize_series",
]


@dataclass(frozen=True)
class VariableMeta:
    """Name and human-readable description of one series variable."""

    name: str
    description: str = ""
    units: str | None = None

    def __post_init__(self):
        if not self.name:
            raise ValueError("variable name must be non-empty")


@dataclass(frozen=True)
class TimeSeriesWindow:
    """A lookback window: T timestamps, a T x N value matrix, N variables.

    Values may contain NaN (missing) until :func:`impute` is applied.
    """

    timestamps: tuple
    values: np.ndarray
    variables: tuple[VariableMeta, ...]

    def __post_init__(self):
        object.__setattr__(self, "timestamps", tuple(self.timestamps))
        object.__setattr__(self, "variables", tuple(self.variables))
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if values.ndim != 2:
            raise ValueError("values must be a 2-d matrix")
        t, n = values.shape
        if t < 2:
            raise ValueError(f"window length must be >= 2, got {t}")
        if n < 1:
            raise ValueError("window must have at least one variable")
        if len(self.timestamps) != t:
            raise ValueError("timestamps length does not match value rows")
        if len(self.variables) != n:
            raise ValueError("variable metadata does not match value columns")
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names):
            raise ValueError("variable names must be unique within a window")

    @property
    def length(self) -> int:
        return self.values.shape[0]

    @property
    def names(self) -> list[str]:
        return [v.name for v in self.variables]

    def column(self, name: str) -> np.ndarray:
        try:
            idx = self.names.index(name)
        except ValueError:
            raise KeyError(f"unknown variable {name!r}") from None
        return self.values[:, idx]

    def meta(self, name: str) -> VariableMeta:
        return self.variables[self.names.index(name)]


@dataclass(frozen=True)
class StandardizationStats:
    """Per-variable mean and standard deviation (population, ddof=0)."""

    mean: dict[str, float] = field(default_factory=dict)
    std: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if set(self.mean) != set(self.std):
            raise ValueError("mean and std must cover the same variables")
        for name, s in self.std.items():
            if s < 0:
                raise ValueError(f"negative std for {name!r}")

    @classmethod
    def from_window(cls, window: TimeSeriesWindow) -> "StandardizationStats":
        mean = {}
        std = {}
        for i, v in enumerate(window.variables):
            col = window.values[:, i]
            mean[v.name] = float(np.mean(col))
            std[v.name] = float(np.std(col))
        return cls(mean=mean, std=std)


_MISSING_TOKENS = {"", "nan"}


def _parse_timestamp(cell: str, line_number: int) -> datetime:
    cell = cell.strip()
    try:
        return datetime.fromtimestamp(float(cell), tz=timezone.utc)
    except ValueError:
        pass
    try:
        return datetime.fromisoformat(cell.replace("Z", "+00:00"))
    except ValueError:
        raise RowParseError(f"unparseable timestamp {cell!r}", line_number) from None


def _parse_value(cell: str, column: str, line_number: int) -> float:
    cell = cell.strip()
    if cell.lower() in _MISSING_TOKENS:
        return math.nan
    try:
        return float(cell)
    except ValueError:
        raise RowParseError(
            f"unparseable numeric cell {cell!r} in column {column!r}", line_number
        ) from None


def load_csv(
    path: str | Path,
    variable_columns: Sequence[str],
    timestamp_column: str,
    window_length: int,
    stride: int | None = None,
) -> list[TimeSeriesWindow]:
    """Read a CSV file and cut it into fixed-length windows.

    Rows are consumed in file order; windows start every ``stride`` rows
    (default: ``window_length``, i.e. non-overlapping) and a partial
    trailing window is dropped. Empty cells and "NaN" become missing
    values (NaN) to be resolved by :func:`impute`.
    """
    if window_length < 2:
        raise ValueError("window_length must be >= 2")
    if stride is None:
        stride = window_length
    if stride < 1:
        raise ValueError("stride must be >= 1")

    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        for column in [timestamp_column, *variable_columns]:
            if column not in header:
                raise SchemaError(f"{path}: missing column {column!r}")
        ts_idx = header.index(timestamp_column)
        var_idx = [header.index(c) for c in variable_columns]

        timestamps: list[datetime] = []
        rows: list[list[float]] = []
        for line_number, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            cell = row[ts_idx] if ts_idx < len(row) else ""
            timestamps.append(_parse_timestamp(cell, line_number))
            rows.append(
                [
                    _parse_value(row[i] if i < len(row) else "", header[i], line_number)
                    for i in var_idx
                ]
            )

    variables = tuple(VariableMeta(name=c) for c in variable_columns)
    values = np.array(rows, dtype=float).reshape(len(rows), len(variable_columns))

    windows = []
    start = 0
    while start + window_length <= len(rows):
        windows.append(
            TimeSeriesWindow(
                timestamps=tuple(timestamps[start : start + window_length]),
                values=values[start : start + window_length],
                variables=variables,
            )
        )
        start += stride
    return windows


def impute(window: TimeSeriesWindow) -> TimeSeriesWindow:
    """Resolve missing cells: forward-fill, then mean-fill leading gaps.

    Cells missing at the start of a column (no prior value to carry) take
    the column mean over present values. A column with no present values
    at all cannot be imputed and raises :class:`UnimputableError`.
    """
    values = window.values.copy()
    for j, meta in enumerate(window.variables):
        col = values[:, j]
        present = ~np.isnan(col)
        if not present.any():
            raise UnimputableError(f"column {meta.name!r} has no present values")
        fill = float(np.mean(col[present]))
        last = None
        for t in range(len(col)):
            if np.isnan(col[t]):
                col[t] = fill if last is None else last
            else:
                last = col[t]
    return replace(window, values=values)


def standardize(
    window: TimeSeriesWindow, stats: StandardizationStats
) -> TimeSeriesWindow:
    """Z-score each column using the supplied (training-split) statistics.

    A zero-std variable maps to all zeros rather than dividing by zero.
    """
    values = window.values.copy()
    for j, meta in enumerate(window.variables):
        if meta.name not in stats.mean:
            raise ConfigError(f"standardization stats missing variable {meta.name!r}")
        mu = stats.mean[meta.name]
        sigma = stats.std[meta.name]
        if sigma == 0.0:
            values[:, j] = 0.0
        else:
            values[:, j] = (values[:, j] - mu) / sigma
    return replace(window, values=values)


def destandardize(
    window: TimeSeriesWindow, stats: StandardizationStats
) -> TimeSeriesWindow:
    """Invert :func:`standardize` (zero-std variables recover their mean)."""
    values = window.values.copy()
    for j, meta in enumerate(window.variables):
        if meta.name not in stats.mean:
            raise ConfigError(f"standardization stats missing variable {meta.name!r}")
        values[:, j] = values[:, j] * stats.std[meta.name] + stats.mean[meta.name]
    return replace(window, values=values)


def serialize_series(column: Sequence[float], precision: int = 2) -> str:
    """Render a value sequence as a comma-separated string at fixed
    decimal precision (round-half-even, as per float formatting)."""
    if precision < 0:
        raise ValueError("precision must be >= 0")
    return ", ".join(f"{float(v):.{precision}f}" for v in column)
