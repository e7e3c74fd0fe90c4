"""Data model for gappy multivariate time series.

A series is an S x N float matrix observed at uniformly spaced timestamps.
Missing values are represented as NaN and, after validation, may occur only
in the designated target column. The module also provides min-max scaling,
calendar feature augmentation, and the lagged supervised-learning view used
for model training.

Index conventions: matrix rows are 0-based everywhere (`GapSpec` included);
the provenance labels in `LaggedTable.row_origin` are 1-based time labels
(the first observation is time 1), so the value predicted by row i is
``values[row_origin[i] - 1, target_index]``.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, replace
from datetime import datetime, timedelta

import numpy as np

from .errors import DataError

#: Cell contents (lower-cased, stripped) treated as a missing observation.
MISSING_TOKENS = frozenset({"", "nan"})

#: Names of the calendar columns appended by add_temporal_features.
TEMPORAL_FEATURE_NAMES = ("month", "day", "hour")


@dataclass(frozen=True)
class GapSpec:
    """One contiguous run of missing target values, inclusive 0-based rows."""

    start_index: int
    end_index: int
    target_index: int

    def __post_init__(self):
        if not 0 <= self.start_index <= self.end_index:
            raise DataError(
                f"invalid gap bounds [{self.start_index}, {self.end_index}]"
            )

    @property
    def length(self) -> int:
        return self.end_index - self.start_index + 1


@dataclass(frozen=True)
class MultivariateSeries:
    """Timestamped observation matrix with one gap-bearing target column.

    Instances are immutable: the value matrix is copied on construction and
    marked read-only, so a series can be shared freely across workers.
    """

    timestamps: tuple[datetime, ...]
    values: np.ndarray
    names: tuple[str, ...]
    target_index: int
    has_temporal_features: bool = False
    gap: GapSpec | None = None

    def __post_init__(self):
        object.__setattr__(self, "timestamps", tuple(self.timestamps))
        object.__setattr__(self, "names", tuple(self.names))
        values = np.array(self.values, dtype=float)
        if values.ndim != 2:
            raise DataError("values must be a 2-d matrix")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        s, n = values.shape
        if s < 2:
            raise DataError("S >= 2 required")
        if n < 1:
            raise DataError("N >= 1 required")
        if len(self.timestamps) != s:
            raise DataError("timestamp count does not match row count")
        if len(self.names) != n:
            raise DataError("name count does not match column count")
        if not 0 <= self.target_index < n:
            raise DataError(f"target index {self.target_index} out of range")
        if self.gap is not None and self.gap.end_index >= s:
            raise DataError("gap extends past the end of the series")

    @property
    def n_steps(self) -> int:
        return self.values.shape[0]

    @property
    def n_vars(self) -> int:
        return self.values.shape[1]

    @property
    def step(self) -> timedelta:
        return self.timestamps[1] - self.timestamps[0]

    @property
    def target_name(self) -> str:
        return self.names[self.target_index]

    def target_column(self) -> np.ndarray:
        """Copy of the target column (writable)."""
        return np.array(self.values[:, self.target_index])

    def missing_mask(self) -> np.ndarray:
        return np.isnan(self.values[:, self.target_index])


@dataclass(frozen=True)
class Scaler:
    """Per-column min-max bounds computed over observed entries only."""

    mins: np.ndarray
    maxs: np.ndarray
    target_index: int

    def __post_init__(self):
        mins = np.array(self.mins, dtype=float)
        maxs = np.array(self.maxs, dtype=float)
        mins.flags.writeable = False
        maxs.flags.writeable = False
        object.__setattr__(self, "mins", mins)
        object.__setattr__(self, "maxs", maxs)
        if np.any(mins > maxs):
            raise DataError("scaler requires min <= max per column")


@dataclass(frozen=True)
class LaggedTable:
    """Supervised sliding-window view of a series.

    Row i packs the observation vectors of the ``lag + 1`` steps preceding
    time ``row_origin[i]`` (chronological order, variables interleaved per
    step) and predicts the target value at ``row_origin[i]`` itself.
    """

    inputs: np.ndarray
    outputs: np.ndarray
    row_origin: np.ndarray
    lag: int

    def __post_init__(self):
        inputs = np.array(self.inputs, dtype=float)
        outputs = np.array(self.outputs, dtype=float)
        origin = np.array(self.row_origin, dtype=int)
        if inputs.ndim != 2 or outputs.ndim != 1 or origin.ndim != 1:
            raise DataError("malformed lagged table arrays")
        if not inputs.shape[0] == outputs.shape[0] == origin.shape[0]:
            raise DataError("lagged table row counts disagree")
        for arr in (inputs, outputs, origin):
            arr.flags.writeable = False
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "outputs", outputs)
        object.__setattr__(self, "row_origin", origin)

    @property
    def n_rows(self) -> int:
        return self.inputs.shape[0]

    @property
    def width(self) -> int:
        return self.inputs.shape[1]


def read_csv_table(path) -> tuple[list[str], list[list[str]]]:
    """Read a UTF-8 CSV file into (header, rows) of raw strings."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file, header row required") from None
        rows = [row for row in reader if row]
    return header, rows


def _dedupe_names(names: list[str]) -> list[str]:
    seen: dict[str, int] = {}
    out = []
    for name in names:
        if name not in seen:
            seen[name] = 1
            out.append(name)
            continue
        candidate = name
        while candidate in seen:
            seen[name] += 1
            candidate = f"{name}_{seen[name]}"
        seen[candidate] = 1
        out.append(candidate)
    return out


def _parse_timestamp(cell: str, row: int, column: str) -> datetime:
    try:
        ts = datetime.fromisoformat(cell.strip())
    except ValueError:
        raise DataError(
            f"row {row}, column '{column}': unparseable timestamp {cell!r}"
        ) from None
    if ts.tzinfo is not None:
        raise DataError(
            f"row {row}, column '{column}': timezone offsets are not supported"
        )
    return ts


def _parse_value(cell: str, row: int, column: str) -> float:
    text = cell.strip()
    if text.lower() in MISSING_TOKENS:
        return math.nan
    try:
        value = float(text)
    except ValueError:
        raise DataError(
            f"row {row}, column '{column}': unparseable value {cell!r}"
        ) from None
    if not math.isfinite(value):
        raise DataError(
            f"row {row}, column '{column}': non-finite value {cell!r}"
        )
    return value


def validate_series(
    raw: tuple[list[str], list[list[str]]],
    target: str,
    time_column: str = "time",
) -> MultivariateSeries:
    """Turn a raw (header, rows) CSV table into a validated series.

    Checks performed: header sanity, timestamp parsing, uniform step,
    numeric parsing with row/column diagnostics, and the rule that missing
    values may appear only in the target column. Duplicate column names are
    de-duplicated with numeric suffixes. Row indices in error messages are
    1-based data rows (the header is row 0).
    """
    header, rows = raw
    if not header:
        raise DataError("header row required")
    header = [h.strip() for h in header]
    if time_column not in header:
        raise DataError(f"time column '{time_column}' not found in header")
    time_pos = header.index(time_column)
    data_names = _dedupe_names([h for i, h in enumerate(header) if i != time_pos])
    if not data_names:
        raise DataError("N >= 1 required: no data columns beside the time column")
    if target not in data_names:
        raise DataError(f"target column '{target}' not found in header")
    target_index = data_names.index(target)

    if len(rows) < 2:
        raise DataError("S >= 2 required")

    timestamps = []
    values = np.empty((len(rows), len(data_names)), dtype=float)
    for r, row in enumerate(rows, start=1):
        if len(row) != len(header):
            raise DataError(
                f"row {r}: expected {len(header)} cells, found {len(row)}"
            )
        timestamps.append(_parse_timestamp(row[time_pos], r, time_column))
        data_cells = [c for i, c in enumerate(row) if i != time_pos]
        for c, cell in enumerate(data_cells):
            values[r - 1, c] = _parse_value(cell, r, data_names[c])

    step = timestamps[1] - timestamps[0]
    if step <= timedelta(0):
        raise DataError("timestamps must be strictly increasing (row 1)")
    for i in range(1, len(timestamps) - 1):
        if timestamps[i + 1] - timestamps[i] != step:
            raise DataError(
                f"non-uniform time step at row {i + 2}: expected {step}, "
                f"found {timestamps[i + 1] - timestamps[i]}"
            )

    for c, name in enumerate(data_names):
        if c == target_index:
            continue
        bad = np.flatnonzero(np.isnan(values[:, c]))
        if bad.size:
            raise DataError(
                f"supporting column '{name}' has a missing value at row "
                f"{bad[0] + 1}; only the target may contain gaps"
            )

    return MultivariateSeries(
        timestamps=tuple(timestamps),
        values=values,
        names=tuple(data_names),
        target_index=target_index,
    )


def find_gap(series: MultivariateSeries) -> GapSpec | None:
    """Locate the contiguous missing run in the target, or None if complete.

    Raises DataError when missing entries are scattered rather than one run.
    """
    missing = np.flatnonzero(series.missing_mask())
    if missing.size == 0:
        return None
    start, end = int(missing[0]), int(missing[-1])
    if missing.size != end - start + 1:
        raise DataError(
            "target missing values are not one contiguous run "
            f"(first {start}, last {end}, count {missing.size})"
        )
    return GapSpec(start_index=start, end_index=end, target_index=series.target_index)


def attach_gap(series: MultivariateSeries) -> MultivariateSeries:
    """Return the series with its gap located and recorded as a GapSpec."""
    return replace(series, gap=find_gap(series))


def add_temporal_features(series: MultivariateSeries) -> MultivariateSeries:
    """Append month-of-year and day-of-month columns (plus hour-of-day for
    sub-daily series) as fully observed supporting variables."""
    if series.has_temporal_features:
        raise DataError("temporal features already present")
    columns = [
        [ts.month for ts in series.timestamps],
        [ts.day for ts in series.timestamps],
    ]
    labels = ["month", "day"]
    if series.step < timedelta(days=1):
        columns.append([ts.hour for ts in series.timestamps])
        labels.append("hour")
    extra = np.array(columns, dtype=float).T
    names = _dedupe_names(list(series.names) + labels)
    return MultivariateSeries(
        timestamps=series.timestamps,
        values=np.hstack([series.values, extra]),
        names=tuple(names),
        target_index=series.target_index,
        has_temporal_features=True,
        gap=series.gap,
    )


def fit_scaler(series: MultivariateSeries) -> Scaler:
    """Compute per-column min/max over observed entries.

    A constant column is legal (calendar features can be constant on short
    series); it normalizes to all zeros and a warning is emitted.
    """
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        mins = np.nanmin(series.values, axis=0)
        maxs = np.nanmax(series.values, axis=0)
    if np.any(np.isnan(mins)):
        empty = series.names[int(np.flatnonzero(np.isnan(mins))[0])]
        raise DataError(f"column '{empty}' has no observed values")
    for c in np.flatnonzero(mins == maxs):
        warnings.warn(
            f"column '{series.names[int(c)]}' is constant; it will be "
            "normalized to all zeros",
            UserWarning,
            stacklevel=2,
        )
    return Scaler(mins=mins, maxs=maxs, target_index=series.target_index)


def apply_scaler(series: MultivariateSeries, scaler: Scaler) -> MultivariateSeries:
    """Map observed entries into [0, 1] column-wise; NaNs pass through."""
    span = scaler.maxs - scaler.mins
    safe = np.where(span > 0, span, 1.0)
    scaled = (series.values - scaler.mins) / safe
    scaled[:, span == 0] = np.where(
        np.isnan(series.values[:, span == 0]), np.nan, 0.0
    )
    return replace(series, values=scaled)


def invert_target(values: np.ndarray, scaler: Scaler) -> np.ndarray:
    """Map normalized target values back to original units (exact inverse)."""
    lo = scaler.mins[scaler.target_index]
    hi = scaler.maxs[scaler.target_index]
    return np.asarray(values, dtype=float) * (hi - lo) + lo


def build_lagged_table(series: MultivariateSeries, lag: int) -> LaggedTable:
    """Build the sliding-window table for a given lag.

    The table has ``S - lag - 1`` rows of width ``(lag + 1) * N``; the row
    labelled with origin t concatenates the observation vectors at times
    t-lag-1 .. t-1 and predicts the target at time t. Missing values are
    carried through unchanged.
    """
    s, n = series.values.shape
    if lag < 1:
        raise DataError("lag must be >= 1")
    if lag > s - 2:
        raise DataError(f"series too short for lag {lag}: need lag <= {s - 2}")
    r = s - lag - 1
    windows = np.lib.stride_tricks.sliding_window_view(
        series.values, lag + 1, axis=0
    )
    # windows[i] is (N, lag+1) covering rows i .. i+lag; reorder to
    # step-major so each row reads (vector at t-lag-1, ..., vector at t-1).
    inputs = windows[:r].transpose(0, 2, 1).reshape(r, (lag + 1) * n)
    outputs = series.values[lag + 1 :, series.target_index]
    origins = np.arange(lag + 2, s + 1)
    return LaggedTable(inputs=inputs, outputs=outputs, row_origin=origins, lag=lag)


def reduce_lagged_table(table: LaggedTable) -> LaggedTable:
    """Drop every row with a missing value in its inputs or output."""
    keep = ~(np.isnan(table.inputs).any(axis=1) | np.isnan(table.outputs))
    return LaggedTable(
        inputs=table.inputs[keep],
        outputs=table.outputs[keep],
        row_origin=table.row_origin[keep],
        lag=table.lag,
    )


def split_train_val(
    table: LaggedTable, train_fraction: float = 0.85
) -> tuple[LaggedTable, LaggedTable]:
    """Chronological split: the earliest ceil(fraction * R) rows train.

    Splitting by time rather than at random avoids leakage between
    overlapping lag windows.
    """
    if not 0.0 < train_fraction < 1.0:
        raise DataError(f"train fraction must be in (0, 1), got {train_fraction}")
    r = table.n_rows
    if r < 2:
        raise DataError(f"need at least 2 rows to split, have {r}")
    if np.isnan(table.inputs).any() or np.isnan(table.outputs).any():
        raise DataError("split requires a reduced (missing-free) table")
    order = np.argsort(table.row_origin, kind="stable")
    n_train = math.ceil(train_fraction * r)
    if n_train >= r:
        raise DataError(
            f"split leaves no validation rows ({n_train} of {r} train)"
        )
    head, tail = order[:n_train], order[n_train:]
    make = lambda idx: LaggedTable(
        inputs=table.inputs[idx],
        outputs=table.outputs[idx],
        row_origin=table.row_origin[idx],
        lag=table.lag,
    )
    return make(head), make(tail)
