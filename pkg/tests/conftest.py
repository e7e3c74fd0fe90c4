"""Shared fixtures and data builders for the test suite."""

from datetime import datetime, timedelta

import numpy as np
import pytest

from gapfill.series import MultivariateSeries


def daily_timestamps(start: str, count: int):
    t0 = datetime.fromisoformat(start)
    return tuple(t0 + timedelta(days=i) for i in range(count))


def hourly_timestamps(start: str, count: int):
    t0 = datetime.fromisoformat(start)
    return tuple(t0 + timedelta(hours=i) for i in range(count))


def make_series(values, start="2012-01-01", target_index=0, names=None, hourly=False):
    values = np.asarray(values, dtype=float)
    if names is None:
        names = tuple(f"v{i + 1}" for i in range(values.shape[1]))
    stamps = (
        hourly_timestamps(start, len(values))
        if hourly
        else daily_timestamps(start, len(values))
    )
    return MultivariateSeries(
        timestamps=stamps,
        values=values,
        names=tuple(names),
        target_index=target_index,
    )


def nine_row_example():
    """The 9x3 matrix with the target missing at rows 5 and 6 (1-based).

    Cell values are crafted so every (time, variable) pair is unique:
    value = time + variable / 10.
    """
    values = np.array(
        [[s + d / 10 for d in range(1, 4)] for s in range(1, 10)], dtype=float
    )
    values[4, 0] = np.nan
    values[5, 0] = np.nan
    return make_series(values, names=("y", "a", "b"))


@pytest.fixture
def nine_rows():
    return nine_row_example()


def brute_force_lagged(values, target_index, lag):
    """Independent window oracle: enumerate (origin, offset, variable).

    Uses nothing from the library beyond plain indexing; origins are
    1-based time labels.
    """
    values = np.asarray(values, dtype=float)
    s, n = values.shape
    rows, outs, origins = [], [], []
    for t in range(lag + 2, s + 1):  # 1-based predicted time
        row = []
        for time_label in range(t - lag - 1, t):  # times t-lag-1 .. t-1
            for var in range(n):
                row.append(values[time_label - 1, var])
        rows.append(row)
        outs.append(values[t - 1, target_index])
        origins.append(t)
    return (
        np.array(rows, dtype=float).reshape(len(rows), (lag + 1) * n),
        np.array(outs, dtype=float),
        np.array(origins, dtype=int),
    )
