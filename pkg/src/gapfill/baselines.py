"""Univariate reference gap fillers: LOCF, linear, cubic spline, seasonal.

All operate on a single column (NaN = missing), leave observed entries
untouched, fill every missing entry, and are pure functions.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class SeasonalProfile:
    """Per-phase means of an observed column at a fixed season length."""

    frequency: int
    means: np.ndarray

    def __post_init__(self):
        if self.frequency < 2:
            raise DataError("seasonal frequency must be >= 2")
        means = np.array(self.means, dtype=float)
        if means.shape != (self.frequency,):
            raise DataError("profile length must equal the frequency")
        means.flags.writeable = False
        object.__setattr__(self, "means", means)

    def component(self, length: int) -> np.ndarray:
        """The profile tiled over `length` consecutive time steps."""
        return self.means[np.arange(length) % self.frequency]


def fit_seasonal_profile(column: np.ndarray, frequency: int) -> SeasonalProfile:
    """Per-phase observed means; empty phases fall back to the global mean."""
    col = np.asarray(column, dtype=float)
    observed = ~np.isnan(col)
    if not observed.any():
        raise DataError("cannot fit a seasonal profile on an all-missing column")
    phases = np.arange(len(col)) % frequency
    global_mean = float(col[observed].mean())
    means = np.full(frequency, global_mean)
    for p in range(frequency):
        sel = observed & (phases == p)
        if sel.any():
            means[p] = col[sel].mean()
    return SeasonalProfile(frequency=frequency, means=means)


def locf(column: np.ndarray) -> np.ndarray:
    """Fill each missing entry with the nearest preceding observation."""
    col = np.array(column, dtype=float)
    if col.ndim != 1:
        raise DataError("expected a 1-d column")
    if np.isnan(col[0]):
        raise DataError("no observation before the gap to carry forward")
    last = col[0]
    for i in range(len(col)):
        if np.isnan(col[i]):
            col[i] = last
        else:
            last = col[i]
    return col


def interpolate_linear(column: np.ndarray) -> np.ndarray:
    """Straight-line fill between the observations flanking each gap."""
    col = np.array(column, dtype=float)
    if col.ndim != 1:
        raise DataError("expected a 1-d column")
    missing = np.isnan(col)
    if not missing.any():
        return col
    if missing[0] or missing[-1]:
        raise DataError(
            "linear interpolation needs observations on both sides of the gap"
        )
    idx = np.arange(len(col))
    col[missing] = np.interp(idx[missing], idx[~missing], col[~missing])
    return col


def _natural_spline_second_derivs(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Second derivatives of the natural cubic spline through (x, y).

    Thomas-algorithm solve of the standard tridiagonal system with zero
    curvature at both ends.
    """
    n = len(x)
    h = np.diff(x)
    m = np.zeros(n)
    if n < 3:
        return m
    sub = np.zeros(n)
    diag = np.ones(n)
    sup = np.zeros(n)
    rhs = np.zeros(n)
    sub[1 : n - 1] = h[: n - 2] / 6.0
    diag[1 : n - 1] = (h[: n - 2] + h[1 : n - 1]) / 3.0
    sup[1 : n - 1] = h[1 : n - 1] / 6.0
    slope = np.diff(y) / h
    rhs[1 : n - 1] = slope[1 : n - 1] - slope[: n - 2]
    # forward sweep
    for i in range(1, n):
        w = sub[i] / diag[i - 1]
        diag[i] -= w * sup[i - 1]
        rhs[i] -= w * rhs[i - 1]
    m[n - 1] = rhs[n - 1] / diag[n - 1]
    for i in range(n - 2, -1, -1):
        m[i] = (rhs[i] - sup[i] * m[i + 1]) / diag[i]
    return m


def _spline_eval(x: np.ndarray, y: np.ndarray, m: np.ndarray, q: np.ndarray):
    hi = np.clip(np.searchsorted(x, q), 1, len(x) - 1)
    lo = hi - 1
    h = x[hi] - x[lo]
    a = (x[hi] - q) / h
    b = (q - x[lo]) / h
    return (
        a * y[lo]
        + b * y[hi]
        + ((a**3 - a) * m[lo] + (b**3 - b) * m[hi]) * h**2 / 6.0
    )


def interpolate_spline(column: np.ndarray) -> np.ndarray:
    """Natural cubic spline through all observed points.

    With fewer than 4 observations there is nothing for a cubic to work
    with; falls back to linear interpolation and warns.
    """
    col = np.array(column, dtype=float)
    if col.ndim != 1:
        raise DataError("expected a 1-d column")
    missing = np.isnan(col)
    if not missing.any():
        return col
    if missing[0] or missing[-1]:
        raise DataError(
            "spline interpolation needs observations on both sides of the gap"
        )
    idx = np.arange(len(col), dtype=float)
    xo, yo = idx[~missing], col[~missing]
    if len(xo) < 4:
        warnings.warn(
            "fewer than 4 observed points; falling back to linear interpolation",
            UserWarning,
            stacklevel=2,
        )
        return interpolate_linear(column)
    m = _natural_spline_second_derivs(xo, yo)
    col[missing] = _spline_eval(xo, yo, m, idx[missing])
    return col


def seasonal_interpolate(column: np.ndarray, frequency: int) -> np.ndarray:
    """Deseasonalize, interpolate the residual linearly, re-add seasonality.

    The seasonal component is the per-phase mean of the observed values;
    long gaps leave per-phase means well defined where moving-average
    decompositions would break.
    """
    col = np.array(column, dtype=float)
    if col.ndim != 1:
        raise DataError("expected a 1-d column")
    if len(col) < frequency:
        raise DataError(
            f"series length {len(col)} is shorter than the seasonal "
            f"frequency {frequency}"
        )
    missing = np.isnan(col)
    if not missing.any():
        return col
    profile = fit_seasonal_profile(col, frequency)
    seasonal = profile.component(len(col))
    residual = interpolate_linear(col - seasonal)
    col[missing] = residual[missing] + seasonal[missing]
    return col
