"""Artificial-gap experiment harness.

Carves known-truth gaps into a fully observed target, runs each configured
fill method, scores RMSE in original units, and renders the report (CSV
tables plus SVG charts). The held-out truth never reaches any method; it
exists only on the scoring side.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field, replace
from datetime import datetime
from pathlib import Path

import numpy as np

from . import baselines
from .errors import ConfigError, DataError, GapfillError
from .hpo import HpoConfig, HyperparameterSpace, optimize
from .imputer import finalize_model, impute
from .mlp import MlpArchitecture, TrainConfig
from .series import (
    GapSpec,
    MultivariateSeries,
    add_temporal_features,
    apply_scaler,
    fit_scaler,
)
from .svgplot import line_chart, scatter_chart

MLP_METHODS = ("mlp-rbf", "mlp-gp")
BASELINE_METHODS = ("locf", "linear", "spline", "seasonal")

#: Stable ids folded into per-cell seeds.
METHOD_IDS = {
    "mlp-rbf": 1,
    "mlp-gp": 2,
    "locf": 3,
    "linear": 4,
    "spline": 5,
    "seasonal": 6,
}


@dataclass(frozen=True)
class ExperimentPlan:
    """What to run: dataset, gap windows, methods, budgets, seed."""

    series: MultivariateSeries
    windows: tuple[tuple[str, str], ...]
    methods: tuple[str, ...]
    hpo: HpoConfig = HpoConfig()
    train: TrainConfig = TrainConfig()
    seed: int = 0
    seasonal_frequency: int = 365
    space: HyperparameterSpace = field(default_factory=HyperparameterSpace)
    jobs: int = 1

    def __post_init__(self):
        if not self.windows:
            raise ConfigError("plan needs at least one gap window")
        if not self.methods:
            raise ConfigError("plan needs at least one method")
        for m in self.methods:
            if m not in METHOD_IDS:
                raise ConfigError(
                    f"unknown method {m!r}; choose from {sorted(METHOD_IDS)}"
                )


@dataclass(frozen=True)
class CellResult:
    """Outcome of one (window, method) run."""

    window_from: str
    window_to: str
    n_obs: int
    method: str
    rmse: float | None
    fill: np.ndarray | None
    truth: np.ndarray
    architecture: MlpArchitecture | None
    seconds: float
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def abs_errors(self) -> np.ndarray:
        if self.fill is None:
            raise DataError("failed cell has no fill")
        return np.abs(self.fill - self.truth)


@dataclass(frozen=True)
class ImputationReport:
    cells: tuple[CellResult, ...]

    @property
    def failures(self) -> tuple[CellResult, ...]:
        return tuple(c for c in self.cells if not c.ok)


def _parse_plan_date(text: str) -> datetime:
    try:
        parsed = datetime.fromisoformat(str(text))
    except ValueError:
        raise DataError(f"unparseable window date {text!r}") from None
    return parsed


def _window_indices(series: MultivariateSeries, date_from, date_to) -> tuple[int, int]:
    lo = _parse_plan_date(date_from)
    hi = _parse_plan_date(date_to)
    # A date-only upper bound means "through the end of that day".
    if hi.time() == datetime.min.time():
        hi = hi.replace(hour=23, minute=59, second=59)
    if lo > hi:
        raise DataError(f"empty window: {date_from!r} is after {date_to!r}")
    ts = series.timestamps
    start = next((i for i, t in enumerate(ts) if t >= lo), None)
    end = next((i for i in range(len(ts) - 1, -1, -1) if ts[i] <= hi), None)
    if start is None or end is None or start > end:
        raise DataError(
            f"window {date_from!r}..{date_to!r} does not intersect the series"
        )
    return start, end


def make_artificial_gap(
    series: MultivariateSeries, date_from, date_to
) -> tuple[MultivariateSeries, np.ndarray]:
    """Blank the target inside [date_from, date_to] and keep the truth.

    The window must be fully observed beforehand; supporting columns are
    untouched. Returns the gapped series (GapSpec attached) and the
    held-out truth vector.
    """
    start, end = _window_indices(series, date_from, date_to)
    target = series.target_index
    window = series.values[start : end + 1, target]
    if np.isnan(window).any():
        raise DataError(
            "window overlaps values that are already missing; artificial "
            "gaps need fully observed truth"
        )
    truth = np.array(window)
    values = np.array(series.values)
    values[start : end + 1, target] = np.nan
    gap = GapSpec(start_index=start, end_index=end, target_index=target)
    return replace(series, values=values, gap=gap), truth


def rmse(predictions, truth) -> float:
    p = np.asarray(predictions, dtype=float)
    t = np.asarray(truth, dtype=float)
    if p.shape != t.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {t.shape}")
    if p.size == 0:
        raise ValueError("rmse of empty vectors is undefined")
    return float(np.sqrt(np.mean((p - t) ** 2)))


def _run_baseline(method: str, gapped: MultivariateSeries, frequency: int):
    column = gapped.target_column()
    if method == "locf":
        return baselines.locf(column)
    if method == "linear":
        return baselines.interpolate_linear(column)
    if method == "spline":
        return baselines.interpolate_spline(column)
    if method == "seasonal":
        return baselines.seasonal_interpolate(column, frequency)
    raise ConfigError(f"unknown baseline {method!r}")


def _run_mlp(method: str, gapped: MultivariateSeries, plan: ExperimentPlan, seed: int):
    surrogate = "rbf" if method == "mlp-rbf" else "gp"
    hpo_config = replace(plan.hpo, surrogate_kind=surrogate, seed=seed)
    scaled = apply_scaler(gapped, fit_scaler(gapped))
    best_arch, history = optimize(
        scaled, plan.space, hpo_config, train_config=plan.train, jobs=plan.jobs
    )
    model = finalize_model(
        gapped, best_arch, hpo_config.k, replace(plan.train, seed=seed)
    )
    filled = impute(gapped, model)
    return filled.target_column(), best_arch, history


def run_experiment(plan: ExperimentPlan) -> ImputationReport:
    """Run every (window, method) cell; failures are recorded, not fatal."""
    series = plan.series
    if not series.has_temporal_features:
        series = add_temporal_features(series)
    cells = []
    for w_idx, (date_from, date_to) in enumerate(plan.windows):
        gapped, truth = make_artificial_gap(series, date_from, date_to)
        start, end = gapped.gap.start_index, gapped.gap.end_index
        for method in plan.methods:
            cell_seed = plan.seed ^ w_idx ^ METHOD_IDS[method]
            t0 = time.perf_counter()
            arch = None
            try:
                if method in MLP_METHODS:
                    column, arch, _ = _run_mlp(method, gapped, plan, cell_seed)
                else:
                    column = _run_baseline(method, gapped, plan.seasonal_frequency)
                fill = column[start : end + 1]
                cells.append(
                    CellResult(
                        window_from=str(date_from),
                        window_to=str(date_to),
                        n_obs=len(truth),
                        method=method,
                        rmse=rmse(fill, truth),
                        fill=fill,
                        truth=truth,
                        architecture=arch,
                        seconds=time.perf_counter() - t0,
                    )
                )
            except GapfillError as exc:
                cells.append(
                    CellResult(
                        window_from=str(date_from),
                        window_to=str(date_to),
                        n_obs=len(truth),
                        method=method,
                        rmse=None,
                        fill=None,
                        truth=truth,
                        architecture=None,
                        seconds=time.perf_counter() - t0,
                        error=str(exc),
                    )
                )
    return ImputationReport(cells=tuple(cells))


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _cell_slug(cell: CellResult) -> str:
    return f"{cell.window_from}_{cell.window_to}_{cell.method}"


def emit_report(report: ImputationReport, directory) -> list[Path]:
    """Write results.csv, timings.csv, per-cell fill CSVs, and SVG charts.

    Wall-clock numbers live in timings.csv so that results.csv is exactly
    reproducible for a fixed seed. Returns the list of written paths.
    """
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
        probe = directory / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise DataError(f"cannot write to {directory}: {exc}") from exc

    written = []
    results = directory / "results.csv"
    with open(results, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            [
                "window_from",
                "window_to",
                "n_obs",
                "method",
                "rmse",
                "batch",
                "epochs",
                "layers",
                "nodes",
                "dropout",
                "lag",
            ]
        )
        for cell in report.cells:
            arch = cell.architecture
            writer.writerow(
                [
                    cell.window_from,
                    cell.window_to,
                    cell.n_obs,
                    cell.method,
                    _fmt(cell.rmse),
                    _fmt(arch.batch_size if arch else None),
                    _fmt(arch.epochs if arch else None),
                    _fmt(arch.layers if arch else None),
                    _fmt(arch.nodes_per_layer if arch else None),
                    _fmt(arch.dropout_rate if arch else None),
                    _fmt(arch.lag if arch else None),
                ]
            )
    written.append(results)

    timings = directory / "timings.csv"
    with open(timings, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["window_from", "window_to", "method", "seconds"])
        for cell in report.cells:
            writer.writerow(
                [cell.window_from, cell.window_to, cell.method, f"{cell.seconds:.3f}"]
            )
    written.append(timings)

    for cell in report.cells:
        if not cell.ok:
            continue
        slug = _cell_slug(cell)
        fill_csv = directory / f"fill_{slug}.csv"
        with open(fill_csv, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["time", "truth", "prediction"])
            for i, (t, p) in enumerate(zip(cell.truth, cell.fill)):
                writer.writerow([i, _fmt(float(t)), _fmt(float(p))])
        written.append(fill_csv)

        steps = np.arange(len(cell.truth))
        line_path = directory / f"line_{slug}.svg"
        line_chart(
            line_path,
            steps,
            [("truth", cell.truth), (cell.method, cell.fill)],
            title=f"Gap fill {cell.window_from}..{cell.window_to} ({cell.method})",
            x_label="gap step",
        )
        written.append(line_path)
        scatter_path = directory / f"scatter_{slug}.svg"
        scatter_chart(
            scatter_path,
            cell.truth,
            cell.fill,
            title=f"Truth vs prediction ({cell.method})",
        )
        written.append(scatter_path)
    return written
