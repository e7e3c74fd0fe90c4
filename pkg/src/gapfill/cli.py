"""Command-line entry point: validate, hpo, impute, evaluate.

A JSON configuration file drives everything; flags override config values.
Exit codes: 0 success, 1 usage/config error, 2 data error, 3 runtime
failure. GAPFILL_SEED serves as a seed fallback when neither a flag nor
the config provides one.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, GapfillError
from .evaluation import (
    METHOD_IDS,
    ExperimentPlan,
    emit_report,
    run_experiment,
)
from .hpo import HpoConfig, HyperparameterSpace, optimize, write_history_csv
from .imputer import finalize_model, impute, load_model, save_model
from .mlp import TrainConfig
from .series import (
    MultivariateSeries,
    add_temporal_features,
    apply_scaler,
    find_gap,
    fit_scaler,
    read_csv_table,
    validate_series,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_RUNTIME = 3


@dataclass(frozen=True)
class RunConfig:
    """Schema-checked contents of the JSON configuration file."""

    dataset: str
    time_column: str
    target_column: str
    frequency: int = 365
    methods: tuple[str, ...] = ("mlp-rbf", "linear", "locf")
    windows: tuple[tuple[str, str], ...] = ()
    output_dir: str = "gapfill_out"
    seed: int | None = None
    jobs: int = 1
    hpo: HpoConfig = HpoConfig()
    train: TrainConfig = TrainConfig()
    space: HyperparameterSpace = field(default_factory=HyperparameterSpace)


def _type_name(expected) -> str:
    return "/".join(t.__name__ for t in expected)


def _check(errors, doc: dict, path: str, key: str, expected, required=False):
    if key not in doc:
        if required:
            errors.append(f"{path}{key}: required key is missing")
        return None
    value = doc[key]
    if expected is bool and not isinstance(value, bool):
        errors.append(f"{path}{key}: expected bool, got {type(value).__name__}")
        return None
    if expected is not bool and isinstance(value, bool):
        errors.append(f"{path}{key}: expected {_type_name(expected)}, got bool")
        return None
    if expected is not bool and not isinstance(value, expected):
        errors.append(
            f"{path}{key}: expected {_type_name(expected)}, "
            f"got {type(value).__name__}"
        )
        return None
    return value


_TOP_KEYS = {
    "dataset",
    "time_column",
    "target_column",
    "frequency",
    "methods",
    "windows",
    "output_dir",
    "seed",
    "jobs",
    "hpo",
    "train",
    "space",
}
_HPO_KEYS = {"n0", "n", "k", "surrogate", "seed"}
_TRAIN_KEYS = {"learning_rate", "shuffle"}
_SPACE_KEYS = {"batch_sizes", "epoch_counts", "layer_counts", "node_counts", "dropout_rates", "lags"}


def load_config(path) -> RunConfig:
    """Parse and validate the JSON config; unknown keys are rejected.

    All violations are collected and reported together, each as
    `<json-path>: <message>`.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")

    errors: list[str] = []
    for key in sorted(set(doc) - _TOP_KEYS):
        errors.append(f"{key}: unknown key")

    dataset = _check(errors, doc, "", "dataset", (str,), required=True)
    time_column = _check(errors, doc, "", "time_column", (str,), required=True)
    target_column = _check(errors, doc, "", "target_column", (str,), required=True)
    frequency = _check(errors, doc, "", "frequency", (int,))
    output_dir = _check(errors, doc, "", "output_dir", (str,))
    seed = _check(errors, doc, "", "seed", (int,))
    jobs = _check(errors, doc, "", "jobs", (int,))

    methods = _check(errors, doc, "", "methods", (list,))
    if methods is not None:
        for i, m in enumerate(methods):
            if not isinstance(m, str) or m not in METHOD_IDS:
                errors.append(
                    f"methods[{i}]: expected one of {sorted(METHOD_IDS)}, got {m!r}"
                )

    windows = _check(errors, doc, "", "windows", (list,))
    parsed_windows = []
    if windows is not None:
        for i, w in enumerate(windows):
            if (
                not isinstance(w, list)
                or len(w) != 2
                or not all(isinstance(d, str) for d in w)
            ):
                errors.append(f"windows[{i}]: expected a [from, to] date pair")
            else:
                parsed_windows.append((w[0], w[1]))

    hpo_doc = _check(errors, doc, "", "hpo", (dict,)) or {}
    for key in sorted(set(hpo_doc) - _HPO_KEYS):
        errors.append(f"hpo.{key}: unknown key")
    hpo_kwargs = {}
    for key, target in (("n0", "n0"), ("n", "n"), ("k", "k"), ("seed", "seed")):
        value = _check(errors, hpo_doc, "hpo.", key, (int,))
        if value is not None:
            hpo_kwargs[target] = value
    surrogate = _check(errors, hpo_doc, "hpo.", "surrogate", (str,))
    if surrogate is not None:
        hpo_kwargs["surrogate_kind"] = surrogate

    train_doc = _check(errors, doc, "", "train", (dict,)) or {}
    for key in sorted(set(train_doc) - _TRAIN_KEYS):
        errors.append(f"train.{key}: unknown key")
    train_kwargs = {}
    lr = _check(errors, train_doc, "train.", "learning_rate", (int, float))
    if lr is not None:
        train_kwargs["learning_rate"] = float(lr)
    shuffle = _check(errors, train_doc, "train.", "shuffle", bool)
    if shuffle is not None:
        train_kwargs["shuffle"] = shuffle

    space_doc = _check(errors, doc, "", "space", (dict,)) or {}
    for key in sorted(set(space_doc) - _SPACE_KEYS):
        errors.append(f"space.{key}: unknown key")
    space_kwargs = {}
    for key in _SPACE_KEYS & set(space_doc):
        values = _check(errors, space_doc, "space.", key, (list,))
        if values is not None:
            if not all(isinstance(v, (int, float)) for v in values):
                errors.append(f"space.{key}: expected a list of numbers")
            else:
                caster = float if key == "dropout_rates" else int
                space_kwargs[key] = tuple(caster(v) for v in values)

    if errors:
        raise ConfigError("invalid configuration:\n" + "\n".join(errors))

    try:
        hpo_config = HpoConfig(**hpo_kwargs)
        train_config = TrainConfig(**train_kwargs)
        space = HyperparameterSpace(**space_kwargs)
        return RunConfig(
            dataset=dataset,
            time_column=time_column,
            target_column=target_column,
            frequency=frequency if frequency is not None else 365,
            methods=tuple(methods) if methods is not None else RunConfig.methods,
            windows=tuple(parsed_windows),
            output_dir=output_dir if output_dir is not None else "gapfill_out",
            seed=seed,
            jobs=jobs if jobs is not None else 1,
            hpo=hpo_config,
            train=train_config,
            space=space,
        )
    except (ConfigError, DataError, TypeError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc


def _resolve_seed(flag_seed, config_seed) -> int:
    if flag_seed is not None:
        return flag_seed
    if config_seed is not None:
        return config_seed
    env = os.environ.get("GAPFILL_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"GAPFILL_SEED is not an integer: {env!r}") from None
    return 0


def _load_series(config: RunConfig) -> MultivariateSeries:
    raw = read_csv_table(config.dataset)
    return validate_series(
        raw, target=config.target_column, time_column=config.time_column
    )


def _describe_step(series: MultivariateSeries) -> str:
    step = series.step
    if step.days and not step.seconds:
        return f"{step.days}d"
    hours = step.days * 24 + step.seconds // 3600
    if hours and not step.seconds % 3600:
        return f"{hours}h"
    return str(step)


def cmd_validate(args) -> int:
    series = validate_series(
        read_csv_table(args.csv), target=args.target, time_column=args.time
    )
    gap = find_gap(series)
    if gap is None:
        gap_text = "none"
    else:
        gap_text = (
            f"rows {gap.start_index}..{gap.end_index} ({gap.length} values)"
        )
    print(
        f"S={series.n_steps}, N={series.n_vars}, step={_describe_step(series)}, "
        f"gaps: {gap_text}"
    )
    return EXIT_OK


def cmd_hpo(args) -> int:
    config = load_config(args.config)
    hpo_config = config.hpo
    overrides = {}
    if args.surrogate is not None:
        overrides["surrogate_kind"] = args.surrogate
    if args.budget is not None:
        overrides["n"] = args.budget
    if args.init is not None:
        overrides["n0"] = args.init
    if args.trials is not None:
        overrides["k"] = args.trials
    overrides["seed"] = _resolve_seed(args.seed, config.seed)
    try:
        hpo_config = replace(hpo_config, **overrides)
    except ConfigError:
        raise
    series = add_temporal_features(_load_series(config))
    scaled = apply_scaler(series, fit_scaler(series))
    best_arch, history = optimize(
        scaled, config.space, hpo_config, train_config=config.train, jobs=config.jobs
    )
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_history_csv(history, out_dir / "history.csv")
    with open(out_dir / "best_architecture.json", "w", encoding="utf-8") as fh:
        json.dump(best_arch.as_dict(), fh, indent=1)
        fh.write("\n")
    model = finalize_model(
        series, best_arch, hpo_config.k, replace(config.train, seed=hpo_config.seed)
    )
    save_model(model, out_dir / "model.json")
    best_mse = min(rec.performance for rec in history)
    print(f"evaluated {len(history)} architectures")
    print(f"best architecture: {best_arch.as_dict()}")
    print(f"best mean validation MSE: {best_mse:.6g}")
    print(f"wrote {out_dir / 'history.csv'}, best_architecture.json, model.json")
    return EXIT_OK


def _write_series_csv(
    series: MultivariateSeries, imputed_mask, path, time_column: str
) -> None:
    import csv as _csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = _csv.writer(fh, lineterminator="\n")
        writer.writerow([time_column, *series.names, "imputed"])
        date_only = all(
            t.hour == 0 and t.minute == 0 and t.second == 0 for t in series.timestamps
        )
        for i, ts in enumerate(series.timestamps):
            stamp = ts.date().isoformat() if date_only else ts.isoformat(timespec="minutes")
            row = [stamp]
            for v in series.values[i]:
                row.append("NaN" if np.isnan(v) else repr(float(v)))
            row.append("true" if imputed_mask[i] else "false")
            writer.writerow(row)


def cmd_impute(args) -> int:
    config = load_config(args.config)
    model = load_model(args.model)
    series = _load_series(config)
    featured = add_temporal_features(series)
    gap = find_gap(featured)
    filled = impute(featured, model)
    mask = np.zeros(series.n_steps, dtype=bool)
    if gap is not None:
        mask[gap.start_index : gap.end_index + 1] = True
    # Strip the appended calendar columns so the output mirrors the input.
    original = MultivariateSeries(
        timestamps=series.timestamps,
        values=filled.values[:, : series.n_vars],
        names=series.names,
        target_index=series.target_index,
    )
    _write_series_csv(original, mask, args.out, config.time_column)
    n = int(mask.sum())
    print(f"imputed {n} value(s); wrote {args.out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    config = load_config(args.config)
    if not config.windows:
        raise ConfigError("evaluate requires at least one window in the config")
    seed = _resolve_seed(args.seed, config.seed)
    series = _load_series(config)
    plan = ExperimentPlan(
        series=series,
        windows=config.windows,
        methods=config.methods,
        hpo=config.hpo,
        train=config.train,
        seed=seed,
        seasonal_frequency=config.frequency,
        space=config.space,
        jobs=args.jobs if args.jobs is not None else config.jobs,
    )
    report = run_experiment(plan)
    written = emit_report(report, config.output_dir)
    for cell in report.cells:
        if cell.ok:
            print(
                f"{cell.window_from}..{cell.window_to} {cell.method}: "
                f"RMSE={cell.rmse:.6g}"
            )
        else:
            print(
                f"{cell.window_from}..{cell.window_to} {cell.method}: "
                f"FAILED ({cell.error})"
            )
    n_ok = sum(1 for c in report.cells if c.ok)
    print(f"{n_ok}/{len(report.cells)} cells succeeded; wrote {len(written)} files")
    if n_ok == 0:
        raise GapfillError("every cell failed")
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    """argparse that raises instead of exiting, so exit codes stay ours."""

    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="gapfill",
        description=(
            "Fill one long gap in a multivariate time series with a "
            "surrogate-tuned MLP, and benchmark against interpolation "
            "baselines. Flags always override config file values."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a CSV dataset and summarize it")
    p.add_argument("--csv", required=True, help="dataset path")
    p.add_argument("--time", required=True, help="time column name")
    p.add_argument("--target", required=True, help="target column name")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("hpo", help="search for the best MLP architecture")
    p.add_argument("--config", required=True, help="JSON config path")
    p.add_argument("--surrogate", choices=("rbf", "gp"), help="surrogate model")
    p.add_argument("--budget", type=int, help="total evaluations (n)")
    p.add_argument("--init", type=int, help="initial design size (n0)")
    p.add_argument("--trials", type=int, help="training repetitions per point (k)")
    p.add_argument("--seed", type=int, help="master seed")
    p.set_defaults(func=cmd_hpo)

    p = sub.add_parser("impute", help="fill the gap using a trained model")
    p.add_argument("--config", required=True, help="JSON config path")
    p.add_argument("--model", required=True, help="trained model JSON path")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_impute)

    p = sub.add_parser("evaluate", help="run the artificial-gap benchmark")
    p.add_argument("--config", required=True, help="JSON config path")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--jobs", type=int, help="max concurrent trainings")
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except GapfillError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
