"""Sequential gap filling with a seed ensemble of trained networks.

The gap is filled first-to-last; each step's input window mixes observed
values with the estimates already written for earlier gap steps, so the
fill is causal by construction. The final predictor is a k-member ensemble
(identical architecture, different seeds) retrained on every complete row,
with per-step predictions averaged.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .errors import DataError
from .mlp import (
    MlpArchitecture,
    MlpModel,
    TrainConfig,
    _fit,
    forward_batch,
    model_from_dict,
    model_to_dict,
)
from .series import (
    MultivariateSeries,
    Scaler,
    apply_scaler,
    build_lagged_table,
    find_gap,
    fit_scaler,
    invert_target,
    reduce_lagged_table,
)


@dataclass(frozen=True)
class ImputationModel:
    """Seed ensemble plus the scaler its members were trained under."""

    members: tuple[MlpModel, ...]
    scaler: Scaler
    architecture: MlpArchitecture

    def __post_init__(self):
        if len(self.members) < 1:
            raise DataError("ensemble needs at least one member")
        widths = {m.input_width for m in self.members}
        if len(widths) != 1:
            raise DataError("ensemble members disagree on input width")
        if any(m.architecture != self.architecture for m in self.members):
            raise DataError("ensemble members must share one architecture")

    @property
    def input_width(self) -> int:
        return self.members[0].input_width


def finalize_model(
    series: MultivariateSeries,
    best_arch: MlpArchitecture,
    k: int,
    train_config: TrainConfig,
) -> ImputationModel:
    """Retrain k seeded models on every complete lagged row of the series.

    `series` is the gapped series in original units (temporal features
    included); the scaler is fitted here from its observed entries, which
    reproduces the normalization the architecture search saw. Validation
    rows are deliberately folded back into the fit.
    """
    if k < 1:
        raise DataError("k must be >= 1")
    scaler = fit_scaler(series)
    scaled = apply_scaler(series, scaler)
    reduced = reduce_lagged_table(build_lagged_table(scaled, best_arch.lag))
    if reduced.n_rows == 0:
        raise DataError("no complete rows available to train the final model")
    members = tuple(
        _fit(
            reduced.inputs,
            reduced.outputs,
            best_arch,
            replace(train_config, seed=train_config.seed ^ i),
        )
        for i in range(k)
    )
    return ImputationModel(members=members, scaler=scaler, architecture=best_arch)


def impute(series: MultivariateSeries, model: ImputationModel) -> MultivariateSeries:
    """Fill the target gap sequentially, earliest missing value first.

    Each missing time t is predicted from the normalized observation
    vectors of the lag+1 preceding steps (observed values, plus estimates
    already produced for earlier gap steps), averaging the ensemble members
    in inference mode, then denormalized into the output. Observed entries
    are returned bit-identical.
    """
    gap = series.gap if series.gap is not None else find_gap(series)
    if gap is None:
        return series
    lag = model.architecture.lag
    n = series.n_vars
    expected = (lag + 1) * n
    if model.input_width != expected:
        raise DataError(
            f"model expects input width {model.input_width}, series with "
            f"lag {lag} produces {expected}"
        )
    if gap.start_index < lag + 1:
        raise DataError(
            f"gap needs {lag + 1} observed steps of history, only "
            f"{gap.start_index} precede it"
        )
    working = np.array(apply_scaler(series, model.scaler).values)
    if np.isnan(
        working[gap.start_index - lag - 1 : gap.start_index, :]
    ).any():
        raise DataError("history window before the gap contains missing values")
    support = np.delete(
        working[gap.start_index : gap.end_index + 1], gap.target_index, axis=1
    )
    if np.isnan(support).any():
        raise DataError("supporting variables are missing inside the gap window")

    estimates = np.empty(gap.length)
    for offset, t in enumerate(range(gap.start_index, gap.end_index + 1)):
        window = working[t - lag - 1 : t].reshape(1, -1)
        member_preds = [forward_batch(m, window)[0] for m in model.members]
        value = float(np.mean(member_preds))
        working[t, gap.target_index] = value
        estimates[offset] = value

    filled = np.array(series.values)
    filled[gap.start_index : gap.end_index + 1, gap.target_index] = invert_target(
        estimates, model.scaler
    )
    return replace(series, values=filled, gap=None)


def save_model(model: ImputationModel, path) -> None:
    """Persist the ensemble as a JSON document."""
    doc = {
        "architecture": model.architecture.as_dict(),
        "input_width": model.input_width,
        "scaler": {
            "mins": model.scaler.mins.tolist(),
            "maxs": model.scaler.maxs.tolist(),
            "target_index": model.scaler.target_index,
        },
        "members": [model_to_dict(m) for m in model.members],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_model(path) -> ImputationModel:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataError(f"model file is not valid JSON: {exc}") from exc
    try:
        arch = MlpArchitecture(**doc["architecture"])
        scaler = Scaler(
            mins=np.array(doc["scaler"]["mins"], dtype=float),
            maxs=np.array(doc["scaler"]["maxs"], dtype=float),
            target_index=int(doc["scaler"]["target_index"]),
        )
        members = tuple(model_from_dict(m) for m in doc["members"])
    except (KeyError, TypeError) as exc:
        raise DataError(f"malformed model document: {exc}") from exc
    return ImputationModel(members=members, scaler=scaler, architecture=arch)
