"""Feed-forward MLP regression implemented directly on numpy.

Hidden layers use ReLU with inverted dropout; the output node is linear
(a scalar regression head). Training minimizes batch MSE with Adam over
shuffled mini-batches. Everything is deterministic given the seed, so a
(architecture, data, seed) triple fully determines the trained model.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DataError, TrainingDiverged
from .series import LaggedTable


@dataclass(frozen=True)
class MlpArchitecture:
    """The six tuned hyperparameters of one network.

    All hidden layers share the same width and dropout rate. Grid
    membership is enforced by the optimizer's search space, not here, so
    tiny hand-built networks remain constructible in tests.
    """

    batch_size: int
    epochs: int
    layers: int
    nodes_per_layer: int
    dropout_rate: float
    lag: int

    def __post_init__(self):
        if self.batch_size < 1:
            raise DataError("batch_size must be >= 1")
        if self.epochs < 1:
            raise DataError("epochs must be >= 1")
        if self.layers < 1:
            raise DataError("layers must be >= 1")
        if self.nodes_per_layer < 1:
            raise DataError("nodes_per_layer must be >= 1")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise DataError("dropout_rate must be in [0, 1)")
        if self.lag < 1:
            raise DataError("lag must be >= 1")

    def as_dict(self) -> dict:
        return {
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "layers": self.layers,
            "nodes_per_layer": self.nodes_per_layer,
            "dropout_rate": self.dropout_rate,
            "lag": self.lag,
        }


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer settings; the learning and moment rates are fixed knobs."""

    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    shuffle: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise DataError("learning_rate must be positive")


@dataclass(frozen=True)
class MlpModel:
    """Trained weights/biases; shapes chain input -> hidden* -> scalar."""

    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    architecture: MlpArchitecture
    input_width: int
    seed: int

    def __post_init__(self):
        weights = tuple(np.array(w, dtype=float) for w in self.weights)
        biases = tuple(np.array(b, dtype=float) for b in self.biases)
        for arr in (*weights, *biases):
            arr.flags.writeable = False
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "biases", biases)
        dims = [self.input_width]
        for w, b in zip(weights, biases):
            if w.shape[0] != dims[-1] or w.shape[1] != b.shape[0]:
                raise DataError("weight/bias shapes do not chain")
            dims.append(w.shape[1])
        if dims[-1] != 1:
            raise DataError("output layer must have exactly one node")

    @property
    def n_hidden_layers(self) -> int:
        return len(self.weights) - 1


def layer_dims(arch: MlpArchitecture, input_width: int) -> list[int]:
    return [input_width] + [arch.nodes_per_layer] * arch.layers + [1]


def init_model(arch: MlpArchitecture, input_width: int, seed: int) -> MlpModel:
    """He-style initialization: N(0, 2/fan_in) weights, zero biases."""
    if input_width < 1:
        raise DataError("input_width must be >= 1")
    rng = np.random.default_rng(seed)
    dims = layer_dims(arch, input_width)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        weights.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), (fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpModel(
        weights=tuple(weights),
        biases=tuple(biases),
        architecture=arch,
        input_width=input_width,
        seed=seed,
    )


def dropout_masks(
    rng: np.random.Generator,
    arch: MlpArchitecture,
    batch_size: int,
) -> list[np.ndarray] | None:
    """Inverted-dropout masks, one per hidden layer: 0 or 1/(1-rate).

    Scaling survivors at train time keeps the masked expectation equal to
    the unmasked activation, so inference needs no correction.
    """
    rate = arch.dropout_rate
    if rate == 0.0:
        return None
    keep = 1.0 - rate
    return [
        (rng.random((batch_size, arch.nodes_per_layer)) >= rate) / keep
        for _ in range(arch.layers)
    ]


def _forward_trace(weights, biases, x, masks):
    """Forward pass keeping pre-activations and activations for backprop."""
    pre, post = [], [x]
    a = x
    for i in range(len(weights) - 1):
        z = a @ weights[i] + biases[i]
        a = np.maximum(z, 0.0)
        if masks is not None:
            a = a * masks[i]
        pre.append(z)
        post.append(a)
    out = (a @ weights[-1] + biases[-1])[:, 0]
    return pre, post, out


def forward_batch(
    model: MlpModel, x: np.ndarray, masks: list[np.ndarray] | None = None
) -> np.ndarray:
    """Predict a batch; masks enable train-mode dropout."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != model.input_width:
        raise DataError(
            f"input width {x.shape[1]} does not match model width "
            f"{model.input_width}"
        )
    return _forward_trace(model.weights, model.biases, x, masks)[2]


def forward(
    model: MlpModel,
    row: np.ndarray,
    mode: str = "infer",
    dropout_seed: int | None = None,
) -> float:
    """Predict one input row.

    In "train" mode each hidden unit is zeroed with probability
    dropout_rate (inverted dropout); "infer" mode is deterministic.
    """
    if mode not in ("train", "infer"):
        raise DataError(f"unknown forward mode {mode!r}")
    masks = None
    if mode == "train":
        rng = np.random.default_rng(dropout_seed)
        masks = dropout_masks(rng, model.architecture, 1)
    return float(forward_batch(model, row, masks)[0])


def mse(predictions: Sequence[float], targets: Sequence[float]) -> float:
    p = np.asarray(predictions, dtype=float)
    t = np.asarray(targets, dtype=float)
    if p.shape != t.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {t.shape}")
    if p.size == 0:
        raise ValueError("mse of empty vectors is undefined")
    return float(np.mean((p - t) ** 2))


def gradients(
    model: MlpModel,
    batch_inputs: np.ndarray,
    batch_targets: np.ndarray,
    masks: list[np.ndarray] | None = None,
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Reverse-mode gradient of the batch MSE wrt every weight and bias.

    ReLU's subgradient at exactly 0 is taken as 0. Returns (dW, db) lists
    aligned with model.weights / model.biases.
    """
    x = np.atleast_2d(np.asarray(batch_inputs, dtype=float))
    y = np.asarray(batch_targets, dtype=float).reshape(-1)
    grads = _backprop(list(model.weights), list(model.biases), x, y, masks)
    return grads[0], grads[1]


def _backprop(weights, biases, x, y, masks):
    """Shared backprop core; also returns the batch predictions."""
    pre, post, out = _forward_trace(weights, biases, x, masks)
    b = x.shape[0]
    delta = (2.0 / b) * (out - y)  # dL/d(out), L = mean squared error
    d_weights = [None] * len(weights)
    d_biases = [None] * len(biases)
    d_weights[-1] = post[-1].T @ delta[:, None]
    d_biases[-1] = np.array([delta.sum()])
    g = delta[:, None] @ weights[-1].T
    for i in range(len(weights) - 2, -1, -1):
        if masks is not None:
            g = g * masks[i]
        g = g * (pre[i] > 0)
        d_weights[i] = post[i].T @ g
        d_biases[i] = g.sum(axis=0)
        if i > 0:
            g = g @ weights[i].T
    return d_weights, d_biases, out


@dataclass
class AdamState:
    """First/second moment accumulators, one pair per parameter array."""

    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_params(cls, params: list[np.ndarray]) -> "AdamState":
        return cls(
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
        )


def adam_step(
    params: list[np.ndarray],
    grads: list[np.ndarray],
    state: AdamState,
    config: TrainConfig,
    t: int,
) -> tuple[list[np.ndarray], AdamState]:
    """One Adam update with bias correction; t counts steps from 1."""
    if t < 1:
        raise DataError("Adam step index starts at 1")
    b1, b2, eps, lr = config.beta1, config.beta2, config.epsilon, config.learning_rate
    new_params = []
    for i, (p, g) in enumerate(zip(params, grads)):
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g
        m_hat = state.m[i] / (1.0 - b1**t)
        v_hat = state.v[i] / (1.0 - b2**t)
        new_params.append(p - lr * m_hat / (np.sqrt(v_hat) + eps))
    return new_params, state


def _fit(
    inputs: np.ndarray,
    outputs: np.ndarray,
    arch: MlpArchitecture,
    config: TrainConfig,
) -> MlpModel:
    """Run the full training loop on one table and return the model."""
    r, width = inputs.shape
    model0 = init_model(arch, width, config.seed)
    weights = [np.array(w) for w in model0.weights]
    biases = [np.array(b) for b in model0.biases]
    rng = np.random.default_rng(config.seed)

    n_params = len(weights)
    state = AdamState.for_params(weights + biases)
    b1, b2, eps, lr = config.beta1, config.beta2, config.epsilon, config.learning_rate
    t = 0
    for epoch in range(arch.epochs):
        order = rng.permutation(r) if config.shuffle else np.arange(r)
        for lo in range(0, r, arch.batch_size):
            batch = order[lo : lo + arch.batch_size]
            xb, yb = inputs[batch], outputs[batch]
            masks = dropout_masks(rng, arch, len(batch))
            # overflow here is the divergence signal, not a numerics bug
            with np.errstate(over="ignore", invalid="ignore"):
                dw, db, out = _backprop(weights, biases, xb, yb, masks)
                batch_loss = float(np.mean((out - yb) ** 2))
            if not np.isfinite(batch_loss):
                raise TrainingDiverged(epoch=epoch, step=t + 1, loss=batch_loss)
            t += 1
            c1, c2 = 1.0 - b1**t, 1.0 - b2**t
            for i, g in enumerate(dw + db):
                m = state.m[i] = b1 * state.m[i] + (1.0 - b1) * g
                v = state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g
                target = weights[i] if i < n_params else biases[i - n_params]
                target -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return MlpModel(
        weights=tuple(weights),
        biases=tuple(biases),
        architecture=arch,
        input_width=width,
        seed=config.seed,
    )


def train(
    table_train: LaggedTable,
    table_val: LaggedTable,
    arch: MlpArchitecture,
    config: TrainConfig,
) -> tuple[MlpModel, float]:
    """Train on the train table, return (model, validation MSE).

    Runs epochs x ceil(R/batch) Adam steps over shuffled mini-batches; the
    last batch of an epoch may be short. Aborts with TrainingDiverged if a
    batch loss goes non-finite.
    """
    for name, tbl in (("train", table_train), ("validation", table_val)):
        if tbl.n_rows == 0:
            raise DataError(f"{name} table is empty")
        if np.isnan(tbl.inputs).any() or np.isnan(tbl.outputs).any():
            raise DataError(f"{name} table contains missing values")
    if table_train.width != table_val.width:
        raise DataError("train/validation widths disagree")
    if table_train.width % (arch.lag + 1) != 0:
        raise DataError(
            f"table width {table_train.width} inconsistent with lag {arch.lag}"
        )
    model = _fit(table_train.inputs, table_train.outputs, arch, config)
    val_mse = mse(forward_batch(model, table_val.inputs), table_val.outputs)
    if not np.isfinite(val_mse):
        raise TrainingDiverged(epoch=arch.epochs, step=-1, loss=val_mse)
    return model, val_mse


def model_to_dict(model: MlpModel) -> dict:
    """JSON-serializable form: architecture, width, seed, parameter arrays."""
    return {
        "architecture": model.architecture.as_dict(),
        "input_width": model.input_width,
        "seed": model.seed,
        "weights": [w.tolist() for w in model.weights],
        "biases": [b.tolist() for b in model.biases],
    }


def model_from_dict(doc: dict) -> MlpModel:
    try:
        arch = MlpArchitecture(**doc["architecture"])
        return MlpModel(
            weights=tuple(np.array(w, dtype=float) for w in doc["weights"]),
            biases=tuple(np.array(b, dtype=float) for b in doc["biases"]),
            architecture=arch,
            input_width=int(doc["input_width"]),
            seed=int(doc["seed"]),
        )
    except (KeyError, TypeError) as exc:
        raise DataError(f"malformed model document: {exc}") from exc
