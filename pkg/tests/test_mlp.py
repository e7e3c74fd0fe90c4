"""Tests for the from-scratch MLP: forward, gradients, Adam, training."""

import numpy as np
import pytest

from gapfill.errors import DataError, TrainingDiverged
from gapfill.mlp import (
    AdamState,
    MlpArchitecture,
    MlpModel,
    TrainConfig,
    adam_step,
    dropout_masks,
    forward,
    forward_batch,
    gradients,
    init_model,
    model_from_dict,
    model_to_dict,
    mse,
    train,
)
from gapfill.series import LaggedTable

from conftest import make_series
from gapfill.series import build_lagged_table, reduce_lagged_table, split_train_val


def tiny_arch(**overrides):
    base = dict(
        batch_size=4, epochs=10, layers=1, nodes_per_layer=3, dropout_rate=0.0, lag=1
    )
    base.update(overrides)
    return MlpArchitecture(**base)


def hand_model(weights, biases, arch=None):
    weights = [np.asarray(w, dtype=float) for w in weights]
    biases = [np.asarray(b, dtype=float) for b in biases]
    arch = arch or tiny_arch(
        layers=len(weights) - 1, nodes_per_layer=weights[0].shape[1]
    )
    return MlpModel(
        weights=tuple(weights),
        biases=tuple(biases),
        architecture=arch,
        input_width=weights[0].shape[0],
        seed=0,
    )


def make_table(inputs, outputs, lag=1):
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    return LaggedTable(
        inputs=inputs,
        outputs=np.asarray(outputs, dtype=float),
        row_origin=np.arange(lag + 2, lag + 2 + len(inputs)),
        lag=lag,
    )


class TestInit:
    def test_deterministic_given_seed(self):
        a = init_model(tiny_arch(), 6, seed=42)
        b = init_model(tiny_arch(), 6, seed=42)
        for wa, wb in zip(a.weights, b.weights):
            np.testing.assert_array_equal(wa, wb)

    def test_biases_zero(self):
        model = init_model(tiny_arch(layers=3), 5, seed=1)
        for b in model.biases:
            assert (b == 0).all()

    def test_weight_variance_tracks_fan_in(self):
        # sample-statistics oracle: empirical variance within 20% of 2/fan_in
        fan_in = 50
        arch = tiny_arch(nodes_per_layer=50)
        samples = []
        for seed in range(10):
            model = init_model(arch, fan_in, seed=seed)
            samples.append(model.weights[0].ravel())
        variance = np.concatenate(samples).var()
        expected = 2.0 / fan_in
        assert abs(variance - expected) / expected < 0.20

    def test_shapes_chain_to_scalar_output(self):
        model = init_model(tiny_arch(layers=4, nodes_per_layer=7), 9, seed=0)
        assert model.weights[0].shape == (9, 7)
        assert model.weights[-1].shape == (7, 1)
        assert model.biases[-1].shape == (1,)


class TestForward:
    def test_zero_weights_output_is_bias(self):
        model = hand_model(
            [np.zeros((3, 2)), np.zeros((2, 1))], [np.zeros(2), np.array([1.75])]
        )
        assert forward(model, np.array([5.0, -2.0, 7.0])) == 1.75

    def test_relu_kills_negative_path(self):
        # 1-1-1 network, unit weights, zero biases, input -2
        model = hand_model([np.array([[1.0]]), np.array([[1.0]])], [np.zeros(1), np.zeros(1)])
        assert forward(model, np.array([-2.0])) == 0.0
        assert forward(model, np.array([3.0])) == 3.0

    def test_fixed_network_matches_matrix_oracle(self):
        w1 = np.array([[0.2, -0.5, 1.0], [0.7, 0.1, -0.3]])
        b1 = np.array([0.1, -0.2, 0.05])
        w2 = np.array([[1.5], [-2.0], [0.25]])
        b2 = np.array([0.4])
        model = hand_model([w1, w2], [b1, b2])
        x = np.array([0.3, -1.2])
        # independent computation with plain matrix arithmetic
        hidden = np.maximum(x @ w1 + b1, 0.0)
        expected = float((hidden @ w2 + b2)[0])
        assert abs(forward(model, x) - expected) < 1e-12

    def test_width_mismatch_rejected(self):
        model = init_model(tiny_arch(), 4, seed=0)
        with pytest.raises(DataError, match="width"):
            forward(model, np.ones(5))

    def test_infer_mode_is_pure(self):
        model = init_model(tiny_arch(dropout_rate=0.5), 4, seed=0)
        x = np.ones(4)
        assert forward(model, x) == forward(model, x)

    def test_train_mode_dropout_changes_output(self):
        model = init_model(tiny_arch(dropout_rate=0.5, nodes_per_layer=20), 4, seed=0)
        x = np.ones(4)
        outs = {forward(model, x, mode="train", dropout_seed=s) for s in range(8)}
        assert len(outs) > 1


class TestMse:
    def test_identical_vectors(self):
        assert mse([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == 0.0

    def test_direct_formula(self):
        assert mse([0.0, 0.0], [3.0, 4.0]) == 12.5

    def test_random_vectors_against_summation_oracle(self):
        rng = np.random.default_rng(0)
        p, t = rng.normal(size=100), rng.normal(size=100)
        total = 0.0
        for a, b in zip(p, t):
            total += (a - b) ** 2
        assert abs(mse(p, t) - total / 100) < 1e-12

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            mse([], [])


def finite_difference_gradients(model, x, y, masks, h=1e-6):
    """Central finite differences over every parameter."""
    def loss(weights, biases):
        probe = MlpModel(
            weights=tuple(weights),
            biases=tuple(biases),
            architecture=model.architecture,
            input_width=model.input_width,
            seed=model.seed,
        )
        out = forward_batch(probe, x, masks)
        return float(np.mean((out - y) ** 2))

    dw, db = [], []
    weights = [np.array(w) for w in model.weights]
    biases = [np.array(b) for b in model.biases]
    for li, w in enumerate(weights):
        grad = np.zeros_like(w)
        for idx in np.ndindex(w.shape):
            orig = w[idx]
            w[idx] = orig + h
            up = loss(weights, biases)
            w[idx] = orig - h
            down = loss(weights, biases)
            w[idx] = orig
            grad[idx] = (up - down) / (2 * h)
        dw.append(grad)
    for li, b in enumerate(biases):
        grad = np.zeros_like(b)
        for idx in np.ndindex(b.shape):
            orig = b[idx]
            b[idx] = orig + h
            up = loss(weights, biases)
            b[idx] = orig - h
            down = loss(weights, biases)
            b[idx] = orig
            grad[idx] = (up - down) / (2 * h)
        db.append(grad)
    return dw, db


def max_relative_error(analytic, numeric):
    worst = 0.0
    for a, n in zip(analytic, numeric):
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), 1.0)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst


class TestGradients:
    def test_zero_error_batch_gives_zero_gradients(self):
        model = hand_model(
            [np.zeros((2, 2)), np.zeros((2, 1))], [np.zeros(2), np.array([1.0])]
        )
        x = np.array([[0.5, -0.5], [1.0, 2.0]])
        y = np.array([1.0, 1.0])  # prediction is exactly the output bias
        dw, db = gradients(model, x, y)
        for g in dw + db:
            assert (g == 0).all()

    def test_output_bias_gradient_single_sample(self):
        model = init_model(tiny_arch(), 3, seed=5)
        x = np.array([[0.1, 0.2, 0.3]])
        y = np.array([0.7])
        pred = forward_batch(model, x)[0]
        _, db = gradients(model, x, y)
        assert abs(db[-1][0] - 2 * (pred - y[0])) < 1e-12

    def test_random_model_matches_finite_differences(self):
        rng = np.random.default_rng(2024)
        arch = tiny_arch(layers=2, nodes_per_layer=4)
        model = init_model(arch, 6, seed=3)
        x = rng.normal(size=(5, 6))
        y = rng.normal(size=5)
        dw, db = gradients(model, x, y)
        fw, fb = finite_difference_gradients(model, x, y, None)
        assert max_relative_error(dw + db, fw + fb) < 1e-5

    def test_gradients_with_dropout_masks(self):
        rng = np.random.default_rng(77)
        arch = tiny_arch(layers=2, nodes_per_layer=4, dropout_rate=0.3)
        model = init_model(arch, 5, seed=8)
        x = rng.normal(size=(4, 5))
        y = rng.normal(size=4)
        masks = dropout_masks(np.random.default_rng(1), arch, 4)
        dw, db = gradients(model, x, y, masks)
        fw, fb = finite_difference_gradients(model, x, y, masks)
        assert max_relative_error(dw + db, fw + fb) < 1e-5


class TestAdam:
    def test_zero_gradient_leaves_parameters(self):
        params = [np.array([1.0, -2.0])]
        grads = [np.zeros(2)]
        state = AdamState.for_params(params)
        new, _ = adam_step(params, grads, state, TrainConfig(), t=1)
        np.testing.assert_array_equal(new[0], params[0])

    def test_first_step_hand_computed(self):
        # bias-corrected first step: m_hat = g, v_hat = g^2
        params = [np.array([0.0])]
        grads = [np.array([1.0])]
        state = AdamState.for_params(params)
        new, _ = adam_step(params, grads, state, TrainConfig(), t=1)
        expected = -1e-3 * 1.0 / (1.0 + 1e-8)
        assert abs(new[0][0] - expected) < 1e-18
        assert abs(new[0][0] + 9.9999999e-4) < 1e-12

    def test_identical_runs_identical_trajectories(self):
        rng = np.random.default_rng(0)
        grads_seq = [
            [rng.normal(size=3)] for _ in range(20)
        ]

        def run():
            params = [np.zeros(3)]
            state = AdamState.for_params(params)
            for t, g in enumerate(grads_seq, start=1):
                params, state = adam_step(params, g, state, TrainConfig(), t)
            return params[0]

        np.testing.assert_array_equal(run(), run())


class TestDropoutMasks:
    def test_no_dropout_returns_none(self):
        assert dropout_masks(np.random.default_rng(0), tiny_arch(), 4) is None

    def test_inverted_dropout_preserves_expectation(self):
        # expectation of a masked next-layer pre-activation over 1e5 masks
        rng = np.random.default_rng(42)
        arch = tiny_arch(dropout_rate=0.4, nodes_per_layer=12)
        activation = rng.random(12) + 0.5
        weight = rng.normal(size=12)
        reference = activation @ weight
        rate = arch.dropout_rate
        masks = (rng.random((100_000, 12)) >= rate) / (1 - rate)
        sampled = (masks * activation) @ weight
        assert abs(sampled.mean() - reference) / abs(reference) < 0.02


class TestTrain:
    def linear_tables(self, rows=120, width=4, seed=0):
        rng = np.random.default_rng(seed)
        x = rng.random((rows, width))
        coef = np.array([0.5, -0.25, 0.3, 0.1])[:width]
        y = x @ coef + 0.2
        cut = int(rows * 0.8)
        train_t = make_table(x[:cut], y[:cut])
        val_t = make_table(x[cut:], y[cut:])
        return train_t, val_t

    def test_learns_exact_linear_map(self):
        arch = tiny_arch(batch_size=20, epochs=500, nodes_per_layer=8, lag=1)
        train_t, val_t = self.linear_tables()
        model, val_mse = train(train_t, val_t, arch, TrainConfig(seed=1))
        preds = forward_batch(model, train_t.inputs)
        assert mse(preds, train_t.outputs) < 1e-3
        assert val_mse < 5e-3

    def test_full_batch_when_batch_exceeds_rows(self):
        # batch size >= R forces exactly one full-batch Adam step per
        # epoch; one epoch must therefore equal init + a single hand step
        arch = tiny_arch(batch_size=500, epochs=1, lag=1)
        train_t, val_t = self.linear_tables(rows=40, seed=3)
        config = TrainConfig(seed=2, shuffle=False)
        model, _ = train(train_t, val_t, arch, config)
        start = init_model(arch, train_t.width, config.seed)
        dw, db = gradients(start, train_t.inputs, train_t.outputs)
        params = list(start.weights) + list(start.biases)
        state = AdamState.for_params(params)
        stepped, _ = adam_step(params, dw + db, state, config, t=1)
        for got, want in zip(model.weights + model.biases, stepped):
            np.testing.assert_array_equal(got, want)

    def test_val_mse_is_infer_mode_mse(self):
        arch = tiny_arch(batch_size=16, epochs=20, dropout_rate=0.2, lag=1)
        train_t, val_t = self.linear_tables(seed=5)
        model, val_mse = train(train_t, val_t, arch, TrainConfig(seed=4))
        expected = mse(forward_batch(model, val_t.inputs), val_t.outputs)
        assert val_mse == expected

    def test_deterministic_given_seed(self):
        arch = tiny_arch(batch_size=8, epochs=15, dropout_rate=0.3, lag=1)
        train_t, val_t = self.linear_tables(seed=9)
        m1, v1 = train(train_t, val_t, arch, TrainConfig(seed=11))
        m2, v2 = train(train_t, val_t, arch, TrainConfig(seed=11))
        assert v1 == v2
        for a, b in zip(m1.weights + m1.biases, m2.weights + m2.biases):
            np.testing.assert_array_equal(a, b)

    def test_different_seeds_differ(self):
        arch = tiny_arch(batch_size=8, epochs=5, lag=1)
        train_t, val_t = self.linear_tables(seed=9)
        _, v1 = train(train_t, val_t, arch, TrainConfig(seed=1))
        _, v2 = train(train_t, val_t, arch, TrainConfig(seed=2))
        assert v1 != v2

    def test_trained_parameters_finite(self):
        arch = tiny_arch(batch_size=10, epochs=25, layers=2, lag=1)
        train_t, val_t = self.linear_tables(seed=13)
        model, _ = train(train_t, val_t, arch, TrainConfig(seed=0))
        for arr in model.weights + model.biases:
            assert np.isfinite(arr).all()

    def test_empty_table_rejected(self):
        empty = LaggedTable(
            inputs=np.empty((0, 4)), outputs=np.empty(0), row_origin=np.empty(0, int), lag=1
        )
        _, val_t = self.linear_tables()
        with pytest.raises(DataError, match="empty"):
            train(empty, val_t, tiny_arch(), TrainConfig())

    def test_divergence_raises_diagnosable_error(self):
        arch = tiny_arch(batch_size=10, epochs=50, lag=1)
        train_t, val_t = self.linear_tables(seed=21)
        big = TrainConfig(learning_rate=1e160, seed=0)
        with pytest.raises(TrainingDiverged) as info:
            train(train_t, val_t, arch, big)
        assert "non-finite loss" in str(info.value)

    def test_end_to_end_from_series(self):
        # target depends on the support one step back, which the window
        # (ending at t-1) can see
        rng = np.random.default_rng(31)
        support = rng.random(81)
        target = np.empty(81)
        target[0] = 0.1
        target[1:] = 2.0 * support[:-1] + 0.1
        series = make_series(np.column_stack([target, support]))
        reduced = reduce_lagged_table(build_lagged_table(series, lag=2))
        train_t, val_t = split_train_val(reduced, 0.85)
        arch = tiny_arch(batch_size=16, epochs=300, nodes_per_layer=8, lag=2)
        _, val_mse = train(train_t, val_t, arch, TrainConfig(seed=7))
        assert val_mse < 0.05


class TestPersistence:
    def test_round_trip_preserves_everything(self):
        model = init_model(tiny_arch(layers=2, dropout_rate=0.1), 5, seed=99)
        doc = model_to_dict(model)
        back = model_from_dict(doc)
        assert back.architecture == model.architecture
        assert back.input_width == model.input_width
        assert back.seed == model.seed
        for a, b in zip(model.weights + model.biases, back.weights + back.biases):
            np.testing.assert_array_equal(a, b)

    def test_malformed_document_rejected(self):
        with pytest.raises(DataError, match="malformed"):
            model_from_dict({"weights": []})
