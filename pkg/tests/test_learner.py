import math

import numpy as np
import pytest

from tridet import data, learner, metrics
from oracles import finite_diff_gradients, max_gradient_error, random_small_setup


def toy_dataset(n=200, d=2, seed=0, gap=4.0):
    rng = np.random.default_rng(seed)
    half = n // 2
    X = np.vstack([rng.normal(gap / 2, 1.0, size=(half, d)),
                   rng.normal(-gap / 2, 1.0, size=(n - half, d))])
    Y = np.vstack([np.ones((half, 1)), np.zeros((n - half, 1))]).astype(np.int8)
    ids = tuple(f"t{i:04d}" for i in range(n))
    return data.LabeledDataset(ids, X, Y, ("ev",))


class TestInit:
    def test_shapes(self):
        cfg = learner.ModelConfig(input_dim=4, hidden_layers=(8,), num_classes=3, seed=7)
        m = learner.init_model(cfg)
        assert [w.shape for w in m.weights] == [(4, 8), (8, 3)]
        assert [b.shape for b in m.biases] == [(8,), (3,)]

    def test_deterministic(self):
        cfg = learner.ModelConfig(input_dim=5, hidden_layers=(6, 4), num_classes=2, seed=11)
        a, b = learner.init_model(cfg), learner.init_model(cfg)
        for x, y in zip(a.weights + a.biases, b.weights + b.biases):
            np.testing.assert_array_equal(x, y)

    def test_no_hidden_is_direct_linear(self):
        cfg = learner.ModelConfig(input_dim=3, hidden_layers=(), num_classes=2, seed=0)
        m = learner.init_model(cfg)
        assert len(m.weights) == 1
        assert m.weights[0].shape == (3, 2)

    def test_biases_start_at_zero(self):
        m = learner.init_model(learner.ModelConfig(4, (8,), 3, seed=1))
        for b in m.biases:
            np.testing.assert_array_equal(b, 0.0)

    def test_invalid_config_rejected(self):
        with pytest.raises(ValueError):
            learner.ModelConfig(input_dim=0, hidden_layers=(4,), num_classes=1)
        with pytest.raises(ValueError):
            learner.ModelConfig(input_dim=3, hidden_layers=(0,), num_classes=1)


class TestForward:
    def test_zero_parameters_give_zero_logits(self):
        m = learner.init_model(learner.ModelConfig(3, (4,), 2, seed=0))
        for arr in (*m.weights, *m.biases):
            arr[:] = 0.0
        np.testing.assert_array_equal(learner.forward(m, np.ones(3)), 0.0)

    def test_single_linear_layer_row_selection(self):
        cfg = learner.ModelConfig(input_dim=3, hidden_layers=(), num_classes=2, seed=0)
        m = learner.init_model(cfg)
        m.biases[0][:] = [0.5, -0.5]
        e1 = np.array([1.0, 0.0, 0.0])
        np.testing.assert_allclose(learner.forward(m, e1), m.weights[0][0] + m.biases[0])

    def test_matches_matrix_oracle(self):
        rng = np.random.default_rng(5)
        m, X, _, _ = random_small_setup(rng)
        h = X
        for W, b in zip(m.weights[:-1], m.biases[:-1]):
            h = np.tanh(h @ W + b)
        expected = h @ m.weights[-1] + m.biases[-1]
        np.testing.assert_allclose(learner.forward_batch(m, X), expected, atol=1e-10)

    def test_dimension_mismatch(self):
        m = learner.init_model(learner.ModelConfig(3, (), 1, seed=0))
        with pytest.raises(ValueError):
            learner.forward(m, np.ones(4))


class TestSigmoidT:
    def test_zero_logit_is_half(self):
        for T in (0.5, 1.0, 7.0):
            assert learner.sigmoid_t(0.0, T) == 0.5

    def test_log3_gives_three_quarters(self):
        assert learner.sigmoid_t(math.log(3.0), 1.0) == pytest.approx(0.75, abs=1e-12)

    def test_temperature_scaling_law(self):
        assert learner.sigmoid_t(2.0, 2.0) == learner.sigmoid_t(1.0, 1.0)
        assert learner.sigmoid_t(1.0, 1.0) == pytest.approx(0.7310585786300049, abs=1e-12)
        z = np.linspace(-25, 25, 11)
        for T in (0.5, 2.0, 4.0):
            np.testing.assert_array_equal(learner.sigmoid_t(z, T),
                                          learner.sigmoid_t(z / T, 1.0))

    def test_monotone_in_z(self):
        z = np.linspace(-10, 10, 201)
        for T in (0.5, 1.0, 3.0):
            assert np.all(np.diff(learner.sigmoid_t(z, T)) > 0)

    def test_temperature_flattens(self):
        for z in (-6.0, -0.5, 0.01, 2.0, 9.0):
            gaps = [abs(learner.sigmoid_t(z, T) - 0.5) for T in (0.5, 1.0, 2.0, 4.0)]
            assert all(a > b for a, b in zip(gaps, gaps[1:]))

    def test_nonpositive_temperature_rejected(self):
        with pytest.raises(ValueError):
            learner.sigmoid_t(1.0, 0.0)


class TestWeightedBceLoss:
    def test_half_probability(self):
        assert learner.weighted_bce_loss([[0.5]], [[1]], [1.0]) == \
            pytest.approx(0.6931471805599453, abs=1e-12)

    def test_weighted_exp_case(self):
        # y = 1, f = e^-1, w = 2: loss = -2 ln e^-1 = 2
        assert learner.weighted_bce_loss([[math.exp(-1)]], [[1]], [2.0]) == \
            pytest.approx(2.0, abs=1e-9)

    def test_perfect_fit_within_clamp(self):
        loss = learner.weighted_bce_loss([[1.0, 0.0]], [[1, 0]], [1.0, 1.0])
        assert 0.0 < loss < 1e-5

    def test_sums_over_examples(self):
        rng = np.random.default_rng(9)
        probs = rng.uniform(0.05, 0.95, size=(6, 3))
        labels = rng.integers(0, 2, size=(6, 3))
        w = rng.uniform(0.5, 3.0, size=3)
        total = learner.weighted_bce_loss(probs, labels, w)
        parts = sum(learner.weighted_bce_loss(probs[i:i + 1], labels[i:i + 1], w)
                    for i in range(6))
        assert total == pytest.approx(parts, rel=1e-12)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            learner.weighted_bce_loss([[0.5, 0.5]], [[1]], [1.0, 1.0])
        with pytest.raises(ValueError):
            learner.weighted_bce_loss([[0.5]], [[1]], [1.0, 1.0])

    def test_nonpositive_weights_rejected(self):
        with pytest.raises(ValueError):
            learner.weighted_bce_loss([[0.5]], [[1]], [0.0])


class TestLossGradients:
    def test_single_linear_unit_hand_derivation(self):
        cfg = learner.ModelConfig(input_dim=2, hidden_layers=(), num_classes=1, seed=3)
        m = learner.init_model(cfg)
        m.biases[0][:] = 0.2
        x = np.array([[0.7, -1.3]])
        y = np.array([[1.0]])
        w = np.array([2.5])
        f = float(m.predict_proba(x)[0, 0])
        # d(loss)/d(bias) = w*y*(f-1) + (1-y)*f
        expected_bias = w[0] * 1.0 * (f - 1.0)
        grads_w, grads_b = learner.loss_gradients(m, x, y, w)
        assert grads_b[0][0] == pytest.approx(expected_bias, rel=1e-12)
        np.testing.assert_allclose(grads_w[0][:, 0], x[0] * expected_bias, rtol=1e-12)

    def test_batch_is_sum_of_singles(self):
        rng = np.random.default_rng(13)
        m, X, Y, w = random_small_setup(rng, max_batch=2)
        while X.shape[0] != 2:
            m, X, Y, w = random_small_setup(rng, max_batch=2)
        full_w, full_b = learner.loss_gradients(m, X, Y, w)
        parts = [learner.loss_gradients(m, X[i:i + 1], Y[i:i + 1], w) for i in range(2)]
        for l in range(len(full_w)):
            np.testing.assert_allclose(full_w[l], parts[0][0][l] + parts[1][0][l], atol=1e-12)
            np.testing.assert_allclose(full_b[l], parts[0][1][l] + parts[1][1][l], atol=1e-12)

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(17)
        for _ in range(3):
            m, X, Y, w = random_small_setup(rng)
            grads_w, grads_b = learner.loss_gradients(m, X, Y, w)
            num_w, num_b = finite_diff_gradients(
                lambda mm: learner.weighted_bce_loss(mm.predict_proba(X), Y, w), m)
            assert max_gradient_error(grads_w + grads_b, num_w + num_b) < 1e-4

    def test_empty_batch_rejected(self):
        m = learner.init_model(learner.ModelConfig(2, (), 1, seed=0))
        with pytest.raises(ValueError):
            learner.loss_gradients(m, np.empty((0, 2)), np.empty((0, 1)), [1.0])


class TestTrain:
    def test_separable_toy_reaches_low_loss(self):
        ds = toy_dataset()
        cfg = learner.ModelConfig(input_dim=2, hidden_layers=(8,), num_classes=1, seed=0)
        params = learner.TrainParams(epochs=200, seed=0)
        w = learner.compute_class_weights(ds)
        m = learner.train(learner.init_model(cfg), ds, w, params)
        loss = learner.weighted_bce_loss(m.predict_proba(ds.features), ds.labels, w)
        assert loss / len(ds) < 0.1

    def test_zero_epochs_identity(self):
        ds = toy_dataset(n=20)
        cfg = learner.ModelConfig(2, (4,), 1, seed=5)
        m0 = learner.init_model(cfg)
        m1 = learner.train(m0, ds, [1.0], learner.TrainParams(epochs=0, seed=0))
        for a, b in zip(m0.weights + m0.biases, m1.weights + m1.biases):
            np.testing.assert_array_equal(a, b)

    def test_deterministic(self):
        ds = toy_dataset(n=60)
        cfg = learner.ModelConfig(2, (6,), 1, seed=2)
        params = learner.TrainParams(epochs=5, seed=9)
        runs = [learner.train(learner.init_model(cfg), ds, [1.0], params) for _ in range(2)]
        for a, b in zip(runs[0].weights + runs[0].biases, runs[1].weights + runs[1].biases):
            np.testing.assert_array_equal(a, b)

    def test_empty_dataset_rejected(self):
        empty = data.LabeledDataset(tuple(), np.empty((0, 2)),
                                    np.empty((0, 1), dtype=np.int8), ("ev",))
        m = learner.init_model(learner.ModelConfig(2, (), 1, seed=0))
        with pytest.raises(ValueError):
            learner.train(m, empty, [1.0], learner.TrainParams(epochs=1))

    def test_early_stop_returns_best_dev_checkpoint(self):
        # patience >= epochs: both runs walk the same optimization stream, so
        # the best-over-epochs checkpoint can never trail the final epoch
        ds = toy_dataset(n=120, seed=3, gap=2.5)
        dev = toy_dataset(n=60, seed=4, gap=2.5)
        cfg = learner.ModelConfig(2, (8,), 1, seed=1)
        m0 = learner.init_model(cfg)
        w = [1.0]
        best = learner.train(m0, ds, w, learner.TrainParams(
            epochs=25, seed=0, early_stop=learner.EarlyStop(dev, patience=25)))
        plain = learner.train(m0, ds, w, learner.TrainParams(epochs=25, seed=0))
        auc_of = lambda m: metrics.mean_auc(metrics.evaluate(m, dev))
        assert auc_of(best) <= auc_of(plain) + 1e-12

    def test_early_stop_deterministic(self):
        ds = toy_dataset(n=80, seed=6, gap=2.0)
        dev = toy_dataset(n=40, seed=7, gap=2.0)
        cfg = learner.ModelConfig(2, (4,), 1, seed=2)
        params = learner.TrainParams(epochs=15, seed=1,
                                     early_stop=learner.EarlyStop(dev, patience=2))
        a = learner.train(learner.init_model(cfg), ds, [1.0], params)
        b = learner.train(learner.init_model(cfg), ds, [1.0], params)
        for x, y in zip(a.weights + a.biases, b.weights + b.biases):
            np.testing.assert_array_equal(x, y)

    def test_dimension_mismatch_rejected(self):
        ds = toy_dataset(n=10)
        m = learner.init_model(learner.ModelConfig(3, (), 1, seed=0))
        with pytest.raises(ValueError):
            learner.train(m, ds, [1.0], learner.TrainParams(epochs=1))


class TestClassWeights:
    def test_balanced_ratio(self):
        labels = np.array([[1, 1]] * 2 + [[0, 1]] * 2 + [[0, 0]] * 6, dtype=np.int8)
        ds = data.LabeledDataset(tuple(f"x{i}" for i in range(10)), np.zeros((10, 1)),
                                 labels, ("a", "b"))
        w = learner.compute_class_weights(ds)
        np.testing.assert_allclose(w, [8 / 2, 6 / 4])

    def test_no_positives_falls_back_to_one(self):
        labels = np.zeros((5, 1), dtype=np.int8)
        ds = data.LabeledDataset(tuple(f"x{i}" for i in range(5)), np.zeros((5, 1)),
                                 labels, ("a",))
        np.testing.assert_allclose(learner.compute_class_weights(ds), [1.0])

    def test_no_negatives_falls_back_to_one(self):
        labels = np.ones((5, 1), dtype=np.int8)
        ds = data.LabeledDataset(tuple(f"x{i}" for i in range(5)), np.zeros((5, 1)),
                                 labels, ("a",))
        np.testing.assert_allclose(learner.compute_class_weights(ds), [1.0])

    def test_uniform_policy(self):
        ds = toy_dataset(n=10)
        np.testing.assert_allclose(learner.compute_class_weights(ds, "uniform"), [1.0])

    def test_unknown_policy_rejected(self):
        with pytest.raises(ValueError):
            learner.compute_class_weights(toy_dataset(n=10), "mystery")


class TestCheckpoint:
    def test_round_trip_exact(self, tmp_path):
        rng = np.random.default_rng(23)
        m, _, _, _ = random_small_setup(rng)
        path = tmp_path / "model.json"
        learner.save_model(m, path)
        back = learner.load_model(path)
        assert back.config == m.config
        for a, b in zip(m.weights + m.biases, back.weights + back.biases):
            np.testing.assert_array_equal(a, b)

    def test_wrong_format_rejected(self, tmp_path):
        path = tmp_path / "bogus.json"
        path.write_text('{"format": "something-else"}')
        with pytest.raises(ValueError):
            learner.load_model(path)
