import numpy as np
import pytest

from hrscluster import data, mlp
from hrscluster.errors import ConfigurationError


from conftest import finite_difference_grads, kink_free_batch


def toy_model(dims, seed=0, labels=None):
    rng = np.random.default_rng(seed)
    stats = mlp.FeatureStats(np.zeros(dims[0]), np.ones(dims[0]))
    labels = labels or tuple(f"c{i}" for i in range(dims[-1]))
    return mlp.init_model(dims[0], tuple(dims[1:-1]), labels, stats, rng)


# ------------------------------------------------------------------- features


def test_raw_features_interleave_column_major():
    h = np.array([[1 + 2j, 5 + 6j], [3 + 4j, 7 + 8j]])
    s = data.Sample(np.zeros_like(h), h, "1,2", 1.0, (0, 0))
    assert np.allclose(mlp.raw_features(s), [1, 2, 3, 4, 5, 6, 7, 8])


def test_featurize_standardizes_training_set(tiny_dataset, tiny_model):
    x = mlp.featurize_all(tiny_dataset.train, tiny_model.feature_stats)
    assert np.abs(x.mean(axis=0)).max() < 1e-9
    assert np.abs(x.std(axis=0) - 1.0).max() < 1e-6


def test_zero_matrix_featurizes_to_centered_values():
    stats = mlp.FeatureStats(np.full(8, 2.0), np.full(8, 4.0))
    s = data.Sample(np.zeros((2, 2), complex), np.zeros((2, 2), complex), "1,2", 1.0, (0, 0))
    assert np.allclose(mlp.featurize(s, stats), -0.5)


def test_true_channel_never_read():
    rng = np.random.default_rng(1)
    h_hat = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    a = data.Sample(np.zeros((2, 2), complex), h_hat, "1,2", 1.0, (0, 0))
    b = data.Sample(np.full((2, 2), 9 + 9j), h_hat, "1,2", 1.0, (0, 0))
    assert np.array_equal(mlp.raw_features(a), mlp.raw_features(b))


def test_featurize_rejects_width_mismatch():
    stats = mlp.FeatureStats(np.zeros(4), np.ones(4))
    s = data.Sample(np.zeros((2, 2), complex), np.zeros((2, 2), complex), "1,2", 1.0, (0, 0))
    with pytest.raises(ConfigurationError):
        mlp.featurize(s, stats)


# -------------------------------------------------------------------- forward


def test_zero_weights_give_uniform_probabilities():
    model = toy_model([4, 3, 5])
    for w in model.weights:
        w[:] = 0.0
    probs = mlp.forward(model, np.ones((2, 4)))
    assert np.allclose(probs, 1 / 5)


def test_softmax_rows_sum_to_one(rng):
    model = toy_model([6, 8, 4], seed=2)
    probs = mlp.forward(model, rng.standard_normal((32, 6)))
    assert np.abs(probs.sum(axis=1) - 1.0).max() < 1e-9
    assert probs.min() > 0.0
    assert probs.max() < 1.0


def test_softmax_shift_invariance(rng):
    model = toy_model([5, 4, 3], seed=3)
    x = rng.standard_normal((8, 5))
    base = mlp.forward(model, x)
    model.biases[-1] += 123.456  # constant shift of every logit
    shifted = mlp.forward(model, x)
    assert np.abs(base - shifted).max() < 1e-12


def test_softmax_stable_for_huge_logit():
    model = toy_model([2, 2, 3], seed=4)
    model.weights[-1][:] = 0.0
    model.biases[-1][:] = [1000.0, 0.0, 0.0]
    probs = mlp.forward(model, np.zeros((1, 2)))
    assert np.isfinite(probs).all()
    assert probs[0, 0] == pytest.approx(1.0, abs=1e-12)


# ----------------------------------------------------------------------- loss


def test_perfect_prediction_zero_loss():
    probs = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    assert mlp.loss(probs, [0, 2]) == pytest.approx(0.0, abs=1e-12)


def test_uniform_prediction_loss_is_log_classes():
    probs = np.full((4, 50), 1 / 50)
    assert mlp.loss(probs, [0, 7, 13, 49]) == pytest.approx(np.log(50), abs=1e-12)


def test_loss_nonnegative_and_rejects_bad_labels(rng):
    model = toy_model([3, 4, 4], seed=5)
    probs = mlp.forward(model, rng.standard_normal((16, 3)))
    labels = rng.integers(0, 4, 16)
    assert mlp.loss(probs, labels) >= 0.0
    with pytest.raises(ConfigurationError):
        mlp.loss(probs, [4])


# ------------------------------------------------------------------ gradients


def test_gradients_match_finite_differences():
    rng = np.random.default_rng(6)
    model = toy_model([4, 3, 2], seed=6)
    for b in model.biases:
        b += rng.normal(0.0, 0.1, b.shape)
    x = kink_free_batch(model, rng, 5)
    y = rng.integers(0, 2, 5)
    analytic_w, analytic_b = mlp.backward(model, x, y)
    numeric_w, numeric_b = finite_difference_grads(model, x, y)
    for a, n in zip(analytic_w + analytic_b, numeric_w + numeric_b):
        scale = np.maximum(np.abs(n), 1e-8)
        assert (np.abs(a - n) / scale).max() < 1e-4


def test_dead_relu_units_get_zero_gradient():
    model = toy_model([2, 3, 2], seed=7)
    model.biases[0][:] = -100.0  # all hidden pre-activations negative
    x = np.array([[0.1, -0.2]])
    grads_w, grads_b = mlp.backward(model, x, [0])
    assert np.all(grads_w[0] == 0.0)
    assert np.all(grads_b[0] == 0.0)


def test_duplicate_sample_leaves_mean_gradient_unchanged():
    rng = np.random.default_rng(8)
    model = toy_model([3, 4, 2], seed=8)
    x = rng.standard_normal((3, 3))
    y = [0, 1, 0]
    gw1, gb1 = mlp.backward(model, x, y)
    x2 = np.vstack([x, x])
    gw2, gb2 = mlp.backward(model, x2, y + y)
    for a, b in zip(gw1 + gb1, gw2 + gb2):
        assert np.abs(a - b).max() < 1e-12


# ----------------------------------------------------------------------- adam


def test_adam_zero_gradient_keeps_parameters():
    model = toy_model([3, 3, 2], seed=9)
    before = [w.copy() for w in model.weights]
    state = mlp.AdamState.for_model(model)
    zeros = ([np.zeros_like(w) for w in model.weights], [np.zeros_like(b) for b in model.biases])
    mlp.adam_step(model, state, zeros)
    for w, prev in zip(model.weights, before):
        assert np.array_equal(w, prev)


def test_adam_first_step_is_signed_learning_rate():
    model = toy_model([2, 2, 2], seed=10)
    before = [w.copy() for w in model.weights]
    state = mlp.AdamState.for_model(model, lr=1e-3)
    grads_w = [np.full_like(w, 0.5) * np.sign(np.arange(w.size).reshape(w.shape) - 1.5 + 1e-9) for w in model.weights]
    grads_b = [np.zeros_like(b) for b in model.biases]
    mlp.adam_step(model, state, (grads_w, grads_b))
    for w, prev, g in zip(model.weights, before, grads_w):
        step = prev - w
        assert np.allclose(step, 1e-3 * np.sign(g), atol=1e-7)


def test_adam_deterministic_over_steps():
    runs = []
    for _ in range(2):
        rng = np.random.default_rng(11)
        model = toy_model([3, 4, 2], seed=11)
        state = mlp.AdamState.for_model(model)
        for _ in range(10):
            x = rng.standard_normal((4, 3))
            y = rng.integers(0, 2, 4)
            mlp.adam_step(model, state, mlp.backward(model, x, y))
        runs.append([w.tobytes() for w in model.weights])
    assert runs[0] == runs[1]


# ------------------------------------------------------------------- training


def _toy_split(n=60, seed=12):
    # two linearly separable clouds in a 2x1 complex "channel"
    rng = np.random.default_rng(seed)
    samples = []
    for i in range(n):
        label = "1,2" if i % 2 == 0 else "1|2"
        shift = 3.0 if label == "1,2" else -3.0
        h = (rng.standard_normal((1, 2)) + shift) + 1j * (rng.standard_normal((1, 2)) + shift)
        samples.append(data.Sample(np.zeros((1, 2), complex), h, label, 1.0, (0, 0)))
    cfg = data.ScenarioConfig(users=2, antennas=1, samples=n, seed=seed)
    train, val, test, index = data.split(samples, seed)
    return data.DatasetSplit(train, val, test, index, cfg)


def test_training_learns_separable_toy_problem():
    split = _toy_split()
    hyper = mlp.TrainingHyper(
        hidden=(8, 4), epochs=100, batch_size=8, learning_rate=1e-2, seed=13
    )
    model, report = mlp.train(split, hyper)
    x = mlp.featurize_all(split.train, model.feature_stats)
    y = np.array([split.class_index[s.label] for s in split.train])
    acc = float((mlp.forward(model, x).argmax(axis=1) == y).mean())
    assert acc == 1.0
    assert report.train_loss[-1] < report.train_loss[0]


def test_training_beats_chance_on_validation(tiny_dataset, tiny_model):
    chance = 1.0 / tiny_dataset.num_classes
    n_val = len(tiny_dataset.validation)
    sigma = np.sqrt(chance * (1 - chance) / n_val)
    _, report = mlp.train(
        tiny_dataset, mlp.TrainingHyper(hidden=(32, 16), epochs=10, seed=3)
    )
    assert report.val_top1[-1] >= chance - 3 * sigma


def test_training_deterministic(tiny_dataset):
    hyper = mlp.TrainingHyper(hidden=(16, 8), epochs=3, seed=21)
    m1, r1 = mlp.train(tiny_dataset, hyper)
    m2, r2 = mlp.train(tiny_dataset, hyper)
    assert r1.train_loss == r2.train_loss
    for a, b in zip(m1.weights, m2.weights):
        assert a.tobytes() == b.tobytes()


# ------------------------------------------------------------------ accuracy


def test_topk_full_width_is_one(tiny_dataset, tiny_model):
    g = tiny_model.num_classes
    out = mlp.evaluate_topk(tiny_model, tiny_dataset.test, (g,))
    assert out[g] == 1.0


def test_topk_monotone(tiny_dataset, tiny_model):
    ks = [k for k in (1, 2, 3, 5) if k <= tiny_model.num_classes]
    out = mlp.evaluate_topk(tiny_model, tiny_dataset.test, ks)
    vals = [out[k] for k in ks]
    assert all(a <= b + 1e-12 for a, b in zip(vals, vals[1:]))


def test_topk_rejects_bad_k(tiny_dataset, tiny_model):
    with pytest.raises(ConfigurationError):
        mlp.evaluate_topk(tiny_model, tiny_dataset.test, (tiny_model.num_classes + 1,))


def test_topk_tie_breaks_toward_lower_class_index():
    model = toy_model([2, 2, 3], seed=14, labels=("a", "b", "c"))
    for w in model.weights:
        w[:] = 0.0  # uniform probabilities: ties everywhere
    samples = [data.Sample(np.zeros((1, 1), complex), np.zeros((1, 1), complex), lab, 1.0, (0,)) for lab in ("a", "b", "c")]
    model.feature_stats = mlp.FeatureStats(np.zeros(2), np.ones(2))
    out = mlp.evaluate_topk(model, samples, (1, 2))
    assert out[1] == pytest.approx(1 / 3)  # only class index 0 wins ties
    assert out[2] == pytest.approx(2 / 3)


def test_class_permutation_leaves_accuracy_unchanged(tiny_dataset, tiny_model):
    rng = np.random.default_rng(15)
    perm = rng.permutation(tiny_model.num_classes)
    permuted = mlp.MlpModel(
        [w.copy() for w in tiny_model.weights],
        [b.copy() for b in tiny_model.biases],
        tiny_model.feature_stats,
        tuple(tiny_model.class_labels[i] for i in perm),
    )
    permuted.weights[-1][:] = permuted.weights[-1][:, perm]
    permuted.biases[-1][:] = permuted.biases[-1][perm]
    ks = [k for k in (1, 3) if k <= tiny_model.num_classes]
    base = mlp.evaluate_topk(tiny_model, tiny_dataset.test, ks)
    after = mlp.evaluate_topk(permuted, tiny_dataset.test, ks)
    for k in ks:
        assert base[k] == pytest.approx(after[k], abs=1e-12)


# ---------------------------------------------------------------- checkpoints


def test_model_round_trip_bit_exact(tiny_model, tmp_path):
    path = tmp_path / "model.hrsmlp"
    mlp.save_model(tiny_model, path)
    loaded = mlp.load_model(path)
    assert loaded.class_labels == tiny_model.class_labels
    assert loaded.layer_dims == tiny_model.layer_dims
    for a, b in zip(loaded.weights, tiny_model.weights):
        assert a.tobytes() == b.tobytes()
    assert np.array_equal(loaded.feature_stats.mean, tiny_model.feature_stats.mean)
    path2 = tmp_path / "again.hrsmlp"
    mlp.save_model(loaded, path2)
    assert path.read_bytes() == path2.read_bytes()


def test_model_corruption_rejected(tiny_model, tmp_path):
    from hrscluster.errors import DataFormatError

    path = tmp_path / "model.hrsmlp"
    mlp.save_model(tiny_model, path)
    raw = bytearray(path.read_bytes())
    raw[-10] ^= 0x01
    path.write_bytes(bytes(raw))
    with pytest.raises(DataFormatError):
        mlp.load_model(path)
