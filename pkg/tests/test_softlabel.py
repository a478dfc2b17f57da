import numpy as np
import pytest

from noveltydetect.dataset import LabeledDataset
from noveltydetect.softlabel import (
    SoftLabelModel,
    TrainConfig,
    load_softlabel,
    predict_confidence_matrix,
    predict_confidences,
    save_softlabel,
    train_softmax,
    training_accuracy,
    _loss_and_gradients,
)


def two_class_line(n=20):
    xs = np.concatenate([np.full(n // 2, -1.0), np.full(n // 2, 1.0)])[:, None]
    labels = tuple(["A"] * (n // 2) + ["B"] * (n // 2))
    return LabeledDataset(xs, labels, {"A": 0, "B": 1})


def test_separable_data_reaches_perfect_accuracy():
    ds = two_class_line()
    model = train_softmax(ds, TrainConfig(learning_rate=1.0, l2_penalty=1e-6, max_epochs=500, tolerance=1e-10))
    assert training_accuracy(model, ds) == 1.0


def test_huge_l2_drives_weights_to_zero():
    ds = two_class_line()
    model = train_softmax(ds, TrainConfig(learning_rate=0.1, l2_penalty=1e6, max_epochs=200, tolerance=1e-12))
    assert np.abs(model.weights).max() < 1e-4
    conf = predict_confidences(model, np.array([0.7]))
    np.testing.assert_allclose(conf, [0.5, 0.5], atol=1e-3)


def test_gradient_matches_central_finite_differences():
    rng = np.random.default_rng(17)
    X = rng.normal(size=(5, 3))
    y = rng.integers(0, 3, size=5)
    onehot = np.zeros((5, 3))
    onehot[np.arange(5), y] = 1.0
    W = rng.normal(scale=0.5, size=(3, 3))
    b = rng.normal(scale=0.5, size=3)
    l2 = 0.01
    _, grad_w, grad_b = _loss_and_gradients(X, onehot, W, b, l2)

    step = 1e-5
    numeric_w = np.zeros_like(W)
    for i in range(3):
        for j in range(3):
            up, down = W.copy(), W.copy()
            up[i, j] += step
            down[i, j] -= step
            lu = _loss_and_gradients(X, onehot, up, b, l2)[0]
            ld = _loss_and_gradients(X, onehot, down, b, l2)[0]
            numeric_w[i, j] = (lu - ld) / (2 * step)
    numeric_b = np.zeros_like(b)
    for i in range(3):
        up, down = b.copy(), b.copy()
        up[i] += step
        down[i] -= step
        numeric_b[i] = (_loss_and_gradients(X, onehot, W, up, l2)[0] - _loss_and_gradients(X, onehot, W, down, l2)[0]) / (2 * step)

    rel_w = np.abs(grad_w - numeric_w) / (np.abs(numeric_w) + 1e-8)
    rel_b = np.abs(grad_b - numeric_b) / (np.abs(numeric_b) + 1e-8)
    assert rel_w.max() <= 1e-5
    assert rel_b.max() <= 1e-5


def test_loss_non_increasing_in_epochs():
    ds = two_class_line(12)
    X = ds.features
    onehot = np.zeros((12, 2))
    onehot[np.arange(12), ds.label_indices()] = 1.0
    losses = []
    for epochs in (1, 2, 4, 8, 32):
        model = train_softmax(ds, TrainConfig(learning_rate=0.5, l2_penalty=1e-3, max_epochs=epochs, tolerance=1e-14))
        losses.append(_loss_and_gradients(X, onehot, model.weights, model.biases, 1e-3)[0])
    initial = _loss_and_gradients(X, onehot, np.zeros((2, 1)), np.zeros(2), 1e-3)[0]
    assert losses[-1] <= initial
    assert all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))


def test_label_permutation_equivariance():
    rng = np.random.default_rng(23)
    feats = rng.normal(size=(30, 2))
    labels = tuple(rng.choice(["A", "B", "C"], size=30))
    ds1 = LabeledDataset(feats, labels, {"A": 0, "B": 1, "C": 2})
    ds2 = LabeledDataset(feats, labels, {"C": 0, "A": 1, "B": 2})
    cfg = TrainConfig(learning_rate=0.5, l2_penalty=1e-2, max_epochs=50, tolerance=1e-12)
    m1 = train_softmax(ds1, cfg)
    m2 = train_softmax(ds2, cfg)
    x = np.array([0.3, -0.8])
    c1 = predict_confidences(m1, x)
    c2 = predict_confidences(m2, x)
    for lab in ("A", "B", "C"):
        assert c1[m1.class_index[lab]] == pytest.approx(c2[m2.class_index[lab]], abs=1e-9)


def test_requires_two_classes():
    ds = LabeledDataset(np.ones((3, 1)), ("a", "a", "a"), {"a": 0})
    with pytest.raises(ValueError):
        train_softmax(ds, TrainConfig())


def test_rejects_non_finite_features():
    feats = np.array([[1.0], [np.nan]])
    ds = LabeledDataset(feats, ("a", "b"), {"a": 0, "b": 1})
    with pytest.raises(ValueError, match="non-finite"):
        train_softmax(ds, TrainConfig())


class TestPredict:
    def zero_model(self, k=3, d=2):
        labs = [f"c{i}" for i in range(k)]
        return SoftLabelModel(np.zeros((k, d)), np.zeros(k), {lab: i for i, lab in enumerate(labs)})

    def test_uniform_for_zero_model(self):
        conf = predict_confidences(self.zero_model(), np.array([4.0, -1.0]))
        np.testing.assert_allclose(conf, [1 / 3] * 3, atol=1e-12)

    def test_two_score_softmax_value(self):
        model = SoftLabelModel(np.array([[10.0], [0.0]]), np.zeros(2), {"a": 0, "b": 1})
        conf = predict_confidences(model, np.array([1.0]))
        assert conf[0] == pytest.approx(0.9999546021312976, abs=1e-9)
        assert conf[1] == pytest.approx(4.5397868702434395e-05, abs=1e-9)

    def test_shift_invariance(self):
        rng = np.random.default_rng(1)
        W = rng.normal(size=(4, 3))
        b = rng.normal(size=4)
        idx = {f"c{i}": i for i in range(4)}
        x = rng.normal(size=3)
        c1 = predict_confidences(SoftLabelModel(W, b, idx), x)
        c2 = predict_confidences(SoftLabelModel(W, b + 7.5, idx), x)
        np.testing.assert_allclose(c1, c2, atol=1e-12)

    def test_positivity_and_normalization(self):
        rng = np.random.default_rng(6)
        model = SoftLabelModel(rng.normal(size=(5, 4)) * 30, rng.normal(size=5), {f"c{i}": i for i in range(5)})
        X = rng.normal(size=(50, 4)) * 10
        probs = predict_confidence_matrix(model, X)
        assert (probs > 0).all()
        assert np.abs(probs.sum(axis=1) - 1).max() < 1e-9

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            predict_confidences(self.zero_model(d=2), np.array([1.0, 2.0, 3.0]))

    def test_non_finite_input(self):
        with pytest.raises(ValueError):
            predict_confidences(self.zero_model(d=2), np.array([np.inf, 0.0]))


def test_serialization_round_trip(tmp_path):
    rng = np.random.default_rng(9)
    model = SoftLabelModel(rng.normal(size=(3, 4)), rng.normal(size=3), {"x": 0, "longer-label": 1, "z": 2})
    path = str(tmp_path / "model.txt")
    save_softlabel(model, path)
    back = load_softlabel(path)
    np.testing.assert_array_equal(back.weights, model.weights)
    np.testing.assert_array_equal(back.biases, model.biases)
    assert back.class_index == model.class_index
