import json
import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.linear_model import LogisticRegression

from photoanthro.errors import (
    ConfigError,
    IncompatibleVersionError,
    ModelFormatError,
    OptimizerError,
    ShapeError,
    TaskError,
    ValidationError,
)
from photoanthro.mlp import (
    AdamaxState,
    MlpConfig,
    MlpModel,
    _glorot,
    adamax_step,
    backward,
    cross_entropy,
    fit_normalization,
    forward,
    load_model,
    loss,
    predict,
    save_model,
    train,
)


def _random_model(rng, d=5, h=4, k=3, scale=1.0):
    m = MlpModel.random(d, h, tuple(range(k)), rng)
    m.b1[...] = rng.normal(0, scale, h)
    m.b2[...] = rng.normal(0, scale, k)
    m.mean[...] = rng.normal(0, 1, d)
    m.scale[...] = rng.uniform(0.5, 2, d)
    return m


def test_config_defaults_and_checks():
    c = MlpConfig()
    assert (c.input_dim, c.hidden_neurons, c.epochs, c.learning_rate, c.beta1) == (208, 128, 500, 0.01, 0.9)
    assert (c.beta2, c.epsilon, c.batch_size) == (0.999, 1e-8, 32)
    for bad in ({"output_classes": 1}, {"hidden_neurons": 0}, {"learning_rate": 0},
                {"optimizer": "sgd"}, {"beta1": 1.0}):
        with pytest.raises(ConfigError):
            MlpConfig(**bad)


def test_zero_model_is_uniform():
    m = MlpModel.zeros(6, 4, ("a", "b", "c"))
    p = forward(m, np.random.default_rng(0).normal(size=(5, 6)))
    np.testing.assert_allclose(p, 1 / 3, rtol=0, atol=1e-15)


def test_probabilities_sum_to_one_and_shift_invariance(rng):
    for _ in range(30):
        m = _random_model(rng, scale=5)
        X = rng.normal(0, 10, (8, 5))
        p = forward(m, X)
        assert np.all(p >= 0)
        np.testing.assert_allclose(p.sum(axis=1), 1.0, rtol=0, atol=1e-12)
        shifted = m.copy()
        shifted.b2 += rng.normal(0, 100)
        np.testing.assert_allclose(forward(shifted, X), p, rtol=0, atol=1e-12)


def test_forward_errors():
    m = MlpModel.zeros(3, 2, (0, 1))
    with pytest.raises(ShapeError):
        forward(m, np.zeros(4))
    with pytest.raises(ValidationError):
        forward(m, np.array([1.0, np.nan, 0.0]))


def test_cross_entropy_cases():
    assert cross_entropy(np.eye(3), [0, 1, 2]) == 0.0
    for k in (2, 5, 17):
        assert cross_entropy(np.full((4, k), 1 / k), [0] * 4) == pytest.approx(math.log(k))
    vals = []
    for q in np.linspace(0.1, 0.99, 20):
        rest = (1 - q) / 2
        vals.append(cross_entropy([[q, rest, rest]], [0]))
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_loss_of_zero_model_is_log_k():
    m = MlpModel.zeros(3, 2, ("x", "y", "z", "w"))
    assert loss(m, np.ones((5, 3)), ["x", "y", "z", "w", "x"]) == pytest.approx(math.log(4))
    with pytest.raises(ValidationError):
        loss(m, np.zeros((0, 3)), [])


def _numeric_grad(model, X, y, name, h=1e-5):
    p = model.params()[name]
    g = np.zeros_like(p)
    for idx in np.ndindex(p.shape):
        old = p[idx]
        p[idx] = old + h
        up = loss(model, X, y)
        p[idx] = old - h
        down = loss(model, X, y)
        p[idx] = old
        g[idx] = (up - down) / (2 * h)
    return g


def gradient_deviation(rng) -> float:
    """Worst relative deviation between analytic and central-difference gradients.

    The relative error uses max(|analytic|, |numeric|) floored at 1e-6, below
    which truncation error of the difference quotient dominates.
    """
    d, h, k = rng.integers(2, 7), rng.integers(2, 6), rng.integers(2, 5)
    m = _random_model(rng, d, h, k)
    X = rng.normal(0, 2, (int(rng.integers(1, 9)), d))
    y = list(rng.integers(0, k, len(X)))
    grads = backward(m, X, y)
    worst = 0.0
    for name in ("W1", "b1", "W2", "b2"):
        num = _numeric_grad(m, X, y, name)
        denom = np.maximum(np.maximum(np.abs(grads[name]), np.abs(num)), 1e-6)
        worst = max(worst, float(np.max(np.abs(grads[name] - num) / denom)))
    return worst


def test_gradients_match_finite_differences(rng):
    assert max(gradient_deviation(rng) for _ in range(20)) <= 1e-4


def test_duplicated_batch_same_gradient(rng):
    m = _random_model(rng)
    X = rng.normal(size=(6, 5))
    y = list(rng.integers(0, 3, 6))
    g1 = backward(m, X, y)
    g2 = backward(m, np.vstack([X, X]), y + y)
    for k in g1:
        np.testing.assert_allclose(g2[k], g1[k], rtol=0, atol=1e-12)


def test_degenerate_zero_configuration():
    m = MlpModel.zeros(4, 3, (0, 1, 2))
    X = np.zeros((4, 4))
    y = [0, 2, 2, 1]
    g = backward(m, X, y)
    expected = (np.full(3, 1 / 3)[None, :] - np.eye(3)[y]).mean(axis=0)
    np.testing.assert_allclose(g["b2"], expected, atol=1e-15)
    np.testing.assert_allclose(g["W2"], np.outer(expected, np.full(3, 0.5)), atol=1e-15)
    np.testing.assert_array_equal(g["W1"], 0)


def _params(rng):
    return {"a": rng.normal(size=(3, 2)), "b": rng.normal(size=4)}


def test_adamax_zero_gradient_is_noop(rng):
    p = _params(rng)
    new, state = adamax_step(p, {k: np.zeros_like(v) for k, v in p.items()},
                             AdamaxState.zeros_like(p), 1)
    for k in p:
        np.testing.assert_array_equal(new[k], p[k])


def test_adamax_first_step_is_signed_lr(rng):
    p = _params(rng)
    g = {k: rng.normal(size=v.shape) for k, v in p.items()}
    new, _ = adamax_step(p, g, AdamaxState.zeros_like(p), 1, lr=0.01)
    for k in p:
        np.testing.assert_allclose(new[k] - p[k], -0.01 * g[k] / (np.abs(g[k]) + 1e-8), rtol=1e-12)
        np.testing.assert_allclose(new[k] - p[k], -0.01 * np.sign(g[k]), rtol=1e-6)


def test_adamax_hand_two_steps():
    p = {"w": np.array([1.0])}
    s = AdamaxState.zeros_like(p)
    p1, s = adamax_step(p, {"w": np.array([2.0])}, s, 1)
    p2, s = adamax_step(p1, {"w": np.array([-1.0])}, s, 2)
    m = 0.9 * 0.2 + 0.1 * -1.0
    u = max(0.999 * 2.0, 1.0)
    assert s.m["w"][0] == pytest.approx(m)
    assert s.u["w"][0] == pytest.approx(u)
    assert p2["w"][0] == pytest.approx(p1["w"][0] - 0.01 / (1 - 0.81) * m / (u + 1e-8))


def test_adamax_u_nondecreasing_with_beta2_one(rng):
    p = _params(rng)
    s = AdamaxState.zeros_like(p)
    prev = {k: v.copy() for k, v in s.u.items()}
    for t in range(1, 30):
        g = {k: rng.normal(size=v.shape) * rng.uniform(0, 3) for k, v in p.items()}
        p, s = adamax_step(p, g, s, t, beta2=1.0)
        for k in p:
            assert np.all(s.u[k] >= prev[k])
            prev[k] = s.u[k].copy()


def test_adamax_rejects_non_finite(rng):
    p = _params(rng)
    g = {k: np.zeros_like(v) for k, v in p.items()}
    g["b"][1] = np.inf
    with pytest.raises(OptimizerError):
        adamax_step(p, g, AdamaxState.zeros_like(p), 1)


def _reference_train(config, X, y, vocab):
    """Plain loop over the public backward() and adamax_step(), float64."""
    rng = np.random.default_rng(config.rng_seed)
    mean, scale = fit_normalization(X)
    model = MlpModel.zeros(config.input_dim, config.hidden_neurons, vocab)
    model.mean[...], model.scale[...] = mean, scale
    model.W1[...] = _glorot(rng, config.hidden_neurons, config.input_dim)
    model.W2[...] = _glorot(rng, len(vocab), config.hidden_neurons)
    params = {k: v.copy() for k, v in model.params().items()}
    state = AdamaxState.zeros_like(params)
    t = 0
    for _ in range(config.epochs):
        perm = rng.permutation(len(y))
        for start in range(0, len(y), config.batch_size):
            idx = perm[start:start + config.batch_size]
            for k, v in params.items():
                getattr(model, k)[...] = v
            grads = backward(model, X[idx], [y[i] for i in idx])
            t += 1
            params, state = adamax_step(params, grads, state, t, config.learning_rate,
                                        config.beta1, config.beta2, config.epsilon)
    return params


def test_fused_loop_matches_reference_route(rng):
    X = rng.normal(3, 2, (75, 6))
    y = list(rng.integers(0, 3, 75))
    config = MlpConfig(input_dim=6, hidden_neurons=5, output_classes=3, epochs=7, rng_seed=9)
    model, _ = train(config, X, y, (0, 1, 2), dtype=np.float64)
    ref = _reference_train(config, X, y, (0, 1, 2))
    for k, v in model.params().items():
        np.testing.assert_allclose(v, ref[k], rtol=1e-9, atol=1e-12)


def test_float32_loop_tracks_float64(rng):
    X = rng.normal(0, 1, (120, 8))
    y = list((X[:, 0] + X[:, 1] > 0).astype(int))
    config = MlpConfig(input_dim=8, hidden_neurons=16, epochs=20, rng_seed=2)
    m32, log32 = train(config, X, y)
    m64, log64 = train(config, X, y, dtype=np.float64)
    np.testing.assert_allclose(log32.loss, log64.loss, rtol=1e-3)
    np.testing.assert_allclose(forward(m32, X), forward(m64, X), atol=1e-3)


def _separable(rng, n=200, d=6):
    X = rng.normal(0, 1, (n, d))
    w = np.zeros(d)
    w[:2] = (1.0, -1.0)
    score = X @ w
    keep = np.abs(score) > 0.2
    return X[keep], list(np.where(score[keep] > 0, "pos", "neg"))


def test_separable_data_is_learned(rng):
    X, y = _separable(rng)
    oracle = LogisticRegression(C=1e4, max_iter=5000).fit(X, y)
    assert oracle.score(X, y) >= 0.99
    model, log = train(MlpConfig(input_dim=X.shape[1], rng_seed=1), X, y)
    assert log.accuracy[-1] >= 0.99
    assert len(log.loss) == log.epochs == 500
    pred, _ = predict(model, X)
    assert np.mean(np.array(pred) == np.array(y)) >= 0.99


def test_training_is_deterministic(rng):
    X, y = _separable(rng, 80)
    cfg = MlpConfig(input_dim=X.shape[1], epochs=15, rng_seed=5)
    m1, l1 = train(cfg, X, y)
    m2, l2 = train(cfg, X, y)
    for k in m1.params():
        assert np.array_equal(m1.params()[k], m2.params()[k])
    assert l1.loss == l2.loss and l1.accuracy == l2.accuracy
    m3, _ = train(replace(cfg, rng_seed=6), X, y)
    assert not np.array_equal(m1.W1, m3.W1)


def test_shuffled_labels_stay_near_chance():
    train_acc, val_acc = [], []
    for seed in range(20):
        r = np.random.default_rng(seed)
        X = r.standard_normal((1000, 5))
        y = list(r.permutation(np.repeat([0, 1], 500)))
        Xv = r.standard_normal((400, 5))
        yv = r.permutation(np.repeat([0, 1], 200))
        model, log = train(MlpConfig(input_dim=5, rng_seed=seed), X, y)
        pred, _ = predict(model, Xv)
        train_acc.append(log.accuracy[-1])
        val_acc.append(np.mean(np.array(pred) == yv))
    assert 0.45 <= min(train_acc) and max(train_acc) <= 0.75
    assert 0.40 <= min(val_acc) and max(val_acc) <= 0.60


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_train_errors(rng):
    X = rng.normal(size=(10, 3))
    with pytest.raises(TaskError):
        train(MlpConfig(input_dim=3, epochs=1), X, [1] * 10, vocab=(0, 1))
    with pytest.raises(ShapeError):
        train(MlpConfig(input_dim=4, epochs=1), X, [0, 1] * 5)
    bad = X.copy()
    bad[0, 0] = np.nan
    with pytest.raises(ValidationError):
        train(MlpConfig(input_dim=3, epochs=1), bad, [0, 1] * 5)
    with pytest.raises(OptimizerError, match="epoch"):
        train(MlpConfig(input_dim=3, epochs=3, learning_rate=1e300), X, [0, 1] * 5)


def test_zero_variance_features_pass_through(rng):
    X = rng.normal(size=(40, 4))
    X[:, 2] = 7.0
    y = list((X[:, 0] > 0).astype(int))
    model, _ = train(MlpConfig(input_dim=4, epochs=5), X, y)
    assert model.constant_features == [2]
    assert model.scale[2] == 1.0 and model.mean[2] == 7.0


def test_predict_tie_and_forward_identity(rng):
    m = MlpModel.zeros(3, 2, ("first", "second"))
    label, probs = predict(m, np.ones(3))
    assert label == "first"
    m = _random_model(rng)
    X = rng.normal(size=(4, 5))
    labels, probs = predict(m, X)
    assert np.array_equal(probs, forward(m, X))
    assert labels == [m.vocab[i] for i in np.argmax(forward(m, X), axis=1)]


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 1000))
def test_positive_affine_reencoding_does_not_change_predictions(seed):
    r = np.random.default_rng(seed)
    X, y = _separable(r, 120, 4)
    Xt = r.normal(size=(30, 4))
    a = r.uniform(0.5, 5, 4)
    b = r.normal(0, 50, 4)
    cfg = MlpConfig(input_dim=4, hidden_neurons=8, epochs=10, rng_seed=seed)
    m1, _ = train(cfg, X, y, dtype=np.float64)
    m2, _ = train(cfg, X * a + b, y, dtype=np.float64)
    np.testing.assert_allclose(forward(m2, Xt * a + b), forward(m1, Xt), atol=1e-7)


def test_save_load_round_trip(tmp_path, rng):
    for k in (2, 17):
        m = _random_model(rng, 7, 5, k)
        m.config = MlpConfig(input_dim=7, hidden_neurons=5, output_classes=k)
        p = tmp_path / f"m{k}.json"
        save_model(m, p)
        back = load_model(p)
        for name in ("W1", "b1", "W2", "b2", "mean", "scale"):
            assert np.array_equal(getattr(back, name), getattr(m, name))
        assert back.vocab == m.vocab and back.config == m.config
        X = rng.normal(size=(3, 7))
        assert np.array_equal(forward(back, X), forward(m, X))


def test_load_errors(tmp_path, rng):
    m = _random_model(rng)
    p = tmp_path / "m.json"
    save_model(m, p)
    text = p.read_text()
    (tmp_path / "trunc.json").write_text(text[: len(text) // 2])
    with pytest.raises(ModelFormatError):
        load_model(tmp_path / "trunc.json")
    doc = json.loads(text)
    doc["version"] = 2
    (tmp_path / "v2.json").write_text(json.dumps(doc))
    with pytest.raises(IncompatibleVersionError):
        load_model(tmp_path / "v2.json")
    doc["version"] = 1
    del doc["weights"]["b2"]
    (tmp_path / "nob2.json").write_text(json.dumps(doc))
    with pytest.raises(ModelFormatError):
        load_model(tmp_path / "nob2.json")
