"""One-hidden-layer perceptron classifier trained with Adamax.

Architecture: z-score input standardization, dense sigmoid layer, dense
softmax output, categorical cross-entropy loss. Defaults follow the
reference setup (128 hidden units, 500 epochs, learning rate 0.01,
beta1 0.9, Adamax, mini-batches of 32).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import expit

from .errors import (
    ConfigError,
    IncompatibleVersionError,
    ModelFormatError,
    OptimizerError,
    ShapeError,
    TaskError,
    ValidationError,
)

MODEL_FORMAT = "photoanthro-mlp"
MODEL_VERSION = 1


@dataclass(frozen=True)
class MlpConfig:
    input_dim: int = 208
    hidden_neurons: int = 128
    output_classes: int = 2
    epochs: int = 500
    learning_rate: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    batch_size: int = 32
    rng_seed: int = 0
    hidden_activation: str = "sigmoid"
    output_activation: str = "softmax"
    optimizer: str = "adamax"

    def __post_init__(self):
        for name in ("input_dim", "hidden_neurons", "epochs", "batch_size"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.output_classes < 2:
            raise ConfigError("output_classes must be at least 2")
        if not self.learning_rate > 0 or not self.epsilon > 0:
            raise ConfigError("learning_rate and epsilon must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 <= 1):
            raise ConfigError("beta1 must be in [0, 1) and beta2 in [0, 1]")
        if (self.hidden_activation, self.output_activation, self.optimizer) != (
            "sigmoid", "softmax", "adamax"
        ):
            raise ConfigError("only sigmoid/softmax/adamax is implemented")


@dataclass(eq=False)
class MlpModel:
    W1: np.ndarray  # (hidden, input)
    b1: np.ndarray
    W2: np.ndarray  # (classes, hidden)
    b2: np.ndarray
    vocab: tuple
    mean: np.ndarray
    scale: np.ndarray
    config: MlpConfig | None = None

    def __post_init__(self):
        self.vocab = tuple(self.vocab)
        h, d = self.W1.shape
        k = self.W2.shape[0]
        if self.b1.shape != (h,) or self.W2.shape != (k, h) or self.b2.shape != (k,):
            raise ShapeError("inconsistent parameter shapes")
        if len(self.vocab) != k:
            raise ShapeError(f"vocab has {len(self.vocab)} labels for {k} outputs")
        if self.mean.shape != (d,) or self.scale.shape != (d,):
            raise ShapeError("normalization vectors must match input_dim")
        if np.any(self.scale <= 0):
            raise ValidationError("normalization scales must be positive")

    @property
    def input_dim(self) -> int:
        return self.W1.shape[1]

    @property
    def n_classes(self) -> int:
        return self.W2.shape[0]

    @classmethod
    def zeros(cls, input_dim, hidden, vocab, config=None) -> MlpModel:
        k = len(vocab)
        return cls(np.zeros((hidden, input_dim)), np.zeros(hidden), np.zeros((k, hidden)),
                   np.zeros(k), vocab, np.zeros(input_dim), np.ones(input_dim), config)

    @classmethod
    def random(cls, input_dim, hidden, vocab, rng, config=None) -> MlpModel:
        """Glorot-uniform weights, zero biases, identity normalization."""
        model = cls.zeros(input_dim, hidden, vocab, config)
        model.W1[...] = _glorot(rng, hidden, input_dim)
        model.W2[...] = _glorot(rng, len(vocab), hidden)
        return model

    def params(self) -> dict[str, np.ndarray]:
        return {"W1": self.W1, "b1": self.b1, "W2": self.W2, "b2": self.b2}

    def copy(self) -> MlpModel:
        return MlpModel(self.W1.copy(), self.b1.copy(), self.W2.copy(), self.b2.copy(),
                        self.vocab, self.mean.copy(), self.scale.copy(), self.config)

    @property
    def constant_features(self) -> list[int]:
        return [int(i) for i in np.flatnonzero(self.scale == 1.0)]


def _glorot(rng, fan_out, fan_in) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_out, fan_in))


@dataclass
class TrainLog:
    loss: list[float] = field(default_factory=list)
    accuracy: list[float] = field(default_factory=list)
    epochs: int = 0
    seed: int = 0


def fit_normalization(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-feature mean and scale; zero-variance features keep scale 1."""
    X = np.asarray(X, dtype=float)
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    scale = np.where(std > 0, std, 1.0)
    return mean, scale


def _check_features(model: MlpModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    squeeze = X.ndim == 1
    X = np.atleast_2d(X)
    if X.ndim != 2 or X.shape[1] != model.input_dim:
        raise ShapeError(f"expected {model.input_dim} features, got shape {np.shape(X)}")
    if not np.all(np.isfinite(X)):
        raise ValidationError("features must be finite")
    return X, squeeze


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _forward(W1, b1, W2, b2, Xn):
    h = expit(Xn @ W1.T + b1)
    return h, _softmax(h @ W2.T + b2)


def forward(model: MlpModel, features) -> np.ndarray:
    """Class probabilities for raw (unnormalized) features, one row per sample."""
    X, squeeze = _check_features(model, features)
    _, p = _forward(model.W1, model.b1, model.W2, model.b2, (X - model.mean) / model.scale)
    return p[0] if squeeze else p


def encode_labels(vocab: Sequence, labels) -> np.ndarray:
    lookup = {v: i for i, v in enumerate(vocab)}
    try:
        return np.array([lookup[_py(y)] for y in labels], dtype=np.int64)
    except KeyError as exc:
        raise ValidationError(f"label {exc.args[0]!r} not in vocabulary {list(vocab)}") from None


def _py(v):
    return v.item() if isinstance(v, np.generic) else v


def _batch(model, features, labels):
    X, _ = _check_features(model, features)
    y = encode_labels(model.vocab, labels)
    if len(y) == 0:
        raise ValidationError("empty batch")
    if len(y) != X.shape[0]:
        raise ShapeError("features and labels differ in length")
    return (X - model.mean) / model.scale, y


def loss(model: MlpModel, features, labels) -> float:
    """Mean categorical cross-entropy."""
    Xn, y = _batch(model, features, labels)
    h = expit(Xn @ model.W1.T + model.b1)
    z = h @ model.W2.T + model.b2
    z = z - z.max(axis=1, keepdims=True)
    log_p = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    return float(-log_p[np.arange(len(y)), y].mean())


def cross_entropy(probs, true_index) -> float:
    """Mean cross-entropy of probability rows against integer targets."""
    probs = np.atleast_2d(np.asarray(probs, dtype=float))
    idx = np.asarray(true_index).reshape(-1)
    with np.errstate(divide="ignore"):
        return float(-np.log(probs[np.arange(len(idx)), idx]).mean())


def backward(model: MlpModel, features, labels) -> dict[str, np.ndarray]:
    """Exact gradients of the mean cross-entropy w.r.t. W1, b1, W2, b2."""
    Xn, y = _batch(model, features, labels)
    h, p = _forward(model.W1, model.b1, model.W2, model.b2, Xn)
    dz = p
    dz[np.arange(len(y)), y] -= 1.0
    dz /= len(y)
    dh = (dz @ model.W2) * h * (1.0 - h)
    return {"W1": dh.T @ Xn, "b1": dh.sum(axis=0), "W2": dz.T @ h, "b2": dz.sum(axis=0)}


@dataclass
class AdamaxState:
    m: dict[str, np.ndarray]
    u: dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def zeros_like(cls, params: dict[str, np.ndarray]) -> AdamaxState:
        return cls({k: np.zeros_like(v) for k, v in params.items()},
                   {k: np.zeros_like(v) for k, v in params.items()})


def adamax_step(params, grads, state: AdamaxState, t: int, lr=0.01, beta1=0.9,
                beta2=0.999, eps=1e-8):
    """One Adamax update. Returns new ``(params, state)``; inputs are untouched.

    m <- b1 m + (1 - b1) g;  u <- max(b2 u, |g|);
    theta <- theta - lr / (1 - b1^t) * m / (u + eps)
    """
    if t < 1:
        raise ValueError("step index t starts at 1")
    new_params, new_m, new_u = {}, {}, {}
    step = lr / (1.0 - beta1**t)
    for k, theta in params.items():
        g = np.asarray(grads[k], dtype=float)
        if g.shape != theta.shape or state.m[k].shape != theta.shape:
            raise ShapeError(f"shape mismatch for {k}")
        if not np.all(np.isfinite(g)):
            raise OptimizerError(f"non-finite gradient for {k} at step {t}")
        new_m[k] = beta1 * state.m[k] + (1.0 - beta1) * g
        new_u[k] = np.maximum(beta2 * state.u[k], np.abs(g))
        new_params[k] = theta - step * new_m[k] / (new_u[k] + eps)
    return new_params, AdamaxState(new_m, new_u, t)


class _FlatParams:
    """All parameters in one contiguous buffer, with shaped views."""

    def __init__(self, input_dim, hidden, classes, dtype):
        shapes = [("W1", (hidden, input_dim)), ("b1", (hidden,)),
                  ("W2", (classes, hidden)), ("b2", (classes,))]
        sizes = [int(np.prod(s)) for _, s in shapes]
        self.flat = np.zeros(sum(sizes), dtype=dtype)
        self.views = {}
        offset = 0
        for (name, shape), size in zip(shapes, sizes):
            self.views[name] = self.flat[offset:offset + size].reshape(shape)
            offset += size

    def __getitem__(self, name):
        return self.views[name]


# The training loop runs in single precision (as the reference Keras setup
# did); fitted parameters are returned in double precision.
TRAIN_DTYPE = np.float32


def train(config: MlpConfig, features, labels, vocab: Sequence | None = None,
          normalization: tuple[np.ndarray, np.ndarray] | None = None,
          dtype=TRAIN_DTYPE) -> tuple[MlpModel, TrainLog]:
    """Fit a model on raw features with mini-batch Adamax.

    ``vocab`` fixes the output order (default: sorted unique labels). The
    standardization is fitted on ``features`` unless given explicitly.
    Everything random (initialization, per-epoch shuffling) is drawn from one
    generator seeded with ``config.rng_seed``.
    """
    X = np.asarray(features, dtype=float)
    if X.ndim != 2 or X.shape[1] != config.input_dim:
        raise ShapeError(f"expected (n, {config.input_dim}) features, got {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValidationError("features must be finite")
    labels = [_py(v) for v in labels]
    if vocab is None:
        vocab = sorted(set(labels))
    vocab = tuple(_py(v) for v in vocab)
    if len(vocab) != config.output_classes:
        raise ConfigError(f"config expects {config.output_classes} classes, vocab has {len(vocab)}")
    y = encode_labels(vocab, labels)
    if len(np.unique(y)) < 2:
        raise TaskError("training data contains a single class")

    mean, scale = normalization if normalization is not None else fit_normalization(X)
    Xn = ((X - mean) / scale).astype(dtype)
    n = len(y)
    k = len(vocab)
    onehot = np.eye(k, dtype=dtype)[y]

    rng = np.random.default_rng(config.rng_seed)
    P = _FlatParams(config.input_dim, config.hidden_neurons, k, dtype)
    P["W1"][...] = _glorot(rng, config.hidden_neurons, config.input_dim)
    P["W2"][...] = _glorot(rng, k, config.hidden_neurons)
    G = _FlatParams(config.input_dim, config.hidden_neurons, k, dtype)
    W1, b1, W2, b2 = P["W1"], P["b1"], P["W2"], P["b2"]
    gW1, gb1, gW2, gb2 = G["W1"], G["b1"], G["W2"], G["b2"]
    theta, grad = P.flat, G.flat
    m = np.zeros_like(theta)
    u = np.zeros_like(theta)
    tmp = np.empty_like(theta)

    one = dtype(1.0)
    beta1, beta2 = dtype(config.beta1), dtype(config.beta2)
    eps = dtype(config.epsilon)
    bs = config.batch_size
    log = TrainLog(seed=config.rng_seed)
    t = 0
    for epoch in range(config.epochs):
        perm = rng.permutation(n)
        total_loss = 0.0
        correct = 0
        for start in range(0, n, bs):
            idx = perm[start:start + bs]
            xb = Xn[idx]
            nb = len(idx)
            # sigmoid(a) = (1 + tanh(a / 2)) / 2
            h = xb @ W1.T
            h += b1
            h *= 0.5
            np.tanh(h, out=h)
            h += one
            h *= 0.5
            z = h @ W2.T
            z += b2
            z -= z.max(axis=1, keepdims=True)
            e = np.exp(z)
            s = e.sum(axis=1, keepdims=True)
            yb = y[idx]
            total_loss -= float(np.sum(z[np.arange(nb), yb] - np.log(s[:, 0])))
            correct += int(np.count_nonzero(z.argmax(axis=1) == yb))
            dz = e / s
            dz -= onehot[idx]
            dz /= nb
            np.dot(dz.T, h, out=gW2)
            dz.sum(axis=0, out=gb2)
            dh = dz @ W2
            dh *= h
            h -= one
            dh *= h
            np.negative(dh, out=dh)
            np.dot(dh.T, xb, out=gW1)
            dh.sum(axis=0, out=gb1)
            if not math.isfinite(float(grad @ grad)):
                raise OptimizerError(f"non-finite gradient at epoch {epoch + 1}")

            t += 1
            m *= beta1
            np.multiply(grad, one - beta1, out=tmp)
            m += tmp
            np.abs(grad, out=tmp)
            u *= beta2
            np.maximum(u, tmp, out=u)
            np.add(u, eps, out=tmp)
            np.divide(m, tmp, out=tmp)
            tmp *= dtype(config.learning_rate / (1.0 - config.beta1**t))
            theta -= tmp
        epoch_loss = total_loss / n
        if not math.isfinite(epoch_loss):
            raise OptimizerError(f"loss became non-finite at epoch {epoch + 1}")
        log.loss.append(epoch_loss)
        log.accuracy.append(correct / n)
    log.epochs = config.epochs

    model = MlpModel(W1.astype(float), b1.astype(float), W2.astype(float), b2.astype(float),
                     vocab, np.array(mean, dtype=float), np.array(scale, dtype=float), config)
    return model, log


def predict(model: MlpModel, features):
    """``(label, probabilities)`` for one sample, or lists of both for a batch.

    Ties go to the earliest vocabulary entry.
    """
    probs = forward(model, features)
    if probs.ndim == 1:
        return model.vocab[int(np.argmax(probs))], probs
    return [model.vocab[i] for i in np.argmax(probs, axis=1)], probs


def save_model(model: MlpModel, path) -> None:
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "config": asdict(model.config) if model.config is not None else None,
        "vocab": [_py(v) for v in model.vocab],
        "normalization": {
            "mean": model.mean.tolist(),
            "scale": model.scale.tolist(),
            "constant_features": model.constant_features,
        },
        "weights": {k: v.tolist() for k, v in model.params().items()},
    }
    Path(path).write_text(json.dumps(doc) + "\n", encoding="utf-8")


def load_model(path) -> MlpModel:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ModelFormatError(f"{path}: not a readable model file ({exc})") from None
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise ModelFormatError(f"{path}: not a {MODEL_FORMAT} file")
    if doc.get("version") != MODEL_VERSION:
        raise IncompatibleVersionError(
            f"{path}: model format version {doc.get('version')!r}, this library reads {MODEL_VERSION}"
        )
    try:
        w = doc["weights"]
        norm = doc["normalization"]
        config = MlpConfig(**doc["config"]) if doc.get("config") else None
        return MlpModel(
            np.array(w["W1"], dtype=float), np.array(w["b1"], dtype=float),
            np.array(w["W2"], dtype=float), np.array(w["b2"], dtype=float),
            tuple(doc["vocab"]),
            np.array(norm["mean"], dtype=float), np.array(norm["scale"], dtype=float),
            config,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"{path}: malformed model file ({exc})") from None
