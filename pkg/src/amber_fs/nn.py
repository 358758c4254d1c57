"""Small dense neural-network engine.

Everything is float64 numpy. Weights are stored output-major
(``W[l].shape == (output_width, input_width)``), so a layer computes
``act(x @ W.T + b)`` on a row batch ``x``.

Training is plain mini-batch SGD with seeded shuffling and optional
early stopping on a held-out tail of the shuffled training set.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError, NumericError, ShapeError

ACTIVATIONS = ("relu", "sigmoid", "softmax", "linear")
LOSSES = ("cross_entropy", "binary_cross_entropy", "mse")
CLAMP = 1e-12


@dataclass(frozen=True)
class LayerSpec:
    input_width: int
    output_width: int
    activation: str = "relu"

    def __post_init__(self):
        if int(self.input_width) < 1 or int(self.output_width) < 1:
            raise ConfigError(f"layer widths must be positive, got {self.input_width}x{self.output_width}")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")


def dense_specs(input_width, widths, hidden="relu", output="linear"):
    """Chain ``input_width -> widths[0] -> ... -> widths[-1]``.

    >>> [s.output_width for s in dense_specs(30, [16, 8, 6, 1], output="sigmoid")]
    [16, 8, 6, 1]
    """
    specs = []
    fan_in = int(input_width)
    for i, w in enumerate(widths):
        act = output if i == len(widths) - 1 else hidden
        specs.append(LayerSpec(fan_in, int(w), act))
        fan_in = int(w)
    return specs


@dataclass
class Architecture:
    """Layer widths and activations with the input width left open."""

    widths: list
    output: str = "sigmoid"
    hidden: str = "relu"

    def build(self, input_width):
        return dense_specs(input_width, self.widths, hidden=self.hidden, output=self.output)


def check_specs(specs):
    if not specs:
        raise ConfigError("a network needs at least one layer")
    for i in range(len(specs) - 1):
        if specs[i].output_width != specs[i + 1].input_width:
            raise ConfigError(
                f"layer {i} outputs {specs[i].output_width} but layer {i + 1} "
                f"expects {specs[i + 1].input_width}"
            )
        if specs[i].activation == "softmax":
            raise ConfigError("softmax is only allowed on the final layer")


@dataclass
class NetworkParams:
    specs: list
    weights: list
    biases: list

    @property
    def input_width(self):
        return self.specs[0].input_width

    @property
    def output_width(self):
        return self.specs[-1].output_width

    @property
    def output_activation(self):
        return self.specs[-1].activation

    def copy(self):
        return NetworkParams(list(self.specs), [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def equals(self, other):
        """Bitwise equality of architecture and parameters."""
        return (
            self.specs == other.specs
            and all(np.array_equal(a, b) for a, b in zip(self.weights, other.weights))
            and all(np.array_equal(a, b) for a, b in zip(self.biases, other.biases))
        )

    def is_finite(self):
        return all(np.all(np.isfinite(w)) for w in self.weights) and all(
            np.all(np.isfinite(b)) for b in self.biases
        )

    def to_dict(self):
        return {
            "specs": [[s.input_width, s.output_width, s.activation] for s in self.specs],
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, doc):
        specs = [LayerSpec(int(a), int(b), act) for a, b, act in doc["specs"]]
        check_specs(specs)
        weights = [np.asarray(w, dtype=np.float64).reshape(s.output_width, s.input_width) for w, s in zip(doc["weights"], specs)]
        biases = [np.asarray(b, dtype=np.float64).reshape(s.output_width) for b, s in zip(doc["biases"], specs)]
        return cls(specs, weights, biases)


@dataclass
class TrainConfig:
    loss: str = "cross_entropy"
    learning_rate: float = 0.01
    batch_size: int = 32
    max_epochs: int = 100
    patience: int = 5
    validation_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.loss not in LOSSES:
            raise ConfigError(f"unknown loss {self.loss!r}")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be positive")
        if int(self.batch_size) < 1:
            raise ConfigError("batch_size must be positive")
        if int(self.max_epochs) < 0:
            raise ConfigError("max_epochs must be non-negative")
        if int(self.patience) < 0:
            raise ConfigError("patience must be non-negative")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ConfigError("validation_fraction must lie in [0, 1)")
        if self.patience > 0 and self.validation_fraction <= 0:
            raise ConfigError("early stopping (patience > 0) needs validation_fraction > 0")
        if int(self.seed) < 0:
            raise ConfigError("seed must be non-negative")

    def replace(self, **changes):
        new = copy.copy(self)
        for k, v in changes.items():
            setattr(new, k, v)
        new.__post_init__()
        return new


@dataclass
class TrainReport:
    epochs_run: int = 0
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    best_epoch: int = -1


@dataclass
class Gradients:
    weights: list
    biases: list


def init_network(specs, seed=0):
    """Glorot-uniform weights and zero biases, deterministic in ``seed``."""
    specs = list(specs)
    check_specs(specs)
    rng = np.random.default_rng(int(seed))
    weights, biases = [], []
    for s in specs:
        limit = np.sqrt(6.0 / (s.input_width + s.output_width))
        weights.append(rng.uniform(-limit, limit, size=(s.output_width, s.input_width)))
        biases.append(np.zeros(s.output_width))
    return NetworkParams(specs, weights, biases)


def activate(z, kind):
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "sigmoid":
        out = np.empty_like(z)
        pos = z >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
        ez = np.exp(z[~pos])
        out[~pos] = ez / (1.0 + ez)
        return out
    if kind == "softmax":
        e = np.exp(z - z.max(axis=1, keepdims=True))
        return e / e.sum(axis=1, keepdims=True)
    return z


def _activation_backward(grad_a, z, a, kind):
    if kind == "relu":
        return grad_a * (z > 0)
    if kind == "sigmoid":
        return grad_a * a * (1.0 - a)
    if kind == "softmax":
        return a * (grad_a - np.sum(grad_a * a, axis=1, keepdims=True))
    return grad_a


def _as_inputs(net, X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != net.input_width:
        raise ShapeError(f"network expects {net.input_width} input columns, got shape {X.shape}")
    return X


def forward(net, X):
    """Row-wise network outputs for the ``n x d`` matrix ``X``."""
    a = _as_inputs(net, X)
    for s, W, b in zip(net.specs, net.weights, net.biases):
        a = activate(a @ W.T + b, s.activation)
    return a


def forward_from_first(net, z1):
    """Finish a forward pass given first-layer pre-activations ``z1``.

    Lets callers that perturb single input columns update ``z1`` with a
    rank-one correction instead of recomputing the first matmul.
    """
    a = activate(z1, net.specs[0].activation)
    for s, W, b in zip(net.specs[1:], net.weights[1:], net.biases[1:]):
        a = activate(a @ W.T + b, s.activation)
    return a


def first_preactivation(net, X):
    X = _as_inputs(net, X)
    return X @ net.weights[0].T + net.biases[0]


def target_matrix(targets, width, loss):
    """Turn a label vector or target matrix into an ``n x width`` float matrix."""
    t = np.asarray(targets)
    if t.ndim == 2:
        if t.shape[1] != width:
            raise ShapeError(f"targets have {t.shape[1]} columns, outputs have {width}")
        return t.astype(np.float64)
    if t.ndim != 1:
        raise ShapeError("targets must be a vector of labels or a matrix")
    if width == 1:
        if loss in ("binary_cross_entropy", "cross_entropy") and np.any((t != 0) & (t != 1)):
            raise DataError("binary targets must be 0 or 1")
        return t.astype(np.float64).reshape(-1, 1)
    labels = t.astype(np.int64)
    if np.any(labels != t) or np.any(labels < 0) or np.any(labels >= width):
        raise DataError(f"labels must be integers in [0, {width})")
    out = np.zeros((len(labels), width))
    out[np.arange(len(labels)), labels] = 1.0
    return out


def _per_example_loss(outputs, T, loss):
    if loss == "mse":
        return np.mean((outputs - T) ** 2, axis=1)
    if loss == "cross_entropy":
        return -np.sum(T * np.log(np.clip(outputs, CLAMP, 1.0)), axis=1)
    p = np.clip(outputs, CLAMP, 1.0 - CLAMP)
    return -np.mean(T * np.log(p) + (1.0 - T) * np.log(1.0 - p), axis=1)


def loss_value(outputs, targets, loss):
    """Mean per-example loss. ``mse`` and ``binary_cross_entropy`` average over output columns."""
    if loss not in LOSSES:
        raise ConfigError(f"unknown loss {loss!r}")
    outputs = np.asarray(outputs, dtype=np.float64)
    if outputs.ndim == 1:
        outputs = outputs[:, None]
    T = target_matrix(targets, outputs.shape[1], loss)
    if T.shape[0] != outputs.shape[0]:
        raise ShapeError(f"{outputs.shape[0]} outputs but {T.shape[0]} targets")
    return float(np.mean(_per_example_loss(outputs, T, loss)))


def _output_delta(net, z, a, T, loss):
    """dL/dz for the final layer, with the mean over the batch folded in."""
    n, c = a.shape
    act = net.output_activation
    if (act, loss) == ("softmax", "cross_entropy"):
        return (a - T) / n
    if (act, loss) == ("sigmoid", "binary_cross_entropy"):
        return (a - T) / (n * c)
    if loss == "mse":
        grad_a = 2.0 * (a - T) / (n * c)
    elif loss == "cross_entropy":
        inside = (a >= CLAMP) & (a <= 1.0)
        grad_a = -T / np.clip(a, CLAMP, 1.0) * inside / n
    else:
        p = np.clip(a, CLAMP, 1.0 - CLAMP)
        inside = (a >= CLAMP) & (a <= 1.0 - CLAMP)
        grad_a = (-(T / p) + (1.0 - T) / (1.0 - p)) * inside / (n * c)
    return _activation_backward(grad_a, z, a, act)


def _backprop(net, X, T, loss):
    acts, pres = [X], []
    a = X
    for s, W, b in zip(net.specs, net.weights, net.biases):
        z = a @ W.T + b
        a = activate(z, s.activation)
        pres.append(z)
        acts.append(a)
    delta = _output_delta(net, pres[-1], acts[-1], T, loss)
    gw = [None] * len(net.specs)
    gb = [None] * len(net.specs)
    for layer in range(len(net.specs) - 1, -1, -1):
        gw[layer] = delta.T @ acts[layer]
        gb[layer] = delta.sum(axis=0)
        if layer > 0:
            grad_a = delta @ net.weights[layer]
            delta = _activation_backward(grad_a, pres[layer - 1], acts[layer], net.specs[layer - 1].activation)
    return Gradients(gw, gb)


def gradients(net, X, targets, loss):
    """Gradient of the mean batch loss with respect to every weight and bias."""
    X = _as_inputs(net, X)
    if X.shape[0] == 0:
        raise DataError("gradient of an empty batch")
    T = target_matrix(targets, net.output_width, loss)
    if T.shape[0] != X.shape[0]:
        raise ShapeError(f"{X.shape[0]} inputs but {T.shape[0]} targets")
    return _backprop(net, X, T, loss)


def train(net, X, y, config):
    """Mini-batch SGD. Returns ``(trained_copy, TrainReport)``; the input net is not modified."""
    X = _as_inputs(net, X)
    n = X.shape[0]
    if n == 0:
        raise DataError("cannot train on an empty dataset")
    T = target_matrix(y, net.output_width, config.loss)
    if T.shape[0] != n:
        raise ShapeError(f"{n} inputs but {T.shape[0]} targets")

    net = net.copy()
    report = TrainReport()
    if config.max_epochs == 0:
        return net, report

    rng = np.random.default_rng(int(config.seed))
    order = rng.permutation(n)
    n_val = int(round(n * config.validation_fraction)) if config.validation_fraction > 0 else 0
    if config.validation_fraction > 0:
        n_val = min(max(n_val, 1), n - 1)
    if n_val > 0:
        tr_idx, va_idx = order[: n - n_val], order[n - n_val :]
    else:
        tr_idx, va_idx = order, order[:0]
    Xtr, Ttr = X[tr_idx], T[tr_idx]
    Xva, Tva = X[va_idx], T[va_idx]
    if len(tr_idx) == 0:
        raise DataError("no training rows left after the validation split")

    lr = float(config.learning_rate)
    bs = int(config.batch_size)
    best = None
    best_val = np.inf
    waited = 0
    for epoch in range(int(config.max_epochs)):
        perm = rng.permutation(len(tr_idx))
        for start in range(0, len(perm), bs):
            batch = perm[start : start + bs]
            g = _backprop(net, Xtr[batch], Ttr[batch], config.loss)
            for layer in range(len(net.specs)):
                net.weights[layer] -= lr * g.weights[layer]
                net.biases[layer] -= lr * g.biases[layer]
        if not net.is_finite():
            raise NumericError(f"non-finite parameters after epoch {epoch}")
        report.train_loss.append(float(np.mean(_per_example_loss(forward(net, Xtr), Ttr, config.loss))))
        if n_val > 0:
            report.val_loss.append(float(np.mean(_per_example_loss(forward(net, Xva), Tva, config.loss))))
        report.epochs_run = epoch + 1

        if config.patience > 0:
            v = report.val_loss[-1]
            if v < best_val:
                best_val, best, waited = v, net.copy(), 0
                report.best_epoch = epoch
            else:
                waited += 1
                if waited >= config.patience:
                    break

    if config.patience > 0 and best is not None:
        net = best
    elif report.val_loss:
        report.best_epoch = int(np.argmin(report.val_loss))
    else:
        report.best_epoch = report.epochs_run - 1
    return net, report


def predict(net, X):
    out = forward(net, X)
    if out.shape[1] == 1:
        return (out[:, 0] > 0.5).astype(np.int64)
    return np.argmax(out, axis=1)


def evaluate_accuracy(net, X, y):
    """Fraction of correct predictions; ties go to the lowest class index."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise DataError("accuracy of an empty dataset is undefined")
    y = np.asarray(y)
    return float(np.mean(predict(net, X) == y))
