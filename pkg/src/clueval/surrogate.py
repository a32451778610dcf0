"""Softmax MLP classifier with explicit forward and backward passes.

The network is a stack of dense+ReLU hidden layers (inverted dropout after
each activation in train mode) followed by a linear softmax head.  Gradients
are computed by hand; there is no autodiff anywhere in the package.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .rng import RngState

# Purpose-stream indices under a training call's RngState.  The supervised
# and semi-supervised loops share the first three so that the semi-supervised
# loop with the unlabeled branch disabled consumes bit-identical randomness.
STREAM_INIT = 0
STREAM_ORDER = 1
STREAM_DROPOUT = 2
STREAM_VALSPLIT = 3

PROB_FLOOR = 1e-12

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class MlpModel:
    """Weights and biases, hidden layers first and the softmax head last."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    dropout_rate: float = 0.2

    @property
    def in_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def out_dim(self) -> int:
        return self.weights[-1].shape[1]

    @property
    def n_hidden(self) -> int:
        return len(self.weights) - 1

    def copy(self) -> "MlpModel":
        return MlpModel(
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.dropout_rate,
        )

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        """Eval-mode class probabilities for a batch, rows summing to 1."""
        probs, _ = _forward_pass(self, np.atleast_2d(np.asarray(x, dtype=np.float64)), None)
        return probs

    def mc_dropout_rows(self, x: np.ndarray, passes: int, g: np.random.Generator) -> np.ndarray:
        """Stacked train-mode probability tensors, shape (passes, n, k)."""
        batch = np.atleast_2d(np.asarray(x, dtype=np.float64))
        return np.stack([_forward_pass(self, batch, g)[0] for _ in range(passes)])

    def to_json(self) -> str:
        payload = {
            "dropout_rate": self.dropout_rate,
            "layers": [
                {
                    "shape": list(w.shape),
                    "weights": [float(v) for v in w.ravel()],
                    "biases": [float(v) for v in b],
                }
                for w, b in zip(self.weights, self.biases)
            ],
        }
        return json.dumps(payload)

    @classmethod
    def from_json(cls, text: str) -> "MlpModel":
        payload = json.loads(text)
        weights, biases = [], []
        for layer in payload["layers"]:
            shape = tuple(layer["shape"])
            weights.append(np.array(layer["weights"], dtype=np.float64).reshape(shape))
            biases.append(np.array(layer["biases"], dtype=np.float64))
        return cls(weights, biases, float(payload["dropout_rate"]))


def models_identical(a: MlpModel, b: MlpModel) -> bool:
    """Bitwise equality of all parameters."""
    if len(a.weights) != len(b.weights):
        return False
    return all(np.array_equal(x, y) for x, y in zip(a.weights, b.weights)) and all(
        np.array_equal(x, y) for x, y in zip(a.biases, b.biases)
    )


def init_mlp(
    rng: RngState,
    in_dim: int,
    out_dim: int,
    hidden_dim: int = 128,
    hidden_layers: int = 4,
    dropout_rate: float = 0.2,
) -> MlpModel:
    """He-style uniform init, biases zero, sampled layer by layer from rng."""
    if in_dim < 1 or out_dim < 1 or hidden_dim < 1 or hidden_layers < 0:
        raise ValueError("invalid architecture dimensions")
    if not 0.0 <= dropout_rate < 1.0:
        raise ValueError("dropout_rate must be in [0, 1)")
    g = rng.generator()
    dims = [in_dim] + [hidden_dim] * hidden_layers + [out_dim]
    weights, biases = [], []
    for fan_in, fan_out in zip(dims, dims[1:]):
        limit = math.sqrt(6.0 / fan_in)
        weights.append(g.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpModel(weights, biases, dropout_rate)


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def _forward_pass(model: MlpModel, x: np.ndarray, g: np.random.Generator | None):
    """Forward a batch; ``g`` not None enables train-mode dropout.

    Returns (probs, cache) where cache holds everything the backward pass
    needs: per-layer inputs, pre-activation signs, and dropout masks.
    """
    keep = 1.0 - model.dropout_rate
    h = x
    inputs, relu_masks, drop_masks = [], [], []
    for w, b in zip(model.weights[:-1], model.biases[:-1]):
        inputs.append(h)
        z = h @ w + b
        a = np.maximum(z, 0.0)
        relu_masks.append(z > 0)
        if g is not None and model.dropout_rate > 0.0:
            mask = g.random(a.shape) < keep
            a = a * mask / keep
            drop_masks.append(mask)
        else:
            drop_masks.append(None)
        h = a
    inputs.append(h)
    logits = h @ model.weights[-1] + model.biases[-1]
    probs = _softmax(logits)
    return probs, (inputs, relu_masks, drop_masks)


def _backward_pass(model: MlpModel, cache, d_logits: np.ndarray):
    """Gradients of a scalar loss given d(loss)/d(logits)."""
    inputs, relu_masks, drop_masks = cache
    keep = 1.0 - model.dropout_rate
    n_layers = len(model.weights)
    grads_w = [np.empty(0)] * n_layers
    grads_b = [np.empty(0)] * n_layers
    grads_w[-1] = inputs[-1].T @ d_logits
    grads_b[-1] = d_logits.sum(axis=0)
    dh = d_logits @ model.weights[-1].T
    for i in range(n_layers - 2, -1, -1):
        if drop_masks[i] is not None:
            dh = dh * drop_masks[i] / keep
        dz = dh * relu_masks[i]
        grads_w[i] = inputs[i].T @ dz
        grads_b[i] = dz.sum(axis=0)
        if i > 0:
            dh = dz @ model.weights[i].T
    return grads_w, grads_b


def forward(model: MlpModel, batch: np.ndarray, mode: str = "eval", rng: RngState | None = None) -> np.ndarray:
    """Row-stochastic class probabilities for a batch.

    ``mode`` is "eval" (no dropout) or "train" (inverted dropout after each
    hidden activation, masks drawn from ``rng``).
    """
    x = np.atleast_2d(np.asarray(batch, dtype=np.float64))
    if x.shape[1] != model.in_dim:
        raise ValueError(f"batch has dimension {x.shape[1]}, model expects {model.in_dim}")
    if mode == "eval":
        g = None
    elif mode == "train":
        if rng is None:
            raise ValueError("train-mode forward requires an rng")
        g = rng.generator()
    else:
        raise ValueError(f"unknown mode {mode!r}")
    probs, _ = _forward_pass(model, x, g)
    return probs


def cross_entropy(probs: np.ndarray, targets: np.ndarray) -> float:
    """Mean negative log-likelihood of integer targets, probabilities floored."""
    picked = probs[np.arange(len(targets)), targets]
    return float(-np.mean(np.log(np.maximum(picked, PROB_FLOOR))))


def _ce_loss_and_grads(model: MlpModel, x: np.ndarray, y: np.ndarray, g: np.random.Generator | None):
    probs, cache = _forward_pass(model, x, g)
    loss = cross_entropy(probs, y)
    d_logits = probs.copy()
    d_logits[np.arange(len(y)), y] -= 1.0
    d_logits /= len(y)
    grads_w, grads_b = _backward_pass(model, cache, d_logits)
    return loss, grads_w, grads_b


def mc_dropout_predict(model: MlpModel, x: np.ndarray, passes: int, rng: RngState) -> np.ndarray:
    """Train-mode probability rows for one point, one row per dropout pass.

    With passes=1 this equals a single train-mode forward for the same rng
    state; with dropout_rate 0 every pass equals the eval-mode output.
    """
    if passes < 1:
        raise ValueError("passes must be >= 1")
    point = np.asarray(x, dtype=np.float64).reshape(1, -1)
    g = rng.generator()
    rows = [_forward_pass(model, point, g)[0][0] for _ in range(passes)]
    return np.stack(rows)


class SgdOptimizer:
    """Plain SGD; weight decay is added to the weight gradients (not biases)."""

    def __init__(self, weight_decay: float = 0.0):
        self.weight_decay = weight_decay

    def step(self, model: MlpModel, grads_w, grads_b, lr: float) -> None:
        for i in range(len(model.weights)):
            g = grads_w[i]
            if self.weight_decay:
                g = g + self.weight_decay * model.weights[i]
            model.weights[i] -= lr * g
            model.biases[i] -= lr * grads_b[i]


class AdamOptimizer:
    """Adam with bias correction; weight decay added to weight gradients."""

    def __init__(self, model: MlpModel, weight_decay: float = 0.0):
        self.weight_decay = weight_decay
        self.t = 0
        self.m_w = [np.zeros_like(w) for w in model.weights]
        self.v_w = [np.zeros_like(w) for w in model.weights]
        self.m_b = [np.zeros_like(b) for b in model.biases]
        self.v_b = [np.zeros_like(b) for b in model.biases]

    def step(self, model: MlpModel, grads_w, grads_b, lr: float) -> None:
        self.t += 1
        c1 = 1.0 - ADAM_BETA1**self.t
        c2 = 1.0 - ADAM_BETA2**self.t
        for i in range(len(model.weights)):
            gw = grads_w[i]
            if self.weight_decay:
                gw = gw + self.weight_decay * model.weights[i]
            self.m_w[i] = ADAM_BETA1 * self.m_w[i] + (1 - ADAM_BETA1) * gw
            self.v_w[i] = ADAM_BETA2 * self.v_w[i] + (1 - ADAM_BETA2) * gw * gw
            model.weights[i] -= lr * (self.m_w[i] / c1) / (np.sqrt(self.v_w[i] / c2) + ADAM_EPS)
            gb = grads_b[i]
            self.m_b[i] = ADAM_BETA1 * self.m_b[i] + (1 - ADAM_BETA1) * gb
            self.v_b[i] = ADAM_BETA2 * self.v_b[i] + (1 - ADAM_BETA2) * gb * gb
            model.biases[i] -= lr * (self.m_b[i] / c1) / (np.sqrt(self.v_b[i] / c2) + ADAM_EPS)


def cosine_lr(base_lr: float, step: int, total_steps: int) -> float:
    """Half-cosine decay from base_lr to 0 with no warmup."""
    if total_steps <= 0:
        return base_lr
    return base_lr * 0.5 * (1.0 + math.cos(math.pi * step / total_steps))


@dataclass
class TrainConfig:
    """Supervised training hyperparameters."""

    optimizer: str = "adam"
    learning_rate: float = 0.01
    weight_decay: float = 0.0
    batch_size: int = 64
    epochs: int = 20
    validation_fraction: float = 0.2
    lr_schedule: str = "constant"

    def __post_init__(self) -> None:
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.lr_schedule not in ("constant", "cosine"):
            raise ValueError(f"unknown lr schedule {self.lr_schedule!r}")
        if self.learning_rate <= 0 or self.batch_size < 1 or self.epochs < 1:
            raise ValueError("learning_rate, batch_size, and epochs must be positive")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ValueError("validation_fraction must be in [0, 1)")


def _batch_slices(order: np.ndarray, batch_size: int):
    for start in range(0, len(order), batch_size):
        yield order[start : start + batch_size]


def train_supervised(
    init_rng: RngState,
    x: np.ndarray,
    y: np.ndarray,
    out_dim: int,
    cfg: TrainConfig,
    hidden_dim: int = 128,
    hidden_layers: int = 4,
    dropout_rate: float = 0.2,
) -> MlpModel:
    """Minibatch cross-entropy training with best-on-validation selection.

    Holds out validation_fraction of the points (at least 1 on each side)
    and returns the weights with the lowest validation cross-entropy.  With
    fewer than 10 points or a zero fraction, validation is skipped and the
    final-epoch weights are returned.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n = len(x)
    if n < 2:
        raise ValueError("training requires at least 2 labeled points")
    if len(y) != n:
        raise ValueError("x and y must have equal length")
    if np.any(y < 0) or np.any(y >= out_dim):
        raise ValueError("labels must lie in [0, out_dim)")

    model = init_mlp(init_rng.child(STREAM_INIT), x.shape[1], out_dim, hidden_dim, hidden_layers, dropout_rate)
    g_order = init_rng.child(STREAM_ORDER).generator()
    g_drop = init_rng.child(STREAM_DROPOUT).generator()

    use_validation = cfg.validation_fraction > 0.0 and n >= 10
    if use_validation:
        g_val = init_rng.child(STREAM_VALSPLIT).generator()
        perm = g_val.permutation(n)
        n_val = min(max(1, int(round(cfg.validation_fraction * n))), n - 1)
        val_idx, train_idx = perm[:n_val], perm[n_val:]
        x_val, y_val = x[val_idx], y[val_idx]
        x_train, y_train = x[train_idx], y[train_idx]
    else:
        x_train, y_train = x, y

    if cfg.optimizer == "adam":
        opt = AdamOptimizer(model, cfg.weight_decay)
    else:
        opt = SgdOptimizer(cfg.weight_decay)

    n_train = len(x_train)
    steps_per_epoch = math.ceil(n_train / cfg.batch_size)
    total_steps = cfg.epochs * steps_per_epoch
    best: MlpModel | None = None
    best_ce = math.inf
    step = 0
    for _ in range(cfg.epochs):
        order = g_order.permutation(n_train)
        for batch in _batch_slices(order, cfg.batch_size):
            lr = cfg.learning_rate
            if cfg.lr_schedule == "cosine":
                lr = cosine_lr(cfg.learning_rate, step, total_steps)
            _, grads_w, grads_b = _ce_loss_and_grads(model, x_train[batch], y_train[batch], g_drop)
            opt.step(model, grads_w, grads_b, lr)
            step += 1
        if use_validation:
            val_ce = cross_entropy(model.predict_proba(x_val), y_val)
            if val_ce < best_ce:
                best_ce = val_ce
                best = model.copy()
    return best if best is not None else model
