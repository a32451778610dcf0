"""Semi-supervised surrogate training with consistency regularization.

The unlabeled objective follows the usual two-view recipe: a weak view of
each unlabeled point (the model's own dropout, train-mode forward on the raw
input) produces a confidence-thresholded one-hot pseudo-target, and the model
is trained to predict that target on a strong view (mixup on the inputs).

With unlabeled_weight 0 or an empty unlabeled set the loop skips the
unlabeled branch entirely and reduces bit-identically to supervised SGD
training with the same seed: both paths consume the same init, batch-order,
and dropout streams, and nothing else.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .rng import RngState
from .surrogate import (
    STREAM_DROPOUT,
    STREAM_INIT,
    STREAM_ORDER,
    MlpModel,
    SgdOptimizer,
    _backward_pass,
    _batch_slices,
    _ce_loss_and_grads,
    _forward_pass,
    cosine_lr,
    cross_entropy,
    init_mlp,
)

# Purpose streams used only by the unlabeled branch; disjoint from the
# supervised streams so that skipping the branch leaves them untouched.
STREAM_UNLABELED_SAMPLE = 4
STREAM_WEAK_DROPOUT = 5
STREAM_STRONG_DROPOUT = 6
STREAM_MIXUP = 7


@dataclass
class FixMatchConfig:
    """Hyperparameters for the semi-supervised objective and its SGD loop."""

    labeled_batch: int = 32
    unlabeled_ratio: int = 7
    confidence_threshold: float = 0.95
    unlabeled_weight: float = 1.0
    mixup_alpha: float = 9.0
    learning_rate: float = 0.03
    weight_decay: float = 5e-4
    epochs: int = 64  # desk scale; see paper_scale()

    def __post_init__(self) -> None:
        if self.labeled_batch < 1 or self.unlabeled_ratio < 1 or self.epochs < 1:
            raise ValueError("labeled_batch, unlabeled_ratio, and epochs must be positive")
        if not 0.0 < self.confidence_threshold <= 1.0:
            raise ValueError("confidence_threshold must be in (0, 1]")
        if self.unlabeled_weight < 0.0:
            raise ValueError("unlabeled_weight must be nonnegative")
        if self.mixup_alpha <= 0.0 or self.learning_rate <= 0.0:
            raise ValueError("mixup_alpha and learning_rate must be positive")

    @classmethod
    def paper_scale(cls) -> "FixMatchConfig":
        return cls(epochs=1024)


def _as_generator(rng: RngState | np.random.Generator) -> np.random.Generator:
    return rng.generator() if isinstance(rng, RngState) else rng


def mixup_batch(
    batch: np.ndarray,
    alpha: float,
    rng: RngState | np.random.Generator,
    lam: float | np.ndarray | None = None,
):
    """Convex input mixing against a random permutation partner.

    Coefficients are Beta(alpha, alpha) draws folded to [0.5, 1] by
    max(lam, 1 - lam), so each mixed row stays closest to its own input.
    Draw order is coefficients first, then the partner permutation.  ``lam``
    overrides the Beta draw (that draw is skipped entirely).

    Returns (mixed, partner_index, folded_lam).
    """
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim != 2 or len(x) < 2:
        raise ValueError("mixup requires a 2-d batch of at least 2 rows")
    g = _as_generator(rng)
    if lam is None:
        raw = g.beta(alpha, alpha, size=len(x))
    else:
        raw = np.broadcast_to(np.asarray(lam, dtype=np.float64), (len(x),)).copy()
    folded = np.maximum(raw, 1.0 - raw)
    partner = g.permutation(len(x))
    mixed = folded[:, None] * x + (1.0 - folded)[:, None] * x[partner]
    return mixed, partner, folded


def _strong_view(
    x_u: np.ndarray, alpha: float, g: np.random.Generator, lam: float | np.ndarray | None
) -> np.ndarray:
    # A single row has no distinct partner; mixing is then the identity.
    if len(x_u) < 2:
        return np.asarray(x_u, dtype=np.float64)
    mixed, _, _ = mixup_batch(x_u, alpha, g, lam=lam)
    return mixed


def fixmatch_loss(
    model: MlpModel,
    labeled: tuple[np.ndarray, np.ndarray],
    unlabeled: np.ndarray,
    cfg: FixMatchConfig,
    rng: RngState,
    lam: float | np.ndarray | None = None,
):
    """Loss value on one batch pair.

    Returns (loss, labeled_term, unlabeled_term, mask_rate) with
    loss == labeled_term + unlabeled_weight * unlabeled_term exactly.
    Unlabeled points whose weak-view confidence falls below the threshold
    contribute zero.  ``lam`` forces the mixup coefficients (test hook).
    """
    x_l, y_l = labeled
    x_l = np.asarray(x_l, dtype=np.float64)
    y_l = np.asarray(y_l, dtype=np.int64)
    x_u = np.asarray(unlabeled, dtype=np.float64)
    if len(x_l) == 0 or len(x_u) == 0:
        raise ValueError("fixmatch_loss requires nonempty labeled and unlabeled batches")

    g_drop = rng.child(STREAM_DROPOUT).generator()
    g_weak = rng.child(STREAM_WEAK_DROPOUT).generator()
    g_strong = rng.child(STREAM_STRONG_DROPOUT).generator()
    g_mix = rng.child(STREAM_MIXUP).generator()

    probs_l, _ = _forward_pass(model, x_l, g_drop)
    labeled_term = cross_entropy(probs_l, y_l)

    weak, _ = _forward_pass(model, x_u, g_weak)
    confidence = weak.max(axis=1)
    targets = weak.argmax(axis=1)
    passed = confidence >= cfg.confidence_threshold
    mask_rate = float(passed.mean())

    strong_x = _strong_view(x_u, cfg.mixup_alpha, g_mix, lam)
    strong, _ = _forward_pass(model, strong_x, g_strong)
    picked = np.maximum(strong[np.arange(len(targets)), targets], 1e-12)
    unlabeled_term = float(np.sum(passed * -np.log(picked)) / len(x_u))

    loss = labeled_term + cfg.unlabeled_weight * unlabeled_term
    return loss, labeled_term, unlabeled_term, mask_rate


def train_fixmatch(
    init_rng: RngState,
    x_labeled: np.ndarray,
    y_labeled: np.ndarray,
    x_unlabeled: np.ndarray,
    out_dim: int,
    cfg: FixMatchConfig,
    hidden_dim: int = 128,
    hidden_layers: int = 4,
    dropout_rate: float = 0.2,
) -> MlpModel:
    """SGD with cosine decay over the combined objective; final weights returned.

    Epochs iterate minibatches of the labeled set (ceil(n_labeled / B) steps
    per epoch); each step samples unlabeled_ratio * B unlabeled points
    uniformly with replacement.  No validation split or model selection.
    """
    x_l = np.asarray(x_labeled, dtype=np.float64)
    y_l = np.asarray(y_labeled, dtype=np.int64)
    x_u = np.asarray(x_unlabeled, dtype=np.float64)
    n_l = len(x_l)
    if n_l < 2:
        raise ValueError("training requires at least 2 labeled points")
    if np.any(y_l < 0) or np.any(y_l >= out_dim):
        raise ValueError("labels must lie in [0, out_dim)")

    model = init_mlp(
        init_rng.child(STREAM_INIT), x_l.shape[1], out_dim, hidden_dim, hidden_layers, dropout_rate
    )
    g_order = init_rng.child(STREAM_ORDER).generator()
    g_drop = init_rng.child(STREAM_DROPOUT).generator()

    use_unlabeled = cfg.unlabeled_weight > 0.0 and len(x_u) > 0
    if use_unlabeled:
        g_sample = init_rng.child(STREAM_UNLABELED_SAMPLE).generator()
        g_weak = init_rng.child(STREAM_WEAK_DROPOUT).generator()
        g_strong = init_rng.child(STREAM_STRONG_DROPOUT).generator()
        g_mix = init_rng.child(STREAM_MIXUP).generator()

    opt = SgdOptimizer(cfg.weight_decay)
    steps_per_epoch = math.ceil(n_l / cfg.labeled_batch)
    total_steps = cfg.epochs * steps_per_epoch
    u_batch = cfg.unlabeled_ratio * cfg.labeled_batch
    step = 0
    for _ in range(cfg.epochs):
        order = g_order.permutation(n_l)
        for batch in _batch_slices(order, cfg.labeled_batch):
            lr = cosine_lr(cfg.learning_rate, step, total_steps)
            _, grads_w, grads_b = _ce_loss_and_grads(model, x_l[batch], y_l[batch], g_drop)
            if use_unlabeled:
                idx = g_sample.integers(0, len(x_u), size=u_batch)
                x_batch = x_u[idx]
                weak, _ = _forward_pass(model, x_batch, g_weak)
                targets = weak.argmax(axis=1)
                passed = weak.max(axis=1) >= cfg.confidence_threshold
                strong_x = _strong_view(x_batch, cfg.mixup_alpha, g_mix, None)
                strong, cache = _forward_pass(model, strong_x, g_strong)
                d_logits = strong.copy()
                d_logits[np.arange(len(targets)), targets] -= 1.0
                d_logits *= passed[:, None] * (cfg.unlabeled_weight / u_batch)
                gu_w, gu_b = _backward_pass(model, cache, d_logits)
                for i in range(len(grads_w)):
                    grads_w[i] = grads_w[i] + gu_w[i]
                    grads_b[i] = grads_b[i] + gu_b[i]
            opt.step(model, grads_w, grads_b, lr)
            step += 1
    return model
