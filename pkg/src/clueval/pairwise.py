"""Estimating clustering metrics from same-cluster pair judgments.

Instead of reference labels, the annotator answers whether two points share a
reference cluster.  A linear softmax classifier is trained so that the inner
product of its class distributions matches the pair labels; its argmax
predictions define a labeling (up to permutation, which the metrics ignore)
that is scored against the test clustering.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .data import Clustering, EmbeddingDataset, HardClustering, LabelStore, SoftClustering
from .metrics import ErrorCurve, estimate_metric
from .pipeline import Annotator, true_metric
from .rng import RngState
from .surrogate import (
    STREAM_INIT,
    STREAM_ORDER,
    AdamOptimizer,
    MlpModel,
    TrainConfig,
    _batch_slices,
    _backward_pass,
    _forward_pass,
    init_mlp,
)

logger = logging.getLogger(__name__)

_PROD_EPS = 1e-12


@dataclass(frozen=True)
class PairAnnotation:
    """An unordered pair of ids and whether they share a reference cluster."""

    first: str
    second: str
    same: bool

    def __post_init__(self) -> None:
        if self.first == self.second:
            raise ValueError("a pair must join two distinct ids")
        if self.second < self.first:
            a, b = self.second, self.first
            object.__setattr__(self, "first", a)
            object.__setattr__(self, "second", b)


def _default_pair_train() -> TrainConfig:
    return TrainConfig(
        optimizer="adam",
        learning_rate=0.01,
        weight_decay=5e-4,
        batch_size=32,
        epochs=50,
        validation_fraction=0.0,
    )


@dataclass
class PairwiseConfig:
    """Budget, surrogate width, and training settings for the pair pipeline."""

    k_ref: int
    total_pairs: int = 10000
    pairs_per_round: int = 1000
    classes: int | None = None  # surrogate label-space width; defaults to k_ref
    threshold: float | None = None  # None scores all points; else only confident ones
    metric: str = "nmi"
    seed: int = 0
    train: TrainConfig = field(default_factory=_default_pair_train)

    def __post_init__(self) -> None:
        if self.k_ref < 1:
            raise ValueError("k_ref must be >= 1")
        if self.total_pairs < 1 or self.pairs_per_round < 1:
            raise ValueError("total_pairs and pairs_per_round must be positive")
        if self.classes is not None and self.classes < 1:
            raise ValueError("classes must be >= 1")
        if self.threshold is not None and not 0.0 < self.threshold < 1.0:
            raise ValueError("threshold must be in (0, 1)")

    @property
    def surrogate_classes(self) -> int:
        return self.classes if self.classes is not None else self.k_ref


def sample_pairs(dataset: EmbeddingDataset, n_pairs: int, rng: RngState) -> list[tuple[str, str]]:
    """Uniform distinct unordered pairs without replacement."""
    n = dataset.n
    total = n * (n - 1) // 2
    if not 1 <= n_pairs <= total:
        raise ValueError(f"n_pairs must be in [1, {total}]")
    g = rng.generator()
    if total <= 2_000_000 or n_pairs * 3 > total:
        # Enumerate pair ranks and take a uniform subset.
        ranks = g.choice(total, size=n_pairs, replace=False)
        pairs = []
        for r in ranks:
            i = int((1 + math.isqrt(8 * int(r) + 1)) // 2)
            j = int(r) - i * (i - 1) // 2
            pairs.append((dataset.ids[j], dataset.ids[i]))
        return pairs
    chosen: set[tuple[int, int]] = set()
    out: list[tuple[str, str]] = []
    while len(out) < n_pairs:
        i = int(g.integers(n))
        j = int(g.integers(n))
        if i == j:
            continue
        key = (min(i, j), max(i, j))
        if key in chosen:
            continue
        chosen.add(key)
        out.append((dataset.ids[key[0]], dataset.ids[key[1]]))
    return out


def balance_pairs(pairs: Sequence[PairAnnotation], rng: RngState) -> list[PairAnnotation]:
    """Downsample the majority answer to the minority count.

    Same-cluster pairs are rare under uniform sampling, so the kept subset
    usually keeps every positive.  Raises when either answer is absent.
    """
    positives = [p for p in pairs if p.same]
    negatives = [p for p in pairs if not p.same]
    if not positives or not negatives:
        raise ValueError("balancing requires at least one positive and one negative pair")
    g = rng.generator()
    target = min(len(positives), len(negatives))
    if len(positives) > target:
        keep = g.choice(len(positives), size=target, replace=False)
        positives = [positives[i] for i in sorted(keep)]
    if len(negatives) > target:
        keep = g.choice(len(negatives), size=target, replace=False)
        negatives = [negatives[i] for i in sorted(keep)]
    merged = positives + negatives
    order = g.permutation(len(merged))
    return [merged[i] for i in order]


def pair_probability(model: MlpModel, x_i: np.ndarray, x_j: np.ndarray) -> np.ndarray:
    """Probability that paired rows share a class: the inner product of the
    two predicted class distributions, clamped away from 0 and 1."""
    p_i = model.predict_proba(x_i)
    p_j = model.predict_proba(x_j)
    return np.clip(np.sum(p_i * p_j, axis=1), _PROD_EPS, 1.0 - _PROD_EPS)


def l2c_loss(model: MlpModel, x_i: np.ndarray, x_j: np.ndarray, same: np.ndarray) -> float:
    """Mean binary cross-entropy between pair labels and pair probabilities."""
    x_i = np.atleast_2d(np.asarray(x_i, dtype=np.float64))
    x_j = np.atleast_2d(np.asarray(x_j, dtype=np.float64))
    s = np.asarray(same, dtype=np.float64).reshape(-1)
    if len(x_i) != len(x_j) or len(s) != len(x_i) or len(s) == 0:
        raise ValueError("x_i, x_j, and same must be nonempty and equal-length")
    p = pair_probability(model, x_i, x_j)
    return float(-np.mean(s * np.log(p) + (1.0 - s) * np.log(1.0 - p)))


def _l2c_loss_and_grads(model: MlpModel, x_i: np.ndarray, x_j: np.ndarray, s: np.ndarray):
    m = len(s)
    p_i, cache_i = _forward_pass(model, x_i, None)
    p_j, cache_j = _forward_pass(model, x_j, None)
    p = np.clip(np.sum(p_i * p_j, axis=1), _PROD_EPS, 1.0 - _PROD_EPS)
    loss = float(-np.mean(s * np.log(p) + (1.0 - s) * np.log(1.0 - p)))
    dp = (-s / p + (1.0 - s) / (1.0 - p)) / m
    d_pi = dp[:, None] * p_j
    d_pj = dp[:, None] * p_i
    # Softmax Jacobian-vector product: dz = p * (dp - sum(p * dp)).
    dz_i = p_i * (d_pi - np.sum(p_i * d_pi, axis=1, keepdims=True))
    dz_j = p_j * (d_pj - np.sum(p_j * d_pj, axis=1, keepdims=True))
    gw_i, gb_i = _backward_pass(model, cache_i, dz_i)
    gw_j, gb_j = _backward_pass(model, cache_j, dz_j)
    grads_w = [a + b for a, b in zip(gw_i, gw_j)]
    grads_b = [a + b for a, b in zip(gb_i, gb_j)]
    return loss, grads_w, grads_b


def train_pairwise(
    init_rng: RngState,
    dataset: EmbeddingDataset,
    pairs: Sequence[PairAnnotation],
    classes: int,
    cfg: TrainConfig,
) -> MlpModel:
    """Fit a fresh linear softmax classifier to the pair labels."""
    if not pairs:
        raise ValueError("training requires at least one pair")
    x_i = dataset.vectors_for([p.first for p in pairs])
    x_j = dataset.vectors_for([p.second for p in pairs])
    s = np.array([1.0 if p.same else 0.0 for p in pairs])
    model = init_mlp(init_rng.child(STREAM_INIT), dataset.dim, classes, hidden_layers=0, dropout_rate=0.0)
    if cfg.optimizer != "adam":
        raise ValueError("the pairwise surrogate trains with adam")
    opt = AdamOptimizer(model, cfg.weight_decay)
    g_order = init_rng.child(STREAM_ORDER).generator()
    for _ in range(cfg.epochs):
        order = g_order.permutation(len(pairs))
        for batch in _batch_slices(order, cfg.batch_size):
            _, grads_w, grads_b = _l2c_loss_and_grads(model, x_i[batch], x_j[batch], s[batch])
            opt.step(model, grads_w, grads_b, cfg.learning_rate)
    return model


def pair_accuracy(model: MlpModel, dataset: EmbeddingDataset, pairs: Sequence[PairAnnotation]) -> float:
    """Fraction of pairs whose argmax classes agree with the annotation."""
    x_i = dataset.vectors_for([p.first for p in pairs])
    x_j = dataset.vectors_for([p.second for p in pairs])
    same = np.array([p.same for p in pairs])
    pred = model.predict_proba(x_i).argmax(axis=1) == model.predict_proba(x_j).argmax(axis=1)
    return float(np.mean(pred == same))


@dataclass(frozen=True)
class PairwiseResult:
    curve: ErrorCurve
    final_model: MlpModel | None


def run_pairwise_pipeline(
    dataset: EmbeddingDataset,
    test: Clustering,
    annotator: Annotator,
    cfg: PairwiseConfig,
    truth: Mapping[str, int] | None = None,
) -> PairwiseResult:
    """Rounds of pair annotation, each retraining on the balanced cumulative set.

    The curve's x axis counts raw annotations (before balancing).  A round
    with only one answer class present trains nothing and reuses the previous
    model; until a model exists the curve records NaN.  In thresholded mode
    only points whose top class probability exceeds the threshold are scored,
    and a round where none qualify also records NaN.
    """
    rng = RngState(cfg.seed)
    raw_pairs = sample_pairs(dataset, cfg.total_pairs, rng.child(0))
    annotations = [PairAnnotation(a, b, bool(annotator.same_cluster(a, b))) for a, b in raw_pairs]
    classes = cfg.surrogate_classes
    rounds = math.ceil(cfg.total_pairs / cfg.pairs_per_round)
    model: MlpModel | None = None
    points: list[tuple[int, float]] = []
    for r in range(rounds):
        consumed = annotations[: min((r + 1) * cfg.pairs_per_round, len(annotations))]
        has_both = any(p.same for p in consumed) and any(not p.same for p in consumed)
        if has_both:
            balanced = balance_pairs(consumed, rng.child(1).child(r))
            model = train_pairwise(rng.child(2).child(r), dataset, balanced, classes, cfg.train)
        else:
            logger.warning("pairwise round %d has a single answer class; reusing previous model", r)
        estimate = math.nan
        if model is not None:
            probs = model.predict_proba(dataset.vectors)
            labels = probs.argmax(axis=1)
            if cfg.threshold is not None:
                confident = probs.max(axis=1) > cfg.threshold
                scored = {pid: int(labels[i]) for i, pid in enumerate(dataset.ids) if confident[i]}
            else:
                scored = {pid: int(labels[i]) for i, pid in enumerate(dataset.ids)}
            if scored:
                estimate = estimate_metric(cfg.metric, test, LabelStore({}, scored, classes))
        points.append((len(consumed), estimate))
    tv = true_metric(cfg.metric, test, truth, cfg.k_ref) if truth is not None else None
    return PairwiseResult(ErrorCurve(tuple(points), tv), model)
