"""Scoring rules for picking which points to send to the annotator next.

Every scorer maps a candidate point to a nonnegative-ish informativeness
score; select() then samples a batch without replacement proportional to the
(shifted) scores.  Uniform random acquisition is select() over all-equal
scores.  Scorers are pure given their inputs, so candidates can be scored
concurrently; only select() consumes the sampling stream.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .data import Clustering, EmbeddingDataset, HardClustering, SoftClustering
from .metrics import ContingencyStats
from .rng import RngState
from .surrogate import MlpModel, mc_dropout_predict

ACQUISITIONS = ("random", "max_entropy", "bald", "cross_entropy", "soft_nmi", "hard_nmi")

_SELECT_EPS = 1e-12
_LOG_FLOOR = 1e-12


@dataclass(frozen=True)
class AcquisitionContext:
    """Everything a scorer may look at when ranking candidates."""

    surrogate: MlpModel
    test: Clustering
    labeled_stats: ContingencyStats
    candidates: tuple[str, ...]
    dataset: EmbeddingDataset


def _row_entropies(probs: np.ndarray) -> np.ndarray:
    safe = np.where(probs > 0, probs, 1.0)
    return -np.sum(probs * np.log(safe), axis=1)


def _test_row(ctx: AcquisitionContext, point_id: str) -> np.ndarray:
    """The test clustering's distribution over clusters for one point."""
    if isinstance(ctx.test, SoftClustering):
        return ctx.test.rows[point_id]
    row = np.zeros(ctx.test.k)
    row[ctx.test.assignment[point_id]] = 1.0
    return row


def _test_matrix(ctx: AcquisitionContext, ids) -> np.ndarray:
    if isinstance(ctx.test, SoftClustering):
        return np.stack([ctx.test.rows[i] for i in ids])
    mat = np.zeros((len(ids), ctx.test.k))
    mat[np.arange(len(ids)), [ctx.test.assignment[i] for i in ids]] = 1.0
    return mat


def _info_share_matrix(stats: ContingencyStats) -> np.ndarray:
    """Per-cell mutual-information terms over the mean marginal entropy.

    Cells with zero joint count contribute 0.  When both marginal entropies
    are zero there is no information to weight, and the all-zero matrix makes
    every candidate score 1.
    """
    n = stats.n
    a = stats.row_marginals
    b = stats.col_marginals
    h_c = _row_entropies((a / n)[None, :])[0]
    h_y = _row_entropies((b / n)[None, :])[0]
    mean_h = (h_c + h_y) / 2.0
    if mean_h <= 0.0:
        return np.zeros_like(stats.counts, dtype=np.float64)
    counts = stats.counts.astype(np.float64)
    outer = np.outer(a, b).astype(np.float64)
    terms = np.zeros_like(counts)
    nz = counts > 0
    terms[nz] = (counts[nz] / n) * np.log(counts[nz] * n / outer[nz])
    return terms / mean_h


def _predict_one(ctx: AcquisitionContext, point_id: str) -> np.ndarray:
    x = ctx.dataset.vectors[ctx.dataset.index_of(point_id)]
    return ctx.surrogate.predict_proba(x)[0]


def score_max_entropy(ctx: AcquisitionContext, point_id: str) -> float:
    """Entropy of the eval-mode surrogate prediction."""
    return float(_row_entropies(_predict_one(ctx, point_id)[None, :])[0])


def bald_from_passes(passes: np.ndarray) -> float:
    """Mutual information between prediction and dropout mask: entropy of the
    mean row minus mean per-row entropy, clamped at 0."""
    p = np.asarray(passes, dtype=np.float64)
    if p.ndim != 2 or len(p) < 1:
        raise ValueError("passes must be a nonempty 2-d array")
    disagreement = _row_entropies(p.mean(axis=0)[None, :])[0] - _row_entropies(p).mean()
    return float(max(0.0, disagreement))


def score_bald(ctx: AcquisitionContext, point_id: str, passes: int = 10, rng: RngState | None = None) -> float:
    """Disagreement across stochastic dropout passes."""
    if rng is None:
        raise ValueError("score_bald requires an rng for its dropout passes")
    x = ctx.dataset.vectors[ctx.dataset.index_of(point_id)]
    return bald_from_passes(mc_dropout_predict(ctx.surrogate, x, passes, rng))


def score_cross_entropy(ctx: AcquisitionContext, point_id: str) -> float:
    """Cross-entropy between the test distribution and the surrogate prediction.

    The two distributions are index-aligned; when their widths differ the
    shorter one is zero-padded, so surrogate zeros under test mass are priced
    at the floored log.
    """
    f = _test_row(ctx, point_id)
    p = _predict_one(ctx, point_id)
    width = max(len(f), len(p))
    f = np.pad(f, (0, width - len(f)))
    p = np.pad(p, (0, width - len(p)))
    return float(-np.sum(f * np.log(np.maximum(p, _LOG_FLOOR))))


def score_soft_nmi(ctx: AcquisitionContext, point_id: str) -> float:
    """One minus the point's expected share of the current agreement signal.

    Pairs the test distribution with the surrogate label distribution and
    weights each (cluster, label) cell by its mutual-information share in the
    contingency of human labels seen so far.  Points whose likely cells carry
    the least established information score closest to 1.
    """
    share = _info_share_matrix(ctx.labeled_stats)
    f = _test_row(ctx, point_id)
    p = _predict_one(ctx, point_id)
    return float(1.0 - f @ share @ p)


def score_hard_nmi(ctx: AcquisitionContext, point_id: str) -> float:
    """score_soft_nmi with the test distribution collapsed to its assigned cluster."""
    share = _info_share_matrix(ctx.labeled_stats)
    if isinstance(ctx.test, SoftClustering):
        cluster = int(np.argmax(ctx.test.rows[point_id]))
    else:
        cluster = ctx.test.assignment[point_id]
    f = np.zeros(ctx.test.k)
    f[cluster] = 1.0
    p = _predict_one(ctx, point_id)
    return float(1.0 - f @ share @ p)


def score_candidates(
    ctx: AcquisitionContext,
    acquisition: str,
    rng: RngState | None = None,
    passes: int = 10,
) -> dict[str, float]:
    """Scores for every candidate, keyed by id in candidate order.

    Vectorized over the candidate set; the deterministic scorers agree with
    their per-point counterparts.  BALD draws its dropout masks from ``rng``.
    """
    if acquisition not in ACQUISITIONS:
        raise ValueError(f"unknown acquisition {acquisition!r}; expected one of {ACQUISITIONS}")
    ids = ctx.candidates
    if not ids:
        return {}
    if acquisition == "random":
        return {i: 0.0 for i in ids}
    x = ctx.dataset.vectors_for(ids)
    probs = ctx.surrogate.predict_proba(x)
    if acquisition == "max_entropy":
        values = _row_entropies(probs)
    elif acquisition == "bald":
        if rng is None:
            raise ValueError("bald scoring requires an rng")
        stack = ctx.surrogate.mc_dropout_rows(x, passes, rng.generator())
        mean_entropy = _row_entropies(stack.mean(axis=0))
        pass_entropy = np.stack([_row_entropies(stack[i]) for i in range(passes)]).mean(axis=0)
        values = np.maximum(0.0, mean_entropy - pass_entropy)
    elif acquisition == "cross_entropy":
        f = _test_matrix(ctx, ids)
        width = max(f.shape[1], probs.shape[1])
        f = np.pad(f, ((0, 0), (0, width - f.shape[1])))
        p = np.pad(probs, ((0, 0), (0, width - probs.shape[1])))
        values = -np.sum(f * np.log(np.maximum(p, _LOG_FLOOR)), axis=1)
    else:
        share = _info_share_matrix(ctx.labeled_stats)
        f = _test_matrix(ctx, ids)
        if acquisition == "hard_nmi":
            hard = np.zeros_like(f)
            hard[np.arange(len(ids)), f.argmax(axis=1)] = 1.0
            f = hard
        values = 1.0 - np.einsum("ic,cy,iy->i", f, share, probs)
    return {i: float(v) for i, v in zip(ids, values)}


def select(scores: Mapping[str, float], n: int, rng: RngState) -> list[str]:
    """Sample n ids without replacement proportional to shifted scores.

    Scores are shifted to be nonnegative (by the minimum when it is below
    zero), given a tiny uniform floor so zero-score candidates stay reachable,
    and renormalized after every draw.  Candidate order is the mapping's
    insertion order; identical seeds give identical batches.
    """
    ids = list(scores)
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n > len(ids):
        raise ValueError(f"cannot select {n} of {len(ids)} candidates")
    weights = np.array([scores[i] for i in ids], dtype=np.float64)
    if not np.all(np.isfinite(weights)):
        raise ValueError("scores must be finite")
    low = weights.min() if len(weights) else 0.0
    if low < 0:
        weights = weights - low
    weights = weights + _SELECT_EPS
    g = rng.generator()
    chosen: list[str] = []
    for _ in range(n):
        p = weights / weights.sum()
        j = int(g.choice(len(ids), p=p))
        chosen.append(ids[j])
        weights[j] = 0.0
    return chosen
