import math
from collections import Counter

import numpy as np
import pytest

from clueval.acquisition import (
    ACQUISITIONS,
    AcquisitionContext,
    bald_from_passes,
    score_bald,
    score_candidates,
    score_cross_entropy,
    score_hard_nmi,
    score_max_entropy,
    score_soft_nmi,
    select,
)
from clueval.data import EmbeddingDataset, HardClustering, SoftClustering
from clueval.metrics import ContingencyStats
from clueval.rng import RngState
from clueval.surrogate import init_mlp


def make_dataset(ids, vectors):
    return EmbeddingDataset(tuple(ids), vectors, (None,) * len(ids))


def constant_model(head_bias, in_dim=2, dropout=0.0):
    """Zero weights + head bias: predicts softmax(head_bias) for any input."""
    k = len(head_bias)
    m = init_mlp(RngState(0), in_dim, k, hidden_dim=4, hidden_layers=1, dropout_rate=dropout)
    for w in m.weights:
        w[:] = 0.0
    for b in m.biases:
        b[:] = 0.0
    m.biases[-1][:] = np.asarray(head_bias, dtype=np.float64)
    return m


def make_ctx(
    head_bias=(0.0, 0.0),
    test=None,
    stats=None,
    n_points=4,
    dropout=0.0,
):
    ids = tuple(f"p{i}" for i in range(n_points))
    vectors = RngState(3).generator().normal(size=(n_points, 2))
    dataset = make_dataset(ids, vectors)
    if test is None:
        test = HardClustering({pid: i % 2 for i, pid in enumerate(ids)}, 2)
    if stats is None:
        stats = ContingencyStats(np.array([[2, 0], [0, 2]]))
    return AcquisitionContext(
        surrogate=constant_model(head_bias, dropout=dropout),
        test=test,
        labeled_stats=stats,
        candidates=ids,
        dataset=dataset,
    )


DIAG_SHARE = 0.5  # info share of each diagonal cell of [[2,0],[0,2]]


# --- max entropy ---


def test_max_entropy_uniform_is_log_k():
    ctx = make_ctx(head_bias=(0.0, 0.0, 0.0, 0.0))
    assert score_max_entropy(ctx, "p0") == pytest.approx(math.log(4), abs=1e-12)


def test_max_entropy_confident_is_zero():
    ctx = make_ctx(head_bias=(60.0, 0.0))  # softmax saturates to (1, 0)
    assert score_max_entropy(ctx, "p0") == pytest.approx(0.0, abs=1e-12)


def test_max_entropy_known_distribution():
    # softmax(log p) = p for an exact target distribution
    p = (0.7, 0.2, 0.1)
    ctx = make_ctx(head_bias=tuple(math.log(v) for v in p))
    expected = -sum(v * math.log(v) for v in p)
    assert score_max_entropy(ctx, "p0") == pytest.approx(expected, abs=1e-12)


# --- BALD ---


def test_bald_from_passes_total_disagreement():
    assert bald_from_passes(np.array([[1.0, 0.0], [0.0, 1.0]])) == pytest.approx(math.log(2), abs=1e-12)


def test_bald_from_passes_identical_rows_zero():
    assert bald_from_passes(np.array([[0.3, 0.7], [0.3, 0.7]])) == 0.0


def test_bald_from_passes_validation():
    with pytest.raises(ValueError):
        bald_from_passes(np.array([0.5, 0.5]))


def test_bald_zero_dropout_is_zero():
    ctx = make_ctx(head_bias=(1.0, 0.0), dropout=0.0)
    assert score_bald(ctx, "p0", passes=5, rng=RngState(1)) == 0.0


def test_bald_zero_weight_model_is_zero():
    # every dropout mask still yields the uniform output
    ctx = make_ctx(head_bias=(0.0, 0.0), dropout=0.5)
    assert score_bald(ctx, "p0", passes=5, rng=RngState(1)) == pytest.approx(0.0, abs=1e-12)


def test_bald_requires_rng():
    ctx = make_ctx()
    with pytest.raises(ValueError, match="rng"):
        score_bald(ctx, "p0")


def test_bald_positive_for_stochastic_model():
    ids = ("a", "b")
    vectors = np.array([[1.0, 1.0], [2.0, -1.0]])
    dataset = make_dataset(ids, vectors)
    model = init_mlp(RngState(8), 2, 3, hidden_dim=16, hidden_layers=2, dropout_rate=0.5)
    ctx = AcquisitionContext(model, HardClustering({"a": 0, "b": 1}, 2),
                             ContingencyStats(np.array([[1, 0], [0, 1]])), ids, dataset)
    assert score_bald(ctx, "a", passes=10, rng=RngState(2)) > 0.0


# --- cross entropy ---


def test_cross_entropy_perfect_prediction_is_tiny():
    ctx = make_ctx(head_bias=(60.0, 0.0))  # predicts cluster 0 with ~certainty
    assert score_cross_entropy(ctx, "p0") == pytest.approx(0.0, abs=1e-9)


def test_cross_entropy_uniform_prediction_is_log2():
    ctx = make_ctx(head_bias=(0.0, 0.0))
    assert score_cross_entropy(ctx, "p0") == pytest.approx(math.log(2), abs=1e-12)


def test_cross_entropy_soft_test_row():
    p = (0.7, 0.3)
    rows = {f"p{i}": np.array([0.6, 0.4]) for i in range(4)}
    ctx = make_ctx(head_bias=tuple(math.log(v) for v in p), test=SoftClustering(rows, 2))
    expected = -(0.6 * math.log(0.7) + 0.4 * math.log(0.3))
    assert score_cross_entropy(ctx, "p0") == pytest.approx(expected, abs=1e-12)


def test_cross_entropy_pads_width_mismatch():
    # surrogate knows 2 labels, test clustering has 3 clusters; the point sits
    # in cluster 2 where the padded prediction is zero -> floored log
    ids = tuple(f"p{i}" for i in range(3))
    dataset = make_dataset(ids, np.zeros((3, 2)))
    test = HardClustering({"p0": 2, "p1": 0, "p2": 1}, 3)
    ctx = AcquisitionContext(constant_model((0.0, 0.0)), test,
                             ContingencyStats(np.array([[1, 1], [1, 1]])), ids, dataset)
    assert score_cross_entropy(ctx, "p0") == pytest.approx(-math.log(1e-12), abs=1e-9)


# --- soft/hard NMI ---


def test_soft_nmi_zero_information_scores_one():
    # all mass in one cell: both marginal entropies are zero
    ctx = make_ctx(stats=ContingencyStats(np.array([[4, 0], [0, 0]])), head_bias=(0.0, 0.0))
    for pid in ctx.candidates:
        assert score_soft_nmi(ctx, pid) == 1.0
        assert score_hard_nmi(ctx, pid) == 1.0


def test_soft_nmi_perfect_agreement_point():
    # diagonal table [[2,0],[0,2]]: each diagonal cell carries share 0.5
    ctx = make_ctx(head_bias=(60.0, 0.0))  # predicts label 0; p0 sits in cluster 0
    assert score_soft_nmi(ctx, "p0") == pytest.approx(1.0 - DIAG_SHARE, abs=1e-9)


def test_soft_nmi_uniform_prediction():
    ctx = make_ctx(head_bias=(0.0, 0.0))
    assert score_soft_nmi(ctx, "p0") == pytest.approx(1.0 - DIAG_SHARE * 0.5, abs=1e-9)


def test_hard_nmi_equals_soft_on_hard_clustering():
    ctx = make_ctx(head_bias=(0.4, -0.3))
    for pid in ctx.candidates:
        assert score_hard_nmi(ctx, pid) == score_soft_nmi(ctx, pid)


def test_hard_nmi_collapses_soft_rows():
    rows = {f"p{i}": np.array([0.8, 0.2]) for i in range(4)}
    test = SoftClustering(rows, 2)
    ctx = make_ctx(head_bias=(60.0, 0.0), test=test)
    # soft: 1 - 0.8 * share; hard: argmax -> cluster 0 -> 1 - share
    assert score_soft_nmi(ctx, "p0") == pytest.approx(1.0 - 0.8 * DIAG_SHARE, abs=1e-9)
    assert score_hard_nmi(ctx, "p0") == pytest.approx(1.0 - DIAG_SHARE, abs=1e-9)


def test_info_share_ignores_empty_cells():
    # off-diagonal zeros contribute nothing even though outer marginals exist
    stats = ContingencyStats(np.array([[3, 0], [0, 1]]))
    ctx = make_ctx(stats=stats, head_bias=(60.0, 0.0))
    score = score_soft_nmi(ctx, "p0")
    h = -(0.75 * math.log(0.75) + 0.25 * math.log(0.25))
    cell00 = 0.75 * math.log(4 * 3 / (3 * 3))
    assert score == pytest.approx(1.0 - cell00 / h, abs=1e-12)


# --- score_candidates ---


def test_score_candidates_random_is_flat():
    ctx = make_ctx()
    assert score_candidates(ctx, "random") == {pid: 0.0 for pid in ctx.candidates}


def test_score_candidates_unknown_name():
    with pytest.raises(ValueError, match="unknown acquisition"):
        score_candidates(make_ctx(), "entropy")


def test_score_candidates_empty():
    ctx = make_ctx()
    empty = AcquisitionContext(ctx.surrogate, ctx.test, ctx.labeled_stats, (), ctx.dataset)
    assert score_candidates(empty, "max_entropy") == {}


@pytest.mark.parametrize("name,pointwise", [
    ("max_entropy", score_max_entropy),
    ("cross_entropy", score_cross_entropy),
    ("soft_nmi", score_soft_nmi),
    ("hard_nmi", score_hard_nmi),
])
def test_vectorized_matches_pointwise(name, pointwise):
    ids = tuple(f"p{i}" for i in range(6))
    vectors = RngState(5).generator().normal(size=(6, 3))
    dataset = make_dataset(ids, vectors)
    model = init_mlp(RngState(9), 3, 2, hidden_dim=8, hidden_layers=1, dropout_rate=0.0)
    test = HardClustering({pid: i % 2 for i, pid in enumerate(ids)}, 2)
    stats = ContingencyStats(np.array([[3, 1], [0, 2]]))
    ctx = AcquisitionContext(model, test, stats, ids, dataset)
    batch = score_candidates(ctx, name)
    for pid in ids:
        assert batch[pid] == pytest.approx(pointwise(ctx, pid), abs=1e-9)


def test_vectorized_matches_pointwise_soft_test():
    ids = tuple(f"p{i}" for i in range(5))
    vectors = RngState(6).generator().normal(size=(5, 3))
    dataset = make_dataset(ids, vectors)
    model = init_mlp(RngState(9), 3, 2, hidden_dim=8, hidden_layers=1, dropout_rate=0.0)
    g = RngState(7).generator()
    raw = g.random((5, 2)) + 0.1
    rows = {pid: r / r.sum() for pid, r in zip(ids, raw)}
    test = SoftClustering(rows, 2)
    stats = ContingencyStats(np.array([[3, 1], [0, 2]]))
    ctx = AcquisitionContext(model, test, stats, ids, dataset)
    for name, fn in (("cross_entropy", score_cross_entropy),
                     ("soft_nmi", score_soft_nmi),
                     ("hard_nmi", score_hard_nmi)):
        batch = score_candidates(ctx, name)
        for pid in ids:
            assert batch[pid] == pytest.approx(fn(ctx, pid), abs=1e-9)


def test_score_candidates_bald_deterministic_and_bounded():
    ids = tuple(f"p{i}" for i in range(4))
    dataset = make_dataset(ids, RngState(5).generator().normal(size=(4, 3)))
    model = init_mlp(RngState(9), 3, 2, hidden_dim=16, hidden_layers=1, dropout_rate=0.5)
    ctx = AcquisitionContext(model, HardClustering({pid: 0 for pid in ids}, 1),
                             ContingencyStats(np.array([[4]])), ids, dataset)
    a = score_candidates(ctx, "bald", rng=RngState(3))
    b = score_candidates(ctx, "bald", rng=RngState(3))
    assert a == b
    assert all(v >= 0.0 for v in a.values())
    with pytest.raises(ValueError, match="rng"):
        score_candidates(ctx, "bald")


def test_acquisition_registry():
    assert ACQUISITIONS == ("random", "max_entropy", "bald", "cross_entropy", "soft_nmi", "hard_nmi")


# --- select ---


def test_select_all_is_permutation():
    scores = {"a": 1.0, "b": 2.0, "c": 0.0}
    chosen = select(scores, 3, RngState(0))
    assert sorted(chosen) == ["a", "b", "c"]


def test_select_zero_n():
    assert select({"a": 1.0}, 0, RngState(0)) == []


def test_select_dominant_score_always_wins():
    scores = {"a": 1.0, "b": 0.0, "c": 0.0}
    picks = {select(scores, 1, RngState(i))[0] for i in range(200)}
    assert picks == {"a"}


def test_select_uniform_over_zero_scores():
    counts = Counter()
    for i in range(10_000):
        for pid in select({"a": 0.0, "b": 0.0, "c": 0.0, "d": 0.0}, 2, RngState(i)):
            counts[pid] += 1
    for pid in "abcd":
        assert abs(counts[pid] / 10_000 - 0.5) <= 0.02


def test_select_no_replacement():
    for i in range(50):
        chosen = select({c: 1.0 for c in "abcdef"}, 4, RngState(i))
        assert len(set(chosen)) == 4


def test_select_negative_scores_shifted():
    scores = {"a": -1.0, "b": -3.0}
    assert sorted(select(scores, 2, RngState(1))) == ["a", "b"]
    picks = {select(scores, 1, RngState(i))[0] for i in range(300)}
    assert picks == {"a"}  # b sits at the shifted floor


def test_select_deterministic():
    scores = {c: float(i) for i, c in enumerate("abcdefgh")}
    assert select(scores, 3, RngState(12)) == select(scores, 3, RngState(12))


def test_select_validation():
    with pytest.raises(ValueError):
        select({"a": 1.0}, 2, RngState(0))
    with pytest.raises(ValueError):
        select({"a": 1.0}, -1, RngState(0))
    with pytest.raises(ValueError):
        select({"a": float("nan")}, 1, RngState(0))
