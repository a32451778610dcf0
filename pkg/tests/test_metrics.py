import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clueval.data import HardClustering, LabelStore, SoftClustering
from clueval.metrics import (
    ContingencyStats,
    ErrorCurve,
    aec,
    ami,
    ari,
    build_contingency,
    entropy,
    estimate_metric,
    expected_mutual_information,
    mutual_information,
    nmi,
)
from oracles import oracle_ami, oracle_ari, oracle_emi, oracle_entropy, oracle_mi, oracle_nmi

# Values pinned by the brute-force oracles in oracles.py (direct fsum
# summation, exact rational hypergeometric weights, exhaustive pairs).
NMI_5PT = 0.4325380677663126  # oracle_nmi([[2, 0], [1, 2]])
AMI_5PT = 0.2512669357444353  # oracle_ami([[2, 0], [1, 2]])
ARI_5PT = 0.16666666666666666  # oracle_ari([[2, 0], [1, 2]])
ARI_INDEP = -0.5  # oracle_ari([[1, 1], [1, 1]])
MI_5PT = 0.2911031660323688  # oracle_mi([[2, 0], [1, 2]])
EMI_5PT = 0.1629386927956707  # oracle_emi([[2, 0], [1, 2]])
ENTROPY_442 = 1.0549201679861442  # oracle_entropy([0.4, 0.4, 0.2])


def stats(table):
    return ContingencyStats(np.array(table, dtype=np.int64))


# --- contingency construction ---


def test_contingency_identity_pairing():
    test = HardClustering({f"p{i}": c for i, c in enumerate([0, 0, 1, 1])}, 2)
    s = build_contingency(test, {f"p{i}": c for i, c in enumerate([0, 0, 1, 1])}, 2)
    assert np.array_equal(s.counts, [[2, 0], [0, 2]])
    assert s.n == 4


def test_contingency_cross_pairing():
    test = HardClustering({f"p{i}": c for i, c in enumerate([0, 0, 1, 1])}, 2)
    s = build_contingency(test, {f"p{i}": c for i, c in enumerate([0, 1, 0, 1])}, 2)
    assert np.array_equal(s.counts, [[1, 1], [1, 1]])


def test_contingency_five_point():
    test = HardClustering({f"p{i}": c for i, c in enumerate([0, 0, 1, 1, 1])}, 2)
    labels = {f"p{i}": c for i, c in enumerate([0, 0, 0, 1, 1])}
    s = build_contingency(test, labels, 2)
    assert np.array_equal(s.counts, [[2, 0], [1, 2]])
    assert s.n == 5


def test_contingency_subset_of_ids():
    test = HardClustering({"a": 0, "b": 1, "c": 1}, 2)
    s = build_contingency(test, {"a": 1, "c": 0}, 2)
    assert np.array_equal(s.counts, [[0, 1], [1, 0]])


def test_contingency_errors():
    test = HardClustering({"a": 0}, 2)
    with pytest.raises(ValueError, match="zero labels"):
        build_contingency(test, {}, 2)
    with pytest.raises(ValueError, match="missing"):
        build_contingency(test, {"zz": 0}, 2)
    with pytest.raises(ValueError, match="outside"):
        build_contingency(test, {"a": 5}, 2)


def test_contingency_stats_validation():
    with pytest.raises(ValueError):
        stats([[0, 0], [0, 0]])
    with pytest.raises(ValueError):
        stats([[-1, 2]])
    s = stats([[2, 0], [1, 2]])
    assert np.array_equal(s.row_marginals, [2, 3])
    assert np.array_equal(s.col_marginals, [3, 2])
    assert s.transposed() == stats([[2, 1], [0, 2]])


# --- entropy and mutual information ---


def test_entropy_known_values():
    assert entropy([1.0]) == 0.0
    assert entropy([0.5, 0.5]) == pytest.approx(math.log(2), abs=1e-15)
    assert entropy([0.4, 0.4, 0.2]) == pytest.approx(ENTROPY_442, abs=1e-14)


def test_entropy_validation():
    with pytest.raises(ValueError):
        entropy([0.5, -0.5])
    with pytest.raises(ValueError):
        entropy([0.5, 0.4])
    with pytest.raises(ValueError):
        entropy([])


def test_mutual_information_five_point():
    assert mutual_information(stats([[2, 0], [1, 2]])) == pytest.approx(MI_5PT, abs=1e-14)


def test_expected_mutual_information_five_point():
    assert expected_mutual_information(stats([[2, 0], [1, 2]])) == pytest.approx(EMI_5PT, abs=1e-13)


# --- NMI ---


def test_nmi_perfect_match():
    assert nmi(stats([[2, 0], [0, 2]])) == 1.0


def test_nmi_independent():
    assert nmi(stats([[1, 1], [1, 1]])) == pytest.approx(0.0, abs=1e-15)


def test_nmi_five_point():
    assert nmi(stats([[2, 0], [1, 2]])) == pytest.approx(NMI_5PT, abs=1e-12)


def test_nmi_trivial_conventions():
    assert nmi(stats([[4]])) == 1.0  # both one group
    assert nmi(stats([[3, 0], [0, 0]])) == 1.0  # single occupied row and column
    assert nmi(stats([[2], [2]])) == 0.0  # reference trivial, test not
    assert nmi(stats([[2, 2]])) == 0.0  # test trivial, reference not


# --- AMI ---


def test_ami_perfect_match():
    assert ami(stats([[3, 0], [0, 3]])) == pytest.approx(1.0, abs=1e-12)


def test_ami_single_cluster_reference():
    assert ami(stats([[2], [2]])) == pytest.approx(0.0, abs=1e-15)


def test_ami_both_trivial():
    assert ami(stats([[5]])) == 0.0


def test_ami_five_point():
    assert ami(stats([[2, 0], [1, 2]])) == pytest.approx(AMI_5PT, abs=1e-12)


# --- ARI ---


def test_ari_perfect_match():
    assert ari(stats([[2, 0], [0, 2]])) == 1.0


def test_ari_independent_table():
    assert ari(stats([[1, 1], [1, 1]])) == pytest.approx(ARI_INDEP, abs=1e-15)


def test_ari_five_point():
    assert ari(stats([[2, 0], [1, 2]])) == pytest.approx(ARI_5PT, abs=1e-15)


def test_ari_degenerate_structures_score_one():
    assert ari(stats([[4]])) == 1.0  # both all-together
    assert ari(stats([[1, 0], [0, 1]])) == 1.0  # both all-singletons (n=2)


def test_ari_singletons_vs_one_group():
    # opposite pair structures: index, expected, and x are all 0, denominator is not
    assert ari(stats([[1], [1]])) == 0.0


def test_ari_needs_two_points():
    with pytest.raises(ValueError):
        ari(stats([[1]]))


# --- property tests against the oracles ---


tables = st.integers(1, 3).flatmap(
    lambda kr: st.integers(1, 3).flatmap(
        lambda kc: st.lists(
            st.lists(st.integers(0, 8), min_size=kc, max_size=kc), min_size=kr, max_size=kr
        )
    )
).filter(lambda t: 2 <= sum(map(sum, t)) <= 8)


@settings(max_examples=300, deadline=None)
@given(tables)
def test_metrics_match_oracles(table):
    s = stats(table)
    assert nmi(s) == pytest.approx(oracle_nmi(table), abs=1e-10)
    assert ami(s) == pytest.approx(oracle_ami(table), abs=1e-10)
    assert ari(s) == pytest.approx(oracle_ari(table), abs=1e-10)


@settings(max_examples=200, deadline=None)
@given(tables)
def test_metrics_symmetric_under_transpose(table):
    s = stats(table)
    t = s.transposed()
    assert nmi(s) == pytest.approx(nmi(t), abs=1e-12)
    assert ami(s) == pytest.approx(ami(t), abs=1e-12)
    assert ari(s) == pytest.approx(ari(t), abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(tables, st.randoms(use_true_random=False))
def test_metrics_invariant_to_relabeling(table, rnd):
    rows = list(range(len(table)))
    cols = list(range(len(table[0])))
    rnd.shuffle(rows)
    rnd.shuffle(cols)
    permuted = [[table[i][j] for j in cols] for i in rows]
    assert nmi(stats(table)) == pytest.approx(nmi(stats(permuted)), abs=1e-12)
    assert ami(stats(table)) == pytest.approx(ami(stats(permuted)), abs=1e-12)
    assert ari(stats(table)) == pytest.approx(ari(stats(permuted)), abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(tables)
def test_metric_bounds(table):
    s = stats(table)
    assert 0.0 <= nmi(s) <= 1.0
    assert ami(s) <= 1.0 + 1e-12
    assert ari(s) <= 1.0 + 1e-12


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 8), st.integers(1, 3))
def test_identical_clusterings_score_one(n, k):
    # diagonal tables: same partition on both sides
    sizes = [n // k + (1 if i < n % k else 0) for i in range(k)]
    table = [[sizes[i] if i == j else 0 for j in range(k)] for i in range(k)]
    s = stats(table)
    assert nmi(s) == pytest.approx(1.0, abs=1e-12)
    assert ari(s) == pytest.approx(1.0, abs=1e-12)


# --- error curves and AEC ---


def test_error_curve_validation():
    with pytest.raises(ValueError, match="strictly increasing"):
        ErrorCurve(((50, 0.5), (50, 0.6)))
    curve = ErrorCurve(((50, 0.5), (100, 0.6)), true_value=0.55)
    assert curve.labels_used == (50, 100)
    assert curve.estimates == (0.5, 0.6)


def test_aec_zero_when_exact():
    curve = ErrorCurve(((50, 0.7), (100, 0.7), (150, 0.7)), true_value=0.7)
    assert aec(curve) == 0.0


def test_aec_hand_trapezoid_three_points():
    # abs errors 0.2, 0.1, 0.0 at 50, 100, 150 -> 50*0.15 + 50*0.05 = 10.0
    curve = ErrorCurve(((50, 0.5), (100, 0.6), (150, 0.7)), true_value=0.7)
    assert aec(curve) == pytest.approx(10.0, abs=1e-12)


def test_aec_hand_trapezoid_single_interval():
    # abs errors 0.3, 0.1 at 50, 100 -> 50*0.2 = 10.0
    curve = ErrorCurve(((50, 1.0), (100, 0.8)), true_value=0.7)
    assert aec(curve) == pytest.approx(10.0, abs=1e-12)


def test_aec_requires_truth_and_two_points():
    with pytest.raises(ValueError, match="true value"):
        aec(ErrorCurve(((50, 0.5), (100, 0.6))))
    with pytest.raises(ValueError, match="2 curve points"):
        aec(ErrorCurve(((50, 0.5),), true_value=0.4))


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.tuples(st.integers(1, 500), st.floats(0, 1)), min_size=2, max_size=8),
    st.floats(0, 1),
)
def test_aec_matches_numpy_trapezoid(points, truth):
    points = sorted({x: v for x, v in points}.items())
    if len(points) < 2:
        return
    curve = ErrorCurve(tuple(points), true_value=truth)
    xs = np.array([x for x, _ in points], dtype=float)
    errs = np.abs(np.array([v for _, v in points]) - truth)
    assert aec(curve) == pytest.approx(float(np.trapezoid(errs, xs)), rel=1e-12, abs=1e-12)


# --- estimate_metric ---


def test_estimate_full_store_is_exact():
    test = HardClustering({f"p{i}": c for i, c in enumerate([0, 0, 1, 1, 1])}, 2)
    truth = {f"p{i}": c for i, c in enumerate([0, 0, 0, 1, 1])}
    store = LabelStore(truth, {}, 2)
    assert estimate_metric("nmi", test, store) == pytest.approx(NMI_5PT, abs=1e-12)
    assert estimate_metric("ami", test, store) == pytest.approx(AMI_5PT, abs=1e-12)
    assert estimate_metric("ari", test, store) == pytest.approx(ARI_5PT, abs=1e-15)


def test_estimate_labeled_subset_only():
    test = HardClustering({f"p{i}": c for i, c in enumerate([0, 0, 1, 1, 1])}, 2)
    store = LabelStore({"p0": 0, "p3": 1}, {}, 2)
    # the two labeled points split perfectly -> NMI 1
    assert estimate_metric("nmi", test, store) == 1.0


def test_estimate_merges_human_and_pseudo():
    test = HardClustering({f"p{i}": c for i, c in enumerate([0, 0, 1, 1, 1])}, 2)
    labels = {f"p{i}": c for i, c in enumerate([0, 0, 0, 1, 1])}
    store = LabelStore(
        {k: labels[k] for k in ("p0", "p1", "p2")}, {k: labels[k] for k in ("p3", "p4")}, 2
    )
    direct = nmi(build_contingency(test, labels, 2))
    assert estimate_metric("nmi", test, store) == pytest.approx(direct, abs=1e-15)
    assert direct == pytest.approx(NMI_5PT, abs=1e-12)


def test_estimate_hardens_soft_test():
    soft = SoftClustering({"a": np.array([0.9, 0.1]), "b": np.array([0.2, 0.8])}, 2)
    store = LabelStore({"a": 0, "b": 1}, {}, 2)
    assert estimate_metric("nmi", soft, store) == 1.0


def test_estimate_rejects_empty_store_and_bad_metric():
    test = HardClustering({"a": 0, "b": 1}, 2)
    with pytest.raises(ValueError, match="empty label store"):
        estimate_metric("nmi", test, LabelStore({}, {}, 2))
    with pytest.raises(ValueError, match="unknown metric"):
        estimate_metric("f1", test, LabelStore({"a": 0}, {}, 2))
