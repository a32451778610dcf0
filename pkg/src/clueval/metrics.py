"""Contingency statistics and external clustering-agreement metrics.

All information quantities use natural logarithms.  NMI normalizes mutual
information by the arithmetic mean of the two marginal entropies; AMI applies
the exact hypergeometric chance adjustment; ARI is the pair-counting index
with the usual expected-value correction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .data import Clustering, HardClustering, LabelStore, SoftClustering

METRICS = ("nmi", "ami", "ari")

# Cutoff for the AMI chance-correction denominator.  Structural zeros land
# within float rounding of 0; legitimate denominators sit far above this.
_DEGENERATE_EPS = 1e-12


@dataclass(frozen=True, eq=False)
class ContingencyStats:
    """Joint counts of (test cluster, reference label) pairs."""

    counts: np.ndarray  # (k_test, k_ref) int64

    def __post_init__(self) -> None:
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 2 or counts.size == 0:
            raise ValueError("counts must be a nonempty 2-d array")
        if np.any(counts < 0):
            raise ValueError("counts must be nonnegative")
        if counts.sum() < 1:
            raise ValueError("counts must total at least 1")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    @property
    def row_marginals(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def col_marginals(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    def transposed(self) -> "ContingencyStats":
        return ContingencyStats(self.counts.T.copy())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ContingencyStats):
            return NotImplemented
        return np.array_equal(self.counts, other.counts)


def build_contingency(
    test: HardClustering, labels: Mapping[str, int], k_ref: int
) -> ContingencyStats:
    """Count (test cluster, reference label) pairs over the labeled ids."""
    if not labels:
        raise ValueError("cannot build a contingency table from zero labels")
    if k_ref < 1:
        raise ValueError("k_ref must be >= 1")
    counts = np.zeros((test.k, k_ref), dtype=np.int64)
    for pid, label in labels.items():
        if pid not in test.assignment:
            raise ValueError(f"labeled id {pid!r} missing from the test clustering")
        if not 0 <= label < k_ref:
            raise ValueError(f"label {label} for id {pid!r} outside [0, {k_ref})")
        counts[test.assignment[pid], label] += 1
    return ContingencyStats(counts)


def entropy(distribution) -> float:
    """Shannon entropy in nats of a probability vector."""
    p = np.asarray(distribution, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("distribution must be a nonempty 1-d array")
    if np.any(p < 0):
        raise ValueError("distribution has a negative entry")
    if abs(float(p.sum()) - 1.0) > 1e-9:
        raise ValueError("distribution does not sum to 1")
    nz = p > 0
    return float(-np.sum(p[nz] * np.log(p[nz])))


def _entropy_from_counts(marginal: np.ndarray, n: int) -> float:
    nz = marginal[marginal > 0].astype(np.float64)
    p = nz / n
    return float(-np.sum(p * np.log(p)))


def _is_trivial(marginal: np.ndarray) -> bool:
    # A clustering with at most one occupied group carries zero entropy.
    return int(np.count_nonzero(marginal)) <= 1


def mutual_information(stats: ContingencyStats) -> float:
    """I(C; Y) in nats from joint counts."""
    n = stats.n
    counts = stats.counts.astype(np.float64)
    outer = np.outer(stats.row_marginals, stats.col_marginals).astype(np.float64)
    nz = counts > 0
    p = counts[nz] / n
    ratio = counts[nz] * n / outer[nz]
    return float(np.sum(p * np.log(ratio)))


def nmi(stats: ContingencyStats) -> float:
    """Mutual information normalized by the mean of the marginal entropies.

    Conventions for zero-entropy marginals: both trivial gives 1.0, exactly
    one trivial gives 0.0.
    """
    rows_trivial = _is_trivial(stats.row_marginals)
    cols_trivial = _is_trivial(stats.col_marginals)
    if rows_trivial and cols_trivial:
        return 1.0
    if rows_trivial or cols_trivial:
        return 0.0
    h_c = _entropy_from_counts(stats.row_marginals, stats.n)
    h_y = _entropy_from_counts(stats.col_marginals, stats.n)
    value = mutual_information(stats) / ((h_c + h_y) / 2.0)
    return float(min(1.0, max(0.0, value)))


def expected_mutual_information(stats: ContingencyStats) -> float:
    """Expectation of I(C; Y) under the fixed-marginals hypergeometric model."""
    a = stats.row_marginals
    b = stats.col_marginals
    n = stats.n
    lg = [math.lgamma(i + 1) for i in range(n + 1)]  # log factorials
    total = 0.0
    for ai in a:
        ai = int(ai)
        if ai == 0:
            continue
        for bj in b:
            bj = int(bj)
            if bj == 0:
                continue
            lo = max(1, ai + bj - n)
            hi = min(ai, bj)
            for nij in range(lo, hi + 1):
                log_p = (
                    lg[ai]
                    + lg[bj]
                    + lg[n - ai]
                    + lg[n - bj]
                    - lg[n]
                    - lg[nij]
                    - lg[ai - nij]
                    - lg[bj - nij]
                    - lg[n - ai - bj + nij]
                )
                total += math.exp(log_p) * (nij / n) * math.log(n * nij / (ai * bj))
    return total


def ami(stats: ContingencyStats) -> float:
    """Chance-adjusted mutual information; 0.0 when the adjustment denominator is 0."""
    rows_trivial = _is_trivial(stats.row_marginals)
    cols_trivial = _is_trivial(stats.col_marginals)
    if rows_trivial and cols_trivial:
        return 0.0
    h_c = _entropy_from_counts(stats.row_marginals, stats.n)
    h_y = _entropy_from_counts(stats.col_marginals, stats.n)
    expected = expected_mutual_information(stats)
    denom = (h_c + h_y) / 2.0 - expected
    if abs(denom) < _DEGENERATE_EPS:
        return 0.0
    return (mutual_information(stats) - expected) / denom


def ari(stats: ContingencyStats) -> float:
    """Adjusted Rand index via pair counts; requires at least 2 points."""
    n = stats.n
    if n < 2:
        raise ValueError("ari requires at least 2 points")
    index = sum(int(v) * (int(v) - 1) // 2 for v in stats.counts.flat)
    x = sum(int(v) * (int(v) - 1) // 2 for v in stats.row_marginals)
    y = sum(int(v) * (int(v) - 1) // 2 for v in stats.col_marginals)
    pairs = n * (n - 1) // 2
    # max == expected exactly when both clusterings induce the same pair
    # structure (both trivial or both all-singletons); score 1 by convention.
    if (x + y) * pairs == 2 * x * y:
        return 1.0
    expected = x * y / pairs
    maximum = (x + y) / 2.0
    return (index - expected) / (maximum - expected)


_METRIC_FNS = {"nmi": nmi, "ami": ami, "ari": ari}


@dataclass(frozen=True)
class ErrorCurve:
    """Estimate trajectory indexed by the number of reference labels consumed."""

    points: tuple[tuple[int, float], ...]
    true_value: float | None = None

    def __post_init__(self) -> None:
        pts = tuple((int(x), float(v)) for x, v in self.points)
        xs = [x for x, _ in pts]
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ValueError("labels_used must be strictly increasing")
        object.__setattr__(self, "points", pts)

    @property
    def labels_used(self) -> tuple[int, ...]:
        return tuple(x for x, _ in self.points)

    @property
    def estimates(self) -> tuple[float, ...]:
        return tuple(v for _, v in self.points)


def aec(curve: ErrorCurve) -> float:
    """Trapezoidal integral of |estimate - true_value| over labels used."""
    if curve.true_value is None:
        raise ValueError("aec requires a curve with a true value")
    if len(curve.points) < 2:
        raise ValueError("aec requires at least 2 curve points")
    total = 0.0
    pts = curve.points
    for (x0, v0), (x1, v1) in zip(pts, pts[1:]):
        e0 = abs(v0 - curve.true_value)
        e1 = abs(v1 - curve.true_value)
        total += (x1 - x0) * (e0 + e1) / 2
    return total


def estimate_metric(metric: str, test: Clustering, store: LabelStore) -> float:
    """Metric between the test clustering and the store's labels.

    Soft test clusterings are hardened by argmax (ties to the lowest index).
    The contingency covers exactly the labeled ids, so a full store yields
    the exact metric value.
    """
    if metric not in _METRIC_FNS:
        raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")
    labels = store.merged()
    if not labels:
        raise ValueError("cannot estimate a metric from an empty label store")
    hard = test.harden() if isinstance(test, SoftClustering) else test
    stats = build_contingency(hard, labels, store.k_ref)
    return _METRIC_FNS[metric](stats)
