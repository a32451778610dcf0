"""Synthetic benchmark data: Gaussian blob datasets and Lloyd k-means."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import EmbeddingDataset, HardClustering
from .rng import RngState


@dataclass(frozen=True)
class BlobSpec:
    """Isotropic Gaussian mixture with centers scattered in a hypercube."""

    n_points: int
    n_clusters: int
    dimension: int = 16
    cluster_std: float = 1.0
    center_spread: float = 10.0
    seed: int = 0
    with_payloads: bool = False

    def __post_init__(self) -> None:
        if self.n_points < 2 or self.n_clusters < 1 or self.dimension < 1:
            raise ValueError("n_points, n_clusters, and dimension must be positive (n_points >= 2)")
        if self.n_points < self.n_clusters:
            raise ValueError("need at least one point per cluster")
        if self.cluster_std < 0 or self.center_spread <= 0:
            raise ValueError("cluster_std must be >= 0 and center_spread > 0")


def make_blobs(spec: BlobSpec) -> tuple[EmbeddingDataset, dict[str, int]]:
    """Sample a blob dataset and its generating labels.

    Centers are uniform in [0, center_spread)^d; points are isotropic
    Gaussians around their center.  Cluster sizes are balanced, with any
    remainder spread round-robin over the first clusters; points interleave
    clusters so that any prefix of the dataset is roughly balanced too.
    """
    g = RngState(spec.seed).generator()
    centers = g.uniform(0.0, spec.center_spread, size=(spec.n_clusters, spec.dimension))
    labels = np.arange(spec.n_points) % spec.n_clusters
    noise = g.normal(0.0, 1.0, size=(spec.n_points, spec.dimension))
    vectors = centers[labels] + spec.cluster_std * noise
    width = len(str(spec.n_points - 1))
    ids = tuple(f"p{i:0{width}d}" for i in range(spec.n_points))
    if spec.with_payloads:
        payloads = tuple(
            f"{pid}: [" + ", ".join(f"{v:.3f}" for v in vectors[i][:8]) + (", ..." if spec.dimension > 8 else "") + "]"
            for i, pid in enumerate(ids)
        )
    else:
        payloads = tuple(None for _ in ids)
    dataset = EmbeddingDataset(ids, vectors, payloads)
    truth = {pid: int(c) for pid, c in zip(ids, labels)}
    return dataset, truth


def _plus_plus_centers(x: np.ndarray, k: int, g: np.random.Generator) -> np.ndarray:
    """Spread-out initial centers: each next center drawn with probability
    proportional to squared distance from the nearest chosen one."""
    n = len(x)
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[g.integers(n)]
    d2 = np.sum((x - centers[0]) ** 2, axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0:
            centers[i] = x[g.integers(n)]
            continue
        centers[i] = x[g.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, np.sum((x - centers[i]) ** 2, axis=1))
    return centers


def lloyd(
    x: np.ndarray, centers: np.ndarray, max_iter: int = 300, tol: float = 1e-6
) -> tuple[np.ndarray, np.ndarray, list[float]]:
    """Lloyd iterations from given centers.

    Ties in the assignment step go to the lowest center index; a cluster left
    empty is re-seeded to the point farthest from its current center.  Stops
    when the largest center movement drops below tol.  Returns (labels,
    centers, inertia history); the history is nonincreasing.
    """
    x = np.asarray(x, dtype=np.float64)
    centers = centers.copy()
    k = len(centers)
    history: list[float] = []
    labels = np.zeros(len(x), dtype=np.int64)
    for _ in range(max_iter):
        d2 = np.sum((x[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        labels = np.argmin(d2, axis=1)
        nearest = d2[np.arange(len(x)), labels].copy()
        for c in range(k):
            if not np.any(labels == c):
                far = int(np.argmax(nearest))
                centers[c] = x[far]
                labels[far] = c
                nearest[far] = 0.0
        history.append(float(np.sum((x - centers[labels]) ** 2)))
        new_centers = np.stack([x[labels == c].mean(axis=0) for c in range(k)])
        shift = float(np.max(np.linalg.norm(new_centers - centers, axis=1)))
        centers = new_centers
        if shift < tol:
            break
    d2 = np.sum((x[:, None, :] - centers[None, :, :]) ** 2, axis=2)
    labels = np.argmin(d2, axis=1)
    history.append(float(np.sum((x - centers[labels]) ** 2)))
    return labels, centers, history


def kmeans(
    dataset: EmbeddingDataset,
    k: int,
    rng: RngState,
    max_iter: int = 300,
    tol: float = 1e-6,
) -> HardClustering:
    """K-means over the dataset vectors; deterministic given the rng seed."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > dataset.n:
        raise ValueError(f"cannot fit {k} clusters to {dataset.n} points")
    g = rng.generator()
    centers = _plus_plus_centers(dataset.vectors, k, g)
    labels, _, _ = lloyd(dataset.vectors, centers, max_iter=max_iter, tol=tol)
    return HardClustering({pid: int(c) for pid, c in zip(dataset.ids, labels)}, k)
