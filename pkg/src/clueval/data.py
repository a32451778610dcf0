"""Dataset, clustering, and label containers with JSON-lines persistence.

File formats are one JSON object per line:

* embeddings:   {"id": str, "vector": [float, ...], "payload": str?}
* clusterings:  {"id": str, "cluster": int}  or  {"id": str, "distribution": [float, ...]}
* labels:       {"id": str, "label": int, "source": "human" | "pseudo"}

A clustering file must be homogeneous: either all hard rows or all soft rows.
All containers are immutable after construction and safe to share across
threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Union

import numpy as np


class DataFormatError(ValueError):
    """An input file violates the JSON-lines contracts."""


def _read_jsonl(path: str | Path) -> list[tuple[int, dict]]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataFormatError(f"{path}: line {lineno}: malformed JSON ({exc.msg})") from exc
            if not isinstance(obj, dict):
                raise DataFormatError(f"{path}: line {lineno}: expected a JSON object")
            records.append((lineno, obj))
    return records


def _write_jsonl(path: str | Path, rows: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")


@dataclass(frozen=True, eq=False)
class EmbeddingDataset:
    """Ordered collection of identified vectors, optionally carrying payload text."""

    ids: tuple[str, ...]
    vectors: np.ndarray  # (n, d) float64, read-only
    payloads: tuple[str | None, ...]

    def __post_init__(self) -> None:
        vecs = np.ascontiguousarray(np.asarray(self.vectors, dtype=np.float64))
        if vecs.ndim != 2:
            raise ValueError("vectors must be a 2-d array")
        n, d = vecs.shape
        if n < 2:
            raise ValueError("dataset must contain at least 2 points")
        if d < 1:
            raise ValueError("vectors must have dimension >= 1")
        if len(self.ids) != n or len(self.payloads) != n:
            raise ValueError("ids, vectors, and payloads must have equal length")
        index: dict[str, int] = {}
        for pos, pid in enumerate(self.ids):
            if not isinstance(pid, str) or not pid:
                raise ValueError(f"id at position {pos} must be a nonempty string")
            if pid in index:
                raise ValueError(f"duplicate id {pid!r}")
            index[pid] = pos
        vecs.setflags(write=False)
        object.__setattr__(self, "vectors", vecs)
        object.__setattr__(self, "_index", index)

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def index_of(self, point_id: str) -> int:
        return self._index[point_id]  # type: ignore[attr-defined]

    def __contains__(self, point_id: str) -> bool:
        return point_id in self._index  # type: ignore[attr-defined]

    def vectors_for(self, ids: Iterable[str]) -> np.ndarray:
        rows = [self.index_of(i) for i in ids]
        return self.vectors[rows]

    def payload_of(self, point_id: str) -> str | None:
        return self.payloads[self.index_of(point_id)]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EmbeddingDataset):
            return NotImplemented
        return (
            self.ids == other.ids
            and self.payloads == other.payloads
            and np.array_equal(self.vectors, other.vectors)
        )


@dataclass(frozen=True)
class HardClustering:
    """One cluster index per id, indices in [0, k)."""

    assignment: Mapping[str, int]
    k: int

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be >= 1")
        assignment = dict(self.assignment)
        for pid, c in assignment.items():
            if not isinstance(c, (int, np.integer)) or isinstance(c, bool):
                raise ValueError(f"cluster for id {pid!r} must be an integer")
            if not 0 <= c < self.k:
                raise ValueError(f"cluster {c} for id {pid!r} outside [0, {self.k})")
        object.__setattr__(self, "assignment", assignment)

    def labels_for(self, ids: Iterable[str]) -> np.ndarray:
        return np.array([self.assignment[i] for i in ids], dtype=np.int64)


@dataclass(frozen=True, eq=False)
class SoftClustering:
    """One probability row per id; rows are nonnegative and sum to 1 within 1e-9."""

    rows: Mapping[str, np.ndarray]
    k: int

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be >= 1")
        frozen: dict[str, np.ndarray] = {}
        for pid, row in dict(self.rows).items():
            arr = np.asarray(row, dtype=np.float64)
            if arr.shape != (self.k,):
                raise ValueError(f"distribution for id {pid!r} must have length {self.k}")
            if np.any(arr < 0):
                raise ValueError(f"distribution for id {pid!r} has a negative entry")
            if abs(float(arr.sum()) - 1.0) > 1e-9:
                raise ValueError(f"distribution for id {pid!r} does not sum to 1")
            arr.setflags(write=False)
            frozen[pid] = arr
        object.__setattr__(self, "rows", frozen)

    def harden(self) -> HardClustering:
        """Argmax each row; ties go to the lowest cluster index."""
        assignment = {pid: int(np.argmax(row)) for pid, row in self.rows.items()}
        return HardClustering(assignment, self.k)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SoftClustering):
            return NotImplemented
        if self.k != other.k or self.rows.keys() != other.rows.keys():
            return False
        return all(np.array_equal(self.rows[i], other.rows[i]) for i in self.rows)


Clustering = Union[HardClustering, SoftClustering]


@dataclass(frozen=True)
class LabelStore:
    """Reference labels keyed by id, split by provenance (human vs pseudo)."""

    human: Mapping[str, int]
    pseudo: Mapping[str, int]
    k_ref: int

    def __post_init__(self) -> None:
        if self.k_ref < 0:
            raise ValueError("k_ref must be nonnegative")
        human = dict(self.human)
        pseudo = dict(self.pseudo)
        overlap = human.keys() & pseudo.keys()
        if overlap:
            raise ValueError(f"id {sorted(overlap)[0]!r} is both human- and pseudo-labeled")
        for pid, label in [*human.items(), *pseudo.items()]:
            if not isinstance(label, (int, np.integer)) or isinstance(label, bool):
                raise ValueError(f"label for id {pid!r} must be an integer")
            if not 0 <= label < self.k_ref:
                raise ValueError(f"label {label} for id {pid!r} outside [0, {self.k_ref})")
        object.__setattr__(self, "human", human)
        object.__setattr__(self, "pseudo", pseudo)

    def merged(self) -> dict[str, int]:
        return {**self.human, **self.pseudo}

    @property
    def n_human(self) -> int:
        return len(self.human)

    @property
    def n_total(self) -> int:
        return len(self.human) + len(self.pseudo)


def load_embeddings(path: str | Path) -> EmbeddingDataset:
    records = _read_jsonl(path)
    if not records:
        raise DataFormatError(f"{path}: empty embeddings file")
    ids: list[str] = []
    vectors: list[list[float]] = []
    payloads: list[str | None] = []
    dim: int | None = None
    seen: set[str] = set()
    for lineno, obj in records:
        if "id" not in obj or "vector" not in obj:
            raise DataFormatError(f"{path}: line {lineno}: missing 'id' or 'vector'")
        pid = obj["id"]
        if not isinstance(pid, str) or not pid:
            raise DataFormatError(f"{path}: line {lineno}: id must be a nonempty string")
        if pid in seen:
            raise DataFormatError(f"{path}: line {lineno}: duplicate id {pid!r}")
        seen.add(pid)
        vec = obj["vector"]
        if not isinstance(vec, list) or not vec:
            raise DataFormatError(f"{path}: line {lineno}: vector must be a nonempty array")
        if dim is None:
            dim = len(vec)
        elif len(vec) != dim:
            raise DataFormatError(
                f"{path}: line {lineno}: vector has dimension {len(vec)}, expected {dim}"
            )
        payload = obj.get("payload")
        if payload is not None and not isinstance(payload, str):
            raise DataFormatError(f"{path}: line {lineno}: payload must be a string when present")
        ids.append(pid)
        vectors.append([float(v) for v in vec])
        payloads.append(payload)
    if len(ids) < 2:
        raise DataFormatError(f"{path}: dataset must contain at least 2 points")
    return EmbeddingDataset(tuple(ids), np.array(vectors, dtype=np.float64), tuple(payloads))


def save_embeddings(dataset: EmbeddingDataset, path: str | Path) -> None:
    rows = []
    for i, pid in enumerate(dataset.ids):
        row: dict = {"id": pid, "vector": [float(v) for v in dataset.vectors[i]]}
        if dataset.payloads[i] is not None:
            row["payload"] = dataset.payloads[i]
        rows.append(row)
    _write_jsonl(path, rows)


def load_clustering(path: str | Path, dataset: EmbeddingDataset | None = None) -> Clustering:
    """Load a hard or soft clustering.

    When ``dataset`` is given, the file must cover exactly the dataset ids.
    Soft rows whose sum is within 1e-6 of 1 are renormalized; anything
    further off is an error.
    """
    records = _read_jsonl(path)
    if not records:
        raise DataFormatError(f"{path}: empty clustering file")
    kind = "cluster" if "cluster" in records[0][1] else "distribution"
    seen: set[str] = set()
    hard: dict[str, int] = {}
    soft: dict[str, np.ndarray] = {}
    width: int | None = None
    for lineno, obj in records:
        if "id" not in obj:
            raise DataFormatError(f"{path}: line {lineno}: missing 'id'")
        pid = obj["id"]
        if pid in seen:
            raise DataFormatError(f"{path}: line {lineno}: duplicate id {pid!r}")
        seen.add(pid)
        if dataset is not None and pid not in dataset:
            raise DataFormatError(f"{path}: line {lineno}: id {pid!r} not in dataset")
        if kind == "cluster":
            if "cluster" not in obj:
                raise DataFormatError(f"{path}: line {lineno}: mixed hard and soft rows")
            c = obj["cluster"]
            if not isinstance(c, int) or isinstance(c, bool) or c < 0:
                raise DataFormatError(f"{path}: line {lineno}: cluster must be a nonnegative integer")
            hard[pid] = c
        else:
            if "distribution" not in obj:
                raise DataFormatError(f"{path}: line {lineno}: mixed hard and soft rows")
            dist = obj["distribution"]
            if not isinstance(dist, list) or not dist:
                raise DataFormatError(f"{path}: line {lineno}: distribution must be a nonempty array")
            if width is None:
                width = len(dist)
            elif len(dist) != width:
                raise DataFormatError(
                    f"{path}: line {lineno}: distribution has length {len(dist)}, expected {width}"
                )
            arr = np.asarray([float(v) for v in dist], dtype=np.float64)
            if np.any(arr < 0):
                raise DataFormatError(f"{path}: line {lineno}: distribution has a negative entry")
            total = float(arr.sum())
            if abs(total - 1.0) > 1e-6:
                raise DataFormatError(f"{path}: line {lineno}: distribution sums to {total:.8f}, not 1")
            soft[pid] = arr / total
    if dataset is not None:
        missing = [i for i in dataset.ids if i not in seen]
        if missing:
            raise DataFormatError(f"{path}: missing {len(missing)} dataset id(s), e.g. {missing[0]!r}")
    if kind == "cluster":
        k = max(hard.values()) + 1
        return HardClustering(hard, k)
    assert width is not None
    return SoftClustering(soft, width)


def save_clustering(clustering: Clustering, path: str | Path) -> None:
    if isinstance(clustering, HardClustering):
        _write_jsonl(path, ({"id": i, "cluster": int(c)} for i, c in clustering.assignment.items()))
    else:
        _write_jsonl(
            path,
            ({"id": i, "distribution": [float(v) for v in row]} for i, row in clustering.rows.items()),
        )


def load_labels(
    path: str | Path,
    dataset: EmbeddingDataset | None = None,
    k_ref: int | None = None,
) -> LabelStore:
    """Load a label store.

    The file carries no label-space width, so pass ``k_ref`` to restore it;
    when omitted it is inferred as one past the largest label seen.
    """
    records = _read_jsonl(path)
    human: dict[str, int] = {}
    pseudo: dict[str, int] = {}
    seen: set[str] = set()
    max_label = -1
    for lineno, obj in records:
        for key in ("id", "label", "source"):
            if key not in obj:
                raise DataFormatError(f"{path}: line {lineno}: missing {key!r}")
        pid, label, source = obj["id"], obj["label"], obj["source"]
        if pid in seen:
            raise DataFormatError(f"{path}: line {lineno}: duplicate id {pid!r}")
        seen.add(pid)
        if dataset is not None and pid not in dataset:
            raise DataFormatError(f"{path}: line {lineno}: id {pid!r} not in dataset")
        if not isinstance(label, int) or isinstance(label, bool) or label < 0:
            raise DataFormatError(f"{path}: line {lineno}: label must be a nonnegative integer")
        if source == "human":
            human[pid] = label
        elif source == "pseudo":
            pseudo[pid] = label
        else:
            raise DataFormatError(f"{path}: line {lineno}: unknown source {source!r}")
        max_label = max(max_label, label)
    width = k_ref if k_ref is not None else max_label + 1
    if max_label >= width:
        raise DataFormatError(f"{path}: label {max_label} outside [0, {width})")
    return LabelStore(human, pseudo, width)


def save_labels(store: LabelStore, path: str | Path) -> None:
    rows = [{"id": i, "label": int(v), "source": "human"} for i, v in store.human.items()]
    rows += [{"id": i, "label": int(v), "source": "pseudo"} for i, v in store.pseudo.items()]
    _write_jsonl(path, rows)
