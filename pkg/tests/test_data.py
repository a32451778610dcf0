import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clueval.data import (
    DataFormatError,
    EmbeddingDataset,
    HardClustering,
    LabelStore,
    SoftClustering,
    load_clustering,
    load_embeddings,
    load_labels,
    save_clustering,
    save_embeddings,
    save_labels,
)


def write_lines(path, rows):
    path.write_text("".join(json.dumps(r) + "\n" for r in rows), encoding="utf-8")


def small_dataset(n=4, d=2, payloads=False):
    ids = tuple(f"p{i}" for i in range(n))
    vectors = np.arange(n * d, dtype=np.float64).reshape(n, d)
    pl = tuple(f"text {i}" for i in range(n)) if payloads else (None,) * n
    return EmbeddingDataset(ids, vectors, pl)


# --- embeddings ---


def test_load_embeddings_basic(tmp_path):
    path = tmp_path / "e.jsonl"
    write_lines(path, [{"id": f"x{i}", "vector": [float(i), 0.0]} for i in range(3)])
    ds = load_embeddings(path)
    assert (ds.n, ds.dim) == (3, 2)
    assert ds.ids == ("x0", "x1", "x2")
    assert ds.payloads == (None, None, None)
    assert np.array_equal(ds.vectors[:, 0], [0.0, 1.0, 2.0])


def test_load_embeddings_dimension_mismatch_names_line(tmp_path):
    path = tmp_path / "e.jsonl"
    write_lines(
        path,
        [
            {"id": "a", "vector": [1.0, 2.0]},
            {"id": "b", "vector": [1.0, 2.0, 3.0]},
            {"id": "c", "vector": [0.0, 0.0]},
        ],
    )
    with pytest.raises(DataFormatError, match="line 2"):
        load_embeddings(path)


def test_load_embeddings_duplicate_id(tmp_path):
    path = tmp_path / "e.jsonl"
    write_lines(path, [{"id": "a", "vector": [1.0]}, {"id": "a", "vector": [2.0]}])
    with pytest.raises(DataFormatError, match="duplicate id 'a'"):
        load_embeddings(path)


def test_load_embeddings_empty_file(tmp_path):
    path = tmp_path / "e.jsonl"
    path.write_text("", encoding="utf-8")
    with pytest.raises(DataFormatError, match="empty"):
        load_embeddings(path)


def test_load_embeddings_malformed_json(tmp_path):
    path = tmp_path / "e.jsonl"
    path.write_text('{"id": "a", "vector": [1.0]}\nnot json\n', encoding="utf-8")
    with pytest.raises(DataFormatError, match="line 2"):
        load_embeddings(path)


def test_load_embeddings_blank_lines_skipped(tmp_path):
    path = tmp_path / "e.jsonl"
    path.write_text(
        '{"id": "a", "vector": [1.0]}\n\n{"id": "b", "vector": [2.0]}\n', encoding="utf-8"
    )
    assert load_embeddings(path).n == 2


def test_embeddings_roundtrip_with_payloads(tmp_path):
    ds = small_dataset(payloads=True)
    save_embeddings(ds, tmp_path / "e.jsonl")
    assert load_embeddings(tmp_path / "e.jsonl") == ds


def test_dataset_vectors_read_only():
    ds = small_dataset()
    with pytest.raises(ValueError):
        ds.vectors[0, 0] = 99.0


def test_dataset_lookup():
    ds = small_dataset(payloads=True)
    assert ds.index_of("p2") == 2
    assert "p2" in ds and "q" not in ds
    assert ds.payload_of("p1") == "text 1"
    assert np.array_equal(ds.vectors_for(["p3", "p0"]), ds.vectors[[3, 0]])


def test_dataset_requires_two_points():
    with pytest.raises(ValueError):
        EmbeddingDataset(("a",), np.zeros((1, 2)), (None,))


def test_dataset_duplicate_id_rejected():
    with pytest.raises(ValueError, match="duplicate"):
        EmbeddingDataset(("a", "a"), np.zeros((2, 2)), (None, None))


# --- clusterings ---


def test_load_hard_clustering(tmp_path):
    path = tmp_path / "c.jsonl"
    write_lines(path, [{"id": f"p{i}", "cluster": c} for i, c in enumerate([0, 0, 1, 1])])
    c = load_clustering(path)
    assert isinstance(c, HardClustering)
    assert c.k == 2
    assert c.assignment == {"p0": 0, "p1": 0, "p2": 1, "p3": 1}


def test_load_soft_clustering(tmp_path):
    path = tmp_path / "c.jsonl"
    write_lines(path, [{"id": f"p{i}", "distribution": [0.7, 0.3]} for i in range(3)])
    c = load_clustering(path)
    assert isinstance(c, SoftClustering)
    assert c.k == 2
    assert np.allclose(c.rows["p1"], [0.7, 0.3])


def test_load_clustering_missing_dataset_id(tmp_path):
    ds = small_dataset(n=4)
    path = tmp_path / "c.jsonl"
    write_lines(path, [{"id": f"p{i}", "cluster": 0} for i in range(3)])
    with pytest.raises(DataFormatError, match="missing 1 dataset id"):
        load_clustering(path, ds)


def test_load_clustering_extra_id(tmp_path):
    ds = small_dataset(n=2)
    path = tmp_path / "c.jsonl"
    write_lines(path, [{"id": i, "cluster": 0} for i in ("p0", "p1", "zz")])
    with pytest.raises(DataFormatError, match="'zz' not in dataset"):
        load_clustering(path, ds)


def test_load_clustering_mixed_rows(tmp_path):
    path = tmp_path / "c.jsonl"
    write_lines(path, [{"id": "a", "cluster": 0}, {"id": "b", "distribution": [1.0]}])
    with pytest.raises(DataFormatError, match="mixed hard and soft"):
        load_clustering(path)


def test_load_clustering_renormalizes_near_one(tmp_path):
    path = tmp_path / "c.jsonl"
    write_lines(path, [{"id": "a", "distribution": [0.5, 0.5 + 4e-7]}, {"id": "b", "distribution": [1.0, 0.0]}])
    c = load_clustering(path)
    assert abs(float(c.rows["a"].sum()) - 1.0) < 1e-12


def test_load_clustering_rejects_bad_sum(tmp_path):
    path = tmp_path / "c.jsonl"
    write_lines(path, [{"id": "a", "distribution": [0.5, 0.6]}])
    with pytest.raises(DataFormatError, match="sums to"):
        load_clustering(path)


def test_clustering_roundtrips(tmp_path):
    hard = HardClustering({"a": 0, "b": 2, "c": 1}, 3)
    save_clustering(hard, tmp_path / "h.jsonl")
    assert load_clustering(tmp_path / "h.jsonl") == hard

    soft = SoftClustering({"a": np.array([0.25, 0.75]), "b": np.array([1.0, 0.0])}, 2)
    save_clustering(soft, tmp_path / "s.jsonl")
    assert load_clustering(tmp_path / "s.jsonl") == soft


def test_hard_clustering_validation():
    with pytest.raises(ValueError, match="outside"):
        HardClustering({"a": 3}, 3)
    with pytest.raises(ValueError, match="integer"):
        HardClustering({"a": True}, 2)
    with pytest.raises(ValueError):
        HardClustering({}, 0)


def test_soft_clustering_validation():
    with pytest.raises(ValueError, match="length 2"):
        SoftClustering({"a": np.array([1.0])}, 2)
    with pytest.raises(ValueError, match="negative"):
        SoftClustering({"a": np.array([1.2, -0.2])}, 2)
    with pytest.raises(ValueError, match="sum"):
        SoftClustering({"a": np.array([0.7, 0.7])}, 2)


def test_soft_harden_ties_to_lowest():
    soft = SoftClustering({"a": np.array([0.5, 0.5]), "b": np.array([0.2, 0.8])}, 2)
    assert soft.harden().assignment == {"a": 0, "b": 1}


def test_labels_for_order():
    hard = HardClustering({"a": 0, "b": 2, "c": 1}, 3)
    assert np.array_equal(hard.labels_for(["c", "a"]), [1, 0])


# --- label stores ---


def test_label_store_roundtrip(tmp_path):
    store = LabelStore({"a": 0, "b": 1}, {"c": 2}, 3)
    save_labels(store, tmp_path / "y.jsonl")
    loaded = load_labels(tmp_path / "y.jsonl", k_ref=3)
    assert loaded == store
    assert loaded.n_human == 2 and loaded.n_total == 3
    assert loaded.merged() == {"a": 0, "b": 1, "c": 2}


def test_label_store_sources_preserved(tmp_path):
    store = LabelStore({"a": 0, "b": 1}, {"c": 1}, 2)
    save_labels(store, tmp_path / "y.jsonl")
    rows = [json.loads(line) for line in (tmp_path / "y.jsonl").read_text().splitlines()]
    assert len(rows) == 3
    assert {r["id"]: r["source"] for r in rows} == {"a": "human", "b": "human", "c": "pseudo"}


def test_empty_store_roundtrip(tmp_path):
    store = LabelStore({}, {}, 4)
    save_labels(store, tmp_path / "y.jsonl")
    loaded = load_labels(tmp_path / "y.jsonl", k_ref=4)
    assert loaded.n_total == 0


def test_load_labels_out_of_range(tmp_path):
    path = tmp_path / "y.jsonl"
    write_lines(path, [{"id": "a", "label": 7, "source": "human"}])
    with pytest.raises(DataFormatError, match="outside"):
        load_labels(path, k_ref=5)


def test_load_labels_infers_width(tmp_path):
    path = tmp_path / "y.jsonl"
    write_lines(path, [{"id": "a", "label": 4, "source": "human"}])
    assert load_labels(path).k_ref == 5


def test_load_labels_unknown_source(tmp_path):
    path = tmp_path / "y.jsonl"
    write_lines(path, [{"id": "a", "label": 0, "source": "guess"}])
    with pytest.raises(DataFormatError, match="unknown source"):
        load_labels(path)


def test_label_store_disjoint_sources():
    with pytest.raises(ValueError, match="both human- and pseudo-labeled"):
        LabelStore({"a": 0}, {"a": 1}, 2)


def test_label_store_range_check():
    with pytest.raises(ValueError, match="outside"):
        LabelStore({"a": 2}, {}, 2)


# --- properties ---


ids_strategy = st.lists(
    st.text(alphabet="abcdefgh0123", min_size=1, max_size=6), min_size=2, max_size=8, unique=True
)


@settings(max_examples=40, deadline=None)
@given(ids=ids_strategy, d=st.integers(1, 4), data=st.data())
def test_embeddings_roundtrip_property(tmp_path_factory, ids, d, data):
    n = len(ids)
    vectors = np.array(
        data.draw(st.lists(st.lists(st.floats(-1e6, 1e6), min_size=d, max_size=d), min_size=n, max_size=n))
    )
    payloads = tuple(data.draw(st.one_of(st.none(), st.text(max_size=10))) for _ in range(n))
    ds = EmbeddingDataset(tuple(ids), vectors, payloads)
    path = tmp_path_factory.mktemp("rt") / "e.jsonl"
    save_embeddings(ds, path)
    assert load_embeddings(path) == ds


@settings(max_examples=40, deadline=None)
@given(ids=ids_strategy, k=st.integers(1, 5), data=st.data())
def test_labels_roundtrip_property(tmp_path_factory, ids, k, data):
    labels = {i: data.draw(st.integers(0, k - 1)) for i in ids}
    split = data.draw(st.integers(0, len(ids)))
    ordered = list(labels)
    store = LabelStore(
        {i: labels[i] for i in ordered[:split]}, {i: labels[i] for i in ordered[split:]}, k
    )
    path = tmp_path_factory.mktemp("rt") / "y.jsonl"
    save_labels(store, path)
    assert load_labels(path, k_ref=k) == store
