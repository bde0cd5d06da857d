import io

import numpy as np
import pytest

from paramine import embed, index


def make_store(vectors, quantized=True):
    store = embed.EmbeddingStore(
        ids=[str(i) for i in range(len(vectors))],
        data=np.asarray(vectors, dtype=np.float32),
    )
    return embed.quantize_store(store) if quantized else store


class TestKmeans:
    def test_k1_is_mean(self):
        rng = np.random.default_rng(0)
        pts = rng.standard_normal((100, 4))
        centroids, _ = index.train_kmeans(pts, k=1, seed=0)
        assert np.abs(centroids[0] - pts.mean(axis=0)).max() < 1e-5

    def test_two_blobs(self):
        rng = np.random.default_rng(1)
        blob_a = rng.normal(loc=0.0, scale=0.05, size=(200, 3))
        blob_b = rng.normal(loc=5.0, scale=0.05, size=(200, 3))
        pts = np.vstack([blob_a, blob_b])
        centroids, _ = index.train_kmeans(pts, k=2, seed=3)
        means = sorted([blob_a.mean(axis=0), blob_b.mean(axis=0)], key=lambda m: m[0])
        found = sorted(centroids.tolist(), key=lambda m: m[0])
        for got, want in zip(found, means):
            assert np.abs(np.array(got) - want).max() < 0.1

    def test_objective_non_increasing(self):
        rng = np.random.default_rng(2)
        pts = rng.standard_normal((500, 6))
        _, objectives = index.train_kmeans(pts, k=8, seed=0, max_iters=15)
        for prev, cur in zip(objectives, objectives[1:]):
            assert cur <= prev * (1 + 1e-12) + 1e-9

    def test_sample_smaller_than_k_rejected(self):
        with pytest.raises(ValueError):
            index.train_kmeans(np.zeros((3, 2)), k=5)


class TestIvf:
    def test_add_assigns_nearest_cell(self):
        quant = embed.ScalarQuantizer(mins=np.array([-10.0] * 2), maxs=np.array([10.0] * 2))
        idx = index.IvfIndex(
            centroids=np.array([[0.0, 0.0], [8.0, 8.0]], dtype=np.float32),
            quantizer=quant,
        )
        assert idx.add(0, np.array([1.0, 1.0])) == 0
        assert idx.add(1, np.array([7.0, 9.0])) == 1
        assert idx.count == 2

    def test_duplicate_id_rejected(self):
        quant = embed.ScalarQuantizer(mins=np.array([0.0]), maxs=np.array([1.0]))
        idx = index.IvfIndex(centroids=np.zeros((1, 1), dtype=np.float32), quantizer=quant)
        idx.add(7, np.array([0.5]))
        with pytest.raises(ValueError, match="duplicate"):
            idx.add(7, np.array([0.6]))

    def test_frozen_rejects_adds(self):
        quant = embed.ScalarQuantizer(mins=np.array([0.0]), maxs=np.array([1.0]))
        idx = index.IvfIndex(centroids=np.zeros((1, 1), dtype=np.float32), quantizer=quant)
        idx.add(0, np.array([0.5]))
        idx.freeze()
        with pytest.raises(RuntimeError):
            idx.add(1, np.array([0.1]))

    def test_search_empty_index_errors(self):
        quant = embed.ScalarQuantizer(mins=np.array([0.0]), maxs=np.array([1.0]))
        idx = index.IvfIndex(centroids=np.zeros((1, 1), dtype=np.float32), quantizer=quant)
        with pytest.raises(ValueError):
            idx.search(np.array([0.5]))

    def test_sparse_cells_yield_fewer_results(self):
        rng = np.random.default_rng(3)
        pts = np.vstack([
            rng.normal(0.0, 0.1, size=(1, 4)),
            rng.normal(50.0, 0.1, size=(20, 4)),
        ]).astype(np.float32)
        store = make_store(pts)
        idx = index.build_index(store, k=2, seed=0)
        hits = idx.search(np.zeros(4, dtype=np.float32), index.SearchParams(top_k=8, nprobe=1))
        assert 0 < len(hits) < 8

    def test_results_sorted_with_id_ties(self):
        pts = np.array([[1.0, 0.0], [1.0, 0.0], [0.5, 0.0], [3.0, 0.0]])
        store = make_store(pts)
        idx = index.build_index(store, k=1, seed=0)
        hits = idx.search(np.zeros(2, dtype=np.float32), index.SearchParams(top_k=4, nprobe=1))
        dists = [d for _, d in hits]
        assert dists == sorted(dists)
        assert (hits[1][0], hits[2][0]) == (0, 1)  # equal distances tie-break by id
        assert all(d >= 0 for d in dists)

    def test_full_probe_equals_brute_force(self):
        rng = np.random.default_rng(4)
        store = make_store(rng.standard_normal((2000, 12)))
        idx = index.build_index(store, k=16, seed=0)
        params = index.SearchParams(top_k=8, nprobe=16)
        for _ in range(100):
            q = rng.standard_normal(12).astype(np.float32)
            assert idx.search(q, params) == index.brute_force_search(store, q, 8)

    def test_self_query_within_quantization_bound(self):
        rng = np.random.default_rng(5)
        vectors = rng.standard_normal((300, 8)).astype(np.float32)
        store = make_store(vectors)
        idx = index.build_index(store, k=4, seed=0)
        bound = float(np.linalg.norm(store.quantizer.error_bound()))
        for row in [0, 17, 299]:
            hits = idx.search(vectors[row], index.SearchParams(top_k=1, nprobe=4))
            assert hits[0][0] == row
            assert hits[0][1] <= bound + 1e-6

    def test_search_params_validation(self):
        with pytest.raises(ValueError):
            index.SearchParams(top_k=0)
        with pytest.raises(ValueError):
            index.SearchParams(nprobe=0)


class TestPersistence:
    def test_roundtrip_bit_exact(self):
        rng = np.random.default_rng(6)
        store = make_store(rng.standard_normal((500, 8)))
        idx = index.build_index(store, k=5, seed=1)
        buf = io.BytesIO()
        index.write_index(idx, buf)
        raw = buf.getvalue()
        assert raw[:8] == b"PMIX0001"
        buf.seek(0)
        clone = index.read_index(buf)
        buf2 = io.BytesIO()
        index.write_index(clone, buf2)
        assert buf2.getvalue() == raw
        q = rng.standard_normal(8).astype(np.float32)
        params = index.SearchParams(top_k=5, nprobe=5)
        assert clone.search(q, params) == idx.search(q, params)

    def test_bad_magic(self):
        with pytest.raises(index.IndexFormatError, match="magic"):
            index.read_index(io.BytesIO(b"BADMAGIC"))
