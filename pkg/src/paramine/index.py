"""Inverted-file vector index over scalar-quantized embeddings.

Vectors are bucketed by nearest centroid at add time and stored as 8-bit
codes; a search probes the `nprobe` cells closest to the query and ranks the
dequantized candidates by true L2 distance (ties broken by row id). The
brute-force scan over a store uses the same distance kernel, so with
nprobe == k the two are exactly equivalent, which the tests rely on.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import BinaryIO

import numpy as np

from . import kernels
from .embed import (
    DTYPE_F32,
    EmbeddingStore,
    ScalarQuantizer,
    dequantize,
    quantize,
    read_store,
    write_store,
)

INDEX_MAGIC = b"PMIX0001"


class IndexFormatError(ValueError):
    pass


@dataclass(frozen=True)
class SearchParams:
    top_k: int = 8
    nprobe: int = 16

    def __post_init__(self) -> None:
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if self.nprobe < 1:
            raise ValueError("nprobe must be >= 1")


def default_cell_count(n: int) -> int:
    """Desk-scale default: one cell per ~100 vectors."""
    return max(1, n // 100)


def train_kmeans(
    samples: np.ndarray,
    k: int,
    max_iters: int = 25,
    seed: int = 0,
) -> tuple[np.ndarray, list[float]]:
    """Lloyd's algorithm from k-means++ seeding.

    Returns float32 centroids and the per-iteration objective (sum of squared
    distances to the nearest centroid), which is non-increasing. Empty
    clusters are reseeded to the point farthest from its assigned centroid.
    """
    samples = np.asarray(samples, dtype=np.float64)
    n = samples.shape[0]
    if n < k:
        raise ValueError(f"need at least k={k} samples, got {n}")
    rng = np.random.default_rng(seed)

    centroids = np.empty((k, samples.shape[1]), dtype=np.float64)
    first = int(rng.integers(n))
    centroids[0] = samples[first]
    closest = np.einsum(
        "ij,ij->i", samples - centroids[0], samples - centroids[0]
    )
    for c in range(1, k):
        total = closest.sum()
        if total <= 0:
            pick = int(rng.integers(n))
        else:
            pick = int(rng.choice(n, p=closest / total))
        centroids[c] = samples[pick]
        diff = samples - centroids[c]
        np.minimum(closest, np.einsum("ij,ij->i", diff, diff), out=closest)

    objectives: list[float] = []
    prev_assign: np.ndarray | None = None
    for _ in range(max_iters):
        assign = kernels.assign_nearest(samples, centroids)
        diff = samples - centroids[assign]
        dists = np.einsum("ij,ij->i", diff, diff)
        objectives.append(float(dists.sum()))
        if prev_assign is not None and np.array_equal(assign, prev_assign):
            break
        prev_assign = assign
        for c in range(k):
            mask = assign == c
            if mask.any():
                centroids[c] = samples[mask].mean(axis=0)
            else:
                centroids[c] = samples[int(np.argmax(dists))]
                diff = samples - centroids[c]
                d_new = np.einsum("ij,ij->i", diff, diff)
                dists = np.minimum(dists, d_new)
    return centroids.astype(np.float32), objectives


def _rank_rows(row_ids: np.ndarray, dists: np.ndarray, top_k: int) -> list[tuple[int, float]]:
    order = np.lexsort((row_ids, dists))
    out = []
    for idx in order[:top_k]:
        out.append((int(row_ids[idx]), float(np.sqrt(dists[idx]))))
    return out


def brute_force_search(
    store: EmbeddingStore, query: np.ndarray, top_k: int
) -> list[tuple[int, float]]:
    """Exact top-k rows of a store by L2 distance, ties by row position."""
    if store.n == 0:
        return []
    dists = kernels.sq_dists(store.vectors(), np.asarray(query, dtype=np.float32))
    return _rank_rows(np.arange(store.n, dtype=np.int64), dists, top_k)


@dataclass
class IvfIndex:
    centroids: np.ndarray  # k x d, f32
    quantizer: ScalarQuantizer
    cells: list[list[tuple[int, np.ndarray]]] = field(default_factory=list)
    count: int = 0
    frozen: bool = False

    def __post_init__(self) -> None:
        self.centroids = np.asarray(self.centroids, dtype=np.float32)
        if not self.cells:
            self.cells = [[] for _ in range(self.k)]
        self._ids: set[int] = {rid for cell in self.cells for rid, _ in cell}
        self._packed: list[tuple[np.ndarray, np.ndarray]] | None = None

    @property
    def k(self) -> int:
        return int(self.centroids.shape[0])

    @property
    def d(self) -> int:
        return int(self.centroids.shape[1])

    def add(self, row_id: int, vector: np.ndarray) -> int:
        """Quantize and append to the nearest centroid's list; returns the cell."""
        if self.frozen:
            raise RuntimeError("index is frozen")
        if row_id in self._ids:
            raise ValueError(f"duplicate row id {row_id}")
        vector = np.asarray(vector, dtype=np.float32)
        dists = kernels.sq_dists(self.centroids, vector)
        cell = int(np.lexsort((np.arange(self.k), dists))[0])
        codes = quantize(self.quantizer, vector)
        self.cells[cell].append((int(row_id), codes))
        self._ids.add(int(row_id))
        self.count += 1
        return cell

    def freeze(self) -> None:
        self._pack()
        self.frozen = True

    def _pack(self) -> None:
        packed = []
        for cell in self.cells:
            if cell:
                ids = np.array([rid for rid, _ in cell], dtype=np.int64)
                codes = np.stack([c for _, c in cell])
            else:
                ids = np.empty(0, dtype=np.int64)
                codes = np.empty((0, self.d), dtype=np.uint8)
            packed.append((ids, codes))
        self._packed = packed

    def search(
        self, query: np.ndarray, params: SearchParams = SearchParams()
    ) -> list[tuple[int, float]]:
        """Top-k (row id, L2 distance) from the nprobe nearest cells."""
        if self.count == 0:
            raise ValueError("search on an empty index")
        if self._packed is None or not self.frozen:
            self._pack()
        query = np.asarray(query, dtype=np.float32)
        cdists = kernels.sq_dists(self.centroids, query)
        probe = np.lexsort((np.arange(self.k), cdists))[: min(params.nprobe, self.k)]

        id_chunks = []
        dist_chunks = []
        for cell in probe:
            ids, codes = self._packed[cell]
            if len(ids) == 0:
                continue
            vecs = dequantize(self.quantizer, codes)
            id_chunks.append(ids)
            dist_chunks.append(kernels.sq_dists(vecs, query))
        if not id_chunks:
            return []
        all_ids = np.concatenate(id_chunks)
        all_dists = np.concatenate(dist_chunks)
        return _rank_rows(all_ids, all_dists, params.top_k)


def build_index(
    store: EmbeddingStore,
    k: int | None = None,
    seed: int = 0,
    max_iters: int = 25,
) -> IvfIndex:
    """Train cells on the store's vectors and add every row."""
    vectors = store.vectors()
    if k is None:
        k = default_cell_count(store.n)
    centroids, _ = train_kmeans(vectors, k=k, seed=seed, max_iters=max_iters)
    if store.dtype == DTYPE_F32:
        quantizer = ScalarQuantizer(
            mins=vectors.min(axis=0), maxs=vectors.max(axis=0)
        )
    else:
        assert store.quantizer is not None
        quantizer = store.quantizer
    idx = IvfIndex(centroids=centroids, quantizer=quantizer)
    for row, vec in enumerate(vectors):
        idx.add(row, vec)
    idx.freeze()
    return idx


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------

def write_index(index: IvfIndex, fp: BinaryIO) -> None:
    fp.write(INDEX_MAGIC)
    centroid_store = EmbeddingStore(
        ids=[str(i) for i in range(index.k)],
        data=index.centroids,
        dtype=DTYPE_F32,
    )
    write_store(centroid_store, fp)
    fp.write(index.quantizer.mins.astype("<f4").tobytes())
    fp.write(index.quantizer.maxs.astype("<f4").tobytes())
    fp.write(struct.pack("<I", index.k))
    for cell_id, cell in enumerate(index.cells):
        fp.write(struct.pack("<II", cell_id, len(cell)))
        for rid, codes in cell:
            fp.write(struct.pack("<Q", rid))
            fp.write(codes.tobytes())


def read_index(fp: BinaryIO) -> IvfIndex:
    magic = fp.read(8)
    if magic != INDEX_MAGIC:
        raise IndexFormatError(f"bad magic {magic!r}, expected {INDEX_MAGIC!r}")
    centroid_store = read_store(fp)
    d = centroid_store.d
    bounds = fp.read(8 * d)
    if len(bounds) != 8 * d:
        raise IndexFormatError("truncated quantizer bounds")
    mins = np.frombuffer(bounds[: 4 * d], dtype="<f4").copy()
    maxs = np.frombuffer(bounds[4 * d :], dtype="<f4").copy()
    header = fp.read(4)
    if len(header) != 4:
        raise IndexFormatError("truncated cell count")
    (n_cells,) = struct.unpack("<I", header)
    if n_cells != centroid_store.n:
        raise IndexFormatError("cell count does not match centroid count")
    cells: list[list[tuple[int, np.ndarray]]] = []
    count = 0
    for _ in range(n_cells):
        head = fp.read(8)
        if len(head) != 8:
            raise IndexFormatError("truncated cell header")
        cell_id, length = struct.unpack("<II", head)
        if cell_id != len(cells):
            raise IndexFormatError(f"out-of-order cell id {cell_id}")
        cell = []
        for _ in range(length):
            entry = fp.read(8 + d)
            if len(entry) != 8 + d:
                raise IndexFormatError("truncated cell entry")
            (rid,) = struct.unpack("<Q", entry[:8])
            codes = np.frombuffer(entry[8:], dtype=np.uint8).copy()
            cell.append((int(rid), codes))
            count += 1
        cells.append(cell)
    idx = IvfIndex(
        centroids=centroid_store.data,
        quantizer=ScalarQuantizer(mins=mins, maxs=maxs),
        cells=cells,
        count=count,
    )
    idx.freeze()
    return idx


def write_index_path(index: IvfIndex, path: str) -> None:
    with open(path, "wb") as fp:
        write_index(index, fp)


def read_index_path(path: str) -> IvfIndex:
    with open(path, "rb") as fp:
        return read_index(fp)
