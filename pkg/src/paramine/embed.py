"""Sequence-embedding storage and compression.

Embeddings come from an external encoder (see the bridge package); this
module owns the on-disk format plus the dimensionality-reduction chain used
before indexing: PCA to a target dimension, a seeded random rotation, and
8-bit scalar quantization.

Binary store format (little-endian): magic "PMEB0001", u32 n, u32 d,
u8 dtype (0 = f32, 1 = u8-quantized), 3 zero pad bytes, n null-terminated
UTF-8 ids, then for dtype 1 the quantizer bounds (d f32 mins, d f32 maxs),
then the row-major payload.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import BinaryIO

import numpy as np

MAGIC = b"PMEB0001"

DTYPE_F32 = 0
DTYPE_U8 = 1


class StoreFormatError(ValueError):
    pass


@dataclass
class ScalarQuantizer:
    mins: np.ndarray  # f32, per dimension
    maxs: np.ndarray

    def __post_init__(self) -> None:
        self.mins = np.asarray(self.mins, dtype=np.float32)
        self.maxs = np.asarray(self.maxs, dtype=np.float32)
        if self.mins.shape != self.maxs.shape:
            raise ValueError("min/max shape mismatch")
        if np.any(self.mins > self.maxs):
            raise ValueError("quantizer requires min <= max per dimension")

    @property
    def dim(self) -> int:
        return int(self.mins.shape[0])

    def error_bound(self) -> np.ndarray:
        """Half-step worst-case reconstruction error per dimension."""
        span = (self.maxs - self.mins).astype(np.float64)
        return span / 255.0 / 2.0


def fit_quantizer(vectors: np.ndarray) -> ScalarQuantizer:
    vectors = np.asarray(vectors, dtype=np.float32)
    return ScalarQuantizer(mins=vectors.min(axis=0), maxs=vectors.max(axis=0))


def quantize(q: ScalarQuantizer, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float32)
    span = q.maxs - q.mins
    safe = np.where(span > 0, span, 1.0)
    scaled = np.round(255.0 * (x - q.mins) / safe)
    codes = np.clip(scaled, 0, 255)
    codes = np.where(span > 0, codes, 0.0)
    return codes.astype(np.uint8)


def dequantize(q: ScalarQuantizer, codes: np.ndarray) -> np.ndarray:
    # Linear interpolation between the bounds: codes 0 and 255 reconstruct
    # min and max exactly.
    c = np.asarray(codes, dtype=np.float32) / np.float32(255.0)
    return (q.mins * (np.float32(1.0) - c) + q.maxs * c).astype(np.float32)


@dataclass
class EmbeddingStore:
    ids: list[str]
    data: np.ndarray  # n x d, f32 or u8
    dtype: int = DTYPE_F32
    quantizer: ScalarQuantizer | None = None

    def __post_init__(self) -> None:
        if len(self.ids) != self.data.shape[0]:
            raise ValueError("id count does not match row count")
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("ids must be unique")
        if self.dtype == DTYPE_U8 and self.quantizer is None:
            raise ValueError("quantized store needs its quantizer")

    @property
    def n(self) -> int:
        return int(self.data.shape[0])

    @property
    def d(self) -> int:
        return int(self.data.shape[1])

    def vectors(self) -> np.ndarray:
        """Rows as f32, dequantized if stored as u8 codes."""
        if self.dtype == DTYPE_F32:
            return self.data.astype(np.float32, copy=False)
        assert self.quantizer is not None
        return dequantize(self.quantizer, self.data)


def quantize_store(store: EmbeddingStore, q: ScalarQuantizer | None = None) -> EmbeddingStore:
    if store.dtype == DTYPE_U8:
        return store
    if q is None:
        q = fit_quantizer(store.data)
    codes = quantize(q, store.data)
    return EmbeddingStore(ids=list(store.ids), data=codes, dtype=DTYPE_U8, quantizer=q)


# ---------------------------------------------------------------------------
# PCA + seeded rotation
# ---------------------------------------------------------------------------

@dataclass
class PcaTransform:
    mean: np.ndarray  # d
    components: np.ndarray  # out_dim x d, orthonormal rows

    @property
    def out_dim(self) -> int:
        return int(self.components.shape[0])

    def apply(self, vectors: np.ndarray) -> np.ndarray:
        vectors = np.asarray(vectors, dtype=np.float64)
        return (vectors - self.mean) @ self.components.T


def fit_pca(vectors: np.ndarray, out_dim: int) -> PcaTransform:
    """Top principal directions of the centered sample, via SVD."""
    vectors = np.asarray(vectors, dtype=np.float64)
    n, d = vectors.shape
    if out_dim > d:
        raise ValueError(f"out_dim {out_dim} exceeds input dimension {d}")
    if n < out_dim:
        raise ValueError(f"need at least out_dim={out_dim} samples, got {n}")
    mean = vectors.mean(axis=0)
    _, _, vt = np.linalg.svd(vectors - mean, full_matrices=False)
    return PcaTransform(mean=mean, components=vt[:out_dim])


@dataclass
class RandomRotation:
    seed: int
    matrix: np.ndarray  # out_dim x out_dim, orthogonal

    def apply(self, vectors: np.ndarray) -> np.ndarray:
        return np.asarray(vectors, dtype=np.float64) @ self.matrix.T


def make_rotation(dim: int, seed: int) -> RandomRotation:
    """Orthogonal matrix from QR of a seeded Gaussian, sign-fixed."""
    rng = np.random.default_rng(seed)
    gauss = rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(gauss)
    q = q * np.sign(np.diag(r))
    return RandomRotation(seed=seed, matrix=q)


def apply_transform(
    pca: PcaTransform, rotation: RandomRotation | None, vectors: np.ndarray
) -> np.ndarray:
    """rotation @ (components @ (x - mean)) for each row, as f32."""
    projected = pca.apply(vectors)
    if rotation is not None:
        projected = rotation.apply(projected)
    return projected.astype(np.float32)


def l2_normalize(vectors: np.ndarray) -> np.ndarray:
    vectors = np.asarray(vectors, dtype=np.float32)
    norms = np.linalg.norm(vectors, axis=1, keepdims=True)
    norms = np.where(norms > 0, norms, 1.0)
    return vectors / norms


# ---------------------------------------------------------------------------
# binary store IO
# ---------------------------------------------------------------------------

def write_store(store: EmbeddingStore, fp: BinaryIO) -> None:
    fp.write(MAGIC)
    fp.write(struct.pack("<IIB3x", store.n, store.d, store.dtype))
    for sid in store.ids:
        raw = sid.encode("utf-8")
        if b"\x00" in raw:
            raise ValueError(f"id {sid!r} contains a NUL byte")
        fp.write(raw + b"\x00")
    if store.dtype == DTYPE_U8:
        assert store.quantizer is not None
        fp.write(store.quantizer.mins.astype("<f4").tobytes())
        fp.write(store.quantizer.maxs.astype("<f4").tobytes())
        fp.write(np.ascontiguousarray(store.data, dtype=np.uint8).tobytes())
    else:
        fp.write(np.ascontiguousarray(store.data.astype("<f4")).tobytes())


def read_store(fp: BinaryIO) -> EmbeddingStore:
    magic = fp.read(8)
    if magic != MAGIC:
        raise StoreFormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    header = fp.read(12)
    if len(header) != 12:
        raise StoreFormatError("truncated header")
    n, d, dtype = struct.unpack("<IIB3x", header)
    if dtype not in (DTYPE_F32, DTYPE_U8):
        raise StoreFormatError(f"unknown dtype {dtype}")
    ids = []
    for _ in range(n):
        chunk = bytearray()
        while True:
            b = fp.read(1)
            if not b:
                raise StoreFormatError("truncated id table")
            if b == b"\x00":
                break
            chunk.extend(b)
        ids.append(chunk.decode("utf-8"))
    quantizer = None
    if dtype == DTYPE_U8:
        bounds = fp.read(8 * d)
        if len(bounds) != 8 * d:
            raise StoreFormatError("truncated quantizer bounds")
        mins = np.frombuffer(bounds[: 4 * d], dtype="<f4")
        maxs = np.frombuffer(bounds[4 * d :], dtype="<f4")
        quantizer = ScalarQuantizer(mins=mins.copy(), maxs=maxs.copy())
        payload = fp.read(n * d)
        if len(payload) != n * d:
            raise StoreFormatError("truncated payload")
        data = np.frombuffer(payload, dtype=np.uint8).reshape(n, d).copy()
    else:
        payload = fp.read(4 * n * d)
        if len(payload) != 4 * n * d:
            raise StoreFormatError("truncated payload")
        data = np.frombuffer(payload, dtype="<f4").reshape(n, d).copy()
    return EmbeddingStore(ids=ids, data=data, dtype=dtype, quantizer=quantizer)


def write_store_path(store: EmbeddingStore, path: str) -> None:
    with open(path, "wb") as fp:
        write_store(store, fp)


def read_store_path(path: str) -> EmbeddingStore:
    with open(path, "rb") as fp:
        return read_store(fp)
