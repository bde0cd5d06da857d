"""Numeric inner loops with a numba fast path and a pure-numpy fallback.

The backend is chosen once at import time from the PARAMINE_NUMBA environment
variable: "1" forces numba, "0" forces numpy, anything else (or unset) means
"use numba when importable". Both backends produce identical results; the
benchmark in benchmarks/bench_kernels.py compares their throughput.
"""

from __future__ import annotations

import os

import numpy as np

_FLAG = os.environ.get("PARAMINE_NUMBA", "auto").lower()

_USE_NUMBA = False
if _FLAG != "0":
    try:
        import numba

        _USE_NUMBA = True
    except ImportError:
        if _FLAG == "1":
            raise


def backend_name() -> str:
    return "numba" if _USE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# numpy reference implementations
# ---------------------------------------------------------------------------

def _sq_dists_np(points: np.ndarray, query: np.ndarray) -> np.ndarray:
    # (x - q)^2 summed per row; row results do not depend on which other rows
    # are present, so probing a subset gives bit-identical distances to a
    # full scan.
    diff = points.astype(np.float32) - query.astype(np.float32)
    return np.einsum("ij,ij->i", diff, diff, dtype=np.float64).astype(np.float64)


def _assign_nearest_np(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    n = points.shape[0]
    assign = np.empty(n, dtype=np.int64)
    for i in range(n):
        diff = centroids - points[i]
        d = np.einsum("ij,ij->i", diff, diff, dtype=np.float64)
        assign[i] = int(np.argmin(d))
    return assign


def _levenshtein_np(a: np.ndarray, b: np.ndarray) -> int:
    n, m = len(a), len(b)
    if n == 0:
        return m
    if m == 0:
        return n
    prev = np.arange(m + 1, dtype=np.int64)
    cur = np.empty(m + 1, dtype=np.int64)
    for i in range(1, n + 1):
        cur[0] = i
        sub = prev[:-1] + (b != a[i - 1])
        ins = prev[1:] + 1
        np.minimum(sub, ins, out=cur[1:])
        for j in range(1, m + 1):  # deletion column carries left-to-right
            if cur[j - 1] + 1 < cur[j]:
                cur[j] = cur[j - 1] + 1
        prev, cur = cur, prev
    return int(prev[m])


def _replace_count_np(a: np.ndarray, b: np.ndarray) -> int:
    # Among all minimum-cost edit scripts, count replacements in the one with
    # the most replacements (indel pairs collapse into replaces, matches stay
    # matches). Symmetric in (a, b) by construction.
    n, m = len(a), len(b)
    cost = np.empty((n + 1, m + 1), dtype=np.int64)
    reps = np.zeros((n + 1, m + 1), dtype=np.int64)
    cost[0, :] = np.arange(m + 1)
    cost[:, 0] = np.arange(n + 1)
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            eq = a[i - 1] == b[j - 1]
            dc = cost[i - 1, j - 1] + (0 if eq else 1)
            dr = reps[i - 1, j - 1] + (0 if eq else 1)
            best_c = cost[i - 1, j] + 1
            best_r = reps[i - 1, j]
            cc = cost[i, j - 1] + 1
            cr = reps[i, j - 1]
            if cc < best_c or (cc == best_c and cr > best_r):
                best_c, best_r = cc, cr
            if dc < best_c or (dc == best_c and dr > best_r):
                best_c, best_r = dc, dr
            cost[i, j] = best_c
            reps[i, j] = best_r
    return int(reps[n, m])


# ---------------------------------------------------------------------------
# numba fast paths
# ---------------------------------------------------------------------------

if _USE_NUMBA:

    @numba.njit(cache=True, nogil=True)
    def _sq_dists_nb(points, query):  # pragma: no cover - exercised via wrapper
        n, d = points.shape
        out = np.empty(n, dtype=np.float64)
        for i in range(n):
            acc = 0.0
            for j in range(d):
                diff = np.float64(np.float32(points[i, j]) - np.float32(query[j]))
                acc += diff * diff
            out[i] = acc
        return out

    @numba.njit(cache=True, nogil=True)
    def _assign_nearest_nb(points, centroids):  # pragma: no cover
        n, d = points.shape
        k = centroids.shape[0]
        assign = np.empty(n, dtype=np.int64)
        for i in range(n):
            best = -1
            best_d = np.inf
            for c in range(k):
                acc = 0.0
                for j in range(d):
                    diff = centroids[c, j] - points[i, j]
                    acc += diff * diff
                if acc < best_d:
                    best_d = acc
                    best = c
            assign[i] = best
        return assign

    @numba.njit(cache=True, nogil=True)
    def _levenshtein_nb(a, b):  # pragma: no cover
        n, m = len(a), len(b)
        if n == 0:
            return m
        if m == 0:
            return n
        prev = np.empty(m + 1, dtype=np.int64)
        cur = np.empty(m + 1, dtype=np.int64)
        for j in range(m + 1):
            prev[j] = j
        for i in range(1, n + 1):
            cur[0] = i
            for j in range(1, m + 1):
                sub = prev[j - 1] + (0 if a[i - 1] == b[j - 1] else 1)
                ins = prev[j] + 1
                de = cur[j - 1] + 1
                best = sub
                if ins < best:
                    best = ins
                if de < best:
                    best = de
                cur[j] = best
            for j in range(m + 1):
                prev[j] = cur[j]
        return prev[m]

    @numba.njit(cache=True, nogil=True)
    def _replace_count_nb(a, b):  # pragma: no cover
        n, m = len(a), len(b)
        cost = np.empty((n + 1, m + 1), dtype=np.int64)
        reps = np.zeros((n + 1, m + 1), dtype=np.int64)
        for j in range(m + 1):
            cost[0, j] = j
        for i in range(n + 1):
            cost[i, 0] = i
        for i in range(1, n + 1):
            for j in range(1, m + 1):
                eq = a[i - 1] == b[j - 1]
                dc = cost[i - 1, j - 1] + (0 if eq else 1)
                dr = reps[i - 1, j - 1] + (0 if eq else 1)
                best_c = cost[i - 1, j] + 1
                best_r = reps[i - 1, j]
                cc = cost[i, j - 1] + 1
                cr = reps[i, j - 1]
                if cc < best_c or (cc == best_c and cr > best_r):
                    best_c = cc
                    best_r = cr
                if dc < best_c or (dc == best_c and dr > best_r):
                    best_c = dc
                    best_r = dr
                cost[i, j] = best_c
                reps[i, j] = best_r
        return reps[n, m]


# ---------------------------------------------------------------------------
# public API
# ---------------------------------------------------------------------------

def sq_dists(points: np.ndarray, query: np.ndarray) -> np.ndarray:
    """Squared L2 distance from `query` to every row of `points` (float64)."""
    points = np.ascontiguousarray(points, dtype=np.float32)
    query = np.ascontiguousarray(query, dtype=np.float32)
    if _USE_NUMBA:
        return _sq_dists_nb(points, query)
    return _sq_dists_np(points, query)


def assign_nearest(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Index of the nearest centroid (squared L2) for every row of `points`."""
    points = np.ascontiguousarray(points, dtype=np.float64)
    centroids = np.ascontiguousarray(centroids, dtype=np.float64)
    if _USE_NUMBA:
        return _assign_nearest_nb(points, centroids)
    return _assign_nearest_np(points, centroids)


def _codes(text: str) -> np.ndarray:
    return np.frombuffer(text.encode("utf-32-le"), dtype=np.uint32).astype(np.int64)


def levenshtein(a: str, b: str) -> int:
    """Unit-cost edit distance over Unicode scalar values."""
    ca, cb = _codes(a), _codes(b)
    if _USE_NUMBA:
        return int(_levenshtein_nb(ca, cb))
    return _levenshtein_np(ca, cb)


def replace_count(a: str, b: str) -> int:
    """Number of replace operations in a canonical minimum-cost edit script.

    Ties between minimum-cost scripts are resolved toward the script with the
    most replacements (a replace is preferred over a delete+insert pair),
    which makes the count symmetric in its arguments.
    """
    ca, cb = _codes(a), _codes(b)
    if _USE_NUMBA:
        return int(_replace_count_nb(ca, cb))
    return _replace_count_np(ca, cb)
