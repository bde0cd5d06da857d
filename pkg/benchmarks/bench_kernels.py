#!/usr/bin/env python3
"""Throughput comparison of the numba and numpy kernel backends.

The backend is fixed per process, so this script re-executes itself once per
backend (PARAMINE_NUMBA=1 / 0) and prints a side-by-side table. Run directly:

    python benchmarks/bench_kernels.py
"""

from __future__ import annotations

import json
import os
import subprocess
import sys
import time

import numpy as np


def bench_backend() -> dict[str, float]:
    from paramine import kernels

    rng = np.random.default_rng(0)
    results: dict[str, float] = {"backend_is_numba": kernels.backend_name() == "numba"}

    # pairwise query scans (the mining search hot path)
    points = rng.standard_normal((20000, 32)).astype(np.float32)
    queries = rng.standard_normal((50, 32)).astype(np.float32)
    kernels.sq_dists(points[:10], queries[0])  # trigger JIT outside the timer
    start = time.perf_counter()
    for q in queries:
        kernels.sq_dists(points, q)
    results["sq_dists_rows_per_s"] = len(points) * len(queries) / (time.perf_counter() - start)

    # centroid assignment (index training hot path)
    centroids = rng.standard_normal((64, 32))
    sample = rng.standard_normal((5000, 32))
    kernels.assign_nearest(sample[:10], centroids)
    start = time.perf_counter()
    kernels.assign_nearest(sample, centroids)
    results["assign_rows_per_s"] = len(sample) / (time.perf_counter() - start)

    # character-level distances (pair filtering hot path)
    alphabet = np.array(list("abcdefghij "))
    texts = ["".join(rng.choice(alphabet, size=120)) for _ in range(200)]
    kernels.levenshtein(texts[0], texts[1])
    start = time.perf_counter()
    for a, b in zip(texts[::2], texts[1::2]):
        kernels.levenshtein(a, b)
    results["levenshtein_pairs_per_s"] = (len(texts) // 2) / (time.perf_counter() - start)

    kernels.replace_count(texts[0], texts[1])
    start = time.perf_counter()
    for a, b in zip(texts[::2], texts[1::2]):
        kernels.replace_count(a, b)
    results["replace_count_pairs_per_s"] = (len(texts) // 2) / (time.perf_counter() - start)

    return results


def main() -> int:
    if os.environ.get("_BENCH_CHILD"):
        print(json.dumps(bench_backend()))
        return 0

    rows: dict[str, dict[str, float]] = {}
    for backend, flag in (("numba", "1"), ("numpy", "0")):
        env = dict(os.environ, PARAMINE_NUMBA=flag, _BENCH_CHILD="1")
        proc = subprocess.run(
            [sys.executable, __file__], env=env, capture_output=True, text=True
        )
        if proc.returncode != 0:
            print(f"{backend} run failed:\n{proc.stderr}", file=sys.stderr)
            return 1
        rows[backend] = json.loads(proc.stdout)

    metrics = [k for k in rows["numba"] if k != "backend_is_numba"]
    name_w = max(len(m) for m in metrics)
    print(f"{'kernel':<{name_w}}  {'numba':>14}  {'numpy':>14}  {'speedup':>8}")
    for m in metrics:
        fast = rows["numba"][m]
        slow = rows["numpy"][m]
        print(f"{m:<{name_w}}  {fast:>14,.0f}  {slow:>14,.0f}  {fast / slow:>7.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
