"""Shared fixtures: acceptance reporting, eval-data discovery, test embedder."""

from __future__ import annotations

import hashlib
import os
from pathlib import Path

import numpy as np
import pytest

_ACCEPTANCE_LINES: list[tuple[str, str, str]] = []


def record_acceptance(criterion: str, status: str, detail: str = "") -> None:
    _ACCEPTANCE_LINES.append((criterion, status, detail))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, status, detail in _ACCEPTANCE_LINES:
        suffix = f" ({detail})" if detail else ""
        terminalreporter.write_line(f"{status:4s}  {criterion}{suffix}")


def repo_root() -> Path:
    return Path(__file__).resolve().parent.parent


def eval_data_dir() -> Path | None:
    """Directory holding asset/ and turkcorpus/ test files, if present.

    Populated by scripts/fetch_eval_data.py (needs network); tests that pin
    published corpus scores skip when it is absent.
    """
    env = os.environ.get("PARAMINE_DATA_DIR")
    candidates = [Path(env)] if env else []
    candidates.append(repo_root() / "data" / "eval")
    for cand in candidates:
        if cand and (cand / "asset" / "asset.test.orig").exists():
            return cand
    return None


def load_asset_test(data_dir: Path) -> tuple[list[str], list[list[str]]]:
    base = data_dir / "asset"
    sources = (base / "asset.test.orig").read_text(encoding="utf-8").splitlines()
    refs_cols = [
        (base / f"asset.test.simp.{i}").read_text(encoding="utf-8").splitlines()
        for i in range(10)
    ]
    refs = [[col[i] for col in refs_cols] for i in range(len(sources))]
    return sources, refs


def load_turk_test(data_dir: Path) -> tuple[list[str], list[list[str]]]:
    base = data_dir / "turkcorpus"
    sources = (base / "turk.test.orig").read_text(encoding="utf-8").splitlines()
    refs_cols = [
        (base / f"turk.test.simp.{i}").read_text(encoding="utf-8").splitlines()
        for i in range(8)
    ]
    refs = [[col[i] for col in refs_cols] for i in range(len(sources))]
    return sources, refs


def hash_embed(text: str, dim: int = 32) -> np.ndarray:
    """Deterministic bag-of-character-trigram embedding for pipeline tests."""
    vec = np.zeros(dim, dtype=np.float64)
    padded = f"  {text.lower()}  "
    for i in range(len(padded) - 2):
        gram = padded[i : i + 3]
        digest = hashlib.blake2b(gram.encode("utf-8"), digest_size=8).digest()
        bucket = int.from_bytes(digest[:4], "little") % dim
        sign = 1.0 if digest[4] % 2 == 0 else -1.0
        vec[bucket] += sign
    norm = np.linalg.norm(vec)
    return (vec / norm if norm > 0 else vec).astype(np.float32)


def hash_embed_batch(texts: list[str], dim: int = 32) -> np.ndarray:
    return np.stack([hash_embed(t, dim) for t in texts])


@pytest.fixture
def tmp_text(tmp_path):
    def write(name: str, lines: list[str]) -> str:
        path = tmp_path / name
        path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
        return str(path)

    return write
