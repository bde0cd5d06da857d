#!/usr/bin/env python3
"""Fetch the public ASSET and TurkCorpus test sets used by the acceptance suite.

Needs ordinary internet access (raw.githubusercontent.com). Files land under
data/eval/ with the names the tests expect:

    data/eval/asset/asset.test.orig
    data/eval/asset/asset.test.simp.0 .. .9
    data/eval/turkcorpus/turk.test.orig
    data/eval/turkcorpus/turk.test.simp.0 .. .7

Each file must have exactly 359 lines (the shared simplification test split).
Run with --check to validate an existing tree without downloading.
"""

from __future__ import annotations

import argparse
import sys
import urllib.request
from pathlib import Path

EXPECTED_LINES = 359

ASSET_BASES = [
    "https://raw.githubusercontent.com/facebookresearch/asset/main/dataset",
    "https://raw.githubusercontent.com/facebookresearch/asset/master/dataset",
]
TURK_BASES = [
    # detokenized variant as shipped with the EASSE evaluation suite
    "https://raw.githubusercontent.com/feralvam/easse/master/easse/resources/data/test_sets/turkcorpus",
    "https://raw.githubusercontent.com/feralvam/easse/main/easse/resources/data/test_sets/turkcorpus",
]
TURK_NAMES = {
    "turk.test.orig": ["test.8turkers.tok.norm", "detokenized/test.8turkers.tok.norm"],
    **{
        f"turk.test.simp.{i}": [
            f"test.8turkers.tok.turk.{i}",
            f"detokenized/test.8turkers.tok.turk.{i}",
        ]
        for i in range(8)
    },
}


def fetch(url: str) -> str | None:
    try:
        with urllib.request.urlopen(url, timeout=30) as resp:
            return resp.read().decode("utf-8")
    except Exception as exc:  # noqa: BLE001 - report and try the next mirror
        print(f"  {url}: {exc}", file=sys.stderr)
        return None


def fetch_first(urls: list[str]) -> str:
    for url in urls:
        text = fetch(url)
        if text is not None:
            return text
    raise RuntimeError(f"could not fetch any of: {urls}")


def write_checked(path: Path, text: str) -> None:
    lines = text.splitlines()
    if len(lines) != EXPECTED_LINES:
        raise RuntimeError(f"{path.name}: got {len(lines)} lines, expected {EXPECTED_LINES}")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {path} ({len(lines)} lines)")


def download(out_dir: Path) -> None:
    asset_dir = out_dir / "asset"
    for name in ["asset.test.orig"] + [f"asset.test.simp.{i}" for i in range(10)]:
        urls = [f"{base}/{name}" for base in ASSET_BASES]
        write_checked(asset_dir / name, fetch_first(urls))

    turk_dir = out_dir / "turkcorpus"
    for target, candidates in TURK_NAMES.items():
        urls = [f"{base}/{cand}" for base in TURK_BASES for cand in candidates]
        write_checked(turk_dir / target, fetch_first(urls))


def check(out_dir: Path) -> bool:
    ok = True
    names = [("asset", "asset.test.orig")]
    names += [("asset", f"asset.test.simp.{i}") for i in range(10)]
    names += [("turkcorpus", "turk.test.orig")]
    names += [("turkcorpus", f"turk.test.simp.{i}") for i in range(8)]
    for sub, name in names:
        path = out_dir / sub / name
        if not path.exists():
            print(f"MISSING {path}")
            ok = False
            continue
        n = len(path.read_text(encoding="utf-8").splitlines())
        status = "ok" if n == EXPECTED_LINES else f"BAD LINE COUNT {n}"
        if n != EXPECTED_LINES:
            ok = False
        print(f"{status:20s} {path}")
    return ok


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "--out",
        default=str(Path(__file__).resolve().parent.parent / "data" / "eval"),
        help="target directory (default: <repo>/data/eval)",
    )
    parser.add_argument("--check", action="store_true", help="validate without downloading")
    args = parser.parse_args()
    out_dir = Path(args.out)
    if args.check:
        return 0 if check(out_dir) else 1
    download(out_dir)
    print("done; run the acceptance suite to verify the pinned scores")
    return 0


if __name__ == "__main__":
    sys.exit(main())
