"""Turn nearest-neighbor candidates into a filtered paraphrase corpus.

Each sequence queries the index; candidates survive a distance cap and a
margin criterion (distance relative to the candidate neighborhood), then
alignment filters: near-duplicates out (paraphrase mode), containment out,
same-document pairs out, evaluation sentences out. Simplification mode
swaps the near-duplicate constraint for simplicity heuristics.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence as Seq, TextIO

import numpy as np

from . import kernels
from .access import FrequencyTable, replace_only_levsim, word_freq_ratio
from .corpus import Sequence, _escape, _unescape
from .embed import EmbeddingStore
from .index import IvfIndex, SearchParams


@dataclass(frozen=True)
class MiningConfig:
    dist_max: float = 0.05
    margin_max: float = 0.6
    top_k: int = 8
    lev_min: float = 0.20
    margin_denominator: str = "mean"  # or "max"

    def __post_init__(self) -> None:
        if self.dist_max <= 0 or self.margin_max <= 0 or self.top_k < 1:
            raise ValueError("thresholds must be positive")
        if not 0.0 <= self.lev_min <= 1.0:
            raise ValueError("lev_min must be in [0, 1]")
        if self.margin_denominator not in ("mean", "max"):
            raise ValueError("margin_denominator must be 'mean' or 'max'")

    @classmethod
    def from_kv_file(cls, fp: TextIO) -> "MiningConfig":
        """Flat key=value file mirroring the config fields."""
        kwargs: dict = {}
        for lineno, line in enumerate(fp, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"line {lineno}: expected key=value")
            key, value = (part.strip() for part in line.split("=", 1))
            if key in ("dist_max", "margin_max", "lev_min"):
                kwargs[key] = float(value)
            elif key == "top_k":
                kwargs[key] = int(value)
            elif key == "margin_denominator":
                kwargs[key] = value
            else:
                raise ValueError(f"line {lineno}: unknown key {key!r}")
        return cls(**kwargs)


@dataclass(frozen=True)
class CandidateSet:
    query: Sequence
    candidates: tuple[tuple[Sequence, float], ...]  # sorted by distance


@dataclass(frozen=True)
class ParaphrasePair:
    query: Sequence
    candidate: Sequence
    distance: float
    margin: float


def margin_filter(cands: CandidateSet, cfg: MiningConfig) -> list[ParaphrasePair]:
    """Distance cap plus margin criterion over the candidate neighborhood."""
    if not cands.candidates:
        raise ValueError("candidate set is empty")
    dists = [d for _, d in cands.candidates]
    denom = max(dists) if cfg.margin_denominator == "max" else sum(dists) / len(dists)
    pairs = []
    for seq, dist in cands.candidates:
        margin = 0.0 if denom == 0 else dist / denom
        if dist < cfg.dist_max and margin < cfg.margin_max:
            pairs.append(
                ParaphrasePair(query=cands.query, candidate=seq, distance=dist, margin=margin)
            )
    return pairs


def levenshtein_ratio(a: str, b: str) -> float:
    """Case-insensitive character edit distance over the longer length."""
    a, b = a.casefold(), b.casefold()
    if not a and not b:
        return 0.0
    return kernels.levenshtein(a, b) / max(len(a), len(b))


def levenshtein_distinctness(pair: ParaphrasePair, lev_min: float) -> bool:
    """Keep pairs whose surfaces differ by at least the given ratio."""
    return levenshtein_ratio(pair.query.text, pair.candidate.text) >= lev_min


def structural_filters(pair: ParaphrasePair) -> bool:
    """Drop same-document pairs and pairs contained in one another."""
    if pair.query.doc_id == pair.candidate.doc_id:
        return False
    a = pair.query.text.casefold()
    b = pair.candidate.text.casefold()
    if a in b or b in a:
        return False
    return True


def _normalize_eval(text: str) -> str:
    return " ".join(text.split()).casefold()


def decontaminate(
    pairs: Iterable[ParaphrasePair], eval_sets: Seq[Iterable[str]]
) -> list[ParaphrasePair]:
    """Remove pairs whose either side appears in an evaluation set."""
    banned: set[str] = set()
    for eval_set in eval_sets:
        banned.update(_normalize_eval(t) for t in eval_set)
    if not banned:
        return list(pairs)
    return [
        p
        for p in pairs
        if _normalize_eval(p.query.text) not in banned
        and _normalize_eval(p.candidate.text) not in banned
    ]


def is_simplifying(pair: ParaphrasePair, table: FrequencyTable) -> bool:
    """Split, shorter, or lexically simpler: any one keeps the pair."""
    q, c = pair.query, pair.candidate
    if c.sentence_count > q.sentence_count:
        return True
    if c.char_len < q.char_len:
        return True
    return word_freq_ratio(q.text, c.text, table) < 1.0


def simplification_heuristics(
    pairs: Iterable[ParaphrasePair], table: FrequencyTable
) -> list[ParaphrasePair]:
    return [p for p in pairs if is_simplifying(p, table)]


def mine_pairs(
    sequences: Seq[Sequence],
    store: EmbeddingStore,
    index: IvfIndex,
    cfg: MiningConfig = MiningConfig(),
    nprobe: int = 16,
    mode: str = "paraphrase",
    freq_table: FrequencyTable | None = None,
    eval_sets: Seq[Iterable[str]] = (),
    threads: int = 1,
) -> list[ParaphrasePair]:
    """Query every sequence against the index and run the filter pipeline.

    Store rows must align with `sequences` by position. The query's own row
    is excluded from its candidate set, so the margin denominator reflects
    the neighborhood, not the trivial self-match. Queries are sharded over
    `threads` workers against the immutable index and merged back in row
    order, so the thread count never changes the output.
    """
    if mode not in ("paraphrase", "simplification"):
        raise ValueError(f"unknown mode {mode!r}")
    if len(sequences) != store.n:
        raise ValueError("sequence list and store are not aligned")
    if mode == "simplification" and freq_table is None:
        freq_table = FrequencyTable.from_texts(s.text for s in sequences)

    params = SearchParams(top_k=cfg.top_k + 1, nprobe=nprobe)
    vectors = store.vectors()
    banned = [list(s) for s in eval_sets]

    def mine_row(row: int) -> list[ParaphrasePair]:
        hits = index.search(vectors[row], params)
        candidates = tuple(
            (sequences[rid], dist) for rid, dist in hits if rid != row
        )[: cfg.top_k]
        if not candidates:
            return []
        cands = CandidateSet(query=sequences[row], candidates=candidates)
        pairs = margin_filter(cands, cfg)
        if mode == "paraphrase":
            pairs = [p for p in pairs if levenshtein_distinctness(p, cfg.lev_min)]
        pairs = [p for p in pairs if structural_filters(p)]
        pairs = decontaminate(pairs, banned)
        if mode == "simplification":
            assert freq_table is not None
            pairs = simplification_heuristics(pairs, freq_table)
        return pairs

    kept: list[ParaphrasePair] = []
    if threads <= 1:
        for row in range(store.n):
            kept.extend(mine_row(row))
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for pairs in pool.map(mine_row, range(store.n), chunksize=256):
                kept.extend(pairs)
    return kept


# ---------------------------------------------------------------------------
# corpus statistics
# ---------------------------------------------------------------------------

HIST_BIN = 0.05
HIST_RANGE = (0.0, 2.0)


def _histogram(values: Seq[float]) -> list[int]:
    edges = np.arange(HIST_RANGE[0], HIST_RANGE[1] + HIST_BIN / 2, HIST_BIN)
    clipped = np.clip(values, HIST_RANGE[0], HIST_RANGE[1] - 1e-9) if len(values) else []
    hist, _ = np.histogram(clipped, bins=edges)
    return [int(h) for h in hist]


def corpus_stats(
    pairs: Seq[ParaphrasePair], table: FrequencyTable | None = None
) -> dict:
    """Pair count, token means, and feature densities of a mined corpus."""
    if table is None:
        texts = [p.query.text for p in pairs] + [p.candidate.text for p in pairs]
        table = FrequencyTable.from_texts(texts)
    compression = []
    levsim = []
    freq_ratio = []
    q_tokens = []
    c_tokens = []
    for p in pairs:
        q_tokens.append(len(p.query.text.split()))
        c_tokens.append(len(p.candidate.text.split()))
        compression.append(len(p.candidate.text) / max(1, len(p.query.text)))
        levsim.append(replace_only_levsim(p.query.text, p.candidate.text))
        freq_ratio.append(word_freq_ratio(p.query.text, p.candidate.text, table))
    return {
        "pair_count": len(pairs),
        "avg_tokens_query": float(np.mean(q_tokens)) if pairs else 0.0,
        "avg_tokens_candidate": float(np.mean(c_tokens)) if pairs else 0.0,
        "histogram_bin": HIST_BIN,
        "histogram_range": list(HIST_RANGE),
        "density_compression_ratio": _histogram(compression),
        "density_replace_only_levsim": _histogram(levsim),
        "density_word_freq_ratio": _histogram(freq_ratio),
    }


# ---------------------------------------------------------------------------
# pair TSV format
# ---------------------------------------------------------------------------

def write_pairs(pairs: Iterable[ParaphrasePair], fp: TextIO) -> int:
    count = 0
    for p in pairs:
        fp.write(
            "\t".join(
                (
                    p.query.seq_id,
                    p.candidate.seq_id,
                    _escape(p.query.text),
                    _escape(p.candidate.text),
                    f"{p.distance:.6f}",
                    f"{p.margin:.6f}",
                )
            )
            + "\n"
        )
        count += 1
    return count


def read_pairs(fp: TextIO) -> list[ParaphrasePair]:
    out = []
    for lineno, line in enumerate(fp, start=1):
        line = line.rstrip("\n")
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 6:
            raise ValueError(f"line {lineno}: expected 6 columns, got {len(parts)}")
        qid, cid, qtext, ctext, dist, margin = parts
        query = Sequence(seq_id=qid, doc_id=qid.split(":")[0], sent_start=0, sent_end=0, text=_unescape(qtext))
        cand = Sequence(seq_id=cid, doc_id=cid.split(":")[0], sent_start=0, sent_end=0, text=_unescape(ctext))
        out.append(
            ParaphrasePair(
                query=query, candidate=cand, distance=float(dist), margin=float(margin)
            )
        )
    return out
