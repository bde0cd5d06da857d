"""Control values for conditioned simplification.

Four ratios describe how a target rewrites its source: character length,
replace-only Levenshtein similarity, aggregated word frequency (a lexical
complexity proxy), and dependency-tree depth. Rendered as tokens such as
<NumChars_80%> they are prepended to training sources so a seq2seq model
learns to follow them, and chosen freely at inference time.
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, TextIO

import numpy as np

from . import corpus as corpus_mod
from . import kernels, textnorm

log = logging.getLogger(__name__)

TOKEN_NAMES = ("NumChars", "LevSim", "WordFreq", "DepTreeDepth")
TOKEN_RE = re.compile(r"^<(NumChars|LevSim|WordFreq|DepTreeDepth)_(\d+)%>$")
_LEADING_TOKENS_RE = re.compile(
    r"^(?:<(?:NumChars|LevSim|WordFreq|DepTreeDepth)_\d+%> )+"
)

TOKEN_BIN = 0.05
TOKEN_MIN = 0.2
TOKEN_MAX = 2.0

DEFAULT_STOPWORDS = frozenset(
    """a an the and or but if of to in on at for with from by as is are was
    were be been being am do does did have has had he she it they we you i
    his her its their our your this that these those not no so than then
    there here what which who whom will would can could shall should may
    might must""".split()
)

# Markers that open a subordinate clause; used by the built-in depth proxy.
DEFAULT_SUBORDINATORS = frozenset(
    """because although though while since if unless whereas when whenever
    after before until who whom whose which that""".split()
)

_CLAUSE_SPLIT = re.compile(r"[,;:]")
_NUMERIC = re.compile(r"^[\d.,%]+$")


@dataclass(frozen=True)
class ControlValues:
    num_chars: float
    lev_sim: float
    word_freq: float
    dep_tree_depth: float

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.num_chars, self.lev_sim, self.word_freq, self.dep_tree_depth)

    def tokens(self, bin_width: float = TOKEN_BIN) -> list[str]:
        return [
            format_token(name, value, bin_width)
            for name, value in zip(TOKEN_NAMES, self.as_tuple())
        ]

    def prefix(self, bin_width: float = TOKEN_BIN) -> str:
        return " ".join(self.tokens(bin_width))


class FrequencyTable:
    """word -> rank (1 = most frequent); unseen words rank below the table."""

    def __init__(self, ranks: dict[str, int], source: str = ""):
        self.ranks = ranks
        self.source = source

    def __len__(self) -> int:
        return len(self.ranks)

    def rank(self, word: str) -> int:
        return self.ranks.get(word, len(self.ranks) + 1)

    @classmethod
    def from_counts(cls, counts: dict[str, int], source: str = "") -> "FrequencyTable":
        ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        return cls({w: i + 1 for i, (w, _) in enumerate(ordered)}, source=source)

    @classmethod
    def from_texts(cls, texts: Iterable[str], source: str = "") -> "FrequencyTable":
        counts: dict[str, int] = {}
        for text in texts:
            for tok in textnorm.word_tokens(text):
                counts[tok] = counts.get(tok, 0) + 1
        return cls.from_counts(counts, source=source)

    def write(self, fp: TextIO) -> None:
        for word, rank in sorted(self.ranks.items(), key=lambda kv: kv[1]):
            fp.write(f"{word}\t{rank}\n")

    @classmethod
    def read(cls, fp: TextIO, source: str = "") -> "FrequencyTable":
        ranks: dict[str, int] = {}
        for lineno, line in enumerate(fp, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValueError(f"line {lineno}: expected word<TAB>rank")
            word, rank = parts
            r = int(rank)
            if r < 1:
                raise ValueError(f"line {lineno}: rank must be positive")
            if word in ranks:
                raise ValueError(f"line {lineno}: duplicate word {word!r}")
            ranks[word] = r
        return cls(ranks, source=source)


# ---------------------------------------------------------------------------
# the four controls
# ---------------------------------------------------------------------------

def char_ratio(source: str, target: str) -> float:
    if not source:
        raise ValueError("source must be non-empty")
    return len(target) / len(source)


def replace_only_levsim(source: str, target: str) -> float:
    """1 - replacements / max(len); insertions and deletions are free.

    The replacement count comes from a canonical minimum-cost edit script
    (see kernels.replace_count), so the similarity is symmetric.
    """
    if not source and not target:
        return 1.0
    reps = kernels.replace_count(source, target)
    return 1.0 - reps / max(len(source), len(target))


def word_freq_aggregate(
    text: str,
    table: FrequencyTable,
    stopwords: frozenset[str] = DEFAULT_STOPWORDS,
) -> float:
    """Third quartile of log word ranks over content words.

    Stop-words and numeric tokens are excluded; if nothing remains the
    aggregate falls back to all words. Unseen words rank just below the
    table.
    """
    toks = textnorm.word_tokens(text)
    content = [t for t in toks if t not in stopwords and not _NUMERIC.match(t)]
    if not content:
        content = toks
    if not content:
        return math.log(len(table) + 1)
    logs = [math.log(table.rank(t)) for t in content]
    return float(np.percentile(logs, 75))


def word_freq_ratio(
    source: str,
    target: str,
    table: FrequencyTable,
    stopwords: frozenset[str] = DEFAULT_STOPWORDS,
) -> float:
    src = word_freq_aggregate(source, table, stopwords)
    tgt = word_freq_aggregate(target, table, stopwords)
    if src < 1e-9:
        return 1.0 if tgt < 1e-9 else tgt / 1e-9
    return tgt / src


def proxy_tree_depth(
    text: str, subordinators: frozenset[str] = DEFAULT_SUBORDINATORS
) -> int:
    """Clause-nesting estimate: 1 + marker-bearing clause segments, maxed
    over sentences. Stands in for a real dependency parser."""
    sentences = corpus_mod.split_sentences(text)
    if not sentences:
        return 1
    best = 1
    for sent in sentences:
        depth = 1
        for segment in _CLAUSE_SPLIT.split(sent.text):
            words = set(textnorm.word_tokens(segment))
            if words & subordinators:
                depth += 1
        best = max(best, depth)
    return best


DepthParser = Callable[[str], int]


def dep_depth_ratio(
    source: str, target: str, parser: DepthParser = proxy_tree_depth
) -> float | None:
    """Target over source tree depth; None when the pair must be skipped."""
    if not target.strip() or not source.strip():
        return None
    try:
        src_depth = parser(source)
        tgt_depth = parser(target)
    except Exception as exc:  # parser is external code
        log.warning("depth parser failed (%s); skipping pair", exc)
        return None
    if src_depth <= 0 or tgt_depth <= 0:
        log.warning("depth parser returned a non-positive depth; skipping pair")
        return None
    return tgt_depth / src_depth


def compute_controls(
    source: str,
    target: str,
    table: FrequencyTable,
    parser: DepthParser = proxy_tree_depth,
) -> ControlValues | None:
    """All four controls for a pair, or None when the pair is unusable."""
    if not source.strip() or not target.strip():
        return None
    depth = dep_depth_ratio(source, target, parser)
    if depth is None:
        return None
    return ControlValues(
        num_chars=char_ratio(source, target),
        lev_sim=replace_only_levsim(source, target),
        word_freq=word_freq_ratio(source, target, table),
        dep_tree_depth=depth,
    )


# ---------------------------------------------------------------------------
# token rendering
# ---------------------------------------------------------------------------

def format_token(name: str, value: float, bin_width: float = TOKEN_BIN) -> str:
    """Clamp to [0.2, 2.0], round to the bin, render as integer percent."""
    if name not in TOKEN_NAMES:
        raise ValueError(f"unknown control token name {name!r}")
    clamped = min(max(value, TOKEN_MIN), TOKEN_MAX)
    bins = math.floor(clamped / bin_width + 0.5)  # round half up
    percent = int(round(bins * bin_width * 100))
    return f"<{name}_{percent}%>"


def strip_control_tokens(source: str) -> str:
    return _LEADING_TOKENS_RE.sub("", source)


def parse_control_prefix(source: str) -> tuple[dict[str, float], str]:
    """Leading control tokens as name -> ratio, plus the remaining text."""
    controls: dict[str, float] = {}
    rest = source
    while True:
        head, _, tail = rest.partition(" ")
        m = TOKEN_RE.match(head)
        if not m:
            break
        controls[m.group(1)] = int(m.group(2)) / 100.0
        rest = tail
    return controls, rest


def prepend_inference_tokens(
    source: str, controls: ControlValues, bin_width: float = TOKEN_BIN
) -> str:
    return f"{controls.prefix(bin_width)} {source}"


def preprocess_corpus(
    pairs: Iterable[tuple[str, str]],
    table: FrequencyTable,
    parser: DepthParser = proxy_tree_depth,
    bin_width: float = TOKEN_BIN,
) -> Iterator[tuple[str, str]]:
    """Yield (source-with-tokens, target) lines for a parallel corpus."""
    for source, target in pairs:
        controls = compute_controls(source, target, table, parser)
        if controls is None:
            continue
        yield prepend_inference_tokens(source, controls, bin_width), target
