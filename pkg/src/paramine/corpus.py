"""Document handling: sentence splitting, sequence extraction, noise filters.

A "sequence" is a window of adjacent sentences from one document, capped at a
character budget, which is the unit everything downstream (embedding, mining)
operates on. Lengths are counted in Unicode scalar values throughout.
"""

from __future__ import annotations

import json
import unicodedata
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Sequence as Seq, TextIO

DEFAULT_MAX_CHARS = 300
DEFAULT_PUNCT_MAX = 0.10

# Tokens that end with a period but do not end a sentence. Case-insensitive,
# matched against the final word before a candidate boundary.
DEFAULT_ABBREVIATIONS = frozenset(
    {
        "dr.", "mr.", "mrs.", "ms.", "prof.", "sr.", "jr.", "st.", "no.",
        "vs.", "etc.", "e.g.", "i.e.", "cf.", "fig.", "al.", "inc.", "ltd.",
        "co.", "dept.", "est.", "approx.", "jan.", "feb.", "mar.", "apr.",
        "jun.", "jul.", "aug.", "sep.", "sept.", "oct.", "nov.", "dec.",
    }
)

_TERMINALS = frozenset(".!?")
_CLOSERS = frozenset("\"'\u201d\u2019)\u00bb]")


@dataclass(frozen=True)
class Document:
    doc_id: str
    text: str

    def __post_init__(self) -> None:
        if not self.doc_id:
            raise ValueError("doc_id must be non-empty")


@dataclass(frozen=True)
class Sentence:
    doc_id: str
    index: int
    text: str


@dataclass(frozen=True)
class Sequence:
    seq_id: str
    doc_id: str
    sent_start: int
    sent_end: int
    text: str

    @property
    def char_len(self) -> int:
        return len(self.text)

    @property
    def sentence_count(self) -> int:
        return self.sent_end - self.sent_start + 1


def _collapse_ws(text: str) -> str:
    return " ".join(text.split())


def split_sentences(
    text: str,
    doc_id: str = "",
    abbreviations: frozenset[str] = DEFAULT_ABBREVIATIONS,
) -> list[Sentence]:
    """Split text into sentences at terminal punctuation.

    A boundary is placed after a run of sentence-final punctuation (. ! ?)
    plus any closing quotes/brackets that follow it, provided whitespace comes
    next and the word ending at the punctuation is not a known abbreviation.
    Sentence texts are whitespace-collapsed; empty sentences are dropped.
    """
    pieces: list[str] = []
    start = 0
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch in _TERMINALS:
            j = i
            while j + 1 < n and text[j + 1] in _TERMINALS:
                j += 1
            k = j
            while k + 1 < n and text[k + 1] in _CLOSERS:
                k += 1
            at_break = k + 1 >= n or text[k + 1].isspace()
            if at_break and not _ends_with_abbreviation(text, j, abbreviations):
                pieces.append(text[start : k + 1])
                start = k + 1
            i = k + 1
        else:
            i += 1
    if start < n:
        pieces.append(text[start:])

    sentences = []
    for piece in pieces:
        collapsed = _collapse_ws(piece)
        if collapsed:
            sentences.append(Sentence(doc_id=doc_id, index=len(sentences), text=collapsed))
    return sentences


def _ends_with_abbreviation(text: str, period_idx: int, abbreviations: frozenset[str]) -> bool:
    if text[period_idx] != ".":
        return False
    end = period_idx + 1
    begin = period_idx
    while begin > 0 and not text[begin - 1].isspace():
        begin -= 1
    return text[begin:end].lower() in abbreviations


def extract_sequences(
    doc: Document,
    max_chars: int = DEFAULT_MAX_CHARS,
    abbreviations: frozenset[str] = DEFAULT_ABBREVIATIONS,
) -> list[Sequence]:
    """Enumerate every window of adjacent sentences whose joined text fits.

    Windows are emitted with the start index ascending, then the end index.
    Sentences longer than `max_chars` on their own are unusable: no window
    starts at, ends at, or spans them.
    """
    if max_chars < 1:
        raise ValueError("max_chars must be >= 1")
    sentences = split_sentences(doc.text, doc_id=doc.doc_id, abbreviations=abbreviations)
    out: list[Sequence] = []
    n = len(sentences)
    for i in range(n):
        if len(sentences[i].text) > max_chars:
            continue
        total = len(sentences[i].text)
        j = i
        while True:
            out.append(
                Sequence(
                    seq_id=f"{doc.doc_id}:{i}-{j}",
                    doc_id=doc.doc_id,
                    sent_start=i,
                    sent_end=j,
                    text=" ".join(s.text for s in sentences[i : j + 1]),
                )
            )
            j += 1
            if j >= n:
                break
            total += 1 + len(sentences[j].text)
            if total > max_chars:
                break
    return out


def punctuation_ratio(text: str) -> float:
    """Punctuation characters over non-whitespace characters (0 when empty)."""
    punct = 0
    visible = 0
    for ch in text:
        if ch.isspace():
            continue
        visible += 1
        if unicodedata.category(ch).startswith("P"):
            punct += 1
    if visible == 0:
        return 0.0
    return punct / visible


def filter_sequences(
    seqs: Iterable[Sequence],
    score: Callable[[str], float],
    punct_max: float = DEFAULT_PUNCT_MAX,
    logprob_min: float = float("-inf"),
) -> list[Sequence]:
    """Keep sequences that are not punctuation-heavy and score as fluent.

    `score` maps text to a per-token log-probability (see paramine.lm); both
    predicates must hold. Order is preserved and the filter is idempotent.
    """
    kept = []
    for seq in seqs:
        if punctuation_ratio(seq.text) > punct_max:
            continue
        if score(seq.text) < logprob_min:
            continue
        kept.append(seq)
    return kept


# ---------------------------------------------------------------------------
# file formats
# ---------------------------------------------------------------------------

def read_documents(fp: TextIO) -> Iterator[Document]:
    """Read newline-delimited JSON documents with doc_id/text fields."""
    seen: set[str] = set()
    for lineno, line in enumerate(fp, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValueError(f"line {lineno}: invalid JSON: {exc}") from exc
        if "doc_id" not in obj or "text" not in obj:
            raise ValueError(f"line {lineno}: missing doc_id or text")
        doc_id = str(obj["doc_id"])
        if doc_id in seen:
            raise ValueError(f"line {lineno}: duplicate doc_id {doc_id!r}")
        seen.add(doc_id)
        yield Document(doc_id=doc_id, text=str(obj["text"]))


def _escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace("\t", "\\t").replace("\n", "\\n")


def _unescape(text: str) -> str:
    out = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "\\" and i + 1 < len(text):
            nxt = text[i + 1]
            if nxt == "t":
                out.append("\t")
                i += 2
                continue
            if nxt == "n":
                out.append("\n")
                i += 2
                continue
            if nxt == "\\":
                out.append("\\")
                i += 2
                continue
        out.append(ch)
        i += 1
    return "".join(out)


def write_sequences(seqs: Iterable[Sequence], fp: TextIO) -> int:
    count = 0
    for s in seqs:
        fp.write(
            f"{s.seq_id}\t{s.doc_id}\t{s.sent_start}\t{s.sent_end}\t{_escape(s.text)}\n"
        )
        count += 1
    return count


def read_sequences(fp: TextIO) -> list[Sequence]:
    out = []
    for lineno, line in enumerate(fp, start=1):
        line = line.rstrip("\n")
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 5:
            raise ValueError(f"line {lineno}: expected 5 columns, got {len(parts)}")
        seq_id, doc_id, start, end, text = parts
        out.append(
            Sequence(
                seq_id=seq_id,
                doc_id=doc_id,
                sent_start=int(start),
                sent_end=int(end),
                text=_unescape(text),
            )
        )
    return out
