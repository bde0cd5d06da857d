"""Kneser-Ney n-gram language model used to filter noisy sequences.

Interpolated Kneser-Ney with a single discount per order, estimated from
counts-of-counts (D = n1 / (n1 + 2*n2)). Lower orders use continuation
counts, except for n-grams starting with the sentence marker, which keep raw
counts (nothing can precede <s>). The trained model is materialized as
ARPA-style probability/backoff tables, so in-memory scoring and the ARPA file
format agree by construction.

Logs are base 10 throughout, matching the ARPA convention.
"""

from __future__ import annotations

import logging
import math
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence, TextIO

log = logging.getLogger(__name__)

BOS = "<s>"
EOS = "</s>"
UNK = "<unk>"

_DUMMY_BOS_LOGPROB = -99.0


def lm_tokenize(text: str) -> list[str]:
    """Lowercase, split punctuation off words, whitespace-split."""
    out: list[str] = []
    for ch in text.lower():
        if unicodedata.category(ch).startswith("P"):
            out.append(f" {ch} ")
        else:
            out.append(ch)
    return "".join(out).split()


@dataclass
class NgramCounts:
    """Raw sliding-window counts for all orders 1..order, with markers."""

    order: int
    counts: dict[int, Counter] = field(default_factory=dict)

    def is_empty(self) -> bool:
        return not self.counts.get(1)


def count_ngrams(corpus: Iterable[Sequence[str]], order: int) -> NgramCounts:
    """Count 1..order-grams over sentences padded with <s> and </s>."""
    if order < 1:
        raise ValueError("order must be >= 1")
    counts: dict[int, Counter] = {k: Counter() for k in range(1, order + 1)}
    for tokens in corpus:
        padded = [BOS, *tokens, EOS]
        n = len(padded)
        for k in range(1, order + 1):
            bucket = counts[k]
            for i in range(n - k + 1):
                bucket[tuple(padded[i : i + k])] += 1
    return NgramCounts(order=order, counts=counts)


@dataclass(frozen=True)
class KneserNeyModel:
    order: int
    vocab: frozenset[str]  # predicted tokens: words plus </s> and <unk>
    discounts: dict[int, float]
    logprobs: dict[tuple, float]  # log10 P(last | rest), ARPA semantics
    backoffs: dict[tuple, float]  # log10 backoff weight per context gram

    def logprob(self, word: str, context: tuple[str, ...]) -> float:
        """log10 P(word | context) under standard backoff lookup."""
        if word not in self.vocab:
            word = UNK
        mapped = tuple(
            w if (w in self.vocab or w == BOS) else UNK for w in context
        )
        if self.order > 1:
            mapped = mapped[-(self.order - 1) :]
        else:
            mapped = ()
        acc = 0.0
        while True:
            gram = mapped + (word,)
            hit = self.logprobs.get(gram)
            if hit is not None:
                return acc + hit
            if not mapped:
                return acc + self.logprobs[(word,)]
            acc += self.backoffs.get(mapped, 0.0)
            mapped = mapped[1:]

    def conditional(self, word: str, context: tuple[str, ...] = ()) -> float:
        return 10.0 ** self.logprob(word, context)

    def score_tokens(self, tokens: Sequence[str]) -> float:
        """Mean log10 probability per scored token (includes </s>)."""
        history: list[str] = [BOS]
        total = 0.0
        for tok in [*tokens, EOS]:
            total += self.logprob(tok, tuple(history))
            history.append(tok if tok in self.vocab else UNK)
        return total / (len(tokens) + 1)

    def score(self, text: str) -> float:
        return self.score_tokens(lm_tokenize(text))


def _estimate_discount(count_values: Iterable[int]) -> float:
    n1 = 0
    n2 = 0
    for v in count_values:
        if v == 1:
            n1 += 1
        elif v == 2:
            n2 += 1
    denom = n1 + 2 * n2
    if denom == 0:
        log.warning("degenerate counts-of-counts; falling back to discount 0.5")
        return 0.5
    d = n1 / denom
    return min(max(d, 1e-4), 1.0 - 1e-4)


def train_kn(counts: NgramCounts) -> KneserNeyModel:
    """Estimate an interpolated Kneser-Ney model from raw counts."""
    if counts.is_empty():
        raise ValueError("cannot train on empty counts")
    order = counts.order

    # Effective counts per order: raw at the top, continuation counts below.
    # Grams starting with <s> keep raw counts; the bare <s> unigram is
    # excluded so the predicted unigram distribution carries all the mass.
    effective: dict[int, dict[tuple, int]] = {
        order: {
            g: c
            for g, c in counts.counts[order].items()
            if not (order == 1 and g == (BOS,))
        }
    }
    for k in range(1, order):
        cont: Counter = Counter()
        for gram in counts.counts[k + 1]:
            cont[gram[1:]] += 1
        eff: dict[tuple, int] = {}
        for gram, raw in counts.counts[k].items():
            if k == 1 and gram == (BOS,):
                continue
            c = raw if gram[0] == BOS else cont.get(gram, 0)
            if c > 0:
                eff[gram] = c
        effective[k] = eff

    discounts = {
        k: _estimate_discount(effective[k].values()) for k in range(1, order + 1)
    }

    vocab = frozenset(w for (w,) in counts.counts[1] if w != BOS) | {EOS, UNK}
    uniform = 1.0 / len(vocab)

    # Per-context totals, continuation-type counts, and member lists.
    totals: dict[int, dict[tuple, int]] = {}
    types: dict[int, dict[tuple, int]] = {}
    members: dict[int, dict[tuple, list[tuple]]] = {}
    for k in range(1, order + 1):
        tot: dict[tuple, int] = {}
        typ: dict[tuple, int] = {}
        mem: dict[tuple, list[tuple]] = {}
        for gram, c in effective[k].items():
            ctx = gram[:-1]
            tot[ctx] = tot.get(ctx, 0) + c
            typ[ctx] = typ.get(ctx, 0) + 1
            mem.setdefault(ctx, []).append(gram)
        totals[k] = tot
        types[k] = typ
        members[k] = mem

    def interp_prob(gram: tuple) -> float:
        """Interpolated P(last | rest); valid for unseen grams too."""
        k = len(gram)
        if k == 0:
            return uniform
        ctx = gram[:-1]
        tot = totals[k].get(ctx, 0)
        if tot == 0:
            return interp_prob(gram[1:]) if k > 1 else uniform
        d = discounts[k]
        c = effective[k].get(gram, 0)
        lam = d * types[k][ctx] / tot
        base = max(c - d, 0.0) / tot
        return base + lam * (interp_prob(gram[1:]) if k > 1 else uniform)

    logprobs: dict[tuple, float] = {(BOS,): _DUMMY_BOS_LOGPROB}
    for k in range(1, order + 1):
        for gram in effective[k]:
            logprobs[gram] = math.log10(interp_prob(gram))
    for special in ((UNK,), (EOS,)):
        if special not in logprobs:
            logprobs[special] = math.log10(interp_prob(special))

    # Backoff weights for every gram that serves as a context one order up:
    # bow(c) spreads the discounted mass over words unseen after c.
    backoffs: dict[tuple, float] = {}
    for k in range(1, order):
        for ctx, grams in members[k + 1].items():
            num = 1.0
            den = 1.0
            for gram in grams:
                num -= interp_prob(gram)
                den -= interp_prob(gram[1:])
            if den <= 0.0:
                backoffs[ctx] = 0.0
            else:
                backoffs[ctx] = math.log10(max(num, 1e-12) / den)

    return KneserNeyModel(
        order=order,
        vocab=vocab,
        discounts=discounts,
        logprobs=logprobs,
        backoffs=backoffs,
    )


# ---------------------------------------------------------------------------
# ARPA persistence
# ---------------------------------------------------------------------------

class ArpaParseError(ValueError):
    pass


def write_arpa(model: KneserNeyModel, fp: TextIO) -> None:
    by_order: dict[int, list[tuple]] = {k: [] for k in range(1, model.order + 1)}
    for gram in model.logprobs:
        by_order[len(gram)].append(gram)
    for grams in by_order.values():
        grams.sort()

    fp.write("\\data\\\n")
    for k in range(1, model.order + 1):
        fp.write(f"ngram {k}={len(by_order[k])}\n")
    fp.write("\n")
    for k in range(1, model.order + 1):
        fp.write(f"\\{k}-grams:\n")
        for gram in by_order[k]:
            prob = model.logprobs[gram]
            line = f"{prob:.6f}\t{' '.join(gram)}"
            if k < model.order and gram in model.backoffs:
                line += f"\t{model.backoffs[gram]:.6f}"
            fp.write(line + "\n")
        fp.write("\n")
    fp.write("\\end\\\n")


def read_arpa(fp: TextIO) -> KneserNeyModel:
    expected: dict[int, int] = {}
    logprobs: dict[tuple, float] = {}
    backoffs: dict[tuple, float] = {}
    section = 0
    state = "preamble"
    for lineno, raw in enumerate(fp, start=1):
        line = raw.strip()
        if not line:
            continue
        if line == "\\data\\":
            state = "data"
            continue
        if line == "\\end\\":
            state = "end"
            continue
        if line.startswith("\\") and line.endswith("-grams:"):
            try:
                section = int(line[1:].split("-")[0])
            except ValueError as exc:
                raise ArpaParseError(f"line {lineno}: bad section header {line!r}") from exc
            state = "grams"
            continue
        if state == "data":
            if not line.startswith("ngram "):
                raise ArpaParseError(f"line {lineno}: expected ngram count, got {line!r}")
            try:
                k, n = line[len("ngram ") :].split("=")
                expected[int(k)] = int(n)
            except ValueError as exc:
                raise ArpaParseError(f"line {lineno}: bad ngram count {line!r}") from exc
            continue
        if state == "grams":
            parts = line.split("\t") if "\t" in line else line.split()
            if "\t" in line:
                if len(parts) < 2 or len(parts) > 3:
                    raise ArpaParseError(f"line {lineno}: malformed entry {line!r}")
                prob_s, words = parts[0], parts[1].split(" ")
                bow_s = parts[2] if len(parts) == 3 else None
            else:
                if len(parts) < section + 1 or len(parts) > section + 2:
                    raise ArpaParseError(f"line {lineno}: malformed entry {line!r}")
                prob_s = parts[0]
                words = parts[1 : 1 + section]
                bow_s = parts[1 + section] if len(parts) == section + 2 else None
            if len(words) != section:
                raise ArpaParseError(
                    f"line {lineno}: expected {section}-gram, got {len(words)} tokens"
                )
            try:
                logprobs[tuple(words)] = float(prob_s)
                if bow_s is not None:
                    backoffs[tuple(words)] = float(bow_s)
            except ValueError as exc:
                raise ArpaParseError(f"line {lineno}: bad number in {line!r}") from exc
            continue
        raise ArpaParseError(f"line {lineno}: unexpected content {line!r}")
    if state != "end":
        raise ArpaParseError("missing \\end\\ marker")
    if not expected:
        raise ArpaParseError("missing \\data\\ section")
    order = max(expected)
    for k, n in expected.items():
        actual = sum(1 for g in logprobs if len(g) == k)
        if actual != n:
            raise ArpaParseError(f"{k}-gram count mismatch: header {n}, body {actual}")
    vocab = frozenset(g[0] for g in logprobs if len(g) == 1 and g[0] != BOS)
    return KneserNeyModel(
        order=order,
        vocab=vocab | {EOS, UNK},
        discounts={},
        logprobs=logprobs,
        backoffs=backoffs,
    )


def train_from_lines(lines: Iterable[str], order: int = 3) -> KneserNeyModel:
    return train_kn(count_ngrams((lm_tokenize(line) for line in lines), order))


def calibrate_logprob_threshold(
    model: KneserNeyModel, sample_texts: Sequence[str], percentile: float = 10.0
) -> float:
    """Threshold below which sequences are considered noisy.

    Set from a held-out clean sample: the given percentile of its per-token
    scores, so roughly that share of clean text would be (wrongly) rejected.
    """
    if not sample_texts:
        raise ValueError("need a non-empty calibration sample")
    scores = sorted(model.score(t) for t in sample_texts)
    rank = (percentile / 100.0) * (len(scores) - 1)
    lo = int(math.floor(rank))
    hi = int(math.ceil(rank))
    if lo == hi:
        return scores[lo]
    frac = rank - lo
    return scores[lo] * (1 - frac) + scores[hi] * frac
