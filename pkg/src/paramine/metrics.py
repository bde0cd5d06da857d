"""Simplification evaluation: SARI, FKGL, BLEU, baselines, gold-reference protocol.

SARI partitions n-grams (orders 1-4) into add/keep/delete operations against
the source and reference-weighted multiset statistics, takes an F1 per
operation and order, and averages: over orders, then operations, then
samples. Degenerate 0/0 precision or recall counts as 1 only when the
reference side of that operation is empty too, else 0; exact matches thus
score 100 while doing nothing scores low.

FKGL is computed over pooled corpus counts; BLEU is standard corpus BLEU
with 4-gram modified precision and a closest-reference-length brevity
penalty. All three share the tokenizer in paramine.textnorm.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import corpus as corpus_mod
from . import textnorm

NGRAM_ORDER = 4
OPERATIONS = ("add", "keep", "delete")

_VOWELS = frozenset("aeiouy")


# ---------------------------------------------------------------------------
# SARI
# ---------------------------------------------------------------------------

def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _precision_recall(correct: float, sys_total: float, ref_total: float) -> tuple[float, float]:
    if sys_total > 0:
        precision = correct / sys_total
    else:
        precision = 1.0 if ref_total == 0 else 0.0
    if ref_total > 0:
        recall = correct / ref_total
    else:
        recall = 1.0 if sys_total == 0 else 0.0
    return precision, recall


def _f1(precision: float, recall: float) -> float:
    if precision == 0.0 and recall == 0.0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def _sample_sari(
    src_tokens: list[str], sys_tokens: list[str], refs_tokens: list[list[str]]
) -> dict[str, list[float]]:
    """F1 per operation and n-gram order for one sample."""
    num_refs = len(refs_tokens)
    f1s: dict[str, list[float]] = {op: [] for op in OPERATIONS}
    for n in range(1, NGRAM_ORDER + 1):
        orig = _ngrams(src_tokens, n)
        sys_c = _ngrams(sys_tokens, n)
        refs = Counter()
        for ref in refs_tokens:
            refs.update(_ngrams(ref, n))
        orig_rep = Counter({g: c * num_refs for g, c in orig.items()})
        sys_rep = Counter({g: c * num_refs for g, c in sys_c.items()})

        # addition: type-level n-grams the system introduced
        add_sys = set(sys_c) - set(orig)
        add_ref = set(refs) - set(orig)
        p, r = _precision_recall(
            len(add_sys & add_ref), len(add_sys), len(add_ref)
        )
        f1s["add"].append(_f1(p, r))

        # keep: reference-weighted multiset overlap with the source
        keep_sys = orig_rep & sys_rep
        keep_ref = orig_rep & refs
        keep_good = keep_sys & keep_ref
        p, r = _precision_recall(
            sum(keep_good.values()), sum(keep_sys.values()), sum(keep_ref.values())
        )
        f1s["keep"].append(_f1(p, r))

        # delete: reference-weighted multiset of dropped source n-grams
        del_sys = orig_rep - sys_rep
        del_ref = orig_rep - refs
        del_good = del_sys & del_ref
        p, r = _precision_recall(
            sum(del_good.values()), sum(del_sys.values()), sum(del_ref.values())
        )
        f1s["delete"].append(_f1(p, r))
    return f1s


@dataclass
class SariResult:
    score: float  # 0..100
    by_operation: dict[str, float] = field(default_factory=dict)  # mean F1 in [0,1]
    by_operation_order: dict[str, list[float]] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "score": self.score,
            "by_operation": dict(self.by_operation),
            "by_operation_order": {k: list(v) for k, v in self.by_operation_order.items()},
        }


def sari(
    sources: Sequence[str],
    predictions: Sequence[str],
    references: Sequence[Sequence[str]],
    lowercase: bool = True,
) -> SariResult:
    """Corpus SARI: mean over samples of per-sample operation-average F1."""
    if not (len(sources) == len(predictions) == len(references)):
        raise ValueError("sources, predictions and references must be aligned")
    if len(sources) == 0:
        raise ValueError("empty evaluation corpus")
    for i, refs in enumerate(references):
        if len(refs) == 0:
            raise ValueError(f"sample {i} has no references")

    op_order_sums = {op: np.zeros(NGRAM_ORDER) for op in OPERATIONS}
    total = 0.0
    for src, sys_out, refs in zip(sources, predictions, references):
        f1s = _sample_sari(
            textnorm.tokens(src, lowercase),
            textnorm.tokens(sys_out, lowercase),
            [textnorm.tokens(r, lowercase) for r in refs],
        )
        sample_ops = []
        for op in OPERATIONS:
            op_order_sums[op] += np.asarray(f1s[op])
            sample_ops.append(sum(f1s[op]) / NGRAM_ORDER)
        total += sum(sample_ops) / len(OPERATIONS)

    n = len(sources)
    by_op_order = {op: list(op_order_sums[op] / n) for op in OPERATIONS}
    by_op = {op: float(np.mean(by_op_order[op])) for op in OPERATIONS}
    return SariResult(
        score=100.0 * total / n,
        by_operation=by_op,
        by_operation_order=by_op_order,
    )


# ---------------------------------------------------------------------------
# FKGL
# ---------------------------------------------------------------------------

def count_syllables(word: str) -> int:
    """Maximal vowel groups (aeiouy), minimum 1, silent final 'e' dropped."""
    letters = [c for c in word.lower() if c.isalpha()]
    groups = 0
    in_group = False
    for c in letters:
        if c in _VOWELS:
            if not in_group:
                groups += 1
            in_group = True
        else:
            in_group = False
    if groups > 1 and letters and letters[-1] == "e":
        groups -= 1
    return max(groups, 1)


def fkgl(texts: Sequence[str]) -> float:
    """Flesch-Kincaid grade level over pooled corpus counts."""
    total_words = 0
    total_sentences = 0
    total_syllables = 0
    for line in texts:
        words = textnorm.word_tokens(line)
        if not words:
            continue
        total_words += len(words)
        total_syllables += sum(count_syllables(w) for w in words)
        total_sentences += max(1, len(corpus_mod.split_sentences(line)))
    if total_words == 0 or total_sentences == 0:
        raise ValueError("cannot compute FKGL on an empty corpus")
    return (
        0.39 * (total_words / total_sentences)
        + 11.8 * (total_syllables / total_words)
        - 15.59
    )


# ---------------------------------------------------------------------------
# BLEU
# ---------------------------------------------------------------------------

def bleu(
    predictions: Sequence[str],
    references: Sequence[Sequence[str]],
    lowercase: bool = True,
) -> float:
    """Corpus BLEU-4 with closest-reference-length brevity penalty.

    Orders with zero matches fall back to exponential smoothing; orders the
    corpus is too short to populate are dropped from the geometric mean.
    """
    if len(predictions) == 0:
        raise ValueError("empty prediction corpus")
    if len(predictions) != len(references):
        raise ValueError("predictions and references must be aligned")
    correct = [0] * NGRAM_ORDER
    total = [0] * NGRAM_ORDER
    sys_len = 0
    ref_len = 0
    for pred, refs in zip(predictions, references):
        if len(refs) == 0:
            raise ValueError("every sample needs at least one reference")
        pred_toks = textnorm.tokens(pred, lowercase)
        refs_toks = [textnorm.tokens(r, lowercase) for r in refs]
        sys_len += len(pred_toks)
        ref_len += min(
            (len(r) for r in refs_toks),
            key=lambda L: (abs(L - len(pred_toks)), L),
        )
        for n in range(1, NGRAM_ORDER + 1):
            pred_ngrams = _ngrams(pred_toks, n)
            max_ref: Counter = Counter()
            for r_toks in refs_toks:
                for g, c in _ngrams(r_toks, n).items():
                    if c > max_ref[g]:
                        max_ref[g] = c
            clipped = pred_ngrams & max_ref
            correct[n - 1] += sum(clipped.values())
            total[n - 1] += sum(pred_ngrams.values())

    log_sum = 0.0
    orders = 0
    smooth = 1.0
    for n in range(NGRAM_ORDER):
        if total[n] == 0:
            continue
        orders += 1
        if correct[n] == 0:
            smooth *= 2.0
            p_n = 1.0 / (smooth * total[n])
        else:
            p_n = correct[n] / total[n]
        log_sum += math.log(p_n)
    if orders == 0 or sys_len == 0:
        return 0.0
    geo = math.exp(log_sum / orders)
    bp = 1.0 if sys_len >= ref_len else math.exp(1.0 - ref_len / sys_len)
    return 100.0 * bp * geo


# ---------------------------------------------------------------------------
# baselines and the gold-reference protocol
# ---------------------------------------------------------------------------

def identity_baseline(source: str) -> str:
    return source


def truncate_baseline(source: str, keep_ratio: float = 0.8) -> str:
    """First floor(ratio * n) whitespace words, at least one."""
    words = source.split()
    if not words:
        return source
    keep = max(1, int(math.floor(keep_ratio * len(words))))
    return " ".join(words[:keep])


@dataclass
class EvalReport:
    sari: SariResult
    fkgl: float
    bleu: float
    sample_count: int

    def as_dict(self) -> dict:
        return {
            "sari": self.sari.score,
            "sari_components": self.sari.as_dict(),
            "fkgl": self.fkgl,
            "bleu": self.bleu,
            "sample_count": self.sample_count,
        }


def evaluate(
    sources: Sequence[str],
    predictions: Sequence[str],
    references: Sequence[Sequence[str]],
) -> EvalReport:
    return EvalReport(
        sari=sari(sources, predictions, references),
        fkgl=fkgl(predictions),
        bleu=bleu(predictions, references),
        sample_count=len(sources),
    )


def gold_reference_loo(
    sources: Sequence[str],
    references: Sequence[Sequence[str]],
    seed: int = 0,
) -> EvalReport:
    """Score each reference column against the rest plus a random duplicate.

    The duplicate keeps the reference count unchanged so scores stay
    comparable with full-reference system evaluation. Requires a uniform
    reference count per sample.
    """
    widths = {len(r) for r in references}
    if len(widths) != 1:
        raise ValueError("gold LOO needs the same reference count per sample")
    width = widths.pop()
    if width < 2:
        raise ValueError("gold LOO needs at least two references")
    rng = np.random.default_rng(seed)
    sari_scores = []
    fkgl_scores = []
    bleu_scores = []
    count = 0
    for slot in range(width):
        preds = [refs[slot] for refs in references]
        loo_refs = []
        for refs in references:
            rest = list(refs[:slot]) + list(refs[slot + 1 :])
            dup = rest[int(rng.integers(len(rest)))]
            loo_refs.append(rest + [dup])
        sari_scores.append(sari(sources, preds, loo_refs).score)
        fkgl_scores.append(fkgl(preds))
        bleu_scores.append(bleu(preds, loo_refs))
        count = len(preds)
    mean_sari = float(np.mean(sari_scores))
    return EvalReport(
        sari=SariResult(score=mean_sari),
        fkgl=float(np.mean(fkgl_scores)),
        bleu=float(np.mean(bleu_scores)),
        sample_count=count,
    )
