"""Select inference-time control values by zero-order search over SARI.

A (1+1) evolution strategy mutates the four control ratios inside their
box, accepting any child at least as good as the parent and adapting the
step size by the 1/5th success rule. The simplifier under test sits behind
a line-based JSON protocol (one process request/response per sentence, out
of order allowed), so any external model can be tuned; a small rule-based
simplifier ships in-process so the whole path runs without one.
"""

from __future__ import annotations

import json
import logging
import math
import subprocess
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import metrics
from .access import (
    TOKEN_NAMES,
    ControlValues,
    FrequencyTable,
    parse_control_prefix,
    strip_control_tokens,
)

log = logging.getLogger(__name__)

SIGMA_GROW = 1.5
SIGMA_SHRINK = 0.84
SIGMA_MIN = 1e-3
INITIAL_SIGMA_FRACTION = 0.3


@dataclass(frozen=True)
class SearchSpace:
    lower: float = 0.2
    upper: float = 1.5
    dimensions: int = 4

    def __post_init__(self) -> None:
        if not self.lower < self.upper:
            raise ValueError("lower bound must be below upper bound")

    @property
    def range(self) -> float:
        return self.upper - self.lower

    def midpoint(self) -> np.ndarray:
        return np.full(self.dimensions, (self.lower + self.upper) / 2.0)

    def clamp(self, point: np.ndarray) -> np.ndarray:
        return np.clip(point, self.lower, self.upper)


@dataclass
class OnePlusOneResult:
    best_point: np.ndarray
    best_value: float
    evaluations: int
    accepted_values: list[float] = field(default_factory=list)


def one_plus_one(
    objective: Callable[[np.ndarray], float],
    space: SearchSpace = SearchSpace(),
    budget: int = 64,
    seed: int = 0,
) -> OnePlusOneResult:
    """(1+1)-ES maximization with exactly `budget` objective evaluations."""
    if budget < 1:
        raise ValueError("budget must be >= 1")
    rng = np.random.default_rng(seed)

    def safe_eval(point: np.ndarray) -> float:
        value = float(objective(point))
        return float("-inf") if math.isnan(value) else value

    parent = space.midpoint()
    parent_value = safe_eval(parent)
    evaluations = 1
    best_point = parent.copy()
    best_value = parent_value
    accepted = [parent_value]

    sigma = INITIAL_SIGMA_FRACTION * space.range
    while evaluations < budget:
        child = space.clamp(parent + sigma * rng.standard_normal(space.dimensions))
        child_value = safe_eval(child)
        evaluations += 1
        if child_value >= parent_value:
            parent, parent_value = child, child_value
            accepted.append(child_value)
            sigma *= SIGMA_GROW
        else:
            sigma *= SIGMA_SHRINK
        sigma = min(max(sigma, SIGMA_MIN), space.range)
        if child_value > best_value:
            best_point, best_value = child.copy(), child_value
    if parent_value >= best_value:
        best_point, best_value = parent.copy(), parent_value
    return OnePlusOneResult(
        best_point=best_point,
        best_value=best_value,
        evaluations=evaluations,
        accepted_values=accepted,
    )


def controls_from_point(point: np.ndarray) -> ControlValues:
    return ControlValues(
        num_chars=float(point[0]),
        lev_sim=float(point[1]),
        word_freq=float(point[2]),
        dep_tree_depth=float(point[3]),
    )


# ---------------------------------------------------------------------------
# model clients
# ---------------------------------------------------------------------------

class ModelClientError(RuntimeError):
    pass


class SubprocessModelClient:
    """Drives a child process over newline-delimited JSON on its stdio.

    Requests are {"id": str, "source": str}; the child must answer every id
    exactly once with {"id": str, "simplification": str}, in any order.
    """

    def __init__(self, command: Sequence[str]):
        self.command = list(command)

    def simplify_batch(self, sources: Sequence[str]) -> list[str]:
        requests = [
            {"id": str(i), "source": source} for i, source in enumerate(sources)
        ]
        payload = "".join(json.dumps(r) + "\n" for r in requests)
        proc = subprocess.Popen(
            self.command,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            text=True,
        )
        out, err = proc.communicate(payload)
        transcript: list[str] = []
        answers: dict[str, str] = {}
        for line in out.splitlines():
            line = line.strip()
            if not line:
                continue
            transcript.append(line)
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ModelClientError(
                    f"model emitted invalid JSON: {line!r}\nstderr: {err}"
                ) from exc
            if "error" in obj:
                raise ModelClientError(
                    f"model error for id {obj.get('id')!r}: {obj['error']}"
                )
            rid = obj.get("id")
            if rid is None or "simplification" not in obj:
                raise ModelClientError(f"malformed response: {line!r}")
            if rid in answers:
                raise ModelClientError(f"duplicate response for id {rid!r}")
            answers[rid] = obj["simplification"]
        missing = [r["id"] for r in requests if r["id"] not in answers]
        if missing:
            raise ModelClientError(
                "model closed its output before answering ids "
                f"{missing[:5]}{'...' if len(missing) > 5 else ''}; transcript:\n"
                + "\n".join(transcript[-10:])
            )
        return [answers[r["id"]] for r in requests]


class InProcessModelClient:
    """Adapter giving a plain callable the model-client interface."""

    def __init__(self, fn: Callable[[str], str]):
        self.fn = fn

    def simplify_batch(self, sources: Sequence[str]) -> list[str]:
        return [self.fn(source) for source in sources]


# ---------------------------------------------------------------------------
# built-in toy simplifier
# ---------------------------------------------------------------------------

class ToySimplifier:
    """Rule-based stand-in model that honors NumChars and WordFreq tokens.

    Truncates to the requested character ratio on word boundaries and swaps
    words ranked rarer than `rank_threshold` for synonyms when the WordFreq
    token asks for simpler vocabulary.
    """

    def __init__(
        self,
        table: FrequencyTable,
        synonyms: dict[str, str] | None = None,
        rank_threshold: int = 100,
    ):
        self.table = table
        self.synonyms = synonyms or {}
        self.rank_threshold = rank_threshold

    def __call__(self, source: str) -> str:
        controls, text = parse_control_prefix(source)
        ratio = controls.get("NumChars", 1.0)
        if controls.get("WordFreq", 1.0) < 1.0:
            words = [
                self.synonyms.get(w.lower(), w)
                if self.table.rank(w.lower()) > self.rank_threshold
                else w
                for w in text.split()
            ]
            text = " ".join(words)
        budget = max(1, int(round(ratio * len(text))))
        if len(text) <= budget:
            return text
        cut = text.rfind(" ", 0, budget + 1)
        if cut <= 0:
            cut = budget
        return text[:cut].rstrip()


# ---------------------------------------------------------------------------
# control tuning
# ---------------------------------------------------------------------------

@dataclass
class TuneResult:
    controls: ControlValues
    sari: float
    evaluations: int
    history: list[float]


def tune_controls(
    model,
    sources: Sequence[str],
    references: Sequence[Sequence[str]],
    budget: int = 64,
    seed: int = 0,
    space: SearchSpace = SearchSpace(),
) -> TuneResult:
    """Find the control values maximizing corpus SARI on a validation set.

    The chosen values are meant to be kept fixed for every test sample.
    """

    def objective(point: np.ndarray) -> float:
        controls = controls_from_point(point)
        prefixed = [f"{controls.prefix()} {src}" for src in sources]
        outputs = model.simplify_batch(prefixed)
        return metrics.sari(sources, outputs, references).score

    result = one_plus_one(objective, space=space, budget=budget, seed=seed)
    return TuneResult(
        controls=controls_from_point(result.best_point),
        sari=result.best_value,
        evaluations=result.evaluations,
        history=result.accepted_values,
    )


def prior_knowledge_controls(
    sample_sources: Sequence[str], sample_simple: Sequence[str]
) -> ControlValues:
    """Set all four controls to the observed character compression ratio.

    Works from unaligned samples of ordinary and simple sentences; the mean
    length ratio is rounded to the nearest 0.05.
    """
    if not sample_sources or not sample_simple:
        raise ValueError("need non-empty samples on both sides")
    src_mean = sum(len(s) for s in sample_sources) / len(sample_sources)
    simple_mean = sum(len(s) for s in sample_simple) / len(sample_simple)
    if src_mean == 0:
        raise ValueError("source sample has zero mean length")
    ratio = simple_mean / src_mean
    rounded = math.floor(ratio / 0.05 + 0.5) * 0.05
    return ControlValues(
        num_chars=rounded,
        lev_sim=rounded,
        word_freq=rounded,
        dep_tree_depth=rounded,
    )


__all__ = [
    "SearchSpace",
    "OnePlusOneResult",
    "one_plus_one",
    "controls_from_point",
    "ModelClientError",
    "SubprocessModelClient",
    "InProcessModelClient",
    "ToySimplifier",
    "TuneResult",
    "tune_controls",
    "prior_knowledge_controls",
    "TOKEN_NAMES",
    "strip_control_tokens",
]
