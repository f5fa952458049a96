"""Budgeted black-box attack search.

The word-score attack ranks a text's words by their score for the victim's
predicted class and perturbs them in that order, keeping whichever edit
drags the predicted-class probability down the most. Its query budget is
the pair (max tokens to perturb, max tries per token); the attack never
queries more than their product. Forgetful mode reverts every
non-flipping word before moving on, so a successful forgetful attack
carries exactly one edit - the same contract as the exhaustive
single-edit baseline it is compared against.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

from .classifier import ClassDistribution, CountedClassifier, predict
from .perturb import (
    DEFAULT_ATTACK_KINDS,
    DEFAULT_EXHAUSTIVE_KINDS,
    Kind,
    Perturbation,
    QwertyMap,
    applicable_perturbations,
    apply,
    sample_perturbation,
)
from .scoring import WordScoreTable
from .text import normalize, strip_outer_punctuation, tokenize_words

__all__ = [
    "AttackBudget",
    "TargetWord",
    "StepRecord",
    "AttackOutcome",
    "plan_targets",
    "word_score_attack",
    "exhaustive_attack",
    "write_outcomes",
    "read_outcomes",
]

MODES = ("normal", "forgetful", "exhaustive")


@dataclass(frozen=True)
class AttackBudget:
    """Per-text query budget: the product bounds total victim queries."""

    max_tokens_to_perturb: int
    max_tries_per_token: int

    def __post_init__(self) -> None:
        if self.max_tokens_to_perturb < 1 or self.max_tries_per_token < 1:
            raise ValueError(f"budget components must be >= 1, got {self}")

    @property
    def max_queries(self) -> int:
        return self.max_tokens_to_perturb * self.max_tries_per_token


class TargetWord(NamedTuple):
    """One planned perturbation target."""

    word_index: int
    word: str
    score: float


@dataclass
class StepRecord:
    """One victim query inside an attack.

    ``word_index`` addresses the text version the perturbation was applied
    to, so replaying the retained steps in order reproduces the final
    text. ``confidence`` is the victim's probability for the original
    class after the edit.
    """

    word_index: int
    word: str
    perturbation: Perturbation
    confidence: float
    retained: bool = False

    def to_dict(self) -> dict:
        return {
            "word_index": self.word_index,
            "word": self.word,
            "perturbation": self.perturbation.to_dict(),
            "confidence": self.confidence,
            "retained": self.retained,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "StepRecord":
        return cls(
            word_index=int(obj["word_index"]),
            word=str(obj["word"]),
            perturbation=Perturbation.from_dict(obj["perturbation"]),
            confidence=float(obj["confidence"]),
            retained=bool(obj["retained"]),
        )


@dataclass
class AttackOutcome:
    """Result of attacking one text."""

    original_text: str
    final_text: str
    original_class: int
    final_class: int
    success: bool
    queries_used: int
    steps: list[StepRecord] = field(default_factory=list)
    mode: str = "normal"

    def replay_final_text(self) -> str:
        """Re-apply the retained steps to the original text."""
        text = self.original_text
        for step in self.steps:
            if step.retained:
                text = apply(text, step.perturbation)
        return text

    def to_dict(self) -> dict:
        return {
            "original_text": self.original_text,
            "final_text": self.final_text,
            "original_class": self.original_class,
            "final_class": self.final_class,
            "success": self.success,
            "queries_used": self.queries_used,
            "steps": [s.to_dict() for s in self.steps],
            "mode": self.mode,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "AttackOutcome":
        return cls(
            original_text=obj["original_text"],
            final_text=obj["final_text"],
            original_class=int(obj["original_class"]),
            final_class=int(obj["final_class"]),
            success=bool(obj["success"]),
            queries_used=int(obj["queries_used"]),
            steps=[StepRecord.from_dict(s) for s in obj.get("steps", [])],
            mode=obj.get("mode", "normal"),
        )


def plan_targets(
    text: str,
    scores: WordScoreTable,
    predicted_class: int,
    budget: AttackBudget,
    stopwords: frozenset[str] = frozenset(),
) -> list[TargetWord]:
    """Rank the text's words by their score for the predicted class.

    Duplicate occurrences are separate entries; ties break toward the
    earlier position; stop words and out-of-table words are never
    targeted. At most ``budget.max_tokens_to_perturb`` entries.
    """
    entries: list[TargetWord] = []
    for i, span in enumerate(tokenize_words(text)):
        key = strip_outer_punctuation(span.text)
        if not key or key in stopwords:
            continue
        row = scores.lookup(key)
        if row is None:
            continue
        entries.append(TargetWord(i, span.text, row[predicted_class]))
    entries.sort(key=lambda e: (-e.score, e.word_index))
    return entries[: budget.max_tokens_to_perturb]


def _baseline(victim, text: str) -> ClassDistribution:
    """Classify the unperturbed text without touching the query ledger.

    Establishing the class under attack is reported separately from the
    perturbation budget, so outcome query counts and ledger totals agree.
    """
    if isinstance(victim, CountedClassifier):
        rows = victim.predict_proba_uncounted([text])
        return ClassDistribution.from_probs(rows[0])
    return predict(victim, [text])[0]


def word_score_attack(
    text: str,
    victim,
    scores: WordScoreTable,
    budget: AttackBudget,
    kinds: frozenset[Kind] | set[Kind] = DEFAULT_ATTACK_KINDS,
    mode: str = "normal",
    rng: random.Random | None = None,
    stopwords: frozenset[str] = frozenset(),
    qwerty: QwertyMap | None = None,
) -> AttackOutcome:
    """Run the word-score attack on one text.

    Words are attacked in plan order, each getting up to
    ``budget.max_tries_per_token`` distinct sampled edits. The first edit
    that flips the prediction ends the attack. In normal mode a word's
    best non-flipping edit is kept when it strictly lowered the
    original-class probability; forgetful mode reverts the word instead.
    Either way a word is edited at most once, and words swallowed by a
    retained merge are never revisited.
    """
    if mode not in ("normal", "forgetful"):
        raise ValueError(f"mode must be 'normal' or 'forgetful', got {mode!r}")
    rng = rng if rng is not None else random.Random(0)
    text = normalize(text)
    baseline = _baseline(victim, text)
    original_class = baseline.predicted

    plan = plan_targets(text, scores, original_class, budget, stopwords)
    spans = tokenize_words(text)
    # positions[orig_index] -> index in the current tokenization, or None
    # once a retained merge swallowed the word. edited[i] marks current
    # words that already carry their one allowed edit.
    positions: list[int | None] = list(range(len(spans)))
    edited: list[bool] = [False] * len(spans)
    locked: set[int] = set()

    current_text = text
    current_conf = baseline.probs[original_class]
    queries = 0
    steps: list[StepRecord] = []

    for target in plan:
        if target.word_index in locked:
            continue
        current_index = positions[target.word_index]
        if current_index is None:
            continue

        tried: set[Perturbation] = set()
        # merging toward a word that was already edited would give that
        # word a second edit; keep such merges out of the sample pool.
        if current_index + 1 < len(edited) and edited[current_index + 1]:
            tried.add(Perturbation(Kind.MERGE_WORDS, current_index))
        best: tuple[float, Perturbation, str, StepRecord] | None = None
        for _ in range(budget.max_tries_per_token):
            p = sample_perturbation(current_text, current_index, kinds, rng, tried, qwerty)
            if p is None:
                break  # word exhausted; unused tries do not carry over
            tried.add(p)
            candidate = apply(current_text, p)
            dist = predict(victim, [candidate])[0]
            queries += 1
            conf = dist.probs[original_class]
            step = StepRecord(current_index, target.word, p, conf)
            steps.append(step)
            if dist.predicted != original_class:
                step.retained = True
                return AttackOutcome(
                    original_text=text,
                    final_text=candidate,
                    original_class=original_class,
                    final_class=dist.predicted,
                    success=True,
                    queries_used=queries,
                    steps=steps,
                    mode=mode,
                )
            if best is None or conf < best[0]:
                best = (conf, p, candidate, step)

        if mode == "normal" and best is not None and best[0] < current_conf:
            conf, p, candidate, step = best
            step.retained = True
            current_text = candidate
            current_conf = conf
            locked.add(target.word_index)
            if p.kind is Kind.SPLIT_WORD:
                edited[current_index : current_index + 1] = [True, True]
                for j, pos in enumerate(positions):
                    if pos is not None and pos > current_index:
                        positions[j] = pos + 1
            elif p.kind is Kind.MERGE_WORDS:
                edited[current_index : current_index + 2] = [True]
                for j, pos in enumerate(positions):
                    if pos is None:
                        continue
                    if pos == current_index + 1:
                        positions[j] = None
                        locked.add(j)
                    elif pos > current_index + 1:
                        positions[j] = pos - 1
            else:
                edited[current_index] = True
        # forgetful mode keeps current_text untouched: the word reverts.

    return AttackOutcome(
        original_text=text,
        final_text=current_text,
        original_class=original_class,
        final_class=original_class,
        success=False,
        queries_used=queries,
        steps=steps,
        mode=mode,
    )


def exhaustive_attack(
    text: str,
    victim,
    kinds: frozenset[Kind] | set[Kind] = DEFAULT_EXHAUSTIVE_KINDS,
    qwerty: QwertyMap | None = None,
) -> AttackOutcome:
    """Try every legal single edit of every word until the prediction flips.

    Candidates run in deterministic order (word index, then enumeration
    order); ``queries_used`` equals the number of candidates tried. The
    trace keeps only the flipping edit - non-flipping candidates are
    counted, not recorded.
    """
    text = normalize(text)
    baseline = _baseline(victim, text)
    original_class = baseline.predicted
    spans = tokenize_words(text)
    queries = 0
    for word_index in range(len(spans)):
        for p in applicable_perturbations(text, word_index, kinds, qwerty):
            candidate = apply(text, p)
            dist = predict(victim, [candidate])[0]
            queries += 1
            if dist.predicted != original_class:
                step = StepRecord(word_index, spans[word_index].text, p, dist.probs[original_class], True)
                return AttackOutcome(
                    original_text=text,
                    final_text=candidate,
                    original_class=original_class,
                    final_class=dist.predicted,
                    success=True,
                    queries_used=queries,
                    steps=[step],
                    mode="exhaustive",
                )
    return AttackOutcome(
        original_text=text,
        final_text=text,
        original_class=original_class,
        final_class=original_class,
        success=False,
        queries_used=queries,
        steps=[],
        mode="exhaustive",
    )


def write_outcomes(outcomes: Iterable[AttackOutcome], path) -> None:
    """Serialize outcomes as JSON-lines, one outcome per line."""
    with open(path, "w", encoding="utf-8") as fh:
        for outcome in outcomes:
            fh.write(json.dumps(outcome.to_dict(), ensure_ascii=False) + "\n")


def read_outcomes(path) -> list[AttackOutcome]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(AttackOutcome.from_dict(json.loads(line)))
    return out
