"""Subword-boundary labels and how perturbations move them.

A boundary marks the last character of a WordPiece subword. Labels are
positional: edits shift them with the surrounding characters instead of
re-tokenizing, which keeps per-character training targets aligned. The
one lossy case is deleting a boundary character whose predecessor already
is one - that subword's slot is discarded and the token count drops by
one. Splitting a word raises the count by one unless the split lands
exactly on an existing boundary.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .perturb import Kind, Perturbation, apply, applicable_perturbations
from .text import tokenize_words

__all__ = [
    "WordPieceVocab",
    "BoundaryLabeledText",
    "wordpiece_tokenize",
    "label_boundaries",
    "perturb_with_relabel",
    "PerturbationPolicy",
    "augment_labeled",
    "emit_augmented_dataset",
]


class WordPieceVocab:
    """A WordPiece vocabulary: plain tokens plus ``##`` continuation pieces."""

    def __init__(self, tokens: Iterable[str], unk_token: str = "[UNK]"):
        self.tokens = frozenset(tokens)
        self.unk_token = unk_token

    def __contains__(self, token: str) -> bool:
        return token in self.tokens

    def __len__(self) -> int:
        return len(self.tokens)

    @classmethod
    def from_file(cls, path: str | Path, unk_token: str = "[UNK]") -> "WordPieceVocab":
        """Load a BERT-style vocabulary file: one token per line."""
        tokens = []
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            token = line.strip()
            if token:
                tokens.append(token)
        return cls(tokens, unk_token)


def wordpiece_tokenize(word: str, vocab: WordPieceVocab) -> list[str]:
    """Greedy longest-match-first subword segmentation.

    Non-initial pieces carry the ``##`` prefix. A word with no matching
    prefix at some position collapses to ``[unk]`` as a whole.
    """
    if not word:
        raise ValueError("cannot tokenize an empty word")
    pieces: list[str] = []
    start = 0
    n = len(word)
    while start < n:
        end = n
        match = None
        while start < end:
            candidate = word[start:end]
            if start > 0:
                candidate = "##" + candidate
            if candidate in vocab:
                match = candidate
                break
            end -= 1
        if match is None:
            return [vocab.unk_token]
        pieces.append(match)
        start = end
    return pieces


@dataclass
class BoundaryLabeledText:
    """A character sequence plus one boundary flag per character.

    Flags are True on the last character of each subword; whitespace is
    never a boundary. ``token_count`` is the number of True flags.
    """

    chars: str
    boundaries: list[bool] = field(repr=False)

    def __post_init__(self) -> None:
        if len(self.chars) != len(self.boundaries):
            raise ValueError(
                f"{len(self.boundaries)} flags for {len(self.chars)} characters"
            )

    @property
    def token_count(self) -> int:
        return sum(self.boundaries)

    def boundary_indices(self) -> list[int]:
        return [i for i, flag in enumerate(self.boundaries) if flag]

    def to_dict(self) -> dict:
        return {"chars": self.chars, "boundaries": self.boundary_indices()}


def label_boundaries(text: str, vocab: WordPieceVocab) -> BoundaryLabeledText:
    """Mark the last character of every subword of every word.

    A word that tokenizes to ``[unk]`` counts as a single subword spanning
    the whole word, so its final character is still a boundary.
    """
    flags = [False] * len(text)
    for span in tokenize_words(text):
        pieces = wordpiece_tokenize(span.text, vocab)
        if pieces == [vocab.unk_token]:
            flags[span.end - 1] = True
            continue
        pos = span.start
        for i, piece in enumerate(pieces):
            length = len(piece) - 2 if i > 0 else len(piece)
            pos += length
            flags[pos - 1] = True
    return BoundaryLabeledText(text, flags)


def perturb_with_relabel(labeled: BoundaryLabeledText, p: Perturbation) -> BoundaryLabeledText:
    """Apply ``p`` to a labeled text and move the labels with it.

    Inserted characters are not boundaries. Deleting a boundary character
    promotes its predecessor to a boundary, unless the predecessor already
    is one - then the subword is discarded (token count -1). Swaps leave
    flags attached to positions. A split promotes the character left of
    the new space (token count +1 when it was not already a boundary) and
    a merge drops only the whitespace gap, which carries no flags.
    """
    new_chars = apply(labeled.chars, p)  # validates legality
    spans = tokenize_words(labeled.chars)
    span = spans[p.word_index]
    flags = list(labeled.boundaries)
    g = span.start + p.char_offset

    if p.kind is Kind.INSERT_CHAR:
        flags.insert(g, False)
    elif p.kind is Kind.DELETE_CHAR:
        if flags[g]:
            if not flags[g - 1]:
                flags[g - 1] = True
        del flags[g]
    elif p.kind is Kind.SWAP_ADJACENT:
        pass
    elif p.kind is Kind.SUBSTITUTE_KEYBOARD:
        pass
    elif p.kind is Kind.SPLIT_WORD:
        if not flags[g - 1]:
            flags[g - 1] = True
        flags.insert(g, False)
    else:  # MERGE_WORDS
        right = spans[p.word_index + 1]
        del flags[span.end : right.start]

    return BoundaryLabeledText(new_chars, flags)


@dataclass
class PerturbationPolicy:
    """How the augmentation pipeline perturbs each sentence.

    With probability ``probability`` a sentence receives one edit whose
    kind is drawn by ``kind_weights``; a kind with no applicable site
    leaves the sentence unperturbed.
    """

    probability: float
    kind_weights: dict[Kind, float]

    def __post_init__(self) -> None:
        if not 0.0 <= self.probability <= 1.0:
            raise ValueError(f"probability must be in [0, 1], got {self.probability}")
        if self.probability > 0:
            if not self.kind_weights or all(w <= 0 for w in self.kind_weights.values()):
                raise ValueError("kind_weights needs at least one positive weight")
        for kind, weight in self.kind_weights.items():
            if weight < 0:
                raise ValueError(f"negative weight for {kind}: {weight}")


def augment_labeled(
    labeled: BoundaryLabeledText,
    policy: PerturbationPolicy,
    rng: random.Random,
) -> tuple[BoundaryLabeledText, list[Perturbation]]:
    """Perturb one labeled sentence per the policy. Deterministic per rng."""
    if policy.probability <= 0 or rng.random() >= policy.probability:
        return labeled, []
    kinds = [k for k, w in policy.kind_weights.items() if w > 0]
    weights = [policy.kind_weights[k] for k in kinds]
    kind = rng.choices(kinds, weights=weights, k=1)[0]
    pool: list[Perturbation] = []
    for i in range(len(tokenize_words(labeled.chars))):
        pool.extend(applicable_perturbations(labeled.chars, i, {kind}))
    if not pool:
        return labeled, []
    p = pool[rng.randrange(len(pool))]
    return perturb_with_relabel(labeled, p), [p]


def emit_augmented_dataset(
    texts: Iterable[str],
    vocab: WordPieceVocab,
    policy: PerturbationPolicy,
    rng: random.Random,
    path: str | Path,
) -> int:
    """Write one JSON line per sentence with perturbed chars and labels.

    Record schema: {"chars": ..., "boundaries": [ascending indices],
    "perturbations": [applied edits]}. Returns the record count.
    """
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for text in texts:
            labeled = label_boundaries(text, vocab)
            result, applied = augment_labeled(labeled, policy, rng)
            record = result.to_dict()
            record["perturbations"] = [p.to_dict() for p in applied]
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
            count += 1
    return count
