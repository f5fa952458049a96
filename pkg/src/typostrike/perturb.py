"""The constrained single-edit perturbation set.

Character edits (insert, delete, swap, keyboard substitution) only ever
touch internal letters of a word, so the first and last characters survive
and the edited word stays one Damerau-Levenshtein step from the original.
Whitespace edits split one word in two or merge two neighbours into one.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path

from .errors import IllegalPerturbationError
from .text import WordSpan, tokenize_words

__all__ = [
    "Kind",
    "Perturbation",
    "QwertyMap",
    "default_qwerty",
    "CHARACTER_KINDS",
    "WHITESPACE_KINDS",
    "DEFAULT_ATTACK_KINDS",
    "DEFAULT_EXHAUSTIVE_KINDS",
    "applicable_perturbations",
    "apply",
    "sample_perturbation",
]

ALPHABET = "abcdefghijklmnopqrstuvwxyz"

# Shortest word lengths for which each edit has a legal internal site.
MIN_LEN_CHAR_EDIT = 3
MIN_LEN_SWAP = 4
MIN_LEN_SPLIT = 6


class Kind(str, Enum):
    """The six edit kinds. Values double as wire/CLI names."""

    INSERT_CHAR = "insert"
    DELETE_CHAR = "delete"
    SWAP_ADJACENT = "swap"
    SUBSTITUTE_KEYBOARD = "substitute"
    SPLIT_WORD = "split"
    MERGE_WORDS = "merge"

    def __str__(self) -> str:  # keep f-strings on the short name
        return self.value


_KIND_ORDER = {kind: i for i, kind in enumerate(Kind)}

CHARACTER_KINDS = frozenset(
    {Kind.INSERT_CHAR, Kind.DELETE_CHAR, Kind.SWAP_ADJACENT, Kind.SUBSTITUTE_KEYBOARD}
)
WHITESPACE_KINDS = frozenset({Kind.SPLIT_WORD, Kind.MERGE_WORDS})

# Word-score attacks use the add/delete/swap + whitespace set; keyboard
# substitution joins only the exhaustive baseline. Both are overridable.
DEFAULT_ATTACK_KINDS = frozenset(
    {Kind.INSERT_CHAR, Kind.DELETE_CHAR, Kind.SWAP_ADJACENT, Kind.SPLIT_WORD, Kind.MERGE_WORDS}
)
DEFAULT_EXHAUSTIVE_KINDS = CHARACTER_KINDS


@dataclass(frozen=True)
class Perturbation:
    """One atomic edit, addressed by word index and in-word offset.

    ``char_offset`` is the edited position for character kinds, the split
    point for SPLIT_WORD, and unused (0) for MERGE_WORDS where
    ``word_index`` names the left-hand word. ``payload`` is the inserted or
    substituted character; None otherwise.
    """

    kind: Kind
    word_index: int
    char_offset: int = 0
    payload: str | None = None

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "word_index": self.word_index,
            "char_offset": self.char_offset,
            "payload": self.payload,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "Perturbation":
        return cls(
            kind=Kind(obj["kind"]),
            word_index=int(obj["word_index"]),
            char_offset=int(obj.get("char_offset", 0)),
            payload=obj.get("payload"),
        )


class QwertyMap:
    """Symmetric keyboard adjacency between lowercase letters."""

    def __init__(self, neighbors: dict[str, frozenset[str]]):
        for key, vals in neighbors.items():
            if len(key) != 1 or not key.isalpha():
                raise ValueError(f"adjacency key {key!r} is not a single letter")
            for v in vals:
                if key not in neighbors.get(v, frozenset()):
                    raise ValueError(f"adjacency not symmetric: {key!r} -> {v!r}")
        self.neighbors = neighbors

    def __getitem__(self, char: str) -> frozenset[str]:
        return self.neighbors.get(char, frozenset())

    @classmethod
    def from_file(cls, path: str | Path) -> "QwertyMap":
        return cls._parse(Path(path).read_text(encoding="utf-8"))

    @classmethod
    def _parse(cls, content: str) -> "QwertyMap":
        neighbors: dict[str, frozenset[str]] = {}
        for line in content.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, rest = line.partition(":")
            neighbors[key.strip()] = frozenset(rest.split())
        return cls(neighbors)


_DEFAULT_QWERTY: QwertyMap | None = None


def default_qwerty() -> QwertyMap:
    """Bundled US-QWERTY adjacency, loaded once per process."""
    global _DEFAULT_QWERTY
    if _DEFAULT_QWERTY is None:
        source = resources.files("typostrike.data").joinpath("qwerty_neighbors.txt")
        _DEFAULT_QWERTY = QwertyMap._parse(source.read_text(encoding="utf-8"))
    return _DEFAULT_QWERTY


def _word_at(text: str, word_index: int) -> tuple[list[WordSpan], WordSpan]:
    spans = tokenize_words(text)
    if not 0 <= word_index < len(spans):
        raise IllegalPerturbationError(
            f"word index {word_index} out of range for text with {len(spans)} words"
        )
    return spans, spans[word_index]


def applicable_perturbations(
    text: str,
    word_index: int,
    kinds: frozenset[Kind] | set[Kind] = DEFAULT_ATTACK_KINDS,
    qwerty: QwertyMap | None = None,
) -> list[Perturbation]:
    """Enumerate every legal perturbation of the given kinds for one word.

    Character edits target internal alphabetic characters only; swaps skip
    equal adjacent pairs (a no-op edit); splits require letters on both
    sides of the split point so markup and punctuation stay intact. The
    result is deterministically ordered by (kind, offset, payload) and is
    empty when the word is too short for every requested kind.
    """
    spans, span = _word_at(text, word_index)
    w = span.text
    n = len(w)
    out: list[Perturbation] = []

    if Kind.INSERT_CHAR in kinds and n >= MIN_LEN_CHAR_EDIT:
        for i in range(1, n - 1):
            if w[i].isalpha():
                for c in ALPHABET:
                    out.append(Perturbation(Kind.INSERT_CHAR, word_index, i, c))

    if Kind.DELETE_CHAR in kinds and n >= MIN_LEN_CHAR_EDIT:
        for i in range(1, n - 1):
            if w[i].isalpha():
                out.append(Perturbation(Kind.DELETE_CHAR, word_index, i))

    if Kind.SWAP_ADJACENT in kinds and n >= MIN_LEN_SWAP:
        for i in range(1, n - 2):
            if w[i].isalpha() and w[i + 1].isalpha() and w[i] != w[i + 1]:
                out.append(Perturbation(Kind.SWAP_ADJACENT, word_index, i))

    if Kind.SUBSTITUTE_KEYBOARD in kinds and n >= MIN_LEN_CHAR_EDIT:
        qmap = qwerty or default_qwerty()
        for i in range(1, n - 1):
            if w[i].isalpha():
                for c in sorted(qmap[w[i]]):
                    out.append(Perturbation(Kind.SUBSTITUTE_KEYBOARD, word_index, i, c))

    if Kind.SPLIT_WORD in kinds and n >= MIN_LEN_SPLIT:
        for i in range(1, n):
            if w[i - 1].isalpha() and w[i].isalpha():
                out.append(Perturbation(Kind.SPLIT_WORD, word_index, i))

    if Kind.MERGE_WORDS in kinds and word_index + 1 < len(spans):
        out.append(Perturbation(Kind.MERGE_WORDS, word_index))

    return out


def _check(condition: bool, message: str) -> None:
    if not condition:
        raise IllegalPerturbationError(message)


def _validate(text: str, p: Perturbation) -> tuple[list[WordSpan], WordSpan]:
    spans, span = _word_at(text, p.word_index)
    w = span.text
    n = len(w)
    i = p.char_offset
    if p.kind in (Kind.INSERT_CHAR, Kind.DELETE_CHAR, Kind.SUBSTITUTE_KEYBOARD):
        _check(n >= MIN_LEN_CHAR_EDIT, f"word {w!r} too short for {p.kind}")
        _check(1 <= i <= n - 2, f"offset {i} not internal for word {w!r}")
        _check(w[i].isalpha(), f"target character {w[i]!r} is not a letter")
        if p.kind is Kind.DELETE_CHAR:
            _check(p.payload is None, "delete takes no payload")
        else:
            _check(
                p.payload is not None and len(p.payload) == 1 and p.payload.isalpha(),
                f"payload {p.payload!r} must be a single letter",
            )
            if p.kind is Kind.SUBSTITUTE_KEYBOARD:
                _check(p.payload != w[i], "substitution must change the character")
    elif p.kind is Kind.SWAP_ADJACENT:
        _check(n >= MIN_LEN_SWAP, f"word {w!r} too short for swap")
        _check(1 <= i <= n - 3, f"swap offset {i} not internal for word {w!r}")
        _check(w[i].isalpha() and w[i + 1].isalpha(), "swap targets must be letters")
        _check(w[i] != w[i + 1], "swapping equal characters is a no-op")
    elif p.kind is Kind.SPLIT_WORD:
        _check(n >= MIN_LEN_SPLIT, f"word {w!r} too short to split")
        _check(1 <= i <= n - 1, f"split point {i} out of range for word {w!r}")
        _check(w[i - 1].isalpha() and w[i].isalpha(), "split must separate letters")
    elif p.kind is Kind.MERGE_WORDS:
        _check(p.word_index + 1 < len(spans), "no right-hand word to merge with")
    else:  # pragma: no cover - Enum is closed
        raise IllegalPerturbationError(f"unknown kind {p.kind!r}")
    return spans, span


def apply(text: str, p: Perturbation) -> str:
    """Apply one perturbation to ``text``.

    Every character outside the edited word (and, for merges, the removed
    whitespace gap) is preserved byte for byte. Raises
    IllegalPerturbationError when ``p`` is stale or out of range.
    """
    spans, span = _validate(text, p)
    w = span.text
    i = p.char_offset
    if p.kind is Kind.INSERT_CHAR:
        new = w[:i] + p.payload + w[i:]
    elif p.kind is Kind.DELETE_CHAR:
        new = w[:i] + w[i + 1 :]
    elif p.kind is Kind.SWAP_ADJACENT:
        new = w[:i] + w[i + 1] + w[i] + w[i + 2 :]
    elif p.kind is Kind.SUBSTITUTE_KEYBOARD:
        new = w[:i] + p.payload + w[i + 1 :]
    elif p.kind is Kind.SPLIT_WORD:
        new = w[:i] + " " + w[i:]
    else:  # MERGE_WORDS: drop the whole whitespace gap
        right = spans[p.word_index + 1]
        return text[: span.end] + text[right.start :]
    return text[: span.start] + new + text[span.end :]


def sample_perturbation(
    text: str,
    word_index: int,
    kinds: frozenset[Kind] | set[Kind],
    rng: random.Random,
    exclude: frozenset[Perturbation] | set[Perturbation] = frozenset(),
    qwerty: QwertyMap | None = None,
) -> Perturbation | None:
    """Uniform draw over the applicable perturbations not yet tried.

    Returns None once the word's candidate set is exhausted. Deterministic
    for a seeded ``rng``.
    """
    pool = [
        p
        for p in applicable_perturbations(text, word_index, kinds, qwerty)
        if p not in exclude
    ]
    if not pool:
        return None
    return pool[rng.randrange(len(pool))]
