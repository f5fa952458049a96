"""Text normalization, whitespace word tokenization and stop-word handling.

Every other module goes through these primitives so that "word" means the
same thing everywhere: a maximal run of non-whitespace characters in a
lowercased text.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

__all__ = [
    "WordSpan",
    "normalize",
    "tokenize_words",
    "strip_outer_punctuation",
    "load_stopwords",
    "default_stopwords",
]


@dataclass(frozen=True)
class WordSpan:
    """One word together with its character offsets into the source text.

    ``text == source[start:end]`` and contains no whitespace.
    """

    text: str
    start: int
    end: int


def normalize(raw: str) -> str:
    """Lowercase ``raw`` and nothing else.

    Punctuation, markup fragments and whitespace runs are preserved
    verbatim; the empty string maps to itself. Idempotent.
    """
    return raw.lower()


def tokenize_words(text: str) -> list[WordSpan]:
    """Split ``text`` into maximal runs of non-whitespace characters.

    Whitespace is whatever ``str.isspace`` says it is. Offsets index into
    ``text`` itself, so the original spacing is always recoverable from
    the source; joining the spans does not need to reproduce it.
    """
    spans: list[WordSpan] = []
    start: int | None = None
    for i, ch in enumerate(text):
        if ch.isspace():
            if start is not None:
                spans.append(WordSpan(text[start:i], start, i))
                start = None
        elif start is None:
            start = i
    if start is not None:
        spans.append(WordSpan(text[start:], start, len(text)))
    return spans


def strip_outer_punctuation(word: str) -> str:
    """Strip leading and trailing non-alphanumeric characters from a word.

    Interior characters are never touched ("can't" stays "can't"), so
    surface forms like "movie." and "movie" collapse to the same counting
    key while genuine contractions survive. May return the empty string
    for words made of punctuation only.
    """
    lo = 0
    hi = len(word)
    while lo < hi and not word[lo].isalnum():
        lo += 1
    while hi > lo and not word[hi - 1].isalnum():
        hi -= 1
    return word[lo:hi]


def load_stopwords(path: str | Path | None = None) -> frozenset[str]:
    """Load a stop-word set from ``path``, or the bundled English list.

    File format: one word per line, UTF-8, ``#`` starts a comment line.
    Entries are lowercased; blank lines are skipped.
    """
    if path is None:
        source = resources.files("typostrike.data").joinpath("stopwords_en.txt")
        content = source.read_text(encoding="utf-8")
    else:
        content = Path(path).read_text(encoding="utf-8")
    words = set()
    for line in content.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        words.add(line.lower())
    return frozenset(words)


_DEFAULT_STOPWORDS: frozenset[str] | None = None


def default_stopwords() -> frozenset[str]:
    """Bundled English stop-word list, loaded once per process."""
    global _DEFAULT_STOPWORDS
    if _DEFAULT_STOPWORDS is None:
        _DEFAULT_STOPWORDS = load_stopwords(None)
    return _DEFAULT_STOPWORDS
