"""Per-class word-score tables built from labeled corpora.

A word's score for a class is the add-one-smoothed log-likelihood ratio of
the word under that class versus the union of all other classes. High
scores mark the words that carry the most evidence for a predicted class,
which is exactly what the attack search perturbs first.
"""

from __future__ import annotations

import hashlib
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from .errors import CorpusError, EmptyClassError, UnknownWordError
from .text import normalize, strip_outer_punctuation, tokenize_words

__all__ = [
    "LabeledCorpus",
    "ClassFrequencyTable",
    "WordScoreTable",
    "counting_tokens",
    "count_frequencies",
    "word_score",
    "build_score_table",
]


@dataclass
class LabeledCorpus:
    """Class-labeled text samples.

    ``samples`` holds ``(text, label)`` pairs with labels indexing into
    ``class_names``. Every class must contain at least one sample.
    """

    samples: list[tuple[str, int]]
    class_names: list[str]

    def __post_init__(self) -> None:
        if len(self.class_names) < 2:
            raise CorpusError("a labeled corpus needs at least two classes")
        counts = [0] * len(self.class_names)
        for text, label in self.samples:
            if not isinstance(label, int) or not 0 <= label < len(self.class_names):
                raise CorpusError(f"label {label!r} outside [0, {len(self.class_names)})")
            counts[label] += 1
        for c, n in enumerate(counts):
            if n == 0:
                raise CorpusError(f"class {self.class_names[c]!r} has no samples")

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    def __len__(self) -> int:
        return len(self.samples)

    def fingerprint(self) -> str:
        """Content hash of the corpus, used for score-table provenance."""
        h = hashlib.sha256()
        h.update(json.dumps(self.class_names).encode("utf-8"))
        for text, label in self.samples:
            h.update(f"{label}\x1f{text}\x1e".encode("utf-8"))
        return h.hexdigest()[:16]

    @classmethod
    def load_jsonl(cls, path: str | Path) -> "LabeledCorpus":
        """Read a JSON-lines corpus.

        Each line is ``{"text": ..., "label": <int>}``. An optional header
        line ``{"classes": [...]}`` names the classes; otherwise names
        default to ``class_0..class_k`` with k inferred from the labels.
        """
        samples: list[tuple[str, int]] = []
        class_names: list[str] | None = None
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise CorpusError(f"{path}:{lineno}: not valid JSON: {exc}") from exc
                if "classes" in obj and "text" not in obj:
                    class_names = [str(c) for c in obj["classes"]]
                    continue
                if "text" not in obj or "label" not in obj:
                    raise CorpusError(f"{path}:{lineno}: expected 'text' and 'label' fields")
                samples.append((str(obj["text"]), int(obj["label"])))
        if not samples:
            raise CorpusError(f"{path}: corpus is empty")
        if class_names is None:
            k = max(label for _, label in samples) + 1
            class_names = [f"class_{i}" for i in range(max(k, 2))]
        return cls(samples, class_names)

    def save_jsonl(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(json.dumps({"classes": self.class_names}) + "\n")
            for text, label in self.samples:
                fh.write(json.dumps({"text": text, "label": label}, ensure_ascii=False) + "\n")


def counting_tokens(text: str) -> list[str]:
    """Tokens of ``text`` as used for frequency counting.

    Lowercase whitespace words with leading/trailing punctuation stripped;
    words that are punctuation-only disappear. Attack-time score lookups
    use the same keys so that tables and texts always agree.
    """
    out = []
    for span in tokenize_words(normalize(text)):
        word = strip_outer_punctuation(span.text)
        if word:
            out.append(word)
    return out


@dataclass
class ClassFrequencyTable:
    """Retained per-class word counts plus the shared smoothing constants.

    ``freq[c]`` maps word -> count within class ``c``, ``totals[c]`` is the
    number of retained tokens of class ``c`` and ``vocab_size`` the number
    of distinct retained words across the whole corpus.
    """

    freq: list[Counter]
    totals: list[int]
    vocab_size: int
    class_names: list[str]
    vocabulary: frozenset[str] = field(repr=False)

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    def __contains__(self, word: str) -> bool:
        return word in self.vocabulary


def count_frequencies(
    corpus: LabeledCorpus,
    stopwords: frozenset[str] = frozenset(),
    min_freq: int = 5,
) -> ClassFrequencyTable:
    """Count retained word frequencies per class.

    Words in ``stopwords`` and words whose total corpus frequency is below
    ``min_freq`` are dropped entirely: they contribute neither to the
    per-class totals nor to the vocabulary size.

    Raises:
        ValueError: if ``min_freq < 1``.
        EmptyClassError: if filtering empties some class of tokens.
    """
    if min_freq < 1:
        raise ValueError(f"min_freq must be >= 1, got {min_freq}")
    raw = [Counter() for _ in corpus.class_names]
    for text, label in corpus.samples:
        raw[label].update(counting_tokens(text))

    total = Counter()
    for counter in raw:
        total.update(counter)
    retained = frozenset(
        w for w, n in total.items() if n >= min_freq and w not in stopwords
    )

    freq = [Counter({w: c[w] for w in c if w in retained}) for c in raw]
    totals = [sum(c.values()) for c in freq]
    for c, n in enumerate(totals):
        if n == 0:
            raise EmptyClassError(
                f"class {corpus.class_names[c]!r} has zero retained tokens "
                f"(stopwords/min_freq={min_freq} removed everything)"
            )
    return ClassFrequencyTable(
        freq=freq,
        totals=totals,
        vocab_size=len(retained),
        class_names=list(corpus.class_names),
        vocabulary=retained,
    )


def word_score(word: str, table: ClassFrequencyTable, target_class: int) -> float:
    """Smoothed log-likelihood ratio of ``word`` for one class versus the rest.

    Natural logarithm; the smoothing denominator uses the shared
    post-filter vocabulary size on both sides.
    """
    if word not in table.vocabulary:
        raise UnknownWordError(f"word {word!r} not in table vocabulary")
    if not 0 <= target_class < table.num_classes:
        raise ValueError(f"target_class {target_class} outside [0, {table.num_classes})")
    v = table.vocab_size
    freq_t = table.freq[target_class][word]
    n_t = table.totals[target_class]
    freq_rest = sum(table.freq[c][word] for c in range(table.num_classes) if c != target_class)
    n_rest = sum(table.totals[c] for c in range(table.num_classes) if c != target_class)
    return math.log((freq_t + 1) / (n_t + v)) - math.log((freq_rest + 1) / (n_rest + v))


def _stopword_hash(stopwords: frozenset[str]) -> str:
    return hashlib.sha256("\n".join(sorted(stopwords)).encode("utf-8")).hexdigest()[:16]


@dataclass
class WordScoreTable:
    """Dense per-class scores for every retained vocabulary word."""

    scores: dict[str, list[float]]
    class_names: list[str]
    min_freq: int
    stopword_hash: str
    corpus_fingerprint: str

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    def __contains__(self, word: str) -> bool:
        return word in self.scores

    def lookup(self, word: str) -> list[float] | None:
        """Score vector for ``word``, or None if it is out of vocabulary."""
        return self.scores.get(word)

    def score(self, word: str, target_class: int) -> float:
        row = self.scores.get(word)
        if row is None:
            raise UnknownWordError(f"word {word!r} not in score table")
        return row[target_class]

    def to_json(self) -> str:
        payload = {
            "classes": self.class_names,
            "min_freq": self.min_freq,
            "stopword_hash": self.stopword_hash,
            "corpus_fingerprint": self.corpus_fingerprint,
            "scores": self.scores,
        }
        return json.dumps(payload, sort_keys=True, ensure_ascii=False, separators=(",", ":"))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "WordScoreTable":
        try:
            payload = json.loads(Path(path).read_text(encoding="utf-8"))
            return cls(
                scores={w: [float(x) for x in row] for w, row in payload["scores"].items()},
                class_names=list(payload["classes"]),
                min_freq=int(payload["min_freq"]),
                stopword_hash=str(payload["stopword_hash"]),
                corpus_fingerprint=str(payload.get("corpus_fingerprint", "")),
            )
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise CorpusError(f"{path}: not a valid score table file: {exc}") from exc


def build_score_table(
    corpus: LabeledCorpus,
    stopwords: frozenset[str] = frozenset(),
    min_freq: int = 5,
) -> WordScoreTable:
    """Score every retained word against every class.

    Deterministic: identical corpora and config serialize byte-identically.
    """
    table = count_frequencies(corpus, stopwords, min_freq)
    scores = {
        word: [word_score(word, table, c) for c in range(table.num_classes)]
        for word in sorted(table.vocabulary)
    }
    return WordScoreTable(
        scores=scores,
        class_names=list(corpus.class_names),
        min_freq=min_freq,
        stopword_hash=_stopword_hash(stopwords),
        corpus_fingerprint=corpus.fingerprint(),
    )
