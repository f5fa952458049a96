"""The victim-model boundary.

Anything with ``class_names`` and ``predict_proba(texts)`` can play the
victim: the in-process multinomial Naive Bayes below, the HTTP client in
``service``, or a test double. Attacks only ever see class probabilities,
never parameters.
"""

from __future__ import annotations

import json
import math
import threading
from dataclasses import dataclass
from pathlib import Path

from .errors import BudgetExhaustedError, CorpusError, EmptyClassError
from .scoring import LabeledCorpus, counting_tokens

__all__ = [
    "ClassDistribution",
    "NaiveBayesModel",
    "train_naive_bayes",
    "predict",
    "QueryLedger",
    "CountedClassifier",
]


@dataclass(frozen=True)
class ClassDistribution:
    """Class probabilities for one text plus the argmax prediction.

    Ties go to the lowest class index.
    """

    probs: tuple[float, ...]
    predicted: int

    @classmethod
    def from_probs(cls, probs) -> "ClassDistribution":
        probs = tuple(float(p) for p in probs)
        predicted = max(range(len(probs)), key=lambda i: probs[i])
        return cls(probs, predicted)


def predict(classifier, texts: list[str]) -> list[ClassDistribution]:
    """Query any classifier and wrap its rows into ClassDistributions.

    One distribution per input text, order preserved. Raises ValueError on
    an empty batch.
    """
    if not texts:
        raise ValueError("predict needs at least one text")
    return [ClassDistribution.from_probs(row) for row in classifier.predict_proba(texts)]


def _log_sum_exp(values: list[float]) -> float:
    peak = max(values)
    return peak + math.log(sum(math.exp(v - peak) for v in values))


class NaiveBayesModel:
    """Multinomial Naive Bayes with add-one smoothing.

    Uses the same token pipeline and smoothing scheme as the score tables,
    so for a binary corpus the per-word log-probability difference equals
    the word's score exactly. Unknown words are skipped at predict time; a
    text of only unknown words falls back to the class priors.
    """

    def __init__(
        self,
        class_names: list[str],
        log_priors: list[float],
        log_prob: list[dict[str, float]],
    ):
        self.class_names = list(class_names)
        self.log_priors = list(log_priors)
        self.log_prob = log_prob
        self.vocabulary = frozenset(log_prob[0]) if log_prob else frozenset()

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    def predict_proba(self, texts: list[str]) -> list[list[float]]:
        rows = []
        for text in texts:
            joint = list(self.log_priors)
            for token in counting_tokens(text):
                if token in self.vocabulary:
                    for c in range(self.num_classes):
                        joint[c] += self.log_prob[c][token]
            norm = _log_sum_exp(joint)
            rows.append([math.exp(v - norm) for v in joint])
        return rows

    def to_json(self) -> str:
        payload = {
            "classes": self.class_names,
            "log_priors": self.log_priors,
            "log_prob": self.log_prob,
        }
        return json.dumps(payload, sort_keys=True, ensure_ascii=False, separators=(",", ":"))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "NaiveBayesModel":
        try:
            payload = json.loads(Path(path).read_text(encoding="utf-8"))
            return cls(
                class_names=list(payload["classes"]),
                log_priors=[float(x) for x in payload["log_priors"]],
                log_prob=[
                    {w: float(v) for w, v in row.items()} for row in payload["log_prob"]
                ],
            )
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise CorpusError(f"{path}: not a valid model file: {exc}") from exc


def train_naive_bayes(corpus: LabeledCorpus) -> NaiveBayesModel:
    """Fit the reference victim on a labeled corpus. Deterministic."""
    k = corpus.num_classes
    sample_counts = [0] * k
    word_counts = [dict() for _ in range(k)]
    vocab = set()
    for text, label in corpus.samples:
        sample_counts[label] += 1
        counts = word_counts[label]
        for token in counting_tokens(text):
            counts[token] = counts.get(token, 0) + 1
            vocab.add(token)
    for c in range(k):
        if sample_counts[c] == 0:
            raise EmptyClassError(f"class {corpus.class_names[c]!r} has no samples")

    total = len(corpus.samples)
    log_priors = [math.log(sample_counts[c] / total) for c in range(k)]
    v = len(vocab)
    log_prob = []
    for c in range(k):
        n_c = sum(word_counts[c].values())
        denom = math.log(n_c + v)
        log_prob.append(
            {w: math.log(word_counts[c].get(w, 0) + 1) - denom for w in sorted(vocab)}
        )
    return NaiveBayesModel(corpus.class_names, log_priors, log_prob)


class QueryLedger:
    """Synchronized query counter with optional hard limit.

    ``per_sample_queries[i]`` accumulates everything charged between the
    i-th and (i+1)-th ``start_sample`` calls; the total is always their
    sum. A charge with no open sample opens one implicitly. Per-slot
    attribution is only meaningful for sequential use; totals are exact
    under any interleaving.
    """

    def __init__(self, budget_limit: int | None = None):
        self.budget_limit = budget_limit
        self.per_sample_queries: list[int] = []
        self._lock = threading.Lock()

    @property
    def total_queries(self) -> int:
        with self._lock:
            return sum(self.per_sample_queries)

    def start_sample(self) -> None:
        with self._lock:
            self.per_sample_queries.append(0)

    def check(self, n: int) -> None:
        """Raise if charging ``n`` more queries would exceed the limit."""
        with self._lock:
            if self.budget_limit is not None:
                if sum(self.per_sample_queries) + n > self.budget_limit:
                    raise BudgetExhaustedError(
                        f"query limit {self.budget_limit} would be exceeded by {n} more"
                    )

    def charge(self, n: int) -> None:
        with self._lock:
            if not self.per_sample_queries:
                self.per_sample_queries.append(0)
            self.per_sample_queries[-1] += n


class CountedClassifier:
    """Wrap a classifier so every predicted text is charged to a ledger.

    A batch of k texts costs k queries. The limit is checked before the
    call goes out and the charge lands after it succeeds, so a retried
    remote call still counts once per successful response.
    """

    def __init__(self, inner, ledger: QueryLedger):
        self.inner = inner
        self.ledger = ledger

    @property
    def class_names(self) -> list[str]:
        return self.inner.class_names

    def predict_proba(self, texts: list[str]) -> list[list[float]]:
        self.ledger.check(len(texts))
        rows = self.inner.predict_proba(texts)
        self.ledger.charge(len(texts))
        return rows

    def predict_proba_uncounted(self, texts: list[str]) -> list[list[float]]:
        """Bypass the ledger (baseline classifications, accuracy passes)."""
        return self.inner.predict_proba(texts)
