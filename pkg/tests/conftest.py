"""Shared fixtures: synthetic corpora with controlled evidence structure.

The synthetic review corpus is engineered so the Naive Bayes victim's
behaviour under attack is predictable: "strong" words carry ~log(400) of
log-odds for their class, "weak" words ~log(5) for the opposite class and
"neutral" words exactly zero (identical counts in both classes). Reviews
come in three shapes:

    fragile:    1 strong own-class word  + 2 weak opposite words
                -> one edit on the strong word flips the prediction
    cumulative: 2-3 strong own-class words + 1 weak opposite word
                -> only removing several strong words flips it
    hard:       4-6 strong own-class words + 1 weak opposite word

so single-edit attacks (forgetful, exhaustive) can only flip fragile
reviews while the cumulative normal mode can flip everything.
"""

from __future__ import annotations

import random
import string

import pytest

from typostrike.classifier import train_naive_bayes
from typostrike.scoring import LabeledCorpus, build_score_table

CLASS_NAMES = ["neg", "pos"]


def _fresh_word(rng: random.Random, taken: set[str], lo: int = 6, hi: int = 10) -> str:
    while True:
        w = "".join(rng.choice(string.ascii_lowercase) for _ in range(rng.randint(lo, hi)))
        if w not in taken:
            taken.add(w)
            return w


def synthetic_vocab(seed: int = 101):
    """Fixed vocabulary shared by train and test corpora."""
    rng = random.Random(seed)
    taken: set[str] = set()
    strong = [[_fresh_word(rng, taken) for _ in range(12)] for _ in range(2)]
    weak = [[_fresh_word(rng, taken) for _ in range(12)] for _ in range(2)]
    neutral = [_fresh_word(rng, taken) for _ in range(16)]
    return strong, weak, neutral


def synthetic_train_corpus() -> LabeledCorpus:
    """One bulk sample per class with exact word counts.

    strong words x400 in their own class, weak words x4 in their own
    class, neutral words x50 in both classes. Class totals are equal, so
    neutral words score exactly zero.
    """
    strong, weak, neutral = synthetic_vocab()
    samples = []
    for c in range(2):
        words: list[str] = []
        for w in strong[c]:
            words.extend([w] * 400)
        for w in weak[c]:
            words.extend([w] * 4)
        for w in neutral:
            words.extend([w] * 50)
        samples.append((" ".join(words), c))
    return LabeledCorpus(samples, CLASS_NAMES)


def synthetic_reviews(n: int, seed: int) -> LabeledCorpus:
    """n test reviews drawn from the fixed vocabulary."""
    strong, weak, neutral = synthetic_vocab()
    rng = random.Random(seed)
    samples = []
    for _ in range(n):
        c = rng.randrange(2)
        shape = rng.random()
        if shape < 0.18:
            own = rng.sample(strong[c], 1)
            opp = rng.sample(weak[1 - c], 2)
        elif shape < 0.70:
            own = rng.sample(strong[c], rng.randint(2, 3))
            opp = rng.sample(weak[1 - c], 1)
        else:
            own = rng.sample(strong[c], rng.randint(4, 6))
            opp = rng.sample(weak[1 - c], 1)
        words = own + opp + rng.sample(neutral, rng.randint(2, 4))
        rng.shuffle(words)
        samples.append((" ".join(words), c))
    return LabeledCorpus(samples, CLASS_NAMES)


@pytest.fixture(scope="session")
def train_corpus() -> LabeledCorpus:
    return synthetic_train_corpus()


@pytest.fixture(scope="session")
def test_corpus_500() -> LabeledCorpus:
    return synthetic_reviews(500, seed=202)


@pytest.fixture(scope="session")
def nb_victim(train_corpus):
    return train_naive_bayes(train_corpus)


@pytest.fixture(scope="session")
def score_table(train_corpus):
    return build_score_table(train_corpus, frozenset(), min_freq=1)


@pytest.fixture(scope="session")
def toy_vocab_tokens() -> list[str]:
    """Vocabulary for the five-token 'my hovercraft' segmentation."""
    singles = list(string.ascii_lowercase)
    return ["[UNK]", "my", "ho", "##ver", "##cra", "##ft", *singles, *["##" + c for c in singles]]
