"""typostrike: adversarial misspellings for black-box text classifiers.

The pipeline in one breath: build a per-class word-score table from a
labeled corpus, rank a text's words by their score for the victim's
predicted class, and perturb them under a hard query budget until the
prediction flips. The same constrained edits double as a training-data
augmenter that keeps per-character subword-boundary labels consistent.
"""

from .attack import (
    AttackBudget,
    AttackOutcome,
    StepRecord,
    TargetWord,
    exhaustive_attack,
    plan_targets,
    word_score_attack,
)
from .boundaries import (
    BoundaryLabeledText,
    PerturbationPolicy,
    WordPieceVocab,
    emit_augmented_dataset,
    label_boundaries,
    perturb_with_relabel,
    wordpiece_tokenize,
)
from .classifier import (
    ClassDistribution,
    CountedClassifier,
    NaiveBayesModel,
    QueryLedger,
    predict,
    train_naive_bayes,
)
from .errors import (
    BudgetExhaustedError,
    CorpusError,
    EmptyClassError,
    IllegalPerturbationError,
    MalformedResponseError,
    TransportError,
    TypostrikeError,
    UnknownWordError,
)
from .harness import (
    ExperimentConfig,
    ExperimentReport,
    render_report,
    run_experiment,
    sample_test_set,
)
from .perturb import (
    DEFAULT_ATTACK_KINDS,
    DEFAULT_EXHAUSTIVE_KINDS,
    Kind,
    Perturbation,
    QwertyMap,
    applicable_perturbations,
    apply,
    default_qwerty,
    sample_perturbation,
)
from .scoring import (
    LabeledCorpus,
    WordScoreTable,
    build_score_table,
    count_frequencies,
    word_score,
)
from .service import PredictionServer, RemoteClassifier, serve
from .text import WordSpan, load_stopwords, normalize, tokenize_words

__version__ = "0.1.0"
