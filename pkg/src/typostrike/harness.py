"""Experiment runner: seeded subsampling, budget-grid sweeps, reports.

A run attacks every sampled test text the victim originally classifies
correctly, once per (mode, budget) grid cell. Per-sample random streams
are derived from (seed, mode, max_tries, sample index) - deliberately not
from max_tokens, so enlarging the token budget extends each attack
instead of reshuffling it and final accuracy falls monotonically along
the token axis. Completed cells persist to disk and are skipped when a
run resumes.
"""

from __future__ import annotations

import hashlib
import json
import random
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .attack import AttackBudget, AttackOutcome, exhaustive_attack, word_score_attack
from .classifier import CountedClassifier, QueryLedger, predict, train_naive_bayes
from .errors import CorpusError, TransportError
from .perturb import DEFAULT_ATTACK_KINDS, DEFAULT_EXHAUSTIVE_KINDS, Kind
from .scoring import LabeledCorpus, WordScoreTable, build_score_table
from .text import load_stopwords

__all__ = [
    "ExperimentConfig",
    "CellResult",
    "ExperimentReport",
    "sample_test_set",
    "run_experiment",
    "render_report",
    "rng_for_sample",
]

# Spec'd leading columns, then auxiliary columns (alternate success-rate
# convention over all samples, raw counts).
REPORT_COLUMNS = [
    "mode",
    "max_tokens",
    "max_tries",
    "orig_acc",
    "final_acc",
    "success_pct",
    "avg_queries",
    "success_pct_all",
    "samples",
    "attacked",
    "flipped",
    "total_queries",
]

# Markdown report header labels for the four headline metrics.
METRIC_LABELS = ["Orig. Accuracy", "Attack Success %", "Final Accuracy", "Avg. Queries"]

DEFAULT_SEED = 13


@dataclass
class ExperimentConfig:
    """Everything a sweep needs; mirrors the CLI flag names."""

    train: str
    test: str
    victim: str = "local"  # "local" or an http(s) URL
    modes: list[str] = field(default_factory=lambda: ["normal"])
    max_tokens: list[int] = field(default_factory=lambda: [10])
    max_tries: list[int] = field(default_factory=lambda: [4])
    kinds: list[str] | None = None
    sample_size: int = 500
    seed: int = DEFAULT_SEED
    min_freq: int = 5
    stopwords: str | None = None
    out_dir: str = "results"

    def __post_init__(self) -> None:
        for mode in self.modes:
            if mode not in ("normal", "forgetful", "exhaustive"):
                raise ValueError(f"unknown mode {mode!r}")
        if any(v < 1 for v in self.max_tokens) or any(v < 1 for v in self.max_tries):
            raise ValueError("budget grid values must be >= 1")
        if self.sample_size < 1:
            raise ValueError("sample_size must be >= 1")
        if self.min_freq < 1:
            raise ValueError("min_freq must be >= 1")
        if self.kinds is not None:
            for name in self.kinds:
                Kind(name)  # raises ValueError on unknown kind names

    @classmethod
    def from_dict(cls, obj: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(obj) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**obj)

    @classmethod
    def from_file(cls, path: str | Path) -> "ExperimentConfig":
        try:
            obj = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise CorpusError(f"{path}: config is not valid JSON: {exc}") from exc
        if not isinstance(obj, dict):
            raise CorpusError(f"{path}: config must be a JSON object")
        try:
            return cls.from_dict(obj)
        except (TypeError, ValueError) as exc:
            raise CorpusError(f"{path}: {exc}") from exc

    def config_hash(self) -> str:
        payload = asdict(self)
        payload.pop("out_dir", None)  # output location is not experiment identity
        canonical = json.dumps(payload, sort_keys=True)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]

    def attack_kinds(self, mode: str) -> frozenset[Kind]:
        if self.kinds is not None:
            return frozenset(Kind(name) for name in self.kinds)
        return DEFAULT_EXHAUSTIVE_KINDS if mode == "exhaustive" else DEFAULT_ATTACK_KINDS

    def grid(self) -> list[tuple[str, int, int]]:
        """All (mode, max_tokens, max_tries) cells of the sweep.

        Exhaustive mode has no budget and contributes one cell with
        zeroed budget columns.
        """
        cells: list[tuple[str, int, int]] = []
        for mode in self.modes:
            if mode == "exhaustive":
                cells.append((mode, 0, 0))
            else:
                for mt in self.max_tokens:
                    for mtr in self.max_tries:
                        cells.append((mode, mt, mtr))
        return cells


@dataclass
class CellResult:
    """Aggregated metrics for one (mode, budget) grid cell.

    ``success_pct`` uses the originally-correct samples as denominator
    (the headline convention); ``success_pct_all`` divides by all samples.
    Exhaustive cells carry max_tokens = max_tries = 0 (no budget).
    """

    mode: str
    max_tokens: int
    max_tries: int
    samples: int
    attacked: int
    flipped: int
    orig_acc: float
    final_acc: float
    success_pct: float
    success_pct_all: float
    avg_queries: float
    total_queries: int

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, obj: dict) -> "CellResult":
        return cls(**{f: obj[f] for f in cls.__dataclass_fields__})


@dataclass
class ExperimentReport:
    """All cells of a sweep plus reproducibility metadata.

    Wall-clock timing stays out of this structure on purpose: rendered
    reports must be byte-identical across identical runs.
    """

    cells: list[CellResult]
    seed: int
    config_hash: str
    sample_size: int
    victim: str

    def metadata(self) -> dict:
        return {
            "seed": self.seed,
            "config_hash": self.config_hash,
            "sample_size": self.sample_size,
            "victim": self.victim,
        }


def sample_test_set(corpus: LabeledCorpus, n: int, seed: int) -> LabeledCorpus:
    """Uniform subsample without replacement, original order preserved."""
    if n > len(corpus):
        raise ValueError(f"cannot sample {n} from a corpus of {len(corpus)}")
    indices = sorted(random.Random(seed).sample(range(len(corpus)), n))
    return LabeledCorpus([corpus.samples[i] for i in indices], list(corpus.class_names))


def rng_for_sample(seed: int, mode: str, max_tries: int, sample_index: int) -> random.Random:
    """Per-sample random stream, stable across platforms and token budgets."""
    key = f"{seed}:{mode}:{max_tries}:{sample_index}".encode("utf-8")
    return random.Random(int.from_bytes(hashlib.sha256(key).digest()[:8], "big"))


def _attack_one(
    victim,
    text: str,
    mode: str,
    budget: AttackBudget | None,
    kinds,
    rng: random.Random,
    scores: WordScoreTable | None,
) -> AttackOutcome:
    if mode == "exhaustive":
        return exhaustive_attack(text, victim, kinds)
    return word_score_attack(text, victim, scores, budget, kinds, mode=mode, rng=rng)


def _run_cell(
    config: ExperimentConfig,
    victim,
    scores: WordScoreTable | None,
    sample: LabeledCorpus,
    correct: list[bool],
    mode: str,
    max_tokens: int,
    max_tries: int,
    jobs: int,
) -> CellResult:
    kinds = config.attack_kinds(mode)
    budget = None if mode == "exhaustive" else AttackBudget(max_tokens, max_tries)
    ledger = QueryLedger()
    counted = CountedClassifier(victim, ledger)

    attacked_indices = [i for i, ok in enumerate(correct) if ok]

    def attack(i: int) -> AttackOutcome:
        rng = rng_for_sample(config.seed, mode, max_tries, i)
        return _attack_one(counted, sample.samples[i][0], mode, budget, kinds, rng, scores)

    outcomes: list[AttackOutcome] = []
    if jobs <= 1:
        for i in attacked_indices:
            ledger.start_sample()
            outcomes.append(attack(i))
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(attack, attacked_indices))

    flipped = sum(1 for o in outcomes if o.success)
    samples = len(sample.samples)
    attacked = len(attacked_indices)
    orig_acc = attacked / samples
    final_acc = (attacked - flipped) / samples
    total_queries = ledger.total_queries
    return CellResult(
        mode=mode,
        max_tokens=max_tokens,
        max_tries=max_tries,
        samples=samples,
        attacked=attacked,
        flipped=flipped,
        orig_acc=orig_acc,
        final_acc=final_acc,
        success_pct=100.0 * flipped / attacked if attacked else 0.0,
        success_pct_all=100.0 * flipped / samples,
        avg_queries=total_queries / attacked if attacked else 0.0,
        total_queries=total_queries,
    )


def _cell_path(out_dir: Path, mode: str, max_tokens: int, max_tries: int) -> Path:
    return out_dir / "cells" / f"{mode}_{max_tokens}_{max_tries}.json"


def _load_completed_cell(path: Path, config_hash: str) -> CellResult | None:
    if not path.exists():
        return None
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError:
        return None
    if obj.get("config_hash") != config_hash:
        return None
    return CellResult.from_dict(obj["cell"])


def run_experiment(
    config: ExperimentConfig,
    jobs: int = 1,
    log=None,
) -> ExperimentReport:
    """Run the full sweep described by ``config``.

    Deterministic for the local victim: identical configs yield identical
    reports. Each completed cell is persisted under ``out_dir/cells`` and
    skipped on resume; if the victim dies mid-sweep the completed cells
    survive next to a failure marker.
    """
    log = log if log is not None else (lambda msg: print(msg, file=sys.stderr))
    train = LabeledCorpus.load_jsonl(config.train)
    test = LabeledCorpus.load_jsonl(config.test)
    stopwords = load_stopwords(config.stopwords)
    scores = build_score_table(train, stopwords, config.min_freq)

    if config.victim == "local":
        victim = train_naive_bayes(train)
    else:
        from .service import RemoteClassifier

        victim = RemoteClassifier(config.victim)

    sample = sample_test_set(test, config.sample_size, config.seed)
    originals = predict(victim, [text for text, _ in sample.samples])
    correct = [d.predicted == label for d, (_, label) in zip(originals, sample.samples)]

    out_dir = Path(config.out_dir)
    (out_dir / "cells").mkdir(parents=True, exist_ok=True)
    (out_dir / "FAILED.json").unlink(missing_ok=True)
    config_hash = config.config_hash()

    cells: list[CellResult] = []
    try:
        for mode, mt, mtr in config.grid():
            path = _cell_path(out_dir, mode, mt, mtr)
            cell = _load_completed_cell(path, config_hash)
            if cell is not None:
                log(f"cell {mode} ({mt},{mtr}): reusing completed result")
            else:
                cell = _run_cell(config, victim, scores, sample, correct, mode, mt, mtr, jobs)
                path.write_text(
                    json.dumps({"config_hash": config_hash, "cell": cell.to_dict()}, indent=2)
                    + "\n",
                    encoding="utf-8",
                )
                log(
                    f"cell {mode} ({mt},{mtr}): final_acc={cell.final_acc:.4f} "
                    f"success={cell.success_pct:.1f}% avg_queries={cell.avg_queries:.1f}"
                )
            cells.append(cell)
    except TransportError as exc:
        marker = out_dir / "FAILED.json"
        marker.write_text(
            json.dumps(
                {
                    "config_hash": config_hash,
                    "error": str(exc),
                    "completed_cells": [
                        [c.mode, c.max_tokens, c.max_tries] for c in cells
                    ],
                },
                indent=2,
            )
            + "\n",
            encoding="utf-8",
        )
        raise

    return ExperimentReport(
        cells=cells,
        seed=config.seed,
        config_hash=config_hash,
        sample_size=config.sample_size,
        victim=config.victim,
    )


def _format_value(column: str, value) -> str:
    if isinstance(value, float):
        return f"{value:.4f}"
    return str(value)


def render_report(report: ExperimentReport, fmt: str, path: str | Path) -> Path:
    """Write the report as csv, json or markdown with a stable layout."""
    path = Path(path)
    if fmt == "csv":
        lines = [",".join(REPORT_COLUMNS)]
        for cell in report.cells:
            row = cell.to_dict()
            lines.append(",".join(_format_value(c, row[c]) for c in REPORT_COLUMNS))
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    elif fmt == "json":
        payload = {
            "metadata": report.metadata(),
            "columns": REPORT_COLUMNS,
            "cells": [c.to_dict() for c in report.cells],
        }
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    elif fmt == "markdown":
        header = ["Mode", "Budget"] + METRIC_LABELS
        lines = [
            "| " + " | ".join(header) + " |",
            "|" + "|".join(["---"] * len(header)) + "|",
        ]
        for cell in report.cells:
            budget = f"({cell.max_tokens},{cell.max_tries})" if cell.max_tokens else "-"
            lines.append(
                "| "
                + " | ".join(
                    [
                        cell.mode,
                        budget,
                        f"{100.0 * cell.orig_acc:.1f}%",
                        f"{cell.success_pct:.1f}%",
                        f"{100.0 * cell.final_acc:.1f}%",
                        f"{cell.avg_queries:.1f}",
                    ]
                )
                + " |"
            )
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    return path
