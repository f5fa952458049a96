"""Command-line entry point: one subcommand per pipeline stage.

    score            build a word-score table from a labeled corpus
    attack           attack texts against a local or remote victim
    evaluate         run a budget-grid sweep and write reports + figure
    perturb-dataset  emit a boundary-labeled, perturbed training set
    train-nb         fit the reference Naive Bayes victim
    serve            expose a trained victim over HTTP

Exit codes: 0 success, 1 domain error (bad files, unreachable victim),
2 usage error. Every flag can also be given in a JSON --config file; an
explicit flag wins over the config value.
"""

from __future__ import annotations

import argparse
import json
import os
import random
import sys
from pathlib import Path

from .attack import AttackBudget, exhaustive_attack, word_score_attack, write_outcomes
from .boundaries import PerturbationPolicy, WordPieceVocab, emit_augmented_dataset
from .classifier import NaiveBayesModel, train_naive_bayes
from .errors import TypostrikeError
from .harness import DEFAULT_SEED, ExperimentConfig, render_report, run_experiment
from .perturb import DEFAULT_ATTACK_KINDS, DEFAULT_EXHAUSTIVE_KINDS, Kind
from .scoring import LabeledCorpus, WordScoreTable, build_score_table
from .service import VICTIM_URL_ENV, RemoteClassifier, serve
from .text import load_stopwords, normalize

__all__ = ["main", "entrypoint"]


def _parse_kinds(parser: argparse.ArgumentParser, value: str) -> list[str]:
    names = [part.strip() for part in value.split(",") if part.strip()]
    if not names:
        parser.error("--kinds needs at least one kind")
    for name in names:
        try:
            Kind(name)
        except ValueError:
            valid = ", ".join(k.value for k in Kind)
            parser.error(f"unknown kind {name!r} (valid: {valid})")
    return names


def _parse_int_list(parser: argparse.ArgumentParser, flag: str, value: str) -> list[int]:
    try:
        items = [int(part) for part in value.split(",") if part.strip()]
    except ValueError:
        parser.error(f"{flag} expects a comma-separated list of integers")
    if not items or any(v < 1 for v in items):
        parser.error(f"{flag} values must be integers >= 1")
    return items


def _load_config_file(parser: argparse.ArgumentParser, path: str | None) -> dict:
    if path is None:
        return {}
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise
    except json.JSONDecodeError as exc:
        parser.error(f"--config {path}: not valid JSON: {exc}")
    if not isinstance(obj, dict):
        parser.error(f"--config {path}: expected a JSON object")
    return obj


def _resolve(args: argparse.Namespace, config: dict, key: str, default=None):
    """Flag value if given, else config-file value, else default."""
    value = getattr(args, key, None)
    if value is not None:
        return value
    if key in config:
        return config[key]
    return default


def _pick_victim(parser, args, config):
    """Build the victim classifier from --victim-url/--model/--train flags."""
    url = _resolve(args, config, "victim_url") or os.environ.get(VICTIM_URL_ENV)
    model_path = _resolve(args, config, "model")
    train_path = _resolve(args, config, "train")
    if getattr(args, "victim_local", False) or model_path or train_path:
        if model_path:
            return NaiveBayesModel.load(model_path)
        if train_path:
            return train_naive_bayes(LabeledCorpus.load_jsonl(train_path))
        parser.error("--victim-local needs --model or --train")
    if url:
        return RemoteClassifier(url)
    parser.error(
        f"no victim given: use --victim-url, --victim-local with --model/--train, "
        f"or set {VICTIM_URL_ENV}"
    )


def _iter_attack_texts(args, parser) -> list[str]:
    if args.text is not None:
        return [args.text]
    if args.input is None:
        parser.error("attack needs --text or --input")
    texts = []
    with open(args.input, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if line.lstrip().startswith("{"):
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError:
                    texts.append(line)
                    continue
                if "text" in obj:
                    texts.append(str(obj["text"]))
                continue
            texts.append(line)
    return texts


def cmd_score(args, parser) -> int:
    config = _load_config_file(parser, args.config)
    min_freq = _resolve(args, config, "min_freq", 5)
    if min_freq < 1:
        parser.error("--min-freq must be >= 1")
    corpus = LabeledCorpus.load_jsonl(_require(parser, args, config, "corpus"))
    stopwords = load_stopwords(_resolve(args, config, "stopwords"))
    table = build_score_table(corpus, stopwords, min_freq)
    out = _require(parser, args, config, "out")
    table.save(out)
    print(f"wrote {len(table.scores)} words x {table.num_classes} classes to {out}")
    return 0


def cmd_attack(args, parser) -> int:
    config = _load_config_file(parser, args.config)
    mode = _resolve(args, config, "mode", "normal")
    seed = _resolve(args, config, "seed", DEFAULT_SEED)
    victim = _pick_victim(parser, args, config)
    kinds_value = _resolve(args, config, "kinds")
    if kinds_value:
        kinds = frozenset(Kind(k) for k in kinds_value)
    else:
        kinds = DEFAULT_EXHAUSTIVE_KINDS if mode == "exhaustive" else DEFAULT_ATTACK_KINDS

    scores = None
    if mode != "exhaustive":
        scores_path = _require(parser, args, config, "scores")
        scores = WordScoreTable.load(scores_path)

    budget = AttackBudget(
        _resolve(args, config, "max_tokens", 10),
        _resolve(args, config, "max_tries", 4),
    )
    texts = _iter_attack_texts(args, parser)

    outcomes = []
    for i, text in enumerate(texts):
        if mode == "exhaustive":
            outcome = exhaustive_attack(normalize(text), victim, kinds)
        else:
            rng = random.Random(seed + i)
            outcome = word_score_attack(
                normalize(text), victim, scores, budget, kinds, mode=mode, rng=rng
            )
        outcomes.append(outcome)

    if args.out:
        write_outcomes(outcomes, args.out)
        flips = sum(1 for o in outcomes if o.success)
        print(f"attacked {len(outcomes)} texts, {flips} flips -> {args.out}")
    else:
        for outcome in outcomes:
            print(json.dumps(outcome.to_dict(), ensure_ascii=False))
    return 0


def cmd_evaluate(args, parser) -> int:
    config = _load_config_file(parser, args.config)
    merged = dict(config)
    jobs = args.jobs if args.jobs is not None else int(merged.pop("jobs", 1))
    merged.pop("no_figure", None)
    for key in (
        "train",
        "test",
        "sample_size",
        "seed",
        "min_freq",
        "stopwords",
        "out_dir",
    ):
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    if args.victim_url:
        merged["victim"] = args.victim_url
    elif args.victim_local:
        merged["victim"] = "local"
    if args.modes is not None:
        merged["modes"] = args.modes
    if args.max_tokens is not None:
        merged["max_tokens"] = args.max_tokens
    if args.max_tries is not None:
        merged["max_tries"] = args.max_tries
    if args.kinds is not None:
        merged["kinds"] = args.kinds

    try:
        experiment = ExperimentConfig.from_dict(merged)
    except (TypeError, ValueError) as exc:
        parser.error(str(exc))

    report = run_experiment(experiment, jobs=jobs)
    out_dir = Path(experiment.out_dir)
    csv_path = render_report(report, "csv", out_dir / "report.csv")
    render_report(report, "json", out_dir / "report.json")
    render_report(report, "markdown", out_dir / "report.md")
    written = [str(csv_path), str(out_dir / "report.json"), str(out_dir / "report.md")]
    if not args.no_figure:
        from .figures import render_budget_sweep

        figure = render_budget_sweep(report, out_dir / "budget_sweep.png")
        if figure is not None:
            written.append(str(figure))
    print("wrote " + ", ".join(written))
    return 0


def cmd_perturb_dataset(args, parser) -> int:
    config = _load_config_file(parser, args.config)
    corpus = LabeledCorpus.load_jsonl(_require(parser, args, config, "corpus"))
    vocab = WordPieceVocab.from_file(_require(parser, args, config, "vocab"))
    probability = _resolve(args, config, "probability", 0.5)
    if not 0.0 <= probability <= 1.0:
        parser.error("--probability must be in [0, 1]")
    kinds_value = _resolve(args, config, "kinds")
    weights = _parse_kind_weights(parser, kinds_value)
    seed = _resolve(args, config, "seed", DEFAULT_SEED)
    out = _require(parser, args, config, "out")
    policy = PerturbationPolicy(probability, weights)
    texts = (normalize(text) for text, _ in corpus.samples)
    count = emit_augmented_dataset(texts, vocab, policy, random.Random(seed), out)
    print(f"wrote {count} records to {out}")
    return 0


def _parse_kind_weights(parser, value) -> dict[Kind, float]:
    """Parse 'insert=1,delete=2' (bare names weigh 1). None -> all kinds."""
    if value is None:
        return {kind: 1.0 for kind in Kind if kind is not Kind.SUBSTITUTE_KEYBOARD}
    if isinstance(value, dict):  # from a config file
        return {Kind(k): float(w) for k, w in value.items()}
    weights: dict[Kind, float] = {}
    for part in str(value).split(","):
        part = part.strip()
        if not part:
            continue
        name, _, weight = part.partition("=")
        try:
            kind = Kind(name.strip())
        except ValueError:
            valid = ", ".join(k.value for k in Kind)
            parser.error(f"unknown kind {name!r} (valid: {valid})")
        weights[kind] = float(weight) if weight else 1.0
    if not weights:
        parser.error("--kinds needs at least one kind")
    return weights


def cmd_train_nb(args, parser) -> int:
    config = _load_config_file(parser, args.config)
    corpus = LabeledCorpus.load_jsonl(_require(parser, args, config, "corpus"))
    model = train_naive_bayes(corpus)
    out = _require(parser, args, config, "out")
    model.save(out)
    print(f"trained on {len(corpus)} samples, {len(model.vocabulary)} words -> {out}")
    return 0


def cmd_serve(args, parser) -> int:
    config = _load_config_file(parser, args.config)
    model_path = _resolve(args, config, "model")
    train_path = _resolve(args, config, "train")
    if model_path:
        model = NaiveBayesModel.load(model_path)
    elif train_path:
        model = train_naive_bayes(LabeledCorpus.load_jsonl(train_path))
    else:
        parser.error("serve needs --model or --train")
    serve(model, _resolve(args, config, "bind", "127.0.0.1:8000"))
    return 0


def _require(parser, args, config, key: str):
    value = _resolve(args, config, key)
    if value is None:
        parser.error(f"--{key.replace('_', '-')} is required (flag or config file)")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="typostrike",
        description="Adversarial misspelling attacks and perturbation tooling "
        "for black-box text classifiers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="JSON config file mirroring the flag names")
        p.add_argument("--seed", type=int, help=f"random seed (default {DEFAULT_SEED})")

    p_score = sub.add_parser("score", help="build a word-score table from a corpus")
    add_common(p_score)
    p_score.add_argument("--corpus", help="labeled corpus (JSON-lines)")
    p_score.add_argument("--stopwords", help="stop-word file (default: bundled English)")
    p_score.add_argument("--min-freq", dest="min_freq", type=int, help="minimum total frequency (default 5)")
    p_score.add_argument("--out", help="output score-table path")

    p_attack = sub.add_parser("attack", help="attack texts against a victim")
    add_common(p_attack)
    p_attack.add_argument("--text", help="single text to attack")
    p_attack.add_argument("--input", help="file of texts (plain lines or JSON-lines with a 'text' field)")
    p_attack.add_argument("--scores", help="score-table file from the score stage")
    p_attack.add_argument("--victim-url", dest="victim_url", help=f"remote victim URL (default ${VICTIM_URL_ENV})")
    p_attack.add_argument("--victim-local", dest="victim_local", action="store_true", help="use a local NB victim")
    p_attack.add_argument("--model", help="local NB model file (with --victim-local)")
    p_attack.add_argument("--train", help="train a local NB victim from this corpus")
    p_attack.add_argument("--max-tokens", dest="max_tokens", type=int, help="words to perturb at most (default 10)")
    p_attack.add_argument("--max-tries", dest="max_tries", type=int, help="tries per word (default 4)")
    p_attack.add_argument("--mode", choices=["normal", "forgetful", "exhaustive"], help="attack mode")
    p_attack.add_argument("--kinds", type=lambda v: _parse_kinds(p_attack, v), help="comma list of edit kinds")
    p_attack.add_argument("--out", help="write outcomes as JSON-lines here (default stdout)")

    p_eval = sub.add_parser("evaluate", help="run a budget-grid sweep")
    add_common(p_eval)
    p_eval.add_argument("--train", help="training corpus (JSON-lines)")
    p_eval.add_argument("--test", help="test corpus (JSON-lines)")
    p_eval.add_argument("--victim-url", dest="victim_url", help="remote victim URL")
    p_eval.add_argument("--victim-local", dest="victim_local", action="store_true", help="use the local NB victim")
    p_eval.add_argument("--modes", type=lambda v: _parse_modes(p_eval, v), help="comma list of modes")
    p_eval.add_argument("--max-tokens", dest="max_tokens", type=lambda v: _parse_int_list(p_eval, "--max-tokens", v), help="comma list of token budgets")
    p_eval.add_argument("--max-tries", dest="max_tries", type=lambda v: _parse_int_list(p_eval, "--max-tries", v), help="comma list of try budgets")
    p_eval.add_argument("--kinds", type=lambda v: _parse_kinds(p_eval, v), help="comma list of edit kinds")
    p_eval.add_argument("--sample-size", dest="sample_size", type=int, help="test subsample size")
    p_eval.add_argument("--min-freq", dest="min_freq", type=int, help="score-table frequency filter")
    p_eval.add_argument("--stopwords", help="stop-word file")
    p_eval.add_argument("--out-dir", dest="out_dir", help="report directory")
    p_eval.add_argument("--jobs", type=int, help="parallel attacks per cell (default 1)")
    p_eval.add_argument("--no-figure", action="store_true", help="skip the budget-sweep PNG")

    p_pd = sub.add_parser("perturb-dataset", help="emit a boundary-labeled perturbed dataset")
    add_common(p_pd)
    p_pd.add_argument("--corpus", help="labeled corpus (JSON-lines); labels are ignored")
    p_pd.add_argument("--vocab", help="WordPiece vocabulary file, one token per line")
    p_pd.add_argument("--probability", type=float, help="per-sentence perturbation probability (default 0.5)")
    p_pd.add_argument("--kinds", help="kind weights, e.g. 'insert=1,delete=2,split=0.5'")
    p_pd.add_argument("--out", help="output JSON-lines dataset")

    p_train = sub.add_parser("train-nb", help="train the reference NB victim")
    add_common(p_train)
    p_train.add_argument("--corpus", help="labeled corpus (JSON-lines)")
    p_train.add_argument("--out", help="output model file")

    p_serve = sub.add_parser("serve", help="serve a victim over HTTP")
    add_common(p_serve)
    p_serve.add_argument("--model", help="NB model file from train-nb")
    p_serve.add_argument("--train", help="corpus to train a fresh victim from")
    p_serve.add_argument("--bind", help="host:port to bind (default 127.0.0.1:8000)")

    p_score.set_defaults(func=cmd_score)
    p_attack.set_defaults(func=cmd_attack)
    p_eval.set_defaults(func=cmd_evaluate)
    p_pd.set_defaults(func=cmd_perturb_dataset)
    p_train.set_defaults(func=cmd_train_nb)
    p_serve.set_defaults(func=cmd_serve)
    return parser


def _parse_modes(parser, value: str) -> list[str]:
    modes = [part.strip() for part in value.split(",") if part.strip()]
    for mode in modes:
        if mode not in ("normal", "forgetful", "exhaustive"):
            parser.error(f"unknown mode {mode!r}")
    return modes


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, parser)
    except TypostrikeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
