"""Attack search procedures: planning, budgets, modes, bookkeeping."""

import json
import random

import pytest

from typostrike.attack import (
    AttackBudget,
    exhaustive_attack,
    plan_targets,
    read_outcomes,
    word_score_attack,
    write_outcomes,
)
from typostrike.classifier import CountedClassifier, QueryLedger, predict
from typostrike.harness import rng_for_sample
from typostrike.perturb import CHARACTER_KINDS, Kind
from typostrike.scoring import WordScoreTable
from typostrike.text import tokenize_words

from conftest import synthetic_reviews
from oracles import damerau_levenshtein


def make_table(scores: dict[str, list[float]], classes=("neg", "pos")) -> WordScoreTable:
    return WordScoreTable(
        scores={w: list(v) for w, v in scores.items()},
        class_names=list(classes),
        min_freq=1,
        stopword_hash="",
        corpus_fingerprint="",
    )


class StubVictim:
    """Binary victim whose class-0 probability is a function of the text."""

    class_names = ["neg", "pos"]

    def __init__(self, conf_fn):
        self.conf_fn = conf_fn

    def predict_proba(self, texts):
        return [[self.conf_fn(t), 1.0 - self.conf_fn(t)] for t in texts]


class TestBudget:
    def test_rejects_non_positive(self):
        with pytest.raises(ValueError):
            AttackBudget(0, 1)
        with pytest.raises(ValueError):
            AttackBudget(1, 0)

    def test_query_bound(self):
        assert AttackBudget(40, 4).max_queries == 160


class TestPlanTargets:
    def test_rank_and_truncate_with_duplicates(self):
        table = make_table({"great": [0.0, 2.0], "plot": [0.0, 0.5]})
        plan = plan_targets("great great plot", table, 1, AttackBudget(2, 1))
        assert [(e.word_index, e.word, e.score) for e in plan] == [
            (0, "great", 2.0),
            (1, "great", 2.0),
        ]

    def test_only_stopwords_means_empty_plan(self):
        table = make_table({"the": [1.0, 1.0], "and": [1.0, 1.0]})
        plan = plan_targets(
            "the and the", table, 0, AttackBudget(5, 1), stopwords=frozenset({"the", "and"})
        )
        assert plan == []

    def test_truncation_noop(self):
        table = make_table({"word": [0.3, 0.0]})
        plan = plan_targets("word unknown", table, 0, AttackBudget(10, 1))
        assert len(plan) == 1

    def test_oov_words_never_targeted(self):
        table = make_table({"known": [0.3, 0.0]})
        plan = plan_targets("known mystery", table, 0, AttackBudget(10, 1))
        assert [e.word for e in plan] == ["known"]

    def test_ties_break_earlier_position(self):
        table = make_table({"a1": [1.0, 0.0], "b2": [1.0, 0.0]})
        plan = plan_targets("b2 a1", table, 0, AttackBudget(2, 1))
        assert [e.word_index for e in plan] == [0, 1]

    def test_lookup_uses_stripped_key(self):
        table = make_table({"movie": [0.7, 0.0]})
        plan = plan_targets("movie.", table, 0, AttackBudget(1, 1))
        assert [e.word for e in plan] == ["movie."]  # surface form kept


class TestWordScoreAttack:
    def test_flip_via_single_edit(self, nb_victim, score_table):
        corpus = synthetic_reviews(60, seed=999)
        fragile = None
        for text, label in corpus.samples:
            # fragile reviews have exactly one strong word: one edit flips
            strongs = [w for w in text.split() if abs(score_table.scores[w][label]) > 3]
            if len(strongs) == 1 and predict(nb_victim, [text])[0].predicted == label:
                fragile = text
                break
        assert fragile is not None
        outcome = word_score_attack(
            fragile, nb_victim, score_table, AttackBudget(1, 4), rng=random.Random(5)
        )
        assert outcome.success
        assert outcome.queries_used <= 4
        assert outcome.final_class != outcome.original_class

    def test_budget_floor_counts_one_query(self, nb_victim, score_table):
        corpus = synthetic_reviews(60, seed=998)
        sturdy = next(
            text
            for text, label in corpus.samples
            if sum(1 for w in text.split() if score_table.scores[w][label] > 3) >= 3
        )
        outcome = word_score_attack(
            sturdy, nb_victim, score_table, AttackBudget(1, 1), rng=random.Random(1)
        )
        assert not outcome.success
        assert outcome.queries_used == 1
        assert outcome.final_class == outcome.original_class

    def test_forgetful_success_is_single_edit(self, nb_victim, score_table):
        corpus = synthetic_reviews(200, seed=42)
        found = 0
        for i, (text, label) in enumerate(corpus.samples):
            outcome = word_score_attack(
                text,
                nb_victim,
                score_table,
                AttackBudget(40, 4),
                mode="forgetful",
                rng=rng_for_sample(7, "forgetful", 4, i),
            )
            if outcome.success:
                found += 1
                retained = [s for s in outcome.steps if s.retained]
                assert len(retained) == 1
                assert outcome.replay_final_text() == outcome.final_text
        assert found > 0

    def test_forgetful_failure_leaves_text_unchanged(self, nb_victim, score_table):
        corpus = synthetic_reviews(100, seed=43)
        checked = 0
        for i, (text, label) in enumerate(corpus.samples):
            outcome = word_score_attack(
                text,
                nb_victim,
                score_table,
                AttackBudget(40, 2),
                mode="forgetful",
                rng=rng_for_sample(8, "forgetful", 2, i),
            )
            if not outcome.success:
                checked += 1
                assert outcome.final_text == outcome.original_text
                assert not any(s.retained for s in outcome.steps)
        assert checked > 0

    def test_forgetful_flips_subset_of_normal(self, nb_victim, score_table):
        """Char-kind attacks with shared seeds: forgetful wins imply normal wins."""
        corpus = synthetic_reviews(120, seed=44)
        budget = AttackBudget(40, 4)
        for i, (text, _) in enumerate(corpus.samples):
            forgetful = word_score_attack(
                text, nb_victim, score_table, budget,
                kinds=CHARACTER_KINDS - {Kind.SUBSTITUTE_KEYBOARD},
                mode="forgetful", rng=rng_for_sample(9, "m", 4, i),
            )
            if not forgetful.success:
                continue
            normal = word_score_attack(
                text, nb_victim, score_table, budget,
                kinds=CHARACTER_KINDS - {Kind.SUBSTITUTE_KEYBOARD},
                mode="normal", rng=rng_for_sample(9, "m", 4, i),
            )
            assert normal.success

    def test_normal_mode_needs_cumulative_edits(self, nb_victim, score_table):
        """Reviews with several strong words: normal flips, forgetful cannot."""
        corpus = synthetic_reviews(200, seed=45)
        budget = AttackBudget(40, 4)
        seen = 0
        for i, (text, label) in enumerate(corpus.samples):
            strongs = sum(1 for w in text.split() if score_table.scores[w][label] > 3)
            if strongs < 2:
                continue
            seen += 1
            forgetful = word_score_attack(
                text, nb_victim, score_table, budget,
                kinds=CHARACTER_KINDS - {Kind.SUBSTITUTE_KEYBOARD},
                mode="forgetful", rng=rng_for_sample(10, "m", 4, i),
            )
            normal = word_score_attack(
                text, nb_victim, score_table, budget,
                kinds=CHARACTER_KINDS - {Kind.SUBSTITUTE_KEYBOARD},
                mode="normal", rng=rng_for_sample(10, "m", 4, i),
            )
            assert not forgetful.success
            assert normal.success
        assert seen >= 20

    def test_budget_soundness_and_replay(self, nb_victim, score_table):
        corpus = synthetic_reviews(80, seed=46)
        for i, (text, _) in enumerate(corpus.samples):
            budget = AttackBudget(1 + i % 7, 1 + i % 4)
            mode = "normal" if i % 2 == 0 else "forgetful"
            outcome = word_score_attack(
                text, nb_victim, score_table, budget,
                mode=mode, rng=rng_for_sample(11, mode, budget.max_tries_per_token, i),
            )
            assert outcome.queries_used <= budget.max_queries
            assert outcome.replay_final_text() == outcome.final_text
            assert outcome.success == (outcome.final_class != outcome.original_class)

    def test_one_edit_per_word_char_kinds(self, nb_victim, score_table):
        """With char kinds, words align 1:1; each moves at most one DL step."""
        corpus = synthetic_reviews(60, seed=47)
        kinds = CHARACTER_KINDS - {Kind.SUBSTITUTE_KEYBOARD}
        for i, (text, _) in enumerate(corpus.samples):
            outcome = word_score_attack(
                text, nb_victim, score_table, AttackBudget(40, 4),
                kinds=kinds, rng=rng_for_sample(12, "n", 4, i),
            )
            before = [w.text for w in tokenize_words(outcome.original_text)]
            after = [w.text for w in tokenize_words(outcome.final_text)]
            assert len(before) == len(after)
            for a, b in zip(before, after):
                assert damerau_levenshtein(a, b) <= 1

    def test_invalid_mode_rejected(self, nb_victim, score_table):
        with pytest.raises(ValueError):
            word_score_attack("x", nb_victim, score_table, AttackBudget(1, 1), mode="best")


class TestRetentionRules:
    def test_no_signal_edit_reverts_even_in_normal_mode(self):
        """Confidence must strictly drop for an edit to stick."""
        table = make_table({"flat": [3.0, 0.0], "word": [1.0, 0.0]})
        victim = StubVictim(lambda t: 0.9)  # nothing ever changes confidence
        outcome = word_score_attack(
            "flat word", victim, table, AttackBudget(2, 4), rng=random.Random(0)
        )
        assert not outcome.success
        assert outcome.final_text == "flat word"
        assert not any(s.retained for s in outcome.steps)

    def test_best_of_tries_is_kept(self):
        """Among non-flipping tries the lowest-confidence one is retained."""
        table = make_table({"pivot": [3.0, 0.0]})

        def conf(text):
            if text == "pivot anchor":
                return 0.9
            # deeper edits (longer diff) score lower; deterministic per text
            return 0.6 + 0.01 * (hash(text) % 20)

        victim = StubVictim(conf)
        outcome = word_score_attack(
            "pivot anchor", victim, table, AttackBudget(1, 4), rng=random.Random(3)
        )
        tried_confs = [s.confidence for s in outcome.steps]
        retained = [s for s in outcome.steps if s.retained]
        assert len(retained) == 1
        assert retained[0].confidence == min(tried_confs)

    def test_retained_merge_consumes_right_word(self):
        table = make_table({"alpha": [3.0, 0.0], "beta": [2.0, 0.0], "gamma": [1.0, 0.0]})
        victim = StubVictim(lambda t: 0.4 + 0.1 * len(t.split()))
        outcome = word_score_attack(
            "alpha beta gamma",
            victim,
            table,
            AttackBudget(3, 1),
            kinds={Kind.MERGE_WORDS},
            rng=random.Random(0),
        )
        assert not outcome.success
        assert outcome.final_text == "alphabeta gamma"
        assert outcome.queries_used == 1  # beta was consumed, gamma has no right word
        assert outcome.replay_final_text() == outcome.final_text

    def test_merge_toward_edited_word_is_banned(self):
        table = make_table({"beta": [2.0, 0.0], "alpha": [1.0, 0.0]})

        def conf(text):
            intact = sum(1 for w in text.split() if w in ("alpha", "beta"))
            return 0.5 + 0.1 * intact

        victim = StubVictim(conf)
        outcome = word_score_attack(
            "alpha beta",
            victim,
            table,
            AttackBudget(2, 10),
            kinds={Kind.DELETE_CHAR, Kind.MERGE_WORDS},
            rng=random.Random(0),
        )
        # beta edited first (higher score); alpha may delete but not merge
        alpha_steps = [s for s in outcome.steps if s.word == "alpha"]
        assert alpha_steps, "alpha should have been tried"
        assert all(s.perturbation.kind is not Kind.MERGE_WORDS for s in alpha_steps)
        before = [w.text for w in tokenize_words(outcome.original_text)]
        after = [w.text for w in tokenize_words(outcome.final_text)]
        assert len(before) == len(after)
        for a, b in zip(before, after):
            assert damerau_levenshtein(a, b) <= 1

    def test_retained_split_shifts_later_targets(self):
        table = make_table({"abcdefgh": [3.0, 0.0], "target": [2.0, 0.0]})
        victim = StubVictim(lambda t: 1.0 - 0.1 * len(t.split()))
        outcome = word_score_attack(
            "abcdefgh target",
            victim,
            table,
            AttackBudget(2, 1),
            kinds={Kind.SPLIT_WORD},
            rng=random.Random(1),
        )
        retained = [s for s in outcome.steps if s.retained]
        assert len(retained) == 2
        assert retained[0].word == "abcdefgh"
        assert retained[1].word == "target"
        assert retained[1].word_index == 2  # shifted right by the first split
        final_words = outcome.final_text.split()
        assert len(final_words) == 4
        assert "".join(final_words[:2]) == "abcdefgh"
        assert "".join(final_words[2:]) == "target"
        assert outcome.replay_final_text() == outcome.final_text


class TestExhaustive:
    def test_no_candidates_for_tiny_text(self):
        victim = StubVictim(lambda t: 0.9)
        outcome = exhaustive_attack("ok", victim)
        assert not outcome.success
        assert outcome.queries_used == 0
        assert outcome.final_text == "ok"

    def test_delete_only_candidate_count(self):
        victim = StubVictim(lambda t: 0.9)
        outcome = exhaustive_attack("film", victim, kinds={Kind.DELETE_CHAR})
        assert outcome.queries_used == 2  # flm, fim

    def test_early_exit_on_first_candidate(self):
        victim = StubVictim(lambda t: 0.9 if t == "film" else 0.1)
        outcome = exhaustive_attack("film", victim, kinds={Kind.DELETE_CHAR})
        assert outcome.success
        assert outcome.queries_used == 1
        assert outcome.final_text == "flm"
        assert outcome.replay_final_text() == outcome.final_text

    def test_success_is_single_edit(self, nb_victim):
        corpus = synthetic_reviews(40, seed=48)
        for text, _ in corpus.samples:
            outcome = exhaustive_attack(text, nb_victim)
            if outcome.success:
                before = [w.text for w in tokenize_words(outcome.original_text)]
                after = [w.text for w in tokenize_words(outcome.final_text)]
                assert len(before) == len(after)
                diffs = [
                    (a, b) for a, b in zip(before, after) if a != b
                ]
                assert len(diffs) == 1
                assert damerau_levenshtein(*diffs[0]) == 1


class TestLedgerIntegration:
    def test_outcome_counts_match_ledger(self, nb_victim, score_table):
        corpus = synthetic_reviews(30, seed=49)
        ledger = QueryLedger()
        counted = CountedClassifier(nb_victim, ledger)
        totals = 0
        for i, (text, _) in enumerate(corpus.samples):
            ledger.start_sample()
            outcome = word_score_attack(
                text, counted, score_table, AttackBudget(5, 2),
                rng=rng_for_sample(13, "n", 2, i),
            )
            totals += outcome.queries_used
            assert ledger.per_sample_queries[-1] == outcome.queries_used
        assert ledger.total_queries == totals


class TestOutcomeSerialization:
    def test_jsonl_roundtrip(self, tmp_path, nb_victim, score_table):
        corpus = synthetic_reviews(5, seed=50)
        outcomes = [
            word_score_attack(
                text, nb_victim, score_table, AttackBudget(3, 2), rng=random.Random(i)
            )
            for i, (text, _) in enumerate(corpus.samples)
        ]
        path = tmp_path / "outcomes.jsonl"
        write_outcomes(outcomes, path)
        again = read_outcomes(path)
        assert [o.to_dict() for o in again] == [o.to_dict() for o in outcomes]
        for line in path.read_text().splitlines():
            obj = json.loads(line)
            assert set(obj) == {
                "original_text", "final_text", "original_class", "final_class",
                "success", "queries_used", "steps", "mode",
            }
