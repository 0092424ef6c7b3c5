import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import oracle_lcs
from rewardstack.lexical import (
    CleanResult,
    CueThresholds,
    answer_recall_rouge_l,
    clean_and_penalize,
    detect_cue,
    lcs_len,
    ngram_overlap,
    normalize,
    split_sentences,
)

tokens_st = st.lists(st.sampled_from(["a", "b", "c"]), max_size=6)


class TestSplitSentences:
    def test_two_terminators(self):
        assert split_sentences("A dark hall. Two men argue!") == [
            "A dark hall.",
            "Two men argue!",
        ]

    def test_empty(self):
        assert split_sentences("") == []

    def test_no_terminator(self):
        assert split_sentences("no terminator") == ["no terminator"]

    def test_newline_split(self):
        assert split_sentences("first line\nsecond line") == ["first line", "second line"]

    def test_terminator_run_stays_attached(self):
        assert split_sentences("Really?! Yes...") == ["Really?!", "Yes..."]

    def test_whitespace_only(self):
        assert split_sentences("  \n \t ") == []


class TestNormalize:
    def test_tags_case_punctuation(self):
        assert normalize("<think>He RAN, fast!</think>") == ["he", "ran", "fast"]

    def test_empty(self):
        assert normalize("") == []

    def test_apostrophe_splits_contractions(self):
        assert normalize("don't stop") == ["don", "t", "stop"]

    def test_unicode_punctuation(self):
        assert normalize("wait—go¿now?") == ["wait", "go", "now"]

    @given(st.text(max_size=80))
    @settings(max_examples=200)
    def test_idempotent_at_string_level(self, text):
        once = normalize(text)
        assert normalize(" ".join(once)) == once


class TestNgramOverlap:
    def test_shared_4gram(self):
        assert ngram_overlap(["x", "y", "z", "w"], ["p", "x", "y", "z", "w", "q"], 4)

    def test_too_short(self):
        assert not ngram_overlap(["x", "y"], ["x", "y"], 4)

    def test_order_matters(self):
        assert not ngram_overlap(["x", "y", "z"], ["z", "y", "x"], 3)

    def test_invalid_n(self):
        with pytest.raises(ValueError):
            ngram_overlap(["x"], ["x"], 0)


class TestLcs:
    def test_identity(self):
        assert lcs_len(["the", "cat", "sat"], ["the", "cat", "sat"]) == 3

    def test_empty(self):
        assert lcs_len([], ["x"]) == 0

    def test_small_case(self):
        assert lcs_len(["a", "b", "c", "d"], ["b", "x", "d"]) == 2

    @given(tokens_st, tokens_st)
    @settings(max_examples=300)
    def test_matches_enumeration_oracle(self, a, b):
        assert lcs_len(a, b) == oracle_lcs(a, b)


class TestAnswerRecall:
    def test_full_recall(self):
        assert answer_recall_rouge_l(["the", "cat", "sat", "down"], ["the", "cat", "sat"]) == 1.0

    def test_empty_answer_clamps_denominator(self):
        assert answer_recall_rouge_l(["anything"], []) == 0.0

    def test_disjoint(self):
        assert answer_recall_rouge_l(["a", "b"], ["c", "d"]) == 0.0

    @given(tokens_st, tokens_st)
    def test_bounds_and_subsequence_case(self, sentence, answer):
        value = answer_recall_rouge_l(sentence, answer)
        assert 0.0 <= value <= 1.0
        if answer and lcs_len(sentence, answer) == len(answer):
            assert value == 1.0


class TestDetectCue:
    th = CueThresholds()

    def test_four_gram_alone(self):
        answer = [f"w{i}" for i in range(20)]
        sentence = answer[3:7] + ["junk1", "junk2"]
        assert answer_recall_rouge_l(sentence, answer) <= 0.5
        assert detect_cue(sentence, answer, self.th)

    def test_three_gram_with_recall(self):
        answer = [f"w{i}" for i in range(10)]
        # 3-gram w0 w1 w2 plus enough isolated matches for recall 0.6
        sentence = answer[0:3] + ["x", answer[4], "y", answer[6], "z", answer[8]]
        assert ngram_overlap(sentence, answer, 3)
        assert not ngram_overlap(sentence, answer, 4)
        assert answer_recall_rouge_l(sentence, answer) == 0.6
        assert detect_cue(sentence, answer, self.th)

    def test_recall_above_high_threshold(self):
        answer = [f"w{i}" for i in range(10)]
        sentence = [t for i, t in enumerate(answer) if i != 4]
        sentence = [x for pair in zip(sentence, ["j"] * len(sentence)) for x in pair]
        assert not ngram_overlap(sentence, answer, 3)
        assert answer_recall_rouge_l(sentence, answer) == 0.9
        assert detect_cue(sentence, answer, self.th)

    def test_boundaries_are_strict(self):
        answer = [f"w{i}" for i in range(10)]
        at_low = [x for pair in zip(answer[:5], "jjjjj") for x in pair]
        assert answer_recall_rouge_l(at_low, answer) == 0.5
        assert not detect_cue(at_low, answer, self.th)
        at_high = [x for pair in zip(answer[:8], "jjjjjjjj") for x in pair]
        assert answer_recall_rouge_l(at_high, answer) == 0.8
        assert not detect_cue(at_high, answer, self.th)

    def test_thresholds_validated(self):
        with pytest.raises(ValueError):
            CueThresholds(tau_low=0.9, tau_high=0.8)


class TestCleanAndPenalize:
    th = CueThresholds()

    def test_absent_reasoning(self):
        result = clean_and_penalize(None, "an answer", self.th)
        assert result == CleanResult(kept_sentences=[], flags=[], copy_penalty=1.0)

    def test_whitespace_reasoning_counts_as_empty(self):
        assert clean_and_penalize("   \n ", "an answer", self.th).copy_penalty == 1.0

    def test_one_of_four_flagged(self):
        answer = "the dragon sleeps in the deep cave tonight"
        reasoning = (
            "Clouds gather slowly. "
            "Birds scatter east. "
            "The dragon sleeps in the deep cave tonight. "
            "Rain will come."
        )
        result = clean_and_penalize(reasoning, answer, self.th)
        assert result.flags == [0, 0, 1, 0]
        assert result.copy_penalty == 0.25
        assert result.kept_sentences == [
            "Clouds gather slowly.",
            "Birds scatter east.",
            "Rain will come.",
        ]

    def test_verbatim_copy_everywhere(self):
        answer = "we rest here tonight"
        reasoning = "We rest here tonight. We rest here tonight!"
        result = clean_and_penalize(reasoning, answer, self.th)
        assert result.copy_penalty == 1.0
        assert result.kept_sentences == []

    def test_empty_answer_flags_nothing(self):
        result = clean_and_penalize("One thought. Another thought.", None, self.th)
        assert result.flags == [0, 0]
        assert result.copy_penalty == 0.0
        result = clean_and_penalize("One thought. Another thought.", "  ", self.th)
        assert result.copy_penalty == 0.0

    def test_penalty_monotone_in_flagged_count(self):
        answer = "alpha beta gamma delta"
        neutral = "Nothing shared here."
        copying = "Alpha beta gamma delta."
        penalties = []
        for flagged in range(4):
            sentences = [copying] * flagged + [neutral] * (4 - flagged)
            penalties.append(clean_and_penalize(" ".join(sentences), answer, self.th).copy_penalty)
        assert penalties == sorted(penalties)
        assert penalties[0] == 0.0 and penalties[-1] == 0.75
