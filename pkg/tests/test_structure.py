import random

from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import CANONICAL_TAGS, oracle_format_total, random_tag_text
from rewardstack.structure import (
    FORMAT_REWARD_MAX,
    FORMAT_REWARD_MIN,
    REQUIRED_TAGS,
    format_reward,
    parse_completion,
    serialize_segments,
)

CANONICAL = "<perception>A</perception><think>B</think><answer>C</answer>"

# Segment text that cannot create accidental tag occurrences.
segment_text = st.text(
    alphabet=st.characters(blacklist_characters="<>"), max_size=30
)


def test_parse_well_formed():
    c = parse_completion(CANONICAL)
    assert (c.perception, c.think, c.answer) == ("A", "B", "C")
    assert c.raw == CANONICAL


def test_parse_missing_pair_is_absent():
    c = parse_completion("<perception>A</perception><answer>C</answer>")
    assert (c.perception, c.think, c.answer) == ("A", None, "C")


def test_parse_duplicate_tag_voids_extraction():
    c = parse_completion("<answer>C</answer><answer>D</answer>")
    assert (c.perception, c.think, c.answer) == (None, None, None)


def test_parse_close_before_open_is_absent():
    c = parse_completion("</answer>C<answer>")
    assert c.answer is None


def test_parse_trims_whitespace():
    c = parse_completion("<answer>  spaced out \n</answer>")
    assert c.answer == "spaced out"


def test_segment_independence():
    base = parse_completion(CANONICAL)
    corrupted = parse_completion(
        "<perception>A</perception><think><think>B</think><answer>C</answer>"
    )
    assert corrupted.think is None
    assert corrupted.perception == base.perception
    assert corrupted.answer == base.answer


def test_format_reward_canonical_is_5():
    score = format_reward(CANONICAL)
    assert score.tag_score == 3.0
    assert score.order_score == 1.0
    assert score.boundary_score == 1.0
    assert score.total == 5.0


def test_format_reward_tagless_is_minus_5():
    score = format_reward("just words, no structure")
    assert score.tag_score == -3.0
    assert score.order_score == 0.0
    assert score.boundary_score == -2.0
    assert score.total == -5.0


def test_format_reward_duplicated_close_tag():
    raw = CANONICAL + "</answer>"
    score = format_reward(raw)
    assert score.tag_score == 2.0  # five tags right, one duplicated
    assert score.order_score == 0.0
    assert score.boundary_score == 1.0  # still starts/ends correctly


def test_format_reward_order_requires_no_interleaving():
    raw = "<perception>A<think>B</think></perception><answer>C</answer>"
    score = format_reward(raw)
    assert score.tag_score == 3.0  # every tag occurs once
    assert score.order_score == 0.0  # but not in stage order


def test_format_reward_allows_text_between_blocks():
    raw = "<perception>A</perception> noted <think>B</think><answer>C</answer>"
    assert format_reward(raw).order_score == 1.0


def test_format_reward_boundary_tolerates_whitespace():
    assert format_reward("  \n" + CANONICAL + "\t ").total == 5.0


def test_format_reward_everything_wrong_scores_minus_5():
    # Order failure contributes 0 rather than a penalty, so the attainable
    # minimum is -5.0; the contractual bound stays [-6, 5].
    raw = "x" + "".join(tag * 2 for tag in REQUIRED_TAGS) + "x"
    score = format_reward(raw)
    assert score.tag_score == -3.0
    assert score.order_score == 0.0
    assert score.boundary_score == -2.0
    assert score.total == -5.0
    assert score.total >= FORMAT_REWARD_MIN


def test_matches_brute_force_oracle_on_random_arrangements():
    rng = random.Random(20240817)
    for _ in range(2000):
        text = random_tag_text(rng)
        assert format_reward(text).total == oracle_format_total(text), text


@given(segment_text, segment_text, segment_text)
def test_canonical_serialization_scores_5(p, t, a):
    assert format_reward(serialize_segments(p, t, a)).total == 5.0


@given(segment_text, segment_text, segment_text)
def test_parse_of_canonical_serialization_recovers_segments(p, t, a):
    c = parse_completion(serialize_segments(p, t, a))
    assert (c.perception, c.think, c.answer) == (p.strip(), t.strip(), a.strip())


@given(st.text(max_size=200))
@settings(max_examples=300)
def test_format_total_is_bounded(raw):
    assert FORMAT_REWARD_MIN <= format_reward(raw).total <= FORMAT_REWARD_MAX


@given(st.text(max_size=120))
@settings(max_examples=300)
def test_reparse_idempotence_on_tagfree_segments(raw):
    first = parse_completion(raw)
    # Idempotence is only claimed when extracted segments carry no tag text.
    segments = [first.perception, first.think, first.answer]
    if any(s and any(tag in s for tag in CANONICAL_TAGS) for s in segments):
        return
    again = parse_completion(serialize_segments(*segments))
    assert (again.perception, again.think, again.answer) == tuple(segments)
