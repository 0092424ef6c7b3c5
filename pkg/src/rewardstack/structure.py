"""Structured-completion parsing and the dense format reward.

Completions are expected to look like
``<perception>...</perception><think>...</think><answer>...</answer>``.
Parsing is total: malformed tag pairs yield absent segments, never errors.
"""

from dataclasses import dataclass

PERCEPTION_OPEN = "<perception>"
PERCEPTION_CLOSE = "</perception>"
THINK_OPEN = "<think>"
THINK_CLOSE = "</think>"
ANSWER_OPEN = "<answer>"
ANSWER_CLOSE = "</answer>"

TAG_PAIRS = (
    (PERCEPTION_OPEN, PERCEPTION_CLOSE),
    (THINK_OPEN, THINK_CLOSE),
    (ANSWER_OPEN, ANSWER_CLOSE),
)

REQUIRED_TAGS = tuple(tag for pair in TAG_PAIRS for tag in pair)

FORMAT_REWARD_MIN = -6.0
FORMAT_REWARD_MAX = 5.0


@dataclass(frozen=True)
class Completion:
    """A raw model output and its extracted segments (None when absent)."""

    raw: str
    perception: str | None
    think: str | None
    answer: str | None


@dataclass(frozen=True)
class ReferenceOutput:
    """A reference structured output; only its answer segment is consumed."""

    raw: str
    answer: str | None

    @classmethod
    def from_raw(cls, raw: str) -> "ReferenceOutput":
        return cls(raw=raw, answer=_extract_segment(raw, ANSWER_OPEN, ANSWER_CLOSE))


@dataclass(frozen=True)
class FormatScore:
    tag_score: float
    order_score: float
    boundary_score: float

    @property
    def total(self) -> float:
        return self.tag_score + self.order_score + self.boundary_score


def _extract_segment(raw: str, open_tag: str, close_tag: str) -> str | None:
    """Return the trimmed text between a tag pair, or None.

    Present iff each tag occurs exactly once and the open tag precedes the
    close tag.
    """
    if raw.count(open_tag) != 1 or raw.count(close_tag) != 1:
        return None
    open_pos = raw.index(open_tag)
    close_pos = raw.index(close_tag)
    if close_pos < open_pos:
        return None
    return raw[open_pos + len(open_tag) : close_pos].strip()


def parse_completion(raw: str) -> Completion:
    """Split a raw completion into perception/think/answer segments.

    Each pair is extracted independently, so a malformed think block does
    not void the answer block.
    """
    return Completion(
        raw=raw,
        perception=_extract_segment(raw, PERCEPTION_OPEN, PERCEPTION_CLOSE),
        think=_extract_segment(raw, THINK_OPEN, THINK_CLOSE),
        answer=_extract_segment(raw, ANSWER_OPEN, ANSWER_CLOSE),
    )


def serialize_segments(
    perception: str | None = None,
    think: str | None = None,
    answer: str | None = None,
) -> str:
    """Canonical serialization; absent segments are omitted entirely."""
    parts = []
    if perception is not None:
        parts.append(f"{PERCEPTION_OPEN}{perception}{PERCEPTION_CLOSE}")
    if think is not None:
        parts.append(f"{THINK_OPEN}{think}{THINK_CLOSE}")
    if answer is not None:
        parts.append(f"{ANSWER_OPEN}{answer}{ANSWER_CLOSE}")
    return "".join(parts)


def _tag_occurrences(raw: str) -> list[tuple[int, str]]:
    """All (position, tag) occurrences of required tags, in textual order."""
    found: list[tuple[int, str]] = []
    for tag in REQUIRED_TAGS:
        start = 0
        while True:
            pos = raw.find(tag, start)
            if pos < 0:
                break
            found.append((pos, tag))
            start = pos + 1
    found.sort()
    return found


def format_reward(raw: str) -> FormatScore:
    """Dense format reward: tag existence + stage order + boundary checks.

    Tag existence pays +0.5 per required tag occurring exactly once, -0.5
    otherwise. Order pays +1.0 iff the occurrences of required tags, read
    left to right, are exactly the six canonical tags in stage order (text
    between blocks is fine; any extra or missing required tag breaks it).
    Boundaries pay +0.5 each for starting with the perception open tag and
    ending with the answer close tag (after trimming whitespace), -1.0 each
    otherwise. Total ranges over [-6.0, 5.0].
    """
    counts = {tag: raw.count(tag) for tag in REQUIRED_TAGS}
    tag_score = sum(0.5 if counts[tag] == 1 else -0.5 for tag in REQUIRED_TAGS)

    occurrences = [tag for _, tag in _tag_occurrences(raw)]
    order_score = 1.0 if occurrences == list(REQUIRED_TAGS) else 0.0

    stripped = raw.strip()
    boundary_score = 0.5 if stripped.startswith(PERCEPTION_OPEN) else -1.0
    boundary_score += 0.5 if stripped.endswith(ANSWER_CLOSE) else -1.0

    return FormatScore(
        tag_score=tag_score, order_score=order_score, boundary_score=boundary_score
    )
