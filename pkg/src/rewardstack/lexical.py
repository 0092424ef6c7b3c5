"""Lexical overlap machinery behind the copy penalty.

Detects reasoning sentences that lexically copy the generated answer via
exact n-gram overlap and answer-recall ROUGE-L, then removes them and
charges a penalty equal to the flagged fraction. No semantic or paraphrase
matching on purpose: reasoning is allowed to be *about* the answer, just
not a surface copy of it.
"""

import re
import unicodedata
from dataclasses import dataclass

_TAG_RE = re.compile(r"<[^<>]*>")

_SENTENCE_TERMINATORS = frozenset(".!?")


def split_sentences(text: str) -> list[str]:
    """Deterministic sentence split on newlines and '.', '!', '?'.

    Terminator runs stay attached to their sentence; fragments are trimmed
    and empty ones dropped. Order is preserved.
    """
    sentences: list[str] = []
    buf: list[str] = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            _flush(buf, sentences)
            i += 1
        elif ch in _SENTENCE_TERMINATORS:
            while i < n and text[i] in _SENTENCE_TERMINATORS:
                buf.append(text[i])
                i += 1
            _flush(buf, sentences)
        else:
            buf.append(ch)
            i += 1
    _flush(buf, sentences)
    return sentences


def _flush(buf: list[str], out: list[str]) -> None:
    fragment = "".join(buf).strip()
    buf.clear()
    if fragment:
        out.append(fragment)


def _is_punctuation(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def normalize(text: str) -> list[str]:
    """Lowercase, strip <...> tags, drop punctuation, split on whitespace."""
    text = text.lower()
    text = _TAG_RE.sub(" ", text)
    text = "".join(" " if _is_punctuation(ch) else ch for ch in text)
    return text.split()


def ngrams(tokens: list[str], n: int) -> set[tuple[str, ...]]:
    """Exact n-gram set; empty when the sequence is shorter than n."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return {tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1)}


def ngram_overlap(a: list[str], b: list[str], n: int) -> bool:
    """True iff the exact n-gram sets of a and b intersect."""
    grams_a = ngrams(a, n)
    if not grams_a:
        return False
    return not grams_a.isdisjoint(ngrams(b, n))


def lcs_len(a: list[str], b: list[str]) -> int:
    """Longest-common-subsequence length over tokens (O(len(a)*len(b)))."""
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for token_a in a:
        cur = [0]
        for j, token_b in enumerate(b, start=1):
            if token_a == token_b:
                cur.append(prev[j - 1] + 1)
            else:
                cur.append(max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def answer_recall_rouge_l(sentence: list[str], answer: list[str]) -> float:
    """LCS(sentence, answer) / max(1, |answer|)."""
    return lcs_len(sentence, answer) / max(1, len(answer))


@dataclass(frozen=True)
class CueThresholds:
    """Recall thresholds for the softer cue conditions (strict >)."""

    tau_low: float = 0.5
    tau_high: float = 0.8

    def __post_init__(self) -> None:
        if not 0.0 <= self.tau_low <= self.tau_high <= 1.0:
            raise ValueError(
                f"need 0 <= tau_low <= tau_high <= 1, got ({self.tau_low}, {self.tau_high})"
            )


def detect_cue(sentence: list[str], answer: list[str], th: CueThresholds) -> bool:
    """Answer-cue test: exact 4-gram, 3-gram + recall > tau_low, or recall > tau_high."""
    if ngram_overlap(sentence, answer, 4):
        return True
    recall = answer_recall_rouge_l(sentence, answer)
    if ngram_overlap(sentence, answer, 3) and recall > th.tau_low:
        return True
    return recall > th.tau_high


@dataclass(frozen=True)
class CleanResult:
    """Outcome of answer-cue cleaning over a reasoning block.

    kept_sentences are the unflagged sentences in their original surface
    form; copy_penalty is the flagged fraction (1.0 when there were no
    sentences at all).
    """

    kept_sentences: list[str]
    flags: list[int]
    copy_penalty: float


def clean_and_penalize(
    reasoning: str | None,
    answer: str | None,
    th: CueThresholds,
) -> CleanResult:
    """Flag answer-copying reasoning sentences and compute the copy penalty.

    Sentences use the same splitter as the visual reward; the cue test runs
    on normalized tokens but kept sentences keep their surface form. An
    absent answer means there is nothing to copy, so no sentence is flagged
    (the penalty is still 1.0 when the reasoning itself is empty).
    """
    sentences = split_sentences(reasoning) if reasoning else []
    if not sentences:
        return CleanResult(kept_sentences=[], flags=[], copy_penalty=1.0)

    answer_tokens = normalize(answer) if answer else []
    flags = [
        1 if detect_cue(normalize(sentence), answer_tokens, th) else 0
        for sentence in sentences
    ]
    kept = [s for s, flag in zip(sentences, flags) if flag == 0]
    return CleanResult(
        kept_sentences=kept,
        flags=flags,
        copy_penalty=sum(flags) / len(flags),
    )
