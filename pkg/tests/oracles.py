"""Independent brute-force oracles used by the unit and acceptance tests.

Everything here is deliberately written from the definitions, with
different primitives than the library (character scans, subsequence
enumeration, double loops), so agreement is meaningful.
"""

import math
from fractions import Fraction

CANONICAL_TAGS = [
    "<perception>",
    "</perception>",
    "<think>",
    "</think>",
    "<answer>",
    "</answer>",
]


def oracle_format_total(text: str) -> float:
    """Tag existence + stage order + boundary scores, re-derived by hand."""
    tag_score = 0.0
    for tag in CANONICAL_TAGS:
        count = 0
        for i in range(len(text) - len(tag) + 1):
            if text[i : i + len(tag)] == tag:
                count += 1
        tag_score += 0.5 if count == 1 else -0.5

    seen = []
    i = 0
    while i < len(text):
        for tag in CANONICAL_TAGS:
            if text.startswith(tag, i):
                seen.append(tag)
                i += len(tag)
                break
        else:
            i += 1
    order_score = 1.0 if seen == CANONICAL_TAGS else 0.0

    stripped = text.strip()
    boundary = 0.5 if stripped.startswith("<perception>") else -1.0
    boundary += 0.5 if stripped.endswith("</answer>") else -1.0
    return tag_score + order_score + boundary


_FILLERS = [
    "",
    " ",
    "\n",
    "hello there",
    "x",
    "<perc",
    "eption>",
    "<answer",
    "/answer>",
    "<<think>>",
    "...",
    "\t scene \n",
]


def random_tag_text(rng) -> str:
    """A random arrangement of required tags and near-tag filler text."""
    parts = []
    for tag in CANONICAL_TAGS:
        parts.extend([tag] * rng.choice([0, 1, 1, 2]))
    rng.shuffle(parts)
    pieces = []
    for part in parts:
        pieces.append(rng.choice(_FILLERS))
        pieces.append(part)
    pieces.append(rng.choice(_FILLERS))
    return "".join(pieces)


def is_subsequence(sub, seq) -> bool:
    it = iter(seq)
    return all(token in it for token in sub)


def oracle_lcs(a, b) -> int:
    """Longest common subsequence by enumerating every subsequence of a."""
    best = 0
    for mask in range(1 << len(a)):
        sub = [a[i] for i in range(len(a)) if mask >> i & 1]
        if len(sub) > best and is_subsequence(sub, b):
            best = len(sub)
    return best


def oracle_top_k(alpha_decimal: str, n_frames: int) -> int:
    """K = max(1, floor(alpha * N)) in exact rational arithmetic."""
    return max(1, math.floor(Fraction(alpha_decimal) * n_frames))


def oracle_sent_topk(similarity_columns, k: int) -> float:
    """Mean over columns of the mean of the k largest entries (double loop)."""
    per_sentence = []
    for column in similarity_columns:
        ordered = sorted(column, reverse=True)
        per_sentence.append(sum(ordered[:k]) / k)
    return sum(per_sentence) / len(per_sentence)


def oracle_bertscore(candidate_rows, reference_rows) -> tuple[float, float, float]:
    """P/R/F1 from a raw double loop over token pairs."""

    def dot(u, v):
        return sum(x * y for x, y in zip(u, v))

    def norm(u):
        return math.sqrt(sum(x * x for x in u))

    precision_terms = []
    for cand in candidate_rows:
        precision_terms.append(
            max(dot(cand, ref) / (norm(cand) * norm(ref)) for ref in reference_rows)
        )
    recall_terms = []
    for ref in reference_rows:
        recall_terms.append(
            max(dot(cand, ref) / (norm(cand) * norm(ref)) for cand in candidate_rows)
        )
    precision = sum(precision_terms) / len(precision_terms)
    recall = sum(recall_terms) / len(recall_terms)
    f1 = 0.0 if precision + recall <= 0 else 2 * precision * recall / (precision + recall)
    return precision, recall, f1
