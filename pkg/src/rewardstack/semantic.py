"""Semantic answer reward: greedy token-matching precision/recall/F1.

Token embeddings come from the provider (the encoder owns tokenization);
the reward is the F1 clipped to [0, 1]. No idf weighting and no baseline
rescaling, by design. Either side empty means reward 0.
"""

from dataclasses import dataclass

import numpy as np

from .embeddings import normalize_rows


@dataclass(frozen=True)
class TokenEmbeddings:
    """One embedding row per token; rows are unit-norm."""

    tokens: list[str]
    vectors: np.ndarray

    def __post_init__(self) -> None:
        if len(self.tokens) < 1:
            raise ValueError("TokenEmbeddings needs at least one token")
        if self.vectors.ndim != 2 or self.vectors.shape[0] != len(self.tokens):
            raise ValueError(
                f"vector rows {self.vectors.shape} != token count {len(self.tokens)}"
            )

    @classmethod
    def from_provider(cls, text: str, provider) -> "TokenEmbeddings":
        tokens, matrix = provider.embed_tokens(text)
        return cls(tokens=tokens, vectors=normalize_rows(matrix, "token embeddings"))


@dataclass(frozen=True)
class PrfScore:
    precision: float
    recall: float

    @property
    def f1(self) -> float:
        denom = self.precision + self.recall
        if denom <= 0.0:
            return 0.0
        return 2.0 * self.precision * self.recall / denom


def bertscore_prf(candidate: TokenEmbeddings, reference: TokenEmbeddings) -> PrfScore:
    """Greedy-match P/R over the token cosine matrix.

    Precision: mean over candidate tokens of the best reference match;
    recall: mean over reference tokens of the best candidate match.
    """
    similarity = candidate.vectors @ reference.vectors.T
    precision = float(np.mean(np.max(similarity, axis=1)))
    recall = float(np.mean(np.max(similarity, axis=0)))
    return PrfScore(precision=precision, recall=recall)


def semantic_reward(answer: str | None, ref_answer: str | None, provider) -> float:
    """Clipped F1 between generated and reference answers (0 if either is absent)."""
    if answer is None or not answer.strip():
        return 0.0
    if ref_answer is None or not ref_answer.strip():
        return 0.0
    candidate = TokenEmbeddings.from_provider(answer, provider)
    reference = TokenEmbeddings.from_provider(ref_answer, provider)
    return float(np.clip(bertscore_prf(candidate, reference).f1, 0.0, 1.0))
