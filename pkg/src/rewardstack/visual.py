"""Scene-text alignment reward over precomputed frame embeddings.

Two aggregation variants: the max frame similarity of the whole perception
text, and a per-sentence top-K frame-similarity average that is less
sensitive to single-frame noise. A missing or empty perception scores 0.
"""

import math
from dataclasses import dataclass

import numpy as np

from .embeddings import EmbeddingMatrix, embed_text, embed_texts
from .lexical import split_sentences

VARIANT_MAX = "max"
VARIANT_SENT_TOPK = "sent_topk"
VARIANTS = (VARIANT_MAX, VARIANT_SENT_TOPK)


@dataclass(frozen=True)
class AlignmentConfig:
    """Top-K ratio and variant selection for the visual reward."""

    alpha: float = 0.2
    variant: str = VARIANT_SENT_TOPK

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")


def top_k_count(alpha: float, n_frames: int) -> int:
    """K = max(1, floor(alpha * N))."""
    return max(1, math.floor(alpha * n_frames))


def clip_max(frames: EmbeddingMatrix, perception: str | None, provider) -> float:
    """Max frame similarity of the full perception text (0 if absent)."""
    if perception is None or not perception.strip():
        return 0.0
    u = embed_text(perception, provider)
    if u.shape[0] != frames.dim:
        raise ValueError(f"text dim {u.shape[0]} != frame dim {frames.dim}")
    return float(np.max(frames.data @ u))


def clip_sent_topk(
    frames: EmbeddingMatrix,
    perception: str | None,
    cfg: AlignmentConfig,
    provider,
) -> float:
    """Mean over sentences of the mean of the top-K frame similarities.

    K = max(1, floor(alpha * N)). Ties at the K-th similarity are resolved
    toward lower frame indices, which cannot change the top-K sum.
    """
    if perception is None or not perception.strip():
        return 0.0
    sentences = split_sentences(perception)
    if not sentences:
        return 0.0
    sentence_vectors = embed_texts(sentences, provider)
    if sentence_vectors.shape[1] != frames.dim:
        raise ValueError(
            f"text dim {sentence_vectors.shape[1]} != frame dim {frames.dim}"
        )
    k = top_k_count(cfg.alpha, frames.rows)
    similarity = frames.data @ sentence_vectors.T  # N x M
    # Descending sort per column; the first K rows are the top-K frames.
    top = -np.sort(-similarity, axis=0)[:k, :]
    return float(np.mean(np.mean(top, axis=0)))


def visual_reward(
    frames: EmbeddingMatrix,
    perception: str | None,
    cfg: AlignmentConfig,
    provider,
) -> float:
    if cfg.variant == VARIANT_MAX:
        return clip_max(frames, perception, provider)
    return clip_sent_topk(frames, perception, cfg, provider)
