"""Group-relative reward normalization and scalar advantages.

The four raw reward dimensions live on different scales, so each dimension
is z-score-normalized within the sampled group (population std, epsilon
1e-6) before the weighted sum that becomes the advantage.
"""

import math
from dataclasses import dataclass

import numpy as np

from .lexical import CueThresholds
from .pcg import PcgInputs, pcg
from .semantic import semantic_reward
from .structure import Completion, ReferenceOutput, format_reward, parse_completion
from .visual import AlignmentConfig, visual_reward
from .embeddings import EmbeddingMatrix

ZSCORE_EPS = 1e-6

REWARD_DIMS = ("sem", "fmt", "vis", "pcg")


class GroupScoringError(RuntimeError):
    """A provider failure while scoring a group, tagged with its origin."""


@dataclass(frozen=True)
class RewardVector:
    """Raw 4-D reward for one completion."""

    sem: float
    fmt: float
    vis: float
    pcg: float

    def __post_init__(self) -> None:
        for name in REWARD_DIMS:
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"reward {name} is not finite: {value}")
        if not 0.0 <= self.sem <= 1.0:
            raise ValueError(f"sem reward out of [0, 1]: {self.sem}")
        if not -6.0 <= self.fmt <= 5.0:
            raise ValueError(f"fmt reward out of [-6, 5]: {self.fmt}")

    def as_array(self) -> np.ndarray:
        return np.array([self.sem, self.fmt, self.vis, self.pcg], dtype=np.float64)


@dataclass(frozen=True)
class WeightVector:
    """Per-dimension weights for the scalar advantage."""

    sem: float = 1.0
    fmt: float = 1.0
    vis: float = 0.8
    pcg: float = 0.8

    def __post_init__(self) -> None:
        for name in REWARD_DIMS:
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"weight {name} is not finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.sem, self.fmt, self.vis, self.pcg], dtype=np.float64)


@dataclass(frozen=True)
class GroupBatch:
    """One prompt's group: raw rewards, normalized rewards, advantages."""

    rewards: list[RewardVector]
    normalized: np.ndarray
    advantages: np.ndarray

    @property
    def size(self) -> int:
        return len(self.rewards)


def zscore_normalize(rewards: np.ndarray, eps: float = ZSCORE_EPS) -> np.ndarray:
    """Per-dimension (column) z-scores over the group: (r - mean)/(std + eps).

    Population standard deviation. A constant column normalizes to exact
    zeros (its numerator is identically zero).
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    if rewards.ndim != 2:
        raise ValueError(f"expected a G x K matrix, got shape {rewards.shape}")
    if rewards.shape[0] < 2:
        raise ValueError(f"group size must be >= 2, got {rewards.shape[0]}")
    out = np.zeros_like(rewards)
    for k in range(rewards.shape[1]):
        column = rewards[:, k]
        if np.max(column) == np.min(column):
            continue  # constant dimension: exactly zero
        mu = float(np.mean(column))
        sigma = float(np.sqrt(np.mean((column - mu) ** 2)))
        out[:, k] = (column - mu) / (sigma + eps)
    return out


def advantages(normalized: np.ndarray, weights: WeightVector) -> np.ndarray:
    """Weighted sum of normalized reward dimensions, one scalar per row."""
    normalized = np.asarray(normalized, dtype=np.float64)
    if normalized.ndim != 2 or normalized.shape[1] != len(REWARD_DIMS):
        raise ValueError(f"expected G x 4 normalized rewards, got {normalized.shape}")
    return normalized @ weights.as_array()


@dataclass
class ScoringContext:
    """Providers and configs needed to score a full group."""

    embedding_provider: object
    likelihood_provider: object
    alignment: AlignmentConfig
    thresholds: CueThresholds
    weights: WeightVector
    zscore_eps: float = ZSCORE_EPS


def score_completion(
    completion: Completion,
    reference: ReferenceOutput,
    frames: EmbeddingMatrix,
    prompt_context: str,
    ctx: ScoringContext,
    index: int = 0,
) -> RewardVector:
    """Compute the raw 4-D reward vector for one parsed completion."""

    def _guard(dim: str, fn):
        try:
            return fn()
        except Exception as exc:
            raise GroupScoringError(f"completion {index}, reward '{dim}': {exc}") from exc

    sem = _guard(
        "sem",
        lambda: semantic_reward(completion.answer, reference.answer, ctx.embedding_provider),
    )
    fmt = format_reward(completion.raw).total
    vis = _guard(
        "vis",
        lambda: visual_reward(frames, completion.perception, ctx.alignment, ctx.embedding_provider),
    )
    if reference.answer is None or not reference.answer.strip():
        pcg_value = 0.0  # no ground truth to gain likelihood on
    else:
        inputs = PcgInputs(
            prompt_context=prompt_context,
            perception=completion.perception,
            reasoning=completion.think,
            answer=completion.answer,
            gt_answer=reference.answer,
        )
        pcg_value = _guard("pcg", lambda: pcg(inputs, ctx.thresholds, ctx.likelihood_provider))
    return RewardVector(sem=sem, fmt=fmt, vis=vis, pcg=pcg_value)


def score_group(
    completions: list[str],
    reference_raw: str,
    frames: EmbeddingMatrix,
    ctx: ScoringContext,
    prompt_context: str = "",
) -> GroupBatch:
    """Score a group of raw completions end to end.

    Raw rewards per completion, then per-dimension z-scores, then weighted
    advantages. Provider errors abort the whole group with a diagnostic
    naming the completion index and reward dimension.
    """
    if len(completions) < 2:
        raise ValueError(f"group too small: need G >= 2, got {len(completions)}")
    reference = ReferenceOutput.from_raw(reference_raw)
    rewards = [
        score_completion(parse_completion(raw), reference, frames, prompt_context, ctx, index=g)
        for g, raw in enumerate(completions)
    ]
    matrix = np.stack([r.as_array() for r in rewards])
    normalized = zscore_normalize(matrix, eps=ctx.zscore_eps)
    return GroupBatch(
        rewards=rewards,
        normalized=normalized,
        advantages=advantages(normalized, ctx.weights),
    )
