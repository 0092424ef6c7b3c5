"""Clipped-surrogate group policy loss with per-token KL regularization.

Consumes token log-probabilities under the new, old (behavior) and
reference policies; never touches a model. The toy softmax harness exists
only to validate the loss's gradients against finite differences.
"""

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class TokenLogProbs:
    """Per-token log-probs of one completion under new/old/ref policies."""

    new_lp: np.ndarray
    old_lp: np.ndarray
    ref_lp: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "new_lp", np.asarray(self.new_lp, dtype=np.float64))
        object.__setattr__(self, "old_lp", np.asarray(self.old_lp, dtype=np.float64))
        object.__setattr__(self, "ref_lp", np.asarray(self.ref_lp, dtype=np.float64))
        if not (self.new_lp.shape == self.old_lp.shape == self.ref_lp.shape):
            raise ValueError(
                f"log-prob length mismatch: new {self.new_lp.shape}, "
                f"old {self.old_lp.shape}, ref {self.ref_lp.shape}"
            )
        if self.new_lp.ndim != 1:
            raise ValueError(f"expected 1-D log-prob arrays, got shape {self.new_lp.shape}")
        for name in ("new_lp", "old_lp", "ref_lp"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"non-finite value in {name}")

    def __len__(self) -> int:
        return self.new_lp.shape[0]


@dataclass(frozen=True)
class GrpoConfig:
    """Clipping width and KL coefficient; defaults are for the toy harness only."""

    clip_eps: float = 0.2
    kl_beta: float = 0.04

    def __post_init__(self) -> None:
        if not 0.0 < self.clip_eps < 1.0:
            raise ValueError(f"clip_eps must be in (0, 1), got {self.clip_eps}")
        if self.kl_beta < 0.0:
            raise ValueError(f"kl_beta must be >= 0, got {self.kl_beta}")


def importance_ratios(new_lp: np.ndarray, old_lp: np.ndarray) -> np.ndarray:
    """Per-token exp(new - old)."""
    new_lp = np.asarray(new_lp, dtype=np.float64)
    old_lp = np.asarray(old_lp, dtype=np.float64)
    if new_lp.shape != old_lp.shape:
        raise ValueError(f"length mismatch: {new_lp.shape} vs {old_lp.shape}")
    ratios = np.exp(new_lp - old_lp)
    if not np.all(np.isfinite(ratios)):
        raise ValueError("non-finite importance ratio")
    return ratios


def kl_estimate(ref_lp: np.ndarray, new_lp: np.ndarray) -> np.ndarray:
    """Per-token estimator rho - log(rho) - 1 with rho = exp(ref - new).

    Nonnegative everywhere, zero exactly when ref equals new.
    """
    ref_lp = np.asarray(ref_lp, dtype=np.float64)
    new_lp = np.asarray(new_lp, dtype=np.float64)
    if ref_lp.shape != new_lp.shape:
        raise ValueError(f"length mismatch: {ref_lp.shape} vs {new_lp.shape}")
    log_rho = ref_lp - new_lp
    return np.exp(log_rho) - log_rho - 1.0


@dataclass(frozen=True)
class GrpoStats:
    loss: float
    mean_kl: float
    clip_fraction: float
    sequences: int
    tokens: int


def _sequence_terms(seq: TokenLogProbs, advantage: float, cfg: GrpoConfig):
    ratios = importance_ratios(seq.new_lp, seq.old_lp)
    unclipped = ratios * advantage
    clipped = np.clip(ratios, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps) * advantage
    surrogate = np.minimum(unclipped, clipped)
    kl = kl_estimate(seq.ref_lp, seq.new_lp)
    clip_active = clipped < unclipped
    return surrogate, kl, clip_active


def grpo_stats(group: list[TokenLogProbs], advantages, cfg: GrpoConfig) -> GrpoStats:
    """Loss plus diagnostics: token-level mean KL and clip-activation share."""
    advantages = np.asarray(advantages, dtype=np.float64)
    if len(group) < 1:
        raise ValueError("empty group")
    if advantages.shape != (len(group),):
        raise ValueError(
            f"advantages shape {advantages.shape} != group size {len(group)}"
        )
    objective = 0.0
    kl_sum = 0.0
    clip_count = 0
    token_count = 0
    for seq, advantage in zip(group, advantages):
        if len(seq) < 1:
            raise ValueError("empty sequence in group")
        surrogate, kl, clip_active = _sequence_terms(seq, float(advantage), cfg)
        objective += float(np.mean(surrogate - cfg.kl_beta * kl))
        kl_sum += float(np.sum(kl))
        clip_count += int(np.sum(clip_active))
        token_count += len(seq)
    objective /= len(group)
    return GrpoStats(
        loss=-objective,
        mean_kl=kl_sum / token_count,
        clip_fraction=clip_count / token_count,
        sequences=len(group),
        tokens=token_count,
    )


def grpo_loss(group: list[TokenLogProbs], advantages, cfg: GrpoConfig) -> float:
    """Negative clipped surrogate with per-token KL, averaged over tokens then sequences."""
    return grpo_stats(group, advantages, cfg).loss


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=1, keepdims=True))


@dataclass
class ToyPolicyProblem:
    """A tabular softmax policy for validating grpo_loss gradients.

    Position t of every sequence is scored by softmax(logits[t]); old and
    ref log-prob tables are fixed, so the loss is a function of the new
    policy's logits only.
    """

    logits: np.ndarray  # (T, V), the parameters
    old_logits: np.ndarray
    ref_logits: np.ndarray
    tokens: np.ndarray  # (G, T) int
    advantages: np.ndarray  # (G,)
    cfg: GrpoConfig = field(default_factory=GrpoConfig)

    def _seq_lp(self, table: np.ndarray, g: int) -> np.ndarray:
        positions = np.arange(self.tokens.shape[1])
        return table[positions, self.tokens[g]]

    def group_for(self, logits: np.ndarray) -> list[TokenLogProbs]:
        new_table = _log_softmax(logits)
        old_table = _log_softmax(self.old_logits)
        ref_table = _log_softmax(self.ref_logits)
        return [
            TokenLogProbs(
                new_lp=self._seq_lp(new_table, g),
                old_lp=self._seq_lp(old_table, g),
                ref_lp=self._seq_lp(ref_table, g),
            )
            for g in range(self.tokens.shape[0])
        ]

    def loss(self, logits: np.ndarray) -> float:
        return grpo_loss(self.group_for(logits), self.advantages, self.cfg)

    def analytic_grad(self, logits: np.ndarray) -> np.ndarray:
        """d loss / d logits, via the log-softmax chain rule.

        The surrogate contributes ratio * advantage through the unclipped
        branch and nothing through the clipped branch (the clip is constant
        where active); the KL estimator contributes 1 - rho per token.
        """
        n_group, seq_len = self.tokens.shape
        new_table = _log_softmax(logits)
        probs = np.exp(new_table)
        grad = np.zeros_like(logits)
        for g, seq in enumerate(self.group_for(logits)):
            advantage = float(self.advantages[g])
            ratios = importance_ratios(seq.new_lp, seq.old_lp)
            clipped = np.clip(ratios, 1.0 - self.cfg.clip_eps, 1.0 + self.cfg.clip_eps)
            unclipped_active = ratios * advantage <= clipped * advantage
            dsurr = np.where(unclipped_active, ratios * advantage, 0.0)
            rho = np.exp(seq.ref_lp - seq.new_lp)
            dkl = 1.0 - rho
            coeff = -(dsurr - self.cfg.kl_beta * dkl) / (n_group * seq_len)
            for t in range(seq_len):
                grad[t, self.tokens[g, t]] += coeff[t]
                grad[t] -= coeff[t] * probs[t]
        return grad

    def fd_grad(self, logits: np.ndarray, step: float) -> np.ndarray:
        grad = np.zeros_like(logits)
        for t in range(logits.shape[0]):
            for v in range(logits.shape[1]):
                bumped = logits.copy()
                bumped[t, v] += step
                hi = self.loss(bumped)
                bumped[t, v] -= 2.0 * step
                lo = self.loss(bumped)
                grad[t, v] = (hi - lo) / (2.0 * step)
        return grad

    def min_clip_margin(self) -> float:
        """Smallest distance of any importance ratio to a clip boundary."""
        margin = math.inf
        for seq in self.group_for(self.logits):
            ratios = importance_ratios(seq.new_lp, seq.old_lp)
            for bound in (1.0 - self.cfg.clip_eps, 1.0 + self.cfg.clip_eps):
                margin = min(margin, float(np.min(np.abs(ratios - bound))))
        return margin


@dataclass(frozen=True)
class GradCheckReport:
    seed: int
    loss: float
    max_rel_error: float
    max_abs_error: float


def make_toy_problem(
    seed: int,
    cfg: GrpoConfig | None = None,
    vocab: int = 5,
    group_size: int = 3,
    seq_len: int = 4,
    boundary_margin: float = 1e-3,
) -> ToyPolicyProblem:
    """Random toy problem whose importance ratios stay clear of the clip kinks."""
    cfg = cfg or GrpoConfig()
    rng = np.random.default_rng(seed)
    logits = rng.normal(0.0, 1.0, size=(seq_len, vocab))
    tokens = rng.integers(0, vocab, size=(group_size, seq_len))
    advantages = rng.normal(0.0, 1.0, size=group_size)
    for attempt in range(50):
        old_logits = logits + 0.2 * rng.normal(size=(seq_len, vocab))
        ref_logits = logits + 0.2 * rng.normal(size=(seq_len, vocab))
        problem = ToyPolicyProblem(
            logits=logits,
            old_logits=old_logits,
            ref_logits=ref_logits,
            tokens=tokens,
            advantages=advantages,
            cfg=cfg,
        )
        if problem.min_clip_margin() > boundary_margin:
            return problem
    raise RuntimeError(f"could not place ratios away from clip boundaries for seed {seed}")


def toy_policy_grad_check(
    seed: int = 0,
    cfg: GrpoConfig | None = None,
    fd_step: float = 1e-5,
) -> GradCheckReport:
    """Compare analytic grpo_loss gradients against central finite differences.

    The relative error uses a scale floor of 1e-2 so finite-difference noise
    on near-zero entries does not read as a gradient bug.
    """
    problem = make_toy_problem(seed, cfg)
    analytic = problem.analytic_grad(problem.logits)
    numeric = problem.fd_grad(problem.logits, fd_step)
    abs_err = np.abs(analytic - numeric)
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-2)
    return GradCheckReport(
        seed=seed,
        loss=problem.loss(problem.logits),
        max_rel_error=float(np.max(abs_err / scale)),
        max_abs_error=float(np.max(abs_err)),
    )
