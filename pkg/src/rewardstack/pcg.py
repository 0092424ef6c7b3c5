"""Likelihood-gain reward for the intermediate perception/reasoning block.

Scores how much the cleaned perception+reasoning text raises a frozen
reference policy's mean log-likelihood of the ground-truth answer, then
subtracts the lexical copy penalty. The reference policy lives behind a
provider; the kit never tokenizes the ground truth itself.
"""

import hashlib
import json
import math
import threading
from dataclasses import dataclass
from pathlib import Path

import httpx

from .lexical import CleanResult, CueThresholds, clean_and_penalize


class LikelihoodError(RuntimeError):
    """Provider failures and malformed likelihood payloads."""


@dataclass(frozen=True)
class GtLogLik:
    """Mean log-probability of the target under a context, with token count."""

    token_count: int
    mean_logprob: float


@dataclass(frozen=True)
class PcgInputs:
    """Everything needed to score one completion's intermediate block.

    prompt_context is the already-rendered conditioning text (system prompt,
    profiles, history); gt_answer is the ground-truth answer string, which
    the provider tokenizes with its own tokenizer.
    """

    prompt_context: str
    perception: str | None
    reasoning: str | None
    answer: str | None
    gt_answer: str


def gt_loglik(context: str, gt_answer: str, provider) -> float:
    """Mean per-token log-likelihood of gt_answer given context."""
    if not gt_answer or not gt_answer.strip():
        raise LikelihoodError("gt_loglik: empty ground-truth answer")
    score = provider.gt_loglik(context, gt_answer)
    if score.token_count < 1:
        raise LikelihoodError(f"provider returned token_count {score.token_count}")
    if not math.isfinite(score.mean_logprob):
        raise LikelihoodError(f"provider returned non-finite mean log-prob {score.mean_logprob}")
    return score.mean_logprob


def cleaned_block(perception: str | None, clean: CleanResult) -> str:
    """Perception text joined with the kept reasoning sentences.

    Absent segments contribute nothing; the two segments are joined by a
    single newline, and kept sentences by single spaces.
    """
    parts = []
    if perception and perception.strip():
        parts.append(perception)
    if clean.kept_sentences:
        parts.append(" ".join(clean.kept_sentences))
    return "\n".join(parts)


def pcg(inputs: PcgInputs, th: CueThresholds, provider) -> float:
    """Likelihood gain of the cleaned block minus the copy penalty.

    When the cleaned block is empty, both likelihood calls see the identical
    context, so the gain term is exactly 0 and the reward is minus the
    penalty.
    """
    clean = clean_and_penalize(inputs.reasoning, inputs.answer, th)
    block = cleaned_block(inputs.perception, clean)
    base_context = inputs.prompt_context
    augmented_context = f"{base_context}\n{block}" if block else base_context
    gain = gt_loglik(augmented_context, inputs.gt_answer, provider) - gt_loglik(
        base_context, inputs.gt_answer, provider
    )
    return gain - clean.copy_penalty


def _sha256(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


class FileLikelihoodProvider:
    """Fixture provider keyed by (sha256(context), sha256(target)).

    JSONL records: {"context" or "context_hash", "target" or "target_hash",
    then either "mean_logprob" (+ optional "token_count", default 1) or
    "token_logprobs": [...]}. A record {"default": true, ...} is used as a
    fallback for unknown keys, which makes a desk corpus runnable without
    precomputing every context hash.
    """

    def __init__(self, path: str | Path):
        self._records: dict[tuple[str, str], GtLogLik] = {}
        self._default: GtLogLik | None = None
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            score = self._score_of(record)
            if record.get("default"):
                self._default = score
                continue
            context_hash = record.get("context_hash") or _sha256(record["context"])
            target_hash = record.get("target_hash") or _sha256(record["target"])
            self._records[(context_hash, target_hash)] = score

    @staticmethod
    def _score_of(record: dict) -> GtLogLik:
        if "token_logprobs" in record:
            logprobs = [float(x) for x in record["token_logprobs"]]
            if not logprobs:
                raise LikelihoodError("fixture record has empty token_logprobs")
            declared = record.get("token_count")
            if declared is not None and declared != len(logprobs):
                raise LikelihoodError(
                    f"fixture token_count {declared} != {len(logprobs)} log-probs"
                )
            return GtLogLik(len(logprobs), sum(logprobs) / len(logprobs))
        return GtLogLik(int(record.get("token_count", 1)), float(record["mean_logprob"]))

    def gt_loglik(self, context: str, target: str) -> GtLogLik:
        key = (_sha256(context), _sha256(target))
        found = self._records.get(key)
        if found is not None:
            return found
        if self._default is not None:
            return self._default
        raise LikelihoodError(
            f"no likelihood fixture for context hash {key[0][:12]}, target hash {key[1][:12]}"
        )


class HashLikelihoodProvider:
    """Deterministic procedural scores seeded by sha256(context, target).

    A fixture backend for desk runs: context-sensitive (different contexts
    give different means) but model-free. Means land in [-3, -0.2].
    """

    def __init__(self, backend_id: str = "hash"):
        self.backend_id = backend_id

    def gt_loglik(self, context: str, target: str) -> GtLogLik:
        digest = hashlib.sha256(f"{context}\x00{target}".encode("utf-8")).digest()
        fraction = int.from_bytes(digest[:8], "big") / 2**64
        token_count = max(1, len(target.split()))
        return GtLogLik(token_count, -0.2 - 2.8 * fraction)


class RemoteLikelihoodProvider:
    """HTTP client for the reference-policy scoring service.

    POST {endpoint}/gtll with {"id", "context", "target"} and expect
    {"id", "token_count", "mean_logprob"}; ids must round-trip.
    """

    def __init__(self, endpoint: str, timeout: float = 10.0, retries: int = 2,
                 client: httpx.Client | None = None):
        self.endpoint = endpoint
        self.timeout = timeout
        self.retries = retries
        self._client = client or httpx.Client(timeout=timeout)
        self._counter = 0
        self._lock = threading.Lock()

    def _next_id(self) -> str:
        with self._lock:
            self._counter += 1
            return f"gtll-{self._counter}"

    def gt_loglik(self, context: str, target: str) -> GtLogLik:
        body = {"id": self._next_id(), "context": context, "target": target}
        last_error: Exception | None = None
        for _ in range(self.retries + 1):
            try:
                response = self._client.post(
                    f"{self.endpoint}/gtll", json=body, timeout=self.timeout
                )
                response.raise_for_status()
                payload = response.json()
                if payload.get("id") != body["id"]:
                    raise LikelihoodError(
                        f"response id {payload.get('id')!r} does not match request {body['id']!r}"
                    )
                return GtLogLik(int(payload["token_count"]), float(payload["mean_logprob"]))
            except LikelihoodError:
                raise
            except (httpx.HTTPError, ValueError, KeyError) as exc:
                last_error = exc
        raise LikelihoodError(
            f"likelihood service failed after {self.retries + 1} attempts: {last_error}"
        )
