import numpy as np
import pytest

from rewardstack.pcg import GtLogLik


class StubEmbeddingProvider:
    """Maps exact texts to preset vectors; errors on anything unknown."""

    def __init__(self, vectors: dict[str, np.ndarray], backend_id: str = "stub"):
        self.vectors = {k: np.asarray(v, dtype=np.float64) for k, v in vectors.items()}
        self.backend_id = backend_id
        self.calls = 0

    def embed_text(self, text: str) -> np.ndarray:
        self.calls += 1
        if text not in self.vectors:
            raise KeyError(f"no stub vector for {text!r}")
        return self.vectors[text]


class StubTokenProvider:
    """Token embeddings from a preset text -> (tokens, matrix) table."""

    def __init__(self, table: dict[str, tuple[list[str], np.ndarray]]):
        self.table = {k: (t, np.asarray(m, dtype=np.float64)) for k, (t, m) in table.items()}
        self.backend_id = "stub-tokens"

    def embed_tokens(self, text: str):
        if text not in self.table:
            raise KeyError(f"no stub tokens for {text!r}")
        return self.table[text]


class ConstantLikelihoodProvider:
    """Context-insensitive: the score depends only on the target."""

    def __init__(self, mean: float = -1.25):
        self.mean = mean
        self.calls: list[tuple[str, str]] = []

    def gt_loglik(self, context: str, target: str) -> GtLogLik:
        self.calls.append((context, target))
        return GtLogLik(max(1, len(target.split())), self.mean)


class TableLikelihoodProvider:
    """Context-sensitive fixture: explicit (predicate -> mean) rules."""

    def __init__(self, base_mean: float, augmented_mean: float, marker: str):
        self.base_mean = base_mean
        self.augmented_mean = augmented_mean
        self.marker = marker

    def gt_loglik(self, context: str, target: str) -> GtLogLik:
        mean = self.augmented_mean if self.marker in context else self.base_mean
        return GtLogLik(max(1, len(target.split())), mean)


@pytest.fixture
def basis_provider():
    """e1..e4 in R^4 under the names 'e1'..'e4'."""
    eye = np.eye(4)
    return StubEmbeddingProvider({f"e{i + 1}": eye[i] for i in range(4)})
