"""Embedding providers and vector utilities.

All model inference lives behind providers; the reward math only ever sees
row-unit-norm matrices. Backends shipped here: a file-backed store (JSON
fixtures), an HTTP client for a remote embedding service, and a procedural
provider that derives deterministic vectors from a text hash (for
self-contained demos and tests).
"""

import hashlib
import json
import threading
from concurrent.futures import Future
from dataclasses import dataclass
from pathlib import Path

import httpx
import numpy as np

NORM_TOLERANCE = 1e-4
DEGENERATE_NORM = 1e-8


class EmbeddingError(ValueError):
    """Invalid embedding payloads: bad shapes, non-finite or degenerate rows."""


class ClipNotFoundError(KeyError):
    """Requested clip id is not in the frame store."""


@dataclass(frozen=True)
class EmbeddingMatrix:
    """Row-wise unit-norm embedding matrix with provenance."""

    data: np.ndarray
    source_id: str

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]


def normalize_rows(data: np.ndarray, source_id: str) -> np.ndarray:
    """Validate and row-normalize a 2-D float array.

    Rows already within 1e-4 of unit norm pass through untouched (so a
    clean store loads bit-identically); others are rescaled. Rows with norm
    below 1e-8 are degenerate and rejected.
    """
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
        raise EmbeddingError(f"{source_id}: expected a non-empty 2-D matrix, got shape {data.shape}")
    if not np.all(np.isfinite(data)):
        raise EmbeddingError(f"{source_id}: non-finite entry in embedding matrix")
    norms = np.linalg.norm(data, axis=1)
    if np.any(norms < DEGENERATE_NORM):
        bad = int(np.argmin(norms))
        raise EmbeddingError(f"{source_id}: degenerate embedding (row {bad} has norm {norms[bad]:.3g})")
    off = np.abs(norms - 1.0) > NORM_TOLERANCE
    if np.any(off):
        data = data.copy()
        data[off] /= norms[off, None]
    return data


def normalize_vector(vec: np.ndarray, source_id: str) -> np.ndarray:
    return normalize_rows(np.asarray(vec, dtype=np.float64).reshape(1, -1), source_id)[0]


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity, clamped to [-1, 1] against round-off."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape or u.ndim != 1:
        raise EmbeddingError(f"cosine: dimension mismatch {u.shape} vs {v.shape}")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise EmbeddingError("cosine: zero-norm input")
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


def load_frame_embeddings(clip_id: str, store) -> EmbeddingMatrix:
    """Fetch a clip's frame matrix from a store and enforce the norm contract.

    Row order is temporal frame order, exactly as stored.
    """
    raw = store.read(clip_id)
    data = normalize_rows(np.asarray(raw, dtype=np.float64), f"clip {clip_id}")
    return EmbeddingMatrix(data=data, source_id=clip_id)


class FileFrameStore:
    """Directory of per-clip JSON files: {"clip_id", "dim", "frames": [[...]]}."""

    def __init__(self, root: str | Path):
        self.root = Path(root)

    def read(self, clip_id: str) -> np.ndarray:
        path = self.root / f"{clip_id}.json"
        if not path.is_file():
            raise ClipNotFoundError(f"clip not found: {clip_id!r} (no file {path})")
        payload = json.loads(path.read_text(encoding="utf-8"))
        frames = payload.get("frames")
        if not isinstance(frames, list) or not frames:
            raise EmbeddingError(f"clip {clip_id}: missing or empty 'frames'")
        widths = {len(row) for row in frames}
        if len(widths) != 1:
            raise EmbeddingError(f"clip {clip_id}: inconsistent row dims {sorted(widths)}")
        dim = payload.get("dim")
        if dim is not None and dim != widths.pop():
            raise EmbeddingError(f"clip {clip_id}: declared dim {dim} != row width")
        return np.asarray(frames, dtype=np.float64)


class InMemoryFrameStore:
    """Test/desk store: clip_id -> raw row matrix."""

    def __init__(self, clips: dict[str, np.ndarray] | None = None):
        self._clips = {k: np.asarray(v, dtype=np.float64) for k, v in (clips or {}).items()}

    def add(self, clip_id: str, rows) -> None:
        self._clips[clip_id] = np.asarray(rows, dtype=np.float64)

    def read(self, clip_id: str) -> np.ndarray:
        if clip_id not in self._clips:
            raise ClipNotFoundError(f"clip not found: {clip_id!r}")
        return self._clips[clip_id]


def embed_text(text: str, provider) -> np.ndarray:
    """Embed one nonempty text as a unit vector via the provider."""
    if not text or not text.strip():
        raise EmbeddingError("embed_text: empty text")
    vec = provider.embed_text(text)
    return normalize_vector(vec, f"text embedding ({provider.backend_id})")


def embed_texts(texts: list[str], provider) -> np.ndarray:
    """Embed a batch of nonempty texts; returns a len(texts) x d unit-row matrix."""
    for t in texts:
        if not t or not t.strip():
            raise EmbeddingError("embed_texts: empty text in batch")
    if hasattr(provider, "embed_texts"):
        mat = np.asarray(provider.embed_texts(texts), dtype=np.float64)
    else:
        mat = np.stack([np.asarray(provider.embed_text(t), dtype=np.float64) for t in texts])
    if mat.shape[0] != len(texts):
        raise EmbeddingError(f"provider returned {mat.shape[0]} vectors for {len(texts)} inputs")
    return normalize_rows(mat, f"text embeddings ({provider.backend_id})")


def text_sha256(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


class FileEmbeddingProvider:
    """Fixture-backed text/token embeddings from a JSONL file.

    Text records: {"text" or "text_hash", "vector": [...]}.
    Token records: {"text" or "text_hash", "tokens": [...], "matrix": [[...]]}.
    Keys are sha256 hex digests of the exact utf-8 text bytes.
    """

    def __init__(self, path: str | Path, backend_id: str = "file"):
        self.backend_id = backend_id
        self._vectors: dict[str, np.ndarray] = {}
        self._token_records: dict[str, tuple[list[str], np.ndarray]] = {}
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            key = record.get("text_hash") or text_sha256(record["text"])
            if "matrix" in record:
                tokens = [str(t) for t in record["tokens"]]
                matrix = np.asarray(record["matrix"], dtype=np.float64)
                if matrix.ndim != 2 or matrix.shape[0] != len(tokens):
                    raise EmbeddingError(f"token record {key[:12]}: matrix rows != token count")
                self._token_records[key] = (tokens, matrix)
            elif "vector" in record:
                self._vectors[key] = np.asarray(record["vector"], dtype=np.float64)
            else:
                raise EmbeddingError(f"record {key[:12]}: needs 'vector' or 'matrix'")

    def embed_text(self, text: str) -> np.ndarray:
        key = text_sha256(text)
        if key not in self._vectors:
            raise EmbeddingError(f"{self.backend_id}: no text-embedding fixture for {text!r}")
        return self._vectors[key]

    def embed_tokens(self, text: str) -> tuple[list[str], np.ndarray]:
        key = text_sha256(text)
        if key not in self._token_records:
            raise EmbeddingError(f"{self.backend_id}: no token-embedding fixture for {text!r}")
        tokens, matrix = self._token_records[key]
        return tokens, normalize_rows(matrix, f"token embeddings ({self.backend_id})")


class HashEmbeddingProvider:
    """Deterministic procedural embeddings: unit vectors seeded by sha256(text).

    A fixture backend, not a model: identical texts map to identical
    vectors, distinct texts map to effectively independent random unit
    vectors. Token embeddings split on whitespace and embed each token
    independently.
    """

    def __init__(self, dim: int = 16, backend_id: str = "hash"):
        if dim < 1:
            raise ValueError(f"dim must be >= 1, got {dim}")
        self.dim = dim
        self.backend_id = f"{backend_id}:{dim}"

    def _vector(self, text: str) -> np.ndarray:
        digest = hashlib.sha256(text.encode("utf-8")).digest()
        seed = int.from_bytes(digest[:8], "big")
        rng = np.random.default_rng(seed)
        vec = rng.standard_normal(self.dim)
        return vec / np.linalg.norm(vec)

    def embed_text(self, text: str) -> np.ndarray:
        return self._vector(text)

    def embed_tokens(self, text: str) -> tuple[list[str], np.ndarray]:
        tokens = text.split()
        if not tokens:
            raise EmbeddingError(f"{self.backend_id}: no tokens in {text!r}")
        return tokens, np.stack([self._vector(f"tok:{t}") for t in tokens])


@dataclass
class RemoteConfig:
    endpoint: str
    timeout: float = 10.0
    retries: int = 2
    max_in_flight: int = 4


class RemoteEmbeddingProvider:
    """HTTP client for the embedding service.

    POST {endpoint}/embed with {"id", "kind": "text"|"token", "inputs": [...]}.
    Text responses carry "vectors" (one per input); token responses carry
    "matrices" (one matrix per input) plus per-input "tokens". Responses are
    matched to requests by id; a mismatch is a protocol error, not a retry.
    """

    def __init__(self, cfg: RemoteConfig, client: httpx.Client | None = None):
        self.cfg = cfg
        self.backend_id = f"remote:{cfg.endpoint}"
        self._client = client or httpx.Client(timeout=cfg.timeout)
        self._semaphore = threading.Semaphore(cfg.max_in_flight)
        self._counter = 0
        self._lock = threading.Lock()

    def _next_id(self) -> str:
        with self._lock:
            self._counter += 1
            return f"embed-{self._counter}"

    def _post(self, body: dict) -> dict:
        last_error: Exception | None = None
        for _ in range(self.cfg.retries + 1):
            try:
                with self._semaphore:
                    response = self._client.post(
                        f"{self.cfg.endpoint}/embed", json=body, timeout=self.cfg.timeout
                    )
                response.raise_for_status()
                payload = response.json()
                if payload.get("id") != body["id"]:
                    raise EmbeddingError(
                        f"response id {payload.get('id')!r} does not match request {body['id']!r}"
                    )
                return payload
            except EmbeddingError:
                raise
            except (httpx.HTTPError, ValueError) as exc:
                last_error = exc
        raise EmbeddingError(f"embedding service failed after {self.cfg.retries + 1} attempts: {last_error}")

    def embed_text(self, text: str) -> np.ndarray:
        return self.embed_texts([text])[0]

    def embed_texts(self, texts: list[str]) -> np.ndarray:
        payload = self._post({"id": self._next_id(), "kind": "text", "inputs": texts})
        vectors = payload.get("vectors")
        if not isinstance(vectors, list) or len(vectors) != len(texts):
            raise EmbeddingError("embedding service returned a malformed 'vectors' field")
        return np.asarray(vectors, dtype=np.float64)

    def embed_tokens(self, text: str) -> tuple[list[str], np.ndarray]:
        payload = self._post({"id": self._next_id(), "kind": "token", "inputs": [text]})
        matrices = payload.get("matrices")
        tokens = payload.get("tokens")
        if not isinstance(matrices, list) or len(matrices) != 1:
            raise EmbeddingError("embedding service returned a malformed 'matrices' field")
        token_list = [str(t) for t in (tokens[0] if tokens else [])]
        matrix = np.asarray(matrices[0], dtype=np.float64)
        if not token_list:
            token_list = [f"tok{i}" for i in range(matrix.shape[0])]
        if matrix.ndim != 2 or matrix.shape[0] != len(token_list):
            raise EmbeddingError("embedding service: matrix rows != token count")
        return token_list, matrix


class CachingEmbeddingProvider:
    """Get-or-insert cache keyed by (backend id, exact text bytes).

    Linearizable: concurrent misses for one key race to install a Future;
    exactly one caller computes, the rest wait on it.
    """

    def __init__(self, inner):
        self.inner = inner
        self.backend_id = inner.backend_id
        self._lock = threading.Lock()
        self._futures: dict[tuple[str, bytes, str], Future] = {}

    def _get_or_compute(self, kind: str, text: str, compute):
        key = (self.backend_id, text.encode("utf-8"), kind)
        with self._lock:
            fut = self._futures.get(key)
            if fut is None:
                fut = Future()
                self._futures[key] = fut
                owner = True
            else:
                owner = False
        if owner:
            try:
                fut.set_result(compute())
            except Exception as exc:
                with self._lock:
                    del self._futures[key]
                fut.set_exception(exc)
        return fut.result()

    def embed_text(self, text: str) -> np.ndarray:
        return self._get_or_compute("text", text, lambda: self.inner.embed_text(text))

    def embed_tokens(self, text: str) -> tuple[list[str], np.ndarray]:
        return self._get_or_compute("token", text, lambda: self.inner.embed_tokens(text))
