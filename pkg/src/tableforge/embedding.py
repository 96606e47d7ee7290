"""Text embeddings and similarity channels.

The built-in encoder is a signed hashed bag-of-words: no weights to load,
deterministic across platforms, and good enough to rank related texts
above unrelated ones. A remote provider plugs in real encoders through a
small JSON endpoint. Both produce unit vectors (or the zero vector for
empty text), so cosine reduces to a dot product.
"""

from __future__ import annotations

import hashlib
import os
import re
import time
from typing import Callable, Protocol, Sequence

import numpy as np
import requests

DEFAULT_DIMENSION = 1024
DEFAULT_FUSION_WEIGHT = 0.9
EMBED_PATH = "/embed"

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    """Lowercased alphanumeric tokens, shared by every lexical consumer."""
    return _TOKEN_RE.findall(text.lower())


class EmbeddingError(Exception):
    """An embedding provider failed."""


class EmbeddingProvider(Protocol):
    dimension: int

    def embed(self, texts: Sequence[str]) -> np.ndarray: ...


class HashedBowEmbedder:
    """Signed feature-hashing bag-of-words encoder.

    Each token hashes to one coordinate and a sign; token counts
    accumulate there and the result is L2-normalized. Deterministic in
    (text, dimension, seed).
    """

    def __init__(
        self, dimension: int = DEFAULT_DIMENSION, seed: int = 0
    ) -> None:
        if dimension < 2:
            raise ValueError("dimension must be >= 2")
        self.dimension = dimension
        self.seed = seed
        self._slots: dict[str, tuple[int, float]] = {}

    def _slot(self, token: str) -> tuple[int, float]:
        cached = self._slots.get(token)
        if cached is not None:
            return cached
        digest = hashlib.blake2b(
            f"{self.seed}\x1f{token}".encode("utf-8"), digest_size=9
        ).digest()
        index = int.from_bytes(digest[:8], "little") % self.dimension
        sign = 1.0 if digest[8] & 1 else -1.0
        self._slots[token] = (index, sign)
        return index, sign

    def embed_one(self, text: str) -> np.ndarray:
        v = np.zeros(self.dimension, dtype=np.float64)
        for token in tokenize(text):
            index, sign = self._slot(token)
            v[index] += sign
        norm = float(np.linalg.norm(v))
        if norm > 0.0:
            v /= norm
        return v

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dimension), dtype=np.float64)
        for i, text in enumerate(texts):
            out[i] = self.embed_one(text)
        return out


class RemoteEmbeddingProvider:
    """Client for a JSON embedding endpoint.

    POSTs {model, texts} and expects {vectors}. Rows are re-normalized
    locally, so the server need not guarantee unit norm.
    """

    def __init__(
        self,
        endpoint: str,
        model: str,
        dimension: int = DEFAULT_DIMENSION,
        token_env: str | None = None,
        path: str = EMBED_PATH,
        retries: int = 2,
        backoff_s: float = 0.5,
        timeout_s: float = 60.0,
        session: requests.Session | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        self.url = endpoint.rstrip("/") + path
        self.model = model
        self.dimension = dimension
        self.token_env = token_env
        self.retries = retries
        self.backoff_s = backoff_s
        self.timeout_s = timeout_s
        self.session = session if session is not None else requests.Session()
        self._sleep = sleep

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.token_env:
            token = os.environ.get(self.token_env, "")
            if token:
                headers["Authorization"] = f"Bearer {token}"
        return headers

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        body = {"model": self.model, "texts": list(texts)}
        last_error: Exception | None = None
        for attempt in range(self.retries + 1):
            if attempt:
                self._sleep(self.backoff_s * 2 ** (attempt - 1))
            try:
                resp = self.session.post(
                    self.url,
                    json=body,
                    headers=self._headers(),
                    timeout=self.timeout_s,
                )
            except requests.RequestException as e:
                last_error = e
                continue
            if resp.status_code >= 500:
                last_error = EmbeddingError(
                    f"server error {resp.status_code} from {self.url}"
                )
                continue
            if resp.status_code != 200:
                raise EmbeddingError(
                    f"request rejected with {resp.status_code}: "
                    f"{resp.text[:200]}"
                )
            try:
                vectors = np.asarray(resp.json()["vectors"], dtype=np.float64)
            except (ValueError, KeyError, TypeError) as e:
                raise EmbeddingError(
                    f"malformed response from {self.url}: {e}"
                ) from e
            if vectors.shape != (len(texts), self.dimension):
                raise EmbeddingError(
                    f"expected shape {(len(texts), self.dimension)}, "
                    f"got {vectors.shape}"
                )
            return normalize_rows(vectors)
        raise EmbeddingError(
            f"giving up on {self.url} after {self.retries + 1} attempts: "
            f"{last_error}"
        )


def normalize_rows(m: np.ndarray) -> np.ndarray:
    """L2-normalize each row, leaving zero rows as zero."""
    norms = np.linalg.norm(m, axis=1, keepdims=True)
    safe = np.where(norms > 0.0, norms, 1.0)
    return m / safe


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine of the angle between two vectors; 0 if either is zero."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(
            f"dimension mismatch: {a.shape} vs {b.shape}"
        )
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def fused_similarity(
    struct_sim: float, text_sim: float, weight: float = DEFAULT_FUSION_WEIGHT
) -> float:
    """Weighted average of a structural and a textual similarity channel."""
    if not 0.0 <= weight <= 1.0:
        raise ValueError("weight must lie in [0, 1]")
    return weight * struct_sim + (1.0 - weight) * text_sim
