"""Text embedders and cosine similarity."""

import hashlib
import logging
import os
from abc import ABC, abstractmethod
from typing import List, Optional

import backoff
import httpx
import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator
from pydantic.types import conint

from ..core.exceptions import BackendUnreachableError, EmbeddingError, MalformedResponseError

logger = logging.getLogger(__name__)


class EmbeddingVector(BaseModel):
    """Fixed-length embedding."""
    model_config = ConfigDict(frozen=True)

    values: List[float]
    dim: conint(ge=1)

    @model_validator(mode="after")
    def validate_length(self):
        if len(self.values) != self.dim:
            raise ValueError(f"Embedding has {len(self.values)} values, expected {self.dim}")
        return self

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.float64)

    @classmethod
    def from_array(cls, array: np.ndarray) -> "EmbeddingVector":
        return cls(values=[float(x) for x in array], dim=int(array.shape[0]))


def cosine_similarity(u: EmbeddingVector, v: EmbeddingVector) -> float:
    """
    Cosine of the angle between two embeddings.

    Args:
        u: First vector
        v: Second vector

    Returns:
        dot(u, v) / (|u| |v|), clipped to [-1, 1]
    """
    if u.dim != v.dim:
        raise EmbeddingError(f"Dimension mismatch: {u.dim} != {v.dim}")
    a, b = u.as_array(), v.as_array()
    norm_a, norm_b = np.linalg.norm(a), np.linalg.norm(b)
    if norm_a == 0.0 or norm_b == 0.0:
        raise EmbeddingError("Cosine similarity is undefined for a zero vector")
    return float(np.clip(np.dot(a, b) / (norm_a * norm_b), -1.0, 1.0))


class Embedder(ABC):
    """Maps text to an EmbeddingVector."""

    @abstractmethod
    def embed(self, text: str) -> EmbeddingVector:
        """Embed one non-empty text."""

    @staticmethod
    def _require_text(text: str) -> None:
        if not text or not text.strip():
            raise EmbeddingError("Cannot embed empty text")


class TrigramEmbedder(Embedder):
    """Hashed character-trigram counts projected to a fixed dimension."""

    def __init__(self, dim: int = 256):
        if dim < 1:
            raise ValueError("dim must be positive")
        self.dim = dim

    def _bucket(self, gram: str) -> int:
        digest = hashlib.blake2b(gram.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "big") % self.dim

    def trigrams(self, text: str) -> List[str]:
        normalized = " ".join(text.lower().split())
        if len(normalized) < 3:
            return [normalized]
        return [normalized[i:i + 3] for i in range(len(normalized) - 2)]

    def embed(self, text: str) -> EmbeddingVector:
        self._require_text(text)
        counts = np.zeros(self.dim, dtype=np.float64)
        for gram in self.trigrams(text):
            counts[self._bucket(gram)] += 1.0
        return EmbeddingVector.from_array(counts)


class HttpEmbedder(Embedder):
    """OpenAI-compatible ``/embeddings`` client."""

    def __init__(
        self,
        endpoint: str,
        model: str,
        credential_env: str = "MALR_API_KEY",
        request_timeout: float = 60.0,
        retry_attempts: int = 3,
        retry_base_delay: float = 0.5,
        client: Optional[httpx.Client] = None
    ):
        self.url = f"{endpoint.rstrip('/')}/embeddings"
        self.model = model
        self.retry_attempts = retry_attempts
        self.retry_base_delay = retry_base_delay
        api_key = os.environ.get(credential_env)
        self._headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        self._client = client or httpx.Client(timeout=request_timeout)

    def _post(self, payload: dict) -> httpx.Response:
        response = self._client.post(self.url, json=payload, headers=self._headers)
        response.raise_for_status()
        return response

    def embed(self, text: str) -> EmbeddingVector:
        self._require_text(text)
        post = backoff.on_exception(
            backoff.expo,
            httpx.TransportError,
            max_tries=self.retry_attempts,
            factor=self.retry_base_delay,
            jitter=backoff.full_jitter
        )(self._post)

        try:
            response = post({"model": self.model, "input": text})
        except httpx.TransportError as e:
            raise BackendUnreachableError(f"Embedding endpoint {self.url} unreachable: {e}")
        except httpx.HTTPStatusError as e:
            raise EmbeddingError(f"Embedding request failed with HTTP {e.response.status_code}")

        try:
            values = response.json()["data"][0]["embedding"]
            return EmbeddingVector(values=[float(x) for x in values], dim=len(values))
        except (ValueError, KeyError, IndexError, TypeError) as e:
            raise MalformedResponseError(f"Malformed embedding response: {e}", raw_payload=response.text)
