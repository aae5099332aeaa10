"""Embedding and learned-metric score providers.

Three families, all satisfying the same small protocols:

* local deterministic providers (content-hash vectors, one-hot vectors,
  constant stubs) for offline use and tests;
* HTTP providers that call a remote endpoint with retry and rate limiting;
* fixture providers that replay recorded responses from disk in request
  order.

Providers are safe to share across threads.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
from typing import Protocol, Sequence

import numpy as np
import requests

from .errors import InvalidArgumentError, ProviderError
from .pacing import RetryPolicy, TokenBucket, call_with_retries

__all__ = [
    "EmbeddingProvider",
    "BleurtProvider",
    "HashEmbeddingProvider",
    "OneHotEmbeddingProvider",
    "FixtureEmbeddingProvider",
    "HttpEmbeddingProvider",
    "StubBleurtProvider",
    "FixtureBleurtProvider",
    "HttpBleurtProvider",
]


class EmbeddingProvider(Protocol):
    def embed(self, tokens: Sequence[str]) -> np.ndarray:
        """Return one vector per token, in token order, shape (len, dim)."""
        ...


class BleurtProvider(Protocol):
    def score(self, pairs: Sequence[tuple[str, str]]) -> list[float]:
        """Return one real score per (candidate, reference) pair, in order."""
        ...


class HashEmbeddingProvider:
    """Deterministic embeddings derived from content hashes.

    Each token's vector is read directly out of sha256 digests, so equal
    tokens get equal vectors on every platform and run with no model or
    network involved. Vectors are dense and roughly isotropic, which makes
    them a usable stand-in wherever only cosine geometry matters.
    """

    def __init__(self, dim: int = 32):
        if dim < 1:
            raise InvalidArgumentError(f"dim must be >= 1, got {dim}")
        self.dim = dim
        self._cache: dict[str, np.ndarray] = {}
        self._lock = threading.Lock()

    def _vector(self, token: str) -> np.ndarray:
        values: list[float] = []
        block = 0
        while len(values) < self.dim:
            digest = hashlib.sha256(f"{token}\x00{block}".encode("utf-8")).digest()
            for i in range(0, len(digest), 4):
                chunk = int.from_bytes(digest[i : i + 4], "big")
                # Map the 32-bit chunk into [-1, 1).
                values.append(chunk / 2147483648.0 - 1.0)
            block += 1
        return np.array(values[: self.dim], dtype=np.float64)

    def embed(self, tokens: Sequence[str]) -> np.ndarray:
        rows = []
        for token in tokens:
            with self._lock:
                vec = self._cache.get(token)
                if vec is None:
                    vec = self._vector(token)
                    self._cache[token] = vec
            rows.append(vec)
        if not rows:
            return np.zeros((0, self.dim), dtype=np.float64)
        return np.stack(rows)


class OneHotEmbeddingProvider:
    """Orthonormal one-hot embeddings over a growing vocabulary.

    Distinct tokens get orthogonal unit vectors, so cosine similarity is
    exactly 1 for equal tokens and 0 otherwise. Useful for tests that need
    embedding-based scores to reduce to exact token-overlap fractions.
    """

    def __init__(self, dim: int = 256):
        if dim < 1:
            raise InvalidArgumentError(f"dim must be >= 1, got {dim}")
        self.dim = dim
        self._vocab: dict[str, int] = {}
        self._lock = threading.Lock()

    def embed(self, tokens: Sequence[str]) -> np.ndarray:
        out = np.zeros((len(tokens), self.dim), dtype=np.float64)
        for row, token in enumerate(tokens):
            with self._lock:
                index = self._vocab.get(token)
                if index is None:
                    index = len(self._vocab)
                    if index >= self.dim:
                        raise InvalidArgumentError(
                            f"vocabulary exceeded one-hot dimension {self.dim}"
                        )
                    self._vocab[token] = index
            out[row, index] = 1.0
        return out


class _FixtureReplay:
    # One JSON object per line; responses are handed out strictly in
    # request order, shared across threads.
    def __init__(self, path):
        self._lock = threading.Lock()
        with open(path, "r", encoding="utf-8") as fh:
            lines = [line for line in fh.read().split("\n") if line.strip()]
        self._responses = [json.loads(line) for line in lines]
        self._next = 0
        self._path = str(path)

    def take(self) -> dict:
        with self._lock:
            if self._next >= len(self._responses):
                raise ProviderError(
                    f"fixture {self._path} exhausted after {self._next} responses"
                )
            response = self._responses[self._next]
            self._next += 1
            return response


class FixtureEmbeddingProvider:
    """Replays recorded embedding responses from a fixture file.

    Each line holds ``{"vectors": [[...], ...]}`` for one request.
    """

    def __init__(self, path):
        self._replay = _FixtureReplay(path)

    def embed(self, tokens: Sequence[str]) -> np.ndarray:
        response = self._replay.take()
        vectors = response.get("vectors")
        if vectors is None:
            raise ProviderError("embedding fixture line missing 'vectors'")
        matrix = np.asarray(vectors, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[0] != len(tokens):
            raise ProviderError(
                f"embedding fixture returned {matrix.shape[0] if matrix.ndim == 2 else '?'}"
                f" vectors for {len(tokens)} tokens"
            )
        return matrix


class FixtureBleurtProvider:
    """Replays recorded scores; each line holds ``{"scores": [...]}``."""

    def __init__(self, path):
        self._replay = _FixtureReplay(path)

    def score(self, pairs: Sequence[tuple[str, str]]) -> list[float]:
        response = self._replay.take()
        scores = response.get("scores")
        if scores is None:
            raise ProviderError("score fixture line missing 'scores'")
        if len(scores) != len(pairs):
            raise ProviderError(
                f"score fixture returned {len(scores)} scores for {len(pairs)} pairs"
            )
        return [float(s) for s in scores]


class StubBleurtProvider:
    """Returns a constant score for every pair."""

    def __init__(self, value: float = 0.5):
        self.value = float(value)

    def score(self, pairs: Sequence[tuple[str, str]]) -> list[float]:
        return [self.value] * len(pairs)


def _post_json(
    url: str,
    payload: dict,
    timeout: float,
    retry: RetryPolicy,
    limiter: TokenBucket | None,
    sleep,
) -> dict:
    class _Transient(Exception):
        pass

    def attempt() -> dict:
        if limiter is not None:
            limiter.acquire()
        try:
            response = requests.post(url, json=payload, timeout=timeout)
        except (requests.ConnectionError, requests.Timeout) as exc:
            raise _Transient(str(exc)) from exc
        if response.status_code == 429 or response.status_code >= 500:
            raise _Transient(f"status {response.status_code}")
        if response.status_code >= 400:
            raise ProviderError(f"provider rejected request: status {response.status_code}")
        return response.json()

    try:
        return call_with_retries(attempt, retry, (_Transient,), sleep=sleep)
    except _Transient as exc:
        raise ProviderError(f"provider unreachable after {retry.max_attempts} attempts: {exc}") from exc


class HttpEmbeddingProvider:
    """POSTs ``{"tokens": [...]}`` and expects ``{"vectors": [[...], ...]}``."""

    def __init__(
        self,
        url: str,
        timeout: float = 30.0,
        retry: RetryPolicy = RetryPolicy(),
        requests_per_minute: float | None = None,
        sleep=time.sleep,
    ):
        self.url = url
        self.timeout = timeout
        self.retry = retry
        self._limiter = (
            TokenBucket(requests_per_minute) if requests_per_minute else None
        )
        self._sleep = sleep

    def embed(self, tokens: Sequence[str]) -> np.ndarray:
        body = _post_json(
            self.url, {"tokens": list(tokens)}, self.timeout, self.retry, self._limiter, self._sleep
        )
        vectors = body.get("vectors")
        if vectors is None:
            raise ProviderError("embedding endpoint response missing 'vectors'")
        matrix = np.asarray(vectors, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[0] != len(tokens):
            raise ProviderError("embedding endpoint returned wrong number of vectors")
        return matrix


class HttpBleurtProvider:
    """POSTs ``{"pairs": [[candidate, reference], ...]}``, expects ``{"scores": [...]}``."""

    def __init__(
        self,
        url: str,
        timeout: float = 30.0,
        retry: RetryPolicy = RetryPolicy(),
        requests_per_minute: float | None = None,
        sleep=time.sleep,
    ):
        self.url = url
        self.timeout = timeout
        self.retry = retry
        self._limiter = (
            TokenBucket(requests_per_minute) if requests_per_minute else None
        )
        self._sleep = sleep

    def score(self, pairs: Sequence[tuple[str, str]]) -> list[float]:
        body = _post_json(
            self.url,
            {"pairs": [[c, r] for c, r in pairs]},
            self.timeout,
            self.retry,
            self._limiter,
            self._sleep,
        )
        scores = body.get("scores")
        if scores is None:
            raise ProviderError("score endpoint response missing 'scores'")
        if len(scores) != len(pairs):
            raise ProviderError("score endpoint returned wrong number of scores")
        return [float(s) for s in scores]
