"""Chat-completion endpoint client.

One request carries a model name plus a system and a user message; the
response is the generated text. Three transports implement that exchange:
live HTTP, on-disk fixture replay (order-preserving), and an in-memory
scripted transport for tests.

The API token is read from an environment variable at request time and goes
straight into the request header. It is never stored on any object, logged,
or written anywhere.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass
from typing import Protocol

import requests

from .errors import EndpointError, InvalidArgumentError, TransientEndpointError
from .pacing import RetryPolicy, TokenBucket, call_with_retries

__all__ = [
    "ChatEndpointConfig",
    "Transport",
    "HttpTransport",
    "ReplayTransport",
    "ScriptedTransport",
    "ChatClient",
]


@dataclass(frozen=True)
class ChatEndpointConfig:
    """Where and how to reach the chat endpoint.

    ``auth_env`` names the environment variable holding the API token; only
    the variable name is ever stored or shown.
    """

    base_url: str = ""
    model: str = "gpt-3.5-turbo"
    auth_env: str = "ROADTUNE_API_TOKEN"
    timeout: float = 30.0
    requests_per_minute: float | None = None


class Transport(Protocol):
    def send(self, payload: dict) -> str:
        """Deliver one request payload, returning the generated text."""
        ...


class HttpTransport:
    """POSTs chat payloads to the configured URL.

    Accepts either ``{"text": ...}`` or the widespread
    ``{"choices": [{"message": {"content": ...}}]}`` response shape.
    Connection problems, timeouts, 429 and 5xx raise the retryable error;
    other 4xx (auth rejections included) are terminal.
    """

    def __init__(self, config: ChatEndpointConfig):
        if not config.base_url:
            raise InvalidArgumentError("chat endpoint base_url is not configured")
        self._config = config

    def send(self, payload: dict) -> str:
        headers = {}
        token = os.environ.get(self._config.auth_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        try:
            response = requests.post(
                self._config.base_url,
                json=payload,
                headers=headers,
                timeout=self._config.timeout,
            )
        except (requests.ConnectionError, requests.Timeout) as exc:
            raise TransientEndpointError(f"connection failure: {exc.__class__.__name__}") from exc
        if response.status_code == 429 or response.status_code >= 500:
            raise TransientEndpointError(f"status {response.status_code}")
        if response.status_code >= 400:
            raise EndpointError(f"endpoint rejected request: status {response.status_code}")
        try:
            body = response.json()
        except ValueError as exc:
            raise EndpointError("endpoint returned non-JSON body") from exc
        return _extract_text(body)


def _extract_text(body) -> str:
    if isinstance(body, dict):
        if isinstance(body.get("text"), str):
            return body["text"]
        choices = body.get("choices")
        if isinstance(choices, list) and choices:
            message = choices[0].get("message") if isinstance(choices[0], dict) else None
            if isinstance(message, dict) and isinstance(message.get("content"), str):
                return message["content"]
    raise EndpointError("endpoint response carried no generated text")


class ReplayTransport:
    """Replays recorded responses from a fixture file, in request order.

    Each line is either a JSON string or ``{"text": ...}``. Thread-safe;
    running past the end raises a terminal endpoint error.
    """

    def __init__(self, path):
        with open(path, "r", encoding="utf-8") as fh:
            lines = [line for line in fh.read().split("\n") if line.strip()]
        texts: list[str] = []
        for line_number, line in enumerate(lines, start=1):
            value = json.loads(line)
            if isinstance(value, str):
                texts.append(value)
            elif isinstance(value, dict) and isinstance(value.get("text"), str):
                texts.append(value["text"])
            else:
                raise EndpointError(
                    f"fixture line {line_number} is neither a string nor a text object"
                )
        self._texts = texts
        self._next = 0
        self._lock = threading.Lock()
        self._path = str(path)
        self.payloads: list[dict] = []

    def send(self, payload: dict) -> str:
        with self._lock:
            self.payloads.append(payload)
            if self._next >= len(self._texts):
                raise EndpointError(f"fixture {self._path} exhausted after {self._next} responses")
            text = self._texts[self._next]
            self._next += 1
            return text


class ScriptedTransport:
    """In-memory transport for tests: a list of responses and/or exceptions.

    String entries are returned; exception instances are raised. When the
    script runs out, ``repeat_last`` keeps returning the final string entry,
    otherwise a terminal error is raised. Sent payloads are recorded.
    """

    def __init__(self, script, repeat_last: bool = False):
        self._script = list(script)
        self._repeat_last = repeat_last
        self._next = 0
        self._lock = threading.Lock()
        self.payloads: list[dict] = []

    def send(self, payload: dict) -> str:
        with self._lock:
            self.payloads.append(payload)
            if self._next >= len(self._script):
                if self._repeat_last:
                    for entry in reversed(self._script):
                        if isinstance(entry, str):
                            return entry
                raise EndpointError("scripted transport exhausted")
            entry = self._script[self._next]
            self._next += 1
        if isinstance(entry, BaseException):
            raise entry
        return entry


class ChatClient:
    """Retrying, rate-limited wrapper around a transport.

    Retryable failures are retried with exponential backoff per ``retry``;
    terminal failures propagate immediately.
    """

    def __init__(
        self,
        config: ChatEndpointConfig,
        transport: Transport | None = None,
        retry: RetryPolicy = RetryPolicy(),
        sleep=time.sleep,
    ):
        self.config = config
        self.transport = transport if transport is not None else HttpTransport(config)
        self.retry = retry
        self._limiter = (
            TokenBucket(config.requests_per_minute, sleep=sleep)
            if config.requests_per_minute
            else None
        )
        self._sleep = sleep

    def complete(self, system: str, user: str, temperature: float | None = None) -> str:
        """Send one system+user exchange and return the generated text."""
        payload = {
            "model": self.config.model,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
        }
        if temperature is not None:
            payload["temperature"] = temperature

        def attempt() -> str:
            if self._limiter is not None:
                self._limiter.acquire()
            return self.transport.send(payload)

        return call_with_retries(
            attempt, self.retry, (TransientEndpointError,), sleep=self._sleep
        )
