"""Application configuration for the command line.

One JSON file configures the chat endpoint, metric settings, and score
providers. Everything has a working offline default: hash-based embeddings
and no pairwise score provider.

Example::

    {
      "chat": {"base_url": "https://api.example.com/v1/chat",
               "model": "gpt-3.5-turbo",
               "auth_env": "ROADTUNE_API_TOKEN",
               "requests_per_minute": 60},
      "metrics": {"max_n": 4, "smoothing_epsilon": 1e-9},
      "embeddings": {"kind": "hash", "dim": 32},
      "bleurt": {"kind": "constant", "value": 0.5}
    }
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .chat import ChatEndpointConfig
from .errors import ConfigError
from .metrics import MetricConfig
from .providers import (
    BleurtProvider,
    EmbeddingProvider,
    FixtureBleurtProvider,
    FixtureEmbeddingProvider,
    HashEmbeddingProvider,
    HttpBleurtProvider,
    HttpEmbeddingProvider,
    OneHotEmbeddingProvider,
    StubBleurtProvider,
)

__all__ = ["AppConfig", "load_app_config"]

_TOP_LEVEL_KEYS = {"chat", "metrics", "embeddings", "bleurt"}


@dataclass
class AppConfig:
    chat: ChatEndpointConfig = field(default_factory=ChatEndpointConfig)
    metric_config: MetricConfig = field(default_factory=MetricConfig)
    embeddings_spec: dict = field(default_factory=lambda: {"kind": "hash"})
    bleurt_spec: dict | None = None

    def build_embedding_provider(self) -> EmbeddingProvider:
        spec = dict(self.embeddings_spec)
        kind = spec.pop("kind", "hash")
        if kind == "hash":
            return HashEmbeddingProvider(dim=int(spec.pop("dim", 32)))
        if kind == "one-hot":
            return OneHotEmbeddingProvider(dim=int(spec.pop("dim", 256)))
        if kind == "fixture":
            return FixtureEmbeddingProvider(spec.pop("path"))
        if kind == "http":
            return HttpEmbeddingProvider(
                spec.pop("url"),
                timeout=float(spec.pop("timeout", 30.0)),
                requests_per_minute=spec.pop("requests_per_minute", None),
            )
        raise ConfigError(f"unknown embeddings kind {kind!r}")

    def build_bleurt_provider(self) -> BleurtProvider | None:
        if self.bleurt_spec is None:
            return None
        spec = dict(self.bleurt_spec)
        kind = spec.pop("kind", None)
        if kind == "constant":
            return StubBleurtProvider(float(spec.pop("value", 0.5)))
        if kind == "fixture":
            return FixtureBleurtProvider(spec.pop("path"))
        if kind == "http":
            return HttpBleurtProvider(
                spec.pop("url"),
                timeout=float(spec.pop("timeout", 30.0)),
                requests_per_minute=spec.pop("requests_per_minute", None),
            )
        raise ConfigError(f"unknown bleurt kind {kind!r}")


def load_app_config(path=None) -> AppConfig:
    """Load configuration from a JSON file; None yields all defaults."""
    if path is None:
        return AppConfig()
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    unknown = sorted(set(data) - _TOP_LEVEL_KEYS)
    if unknown:
        raise ConfigError(f"unknown config section(s): {unknown}")

    chat_data = data.get("chat", {})
    if not isinstance(chat_data, dict):
        raise ConfigError("'chat' section must be an object")
    try:
        chat = ChatEndpointConfig(
            base_url=chat_data.get("base_url", ""),
            model=chat_data.get("model", "gpt-3.5-turbo"),
            auth_env=chat_data.get("auth_env", "ROADTUNE_API_TOKEN"),
            timeout=float(chat_data.get("timeout", 30.0)),
            requests_per_minute=chat_data.get("requests_per_minute"),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid chat settings: {exc}") from exc

    metrics_data = data.get("metrics", {})
    if not isinstance(metrics_data, dict):
        raise ConfigError("'metrics' section must be an object")
    try:
        metric_config = MetricConfig(
            max_n=int(metrics_data.get("max_n", 4)),
            smoothing_epsilon=metrics_data.get("smoothing_epsilon", 1e-9),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid metric settings: {exc}") from exc

    embeddings_spec = data.get("embeddings", {"kind": "hash"})
    if not isinstance(embeddings_spec, dict):
        raise ConfigError("'embeddings' section must be an object")
    bleurt_spec = data.get("bleurt")
    if bleurt_spec is not None and not isinstance(bleurt_spec, dict):
        raise ConfigError("'bleurt' section must be an object or null")

    return AppConfig(
        chat=chat,
        metric_config=metric_config,
        embeddings_spec=embeddings_spec,
        bleurt_spec=bleurt_spec,
    )
