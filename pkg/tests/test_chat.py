import json
import logging

import pytest
import requests

from roadtune.chat import (
    ChatClient,
    ChatEndpointConfig,
    HttpTransport,
    ReplayTransport,
    ScriptedTransport,
)
from roadtune.errors import EndpointError, InvalidArgumentError, TransientEndpointError
from roadtune.pacing import RetryPolicy

CONFIG = ChatEndpointConfig(base_url="http://chat.local/v1", model="test-model")


class _Response:
    def __init__(self, status_code, body=None, raw=""):
        self.status_code = status_code
        self._body = body
        self.text = raw

    def json(self):
        if self._body is None:
            raise ValueError("not json")
        return self._body


# --- transports ---------------------------------------------------------


def test_http_transport_requires_url():
    with pytest.raises(InvalidArgumentError):
        HttpTransport(ChatEndpointConfig())


def test_http_transport_round_trip(monkeypatch):
    seen = {}

    def fake_post(url, json=None, headers=None, timeout=None):
        seen.update(url=url, payload=json, headers=headers, timeout=timeout)
        return _Response(200, {"text": "generated"})

    monkeypatch.setattr(requests, "post", fake_post)
    monkeypatch.setenv("ROADTUNE_API_TOKEN", "tok-123")
    out = HttpTransport(CONFIG).send({"model": "test-model"})
    assert out == "generated"
    assert seen["url"] == "http://chat.local/v1"
    assert seen["headers"] == {"Authorization": "Bearer tok-123"}
    assert seen["timeout"] == 30.0


def test_http_transport_token_absent_sends_no_auth_header(monkeypatch):
    seen = {}

    def fake_post(url, json=None, headers=None, timeout=None):
        seen["headers"] = headers
        return _Response(200, {"text": "ok"})

    monkeypatch.setattr(requests, "post", fake_post)
    monkeypatch.delenv("ROADTUNE_API_TOKEN", raising=False)
    HttpTransport(CONFIG).send({})
    assert seen["headers"] == {}


def test_http_transport_never_stores_token(monkeypatch):
    monkeypatch.setenv("ROADTUNE_API_TOKEN", "sentinel-value-xyz")
    transport = HttpTransport(CONFIG)
    state = repr(vars(transport)) + repr(vars(transport._config))
    assert "sentinel-value-xyz" not in state


def test_http_transport_openai_response_shape(monkeypatch):
    body = {"choices": [{"message": {"content": "from choices"}}]}
    monkeypatch.setattr(
        requests, "post", lambda url, **kw: _Response(200, body)
    )
    assert HttpTransport(CONFIG).send({}) == "from choices"


@pytest.mark.parametrize("status", [429, 500, 503])
def test_http_transport_transient_statuses(monkeypatch, status):
    monkeypatch.setattr(requests, "post", lambda url, **kw: _Response(status))
    with pytest.raises(TransientEndpointError):
        HttpTransport(CONFIG).send({})


@pytest.mark.parametrize("status", [400, 401, 403, 404])
def test_http_transport_terminal_statuses(monkeypatch, status):
    monkeypatch.setattr(requests, "post", lambda url, **kw: _Response(status))
    with pytest.raises(EndpointError) as info:
        HttpTransport(CONFIG).send({})
    assert not isinstance(info.value, TransientEndpointError)


def test_http_transport_connection_failure(monkeypatch):
    def fake_post(url, **kw):
        raise requests.ConnectionError("refused")

    monkeypatch.setattr(requests, "post", fake_post)
    with pytest.raises(TransientEndpointError):
        HttpTransport(CONFIG).send({})


def test_http_transport_bad_bodies(monkeypatch):
    monkeypatch.setattr(requests, "post", lambda url, **kw: _Response(200, None))
    with pytest.raises(EndpointError, match="non-JSON"):
        HttpTransport(CONFIG).send({})
    monkeypatch.setattr(requests, "post", lambda url, **kw: _Response(200, {"odd": 1}))
    with pytest.raises(EndpointError, match="no generated text"):
        HttpTransport(CONFIG).send({})


def test_replay_transport(tmp_path):
    path = tmp_path / "replay.jsonl"
    path.write_text(
        json.dumps("first response") + "\n" + json.dumps({"text": "second response"}) + "\n",
        encoding="utf-8",
    )
    transport = ReplayTransport(path)
    assert transport.send({"n": 1}) == "first response"
    assert transport.send({"n": 2}) == "second response"
    assert [p["n"] for p in transport.payloads] == [1, 2]
    with pytest.raises(EndpointError, match="exhausted"):
        transport.send({"n": 3})


def test_replay_transport_rejects_other_shapes(tmp_path):
    path = tmp_path / "replay.jsonl"
    path.write_text("[1, 2]\n", encoding="utf-8")
    with pytest.raises(EndpointError):
        ReplayTransport(path)


def test_scripted_transport_repeat_last():
    transport = ScriptedTransport(["only"], repeat_last=True)
    assert transport.send({}) == "only"
    assert transport.send({}) == "only"
    assert transport.send({}) == "only"


# --- client -------------------------------------------------------------


def test_client_payload_shape():
    transport = ScriptedTransport(["answer"])
    client = ChatClient(CONFIG, transport=transport)
    out = client.complete("system text", "user text")
    assert out == "answer"
    payload = transport.payloads[0]
    assert payload["model"] == "test-model"
    assert payload["messages"] == [
        {"role": "system", "content": "system text"},
        {"role": "user", "content": "user text"},
    ]
    assert "temperature" not in payload


def test_client_temperature_included_when_set():
    transport = ScriptedTransport(["answer"])
    ChatClient(CONFIG, transport=transport).complete("s", "u", temperature=1.0)
    assert transport.payloads[0]["temperature"] == 1.0


def test_client_retries_transient_then_succeeds():
    transport = ScriptedTransport(
        [TransientEndpointError("blip"), TransientEndpointError("blip"), "answer"]
    )
    slept = []
    client = ChatClient(
        CONFIG,
        transport=transport,
        retry=RetryPolicy(max_attempts=3, backoff_base=0.5),
        sleep=slept.append,
    )
    assert client.complete("s", "u") == "answer"
    assert len(transport.payloads) == 3
    assert slept == [0.5, 1.0]


def test_client_gives_up_after_max_attempts():
    transport = ScriptedTransport([TransientEndpointError("blip")] * 5)
    client = ChatClient(
        CONFIG, transport=transport, retry=RetryPolicy(max_attempts=3), sleep=lambda s: None
    )
    with pytest.raises(TransientEndpointError):
        client.complete("s", "u")
    assert len(transport.payloads) == 3


def test_client_terminal_error_not_retried():
    transport = ScriptedTransport([EndpointError("bad request"), "never reached"])
    client = ChatClient(CONFIG, transport=transport, sleep=lambda s: None)
    with pytest.raises(EndpointError):
        client.complete("s", "u")
    assert len(transport.payloads) == 1


def test_client_rate_limits_between_requests():
    transport = ScriptedTransport(["a", "b"])
    slept = []
    config = ChatEndpointConfig(base_url="http://x", requests_per_minute=60.0)
    client = ChatClient(config, transport=transport, sleep=slept.append)
    client.complete("s", "u")
    client.complete("s", "u")
    assert len(slept) == 1
    assert slept[0] == pytest.approx(1.0, abs=0.2)


def test_token_never_reaches_logs(monkeypatch, caplog):
    monkeypatch.setenv("ROADTUNE_API_TOKEN", "super-secret-sentinel")
    monkeypatch.setattr(
        requests, "post", lambda url, **kw: _Response(200, {"text": "fine"})
    )
    with caplog.at_level(logging.DEBUG):
        ChatClient(CONFIG).complete("s", "u")
    assert "super-secret-sentinel" not in caplog.text
