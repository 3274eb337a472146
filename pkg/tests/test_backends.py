from __future__ import annotations

import json

import pytest

from ruleharness.backends import (
    FunctionBackend,
    GenerationRequest,
    HttpBackend,
    LogprobQuery,
    LogprobResult,
    RecordingBackend,
    ReplayBackend,
    ResponseCache,
    ScriptedBackend,
    cache_key,
)
from ruleharness.errors import (
    CorruptRecordingError,
    ReplayMissError,
    TransportError,
    UnsupportedError,
)


def req(**overrides) -> GenerationRequest:
    base = dict(system="sys", user="hello", temperature=0.0, model_id="m1")
    base.update(overrides)
    return GenerationRequest(**base)


def test_cache_key_deterministic_and_hex():
    k1 = cache_key(req())
    k2 = cache_key(req())
    assert k1 == k2
    assert len(k1) == 64
    assert all(c in "0123456789abcdef" for c in k1)


def test_cache_key_canonicalization_frozen():
    # locks the canonical serialization: any change to field order, float
    # formatting, or escaping shows up as a different digest
    assert cache_key(req()) == \
        "7098f5f63b6b8e915937bd6ab9c7504012fa5bcb4459f8ee2ffe9e7f90c98010"


def test_logprobs_must_be_finite():
    with pytest.raises(CorruptRecordingError):
        LogprobResult((("ab", float("-inf"), 0, 2),)).validate("ab")


def test_cache_key_sensitive_to_each_field():
    base = cache_key(req())
    assert cache_key(req(temperature=1.0)) != base
    assert cache_key(req(user="other")) != base
    assert cache_key(req(model_id="m2")) != base
    assert cache_key(req(tag="x")) != base


def test_request_validation():
    with pytest.raises(ValueError):
        req(temperature=3.0)
    with pytest.raises(ValueError):
        req(model_id="")
    with pytest.raises(ValueError):
        LogprobQuery(prefix="p", continuation="", model_id="m")


def test_scripted_backend_round_trip():
    backend = ScriptedBackend()
    backend.script(req(), "Output: 287")
    assert backend.chat_generate(req()) == "Output: 287"
    with pytest.raises(ReplayMissError):
        backend.chat_generate(req(user="unseen"))


def test_scripted_logprobs_and_validation():
    backend = ScriptedBackend()
    query = LogprobQuery(prefix="p", continuation="ab", model_id="m")
    backend.script_logprobs(query, [["a", -0.5, 0, 1], ["b", -1.0, 1, 2]])
    result = backend.completion_logprobs(query)
    assert result.total() == pytest.approx(-1.5)
    assert result.total() <= 0

    bad = LogprobQuery(prefix="p", continuation="abc", model_id="m")
    backend.script_logprobs(bad, [["a", -0.5, 0, 1], ["b", -1.0, 1, 2]])
    with pytest.raises(CorruptRecordingError):
        backend.completion_logprobs(bad)


def test_empty_token_list_is_corrupt():
    with pytest.raises(CorruptRecordingError):
        LogprobResult(()).validate("x")


def test_replay_miss_strict(tmp_path):
    backend = ReplayBackend(ResponseCache(tmp_path))
    with pytest.raises(ReplayMissError):
        backend.chat_generate(req())


def test_record_then_replay_round_trip(tmp_path):
    store = ResponseCache(tmp_path)
    inner = FunctionBackend(lambda r: f"echo:{r.user}")
    recording = RecordingBackend(inner, store)
    assert recording.chat_generate(req(user="a")) == "echo:a"
    assert recording.chat_generate(req(user="b")) == "echo:b"

    replay = ReplayBackend(store)
    assert replay.chat_generate(req(user="a")) == "echo:a"
    assert replay.chat_generate(req(user="b")) == "echo:b"
    with pytest.raises(ReplayMissError):
        replay.chat_generate(req(user="c"))


def test_cache_layout(tmp_path):
    store = ResponseCache(tmp_path)
    key = cache_key(req())
    store.put(key, {"kind": "chat"}, "hi")
    path = tmp_path / key[:2] / f"{key}.json"
    assert path.exists()
    entry = json.loads(path.read_text())
    assert entry["reply"] == "hi"
    assert "timestamp" in entry


class _FakeResponse:
    def __init__(self, status_code, payload=None, text=""):
        self.status_code = status_code
        self._payload = payload or {}
        self.text = text

    def json(self):
        return self._payload


def test_http_retry_exhaustion():
    calls = []

    def post(url, json=None, headers=None, timeout=None):
        calls.append(url)
        return _FakeResponse(429, text="slow down")

    backend = HttpBackend("http://x", _sleep=lambda s: None, _post=post)
    with pytest.raises(TransportError) as err:
        backend.chat_generate(req())
    assert err.value.status == 429
    assert len(calls) == 3


def test_http_fails_fast_on_client_error():
    calls = []

    def post(url, json=None, headers=None, timeout=None):
        calls.append(url)
        return _FakeResponse(400, text="bad request")

    backend = HttpBackend("http://x", _sleep=lambda s: None, _post=post)
    with pytest.raises(TransportError):
        backend.chat_generate(req())
    assert len(calls) == 1


def test_http_success_records_to_cache(tmp_path):
    def post(url, json=None, headers=None, timeout=None):
        return _FakeResponse(200, {"choices": [{"message": {"content": "pong"}}]})

    store = ResponseCache(tmp_path)
    backend = HttpBackend("http://x", cache=store, _sleep=lambda s: None, _post=post)
    assert backend.chat_generate(req()) == "pong"
    replay = ReplayBackend(store)
    assert replay.chat_generate(req()) == "pong"


def test_http_logprobs_clips_to_continuation():
    payload = {
        "choices": [{
            "logprobs": {
                "tokens": ["pre", "fix", " con", "tinu", "ation"],
                "token_logprobs": [None, -0.1, -0.2, -0.3, -0.4],
                "text_offset": [0, 3, 6, 10, 14],
            }
        }]
    }

    def post(url, json=None, headers=None, timeout=None):
        return _FakeResponse(200, payload)

    backend = HttpBackend("http://x", _sleep=lambda s: None, _post=post)
    result = backend.completion_logprobs(
        LogprobQuery(prefix="prefix", continuation=" continuation", model_id="m"))
    assert "".join(t[0] for t in result.tokens) == " continuation"
    assert result.total() == pytest.approx(-0.9)


def test_function_backend_unsupported_logprobs():
    backend = FunctionBackend(lambda r: "x")
    with pytest.raises(UnsupportedError):
        backend.completion_logprobs(LogprobQuery("p", "c", "m"))
