"""Pluggable model access: live HTTP, deterministic replay, and scripted
backends, plus the content-addressed response cache.

Live calls speak the OpenAI-compatible wire protocol: ``/chat/completions``
for generation and ``/completions`` with echoed logprobs for scoring. Replay
is the testing substrate; hosted models are nondeterministic even at T=0.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from .errors import (
    CorruptRecordingError,
    ReplayMissError,
    TransportError,
    UnsupportedError,
)

RETRYABLE_STATUSES = frozenset({429, 500, 502, 503, 504})


@dataclass(frozen=True)
class GenerationRequest:
    """One chat-generation call.

    ``tag`` never reaches the server; it only disambiguates otherwise
    identical requests (e.g. the i-th hypothesis sample for an instance) so
    recordings replay one-to-one.
    """

    system: str
    user: str
    temperature: float
    model_id: str
    max_tokens: int | None = None
    tag: str = ""

    def __post_init__(self):
        if not self.model_id:
            raise ValueError("model_id must be non-empty")
        if not (0.0 <= self.temperature <= 2.0):
            raise ValueError(f"temperature {self.temperature} outside [0, 2]")
        if self.max_tokens is not None and self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive when set")


@dataclass(frozen=True)
class LogprobQuery:
    """Score ``continuation`` token-by-token given ``prefix``."""

    prefix: str
    continuation: str
    model_id: str

    def __post_init__(self):
        if not self.continuation:
            raise ValueError("continuation must be non-empty")


@dataclass(frozen=True)
class LogprobResult:
    """Token-level log-probabilities aligned to continuation characters.

    tokens: (token_text, logprob, char_start, char_end), spans contiguous
    and covering [0, len(continuation)).
    """

    tokens: tuple[tuple[str, float, int, int], ...]

    def validate(self, continuation: str) -> "LogprobResult":
        if not self.tokens:
            raise CorruptRecordingError("empty token list")
        joined = "".join(t[0] for t in self.tokens)
        if joined != continuation:
            raise CorruptRecordingError(
                f"token texts reassemble to {joined!r}, not the continuation"
            )
        pos = 0
        for text, logprob, start, end in self.tokens:
            if start != pos or end - start != len(text):
                raise CorruptRecordingError("token char spans are not contiguous")
            if not math.isfinite(logprob) or logprob > 0:
                raise CorruptRecordingError(f"logprob {logprob} not a finite non-positive value")
            pos = end
        if pos != len(continuation):
            raise CorruptRecordingError("token spans do not cover the continuation")
        return self

    def total(self) -> float:
        return sum(t[1] for t in self.tokens)


def cache_key(request: GenerationRequest | LogprobQuery) -> str:
    """Stable 64-hex digest of a canonical request serialization."""
    if isinstance(request, GenerationRequest):
        payload = {
            "kind": "chat",
            "model_id": request.model_id,
            "system": request.system,
            "user": request.user,
            "temperature": float(request.temperature),
            "max_tokens": request.max_tokens,
            "tag": request.tag,
        }
    else:
        payload = {
            "kind": "logprobs",
            "model_id": request.model_id,
            "prefix": request.prefix,
            "continuation": request.continuation,
        }
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=True)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class ResponseCache:
    """One JSON file per key under ``<root>/<first-2-hex>/<key>.json``.

    Writes are atomic (tmp + rename), so concurrent writers of the same key
    are safe: replay values are deterministic per key and live values take
    last-write-wins.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)

    def _path(self, key: str) -> Path:
        return self.root / key[:2] / f"{key}.json"

    def get(self, key: str) -> dict | None:
        path = self._path(key)
        if not path.exists():
            return None
        return json.loads(path.read_text(encoding="utf-8"))

    def put(self, key: str, request_payload: dict, reply) -> None:
        path = self._path(key)
        path.parent.mkdir(parents=True, exist_ok=True)
        entry = {"request": request_payload, "reply": reply, "timestamp": time.time()}
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(entry, ensure_ascii=False), encoding="utf-8")
        os.replace(tmp, path)


def _request_payload(request: GenerationRequest) -> dict:
    return {
        "kind": "chat",
        "model_id": request.model_id,
        "system": request.system,
        "user": request.user,
        "temperature": request.temperature,
        "max_tokens": request.max_tokens,
        "tag": request.tag,
    }


def _query_payload(query: LogprobQuery) -> dict:
    return {
        "kind": "logprobs",
        "model_id": query.model_id,
        "prefix": query.prefix,
        "continuation": query.continuation,
    }


def _tokens_from_reply(reply, continuation: str) -> LogprobResult:
    try:
        tokens = tuple((t[0], float(t[1]), int(t[2]), int(t[3])) for t in reply)
    except (TypeError, ValueError, IndexError) as exc:
        raise CorruptRecordingError(f"malformed token recording: {exc}") from exc
    return LogprobResult(tokens).validate(continuation)


class Backend:
    """Interface: chat generation plus (optionally) echoed logprob scoring."""

    def chat_generate(self, request: GenerationRequest) -> str:
        raise NotImplementedError

    def completion_logprobs(self, query: LogprobQuery) -> LogprobResult:
        raise UnsupportedError(f"{type(self).__name__} cannot return token logprobs")


class HttpBackend(Backend):
    """OpenAI-compatible HTTP backend with bounded retries and caching.

    Retries 429/5xx and connection failures up to ``attempts`` times with
    exponential backoff (1 s base); other statuses fail fast so a batch run
    never silently skips instances.
    """

    def __init__(self, base_url: str, api_key_env: str = "HARNESS_API_KEY",
                 cache: ResponseCache | None = None, timeout: float = 120.0,
                 attempts: int = 3, _sleep: Callable[[float], None] = time.sleep,
                 _post: Callable | None = None):
        self.base_url = base_url.rstrip("/")
        self.api_key_env = api_key_env
        self.cache = cache
        self.timeout = timeout
        self.attempts = attempts
        self._sleep = _sleep
        if _post is None:
            import requests

            self._post = requests.post
        else:
            self._post = _post

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.api_key_env, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def _call(self, path: str, body: dict) -> dict:
        last_status, last_body = 0, ""
        for attempt in range(self.attempts):
            if attempt:
                self._sleep(2 ** (attempt - 1))
            try:
                resp = self._post(f"{self.base_url}{path}", json=body,
                                  headers=self._headers(), timeout=self.timeout)
            except OSError as exc:
                last_status, last_body = 0, str(exc)
                continue
            if resp.status_code == 200:
                return resp.json()
            last_status, last_body = resp.status_code, resp.text
            if resp.status_code not in RETRYABLE_STATUSES:
                break
        raise TransportError(last_status, last_body)

    def chat_generate(self, request: GenerationRequest) -> str:
        body = {
            "model": request.model_id,
            "messages": [
                {"role": "system", "content": request.system},
                {"role": "user", "content": request.user},
            ],
            "temperature": request.temperature,
        }
        if request.max_tokens is not None:
            body["max_tokens"] = request.max_tokens
        data = self._call("/chat/completions", body)
        reply = data["choices"][0]["message"]["content"] or ""
        if self.cache is not None:
            self.cache.put(cache_key(request), _request_payload(request), reply)
        return reply

    def completion_logprobs(self, query: LogprobQuery) -> LogprobResult:
        body = {
            "model": query.model_id,
            "prompt": query.prefix + query.continuation,
            "max_tokens": 0,
            "echo": True,
            "logprobs": 0,
            "temperature": 0.0,
        }
        data = self._call("/completions", body)
        lp = data["choices"][0].get("logprobs")
        if not lp or "tokens" not in lp:
            raise UnsupportedError("endpoint returned no logprobs block")
        result = _continuation_tokens(lp, len(query.prefix), query.continuation)
        if self.cache is not None:
            self.cache.put(cache_key(query), _query_payload(query),
                           [list(t) for t in result.tokens])
        return result


def _continuation_tokens(lp: dict, prefix_len: int, continuation: str) -> LogprobResult:
    """Cut the echoed token stream down to the continuation region.

    A token straddling the prefix/continuation boundary is clipped to its
    continuation characters; its full logprob is kept (tokenizers rarely
    honour our boundary, and the clip keeps span invariants intact).
    """
    tokens = lp["tokens"]
    logprobs = lp["token_logprobs"]
    offsets = lp.get("text_offset")
    if offsets is None:
        raise UnsupportedError("endpoint returned no text offsets")
    out: list[tuple[str, float, int, int]] = []
    for text, logprob, start in zip(tokens, logprobs, offsets):
        end = start + len(text)
        if end <= prefix_len:
            continue
        clip_start = max(start, prefix_len)
        out.append((
            text[clip_start - start:],
            float(logprob) if logprob is not None else 0.0,
            clip_start - prefix_len,
            end - prefix_len,
        ))
    return LogprobResult(tuple(out)).validate(continuation)


class ReplayBackend(Backend):
    """Serves recorded replies; optionally falls through to a live backend.

    With no fallback (strict mode) a missing recording raises
    ReplayMissError instead of silently inventing data.
    """

    def __init__(self, store: ResponseCache, fallback: Backend | None = None):
        self.store = store
        self.fallback = fallback

    def chat_generate(self, request: GenerationRequest) -> str:
        key = cache_key(request)
        entry = self.store.get(key)
        if entry is not None:
            return entry["reply"]
        if self.fallback is None:
            raise ReplayMissError(key)
        reply = self.fallback.chat_generate(request)
        self.store.put(key, _request_payload(request), reply)
        return reply

    def completion_logprobs(self, query: LogprobQuery) -> LogprobResult:
        key = cache_key(query)
        entry = self.store.get(key)
        if entry is not None:
            return _tokens_from_reply(entry["reply"], query.continuation)
        if self.fallback is None:
            raise ReplayMissError(key)
        result = self.fallback.completion_logprobs(query)
        self.store.put(key, _query_payload(query), [list(t) for t in result.tokens])
        return result


class RecordingBackend(Backend):
    """Pass-through wrapper that records every reply into a cache store."""

    def __init__(self, inner: Backend, store: ResponseCache):
        self.inner = inner
        self.store = store

    def chat_generate(self, request: GenerationRequest) -> str:
        reply = self.inner.chat_generate(request)
        self.store.put(cache_key(request), _request_payload(request), reply)
        return reply

    def completion_logprobs(self, query: LogprobQuery) -> LogprobResult:
        result = self.inner.completion_logprobs(query)
        self.store.put(cache_key(query), _query_payload(query),
                       [list(t) for t in result.tokens])
        return result


class ScriptedBackend(Backend):
    """Fixed request-key -> reply mapping for tests."""

    def __init__(self):
        self.replies: dict[str, str] = {}
        self.logprob_replies: dict[str, list] = {}

    def script(self, request: GenerationRequest, reply: str) -> None:
        self.replies[cache_key(request)] = reply

    def script_logprobs(self, query: LogprobQuery, tokens: list) -> None:
        self.logprob_replies[cache_key(query)] = tokens

    def chat_generate(self, request: GenerationRequest) -> str:
        key = cache_key(request)
        if key not in self.replies:
            raise ReplayMissError(key)
        return self.replies[key]

    def completion_logprobs(self, query: LogprobQuery) -> LogprobResult:
        key = cache_key(query)
        if key not in self.logprob_replies:
            raise ReplayMissError(key)
        return _tokens_from_reply(self.logprob_replies[key], query.continuation)


class FunctionBackend(Backend):
    """Backend driven by plain callables; the scripted-oracle workhorse."""

    def __init__(self, chat_fn: Callable[[GenerationRequest], str],
                 logprob_fn: Callable[[LogprobQuery], LogprobResult] | None = None):
        self.chat_fn = chat_fn
        self.logprob_fn = logprob_fn
        self.chat_calls = 0

    def chat_generate(self, request: GenerationRequest) -> str:
        self.chat_calls += 1
        return self.chat_fn(request)

    def completion_logprobs(self, query: LogprobQuery) -> LogprobResult:
        if self.logprob_fn is None:
            raise UnsupportedError("no logprob function configured")
        return self.logprob_fn(query).validate(query.continuation)
