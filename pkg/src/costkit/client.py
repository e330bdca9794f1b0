"""Chat-completion transport with retries and a record/replay cassette.

The wire format is the OpenAI-compatible ``/chat/completions`` body with a
single user message. Requests are identified by a content fingerprint, so a
cassette survives reordering and retries. ``replay_strict`` mode never opens
a connection, which is what keeps dataset builds reproducible and free.

Credentials come from environment variables (by default ``OPENAI_API_KEY``
and ``OPENAI_BASE_URL``) and are never written to cassettes or logs.
"""

from __future__ import annotations

import hashlib
import json
import os
import random
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Sequence

import httpx

from costkit.model import CostkitError, canonical_json

API_KEY_ENV = "OPENAI_API_KEY"
BASE_URL_ENV = "OPENAI_BASE_URL"

MODE_LIVE = "live"
MODE_RECORD = "record"
MODE_REPLAY_STRICT = "replay_strict"
MODE_REPLAY_FALLTHROUGH = "replay_fallthrough"
MODES = (MODE_LIVE, MODE_RECORD, MODE_REPLAY_STRICT, MODE_REPLAY_FALLTHROUGH)

_RETRYABLE_STATUS = frozenset({429, 500, 502, 503, 504})


class ReplayMiss(CostkitError):
    """Strict replay found no recording for a request fingerprint."""


class TransportError(CostkitError):
    """The endpoint kept failing after all retry attempts."""


class AuthError(CostkitError):
    """The endpoint rejected the credential; retrying cannot help."""


@dataclass(frozen=True)
class CompletionRequest:
    model_id: str
    prompt_text: str
    temperature: float = 0.7
    max_tokens: int = 1024
    stop_sequences: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.prompt_text:
            raise ValueError("prompt_text must be nonempty")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError("temperature must be in [0, 2]")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")


@dataclass(frozen=True)
class CompletionResponse:
    text: str
    finish_reason: str = "stop"  # stop | length | other
    usage: tuple[tuple[str, int], ...] = ()
    latency_s: float = 0.0

    def __post_init__(self) -> None:
        if self.finish_reason == "stop" and self.text is None:
            raise ValueError("text must be present when finish_reason is 'stop'")

    def usage_dict(self) -> dict[str, int]:
        return dict(self.usage)


def fingerprint(request: CompletionRequest) -> str:
    """Stable hex id for a request; depends only on its field values."""
    payload = canonical_json(
        {
            "model_id": request.model_id,
            "prompt_text": request.prompt_text,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
            "stop_sequences": list(request.stop_sequences),
        }
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class Cassette:
    """A fingerprint-keyed store of recorded responses.

    Writes are serialized internally, so one cassette may back a concurrent
    batch. When ``path`` is set, recordings are persisted write-through.
    """

    def __init__(self, mode: str = MODE_REPLAY_STRICT, path: str | Path | None = None):
        if mode not in MODES:
            raise ValueError(f"unknown cassette mode {mode!r}")
        self.mode = mode
        self.path = Path(path) if path else None
        self.entries: dict[str, CompletionResponse] = {}
        self._lock = threading.Lock()
        if self.path and self.path.exists():
            self._load()

    def _load(self) -> None:
        doc = json.loads(self.path.read_text(encoding="utf-8"))
        for key, entry in doc.get("entries", {}).items():
            self.entries[key] = CompletionResponse(
                text=entry["text"],
                finish_reason=entry.get("finish_reason", "stop"),
                usage=tuple(sorted(entry.get("usage", {}).items())),
                latency_s=entry.get("latency_s", 0.0),
            )

    def save(self) -> None:
        if not self.path:
            return
        doc = {
            "version": 1,
            "entries": {
                key: {
                    "text": resp.text,
                    "finish_reason": resp.finish_reason,
                    "usage": resp.usage_dict(),
                    "latency_s": resp.latency_s,
                }
                for key, resp in sorted(self.entries.items())
            },
        }
        tmp = self.path.with_suffix(self.path.suffix + ".tmp")
        tmp.write_text(json.dumps(doc, indent=1, sort_keys=True, ensure_ascii=False), encoding="utf-8")
        tmp.replace(self.path)

    def lookup(self, key: str) -> CompletionResponse | None:
        with self._lock:
            return self.entries.get(key)

    def record(self, key: str, response: CompletionResponse) -> None:
        with self._lock:
            self.entries[key] = response
            self.save()

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class RetryPolicy:
    """Exponential backoff with full jitter."""

    base_s: float = 1.0
    factor: float = 2.0
    max_attempts: int = 5

    def delay(self, attempt: int, rng: random.Random) -> float:
        return rng.uniform(0.0, self.base_s * (self.factor**attempt))


class LLMClient:
    """Thin, shareable transport for single-shot chat completions."""

    def __init__(
        self,
        base_url: str | None = None,
        api_key: str | None = None,
        timeout_s: float = 60.0,
        retry: RetryPolicy = RetryPolicy(),
        sleeper: Callable[[float], None] = time.sleep,
        rng: random.Random | None = None,
    ):
        self._base_url = base_url
        self._api_key = api_key
        self.timeout_s = timeout_s
        self.retry = retry
        self._sleeper = sleeper
        self._rng = rng or random.Random()

    def _resolve_base_url(self) -> str:
        url = self._base_url or os.environ.get(BASE_URL_ENV, "")
        if not url:
            raise TransportError(f"no endpoint configured; set {BASE_URL_ENV} or pass base_url")
        return url.rstrip("/")

    def _resolve_api_key(self) -> str:
        return self._api_key or os.environ.get(API_KEY_ENV, "")

    def complete(self, request: CompletionRequest, cassette: Cassette) -> CompletionResponse:
        """Resolve one request through the cassette's mode."""
        key = fingerprint(request)
        if cassette.mode in (MODE_REPLAY_STRICT, MODE_REPLAY_FALLTHROUGH):
            hit = cassette.lookup(key)
            if hit is not None:
                return hit
            if cassette.mode == MODE_REPLAY_STRICT:
                raise ReplayMiss(f"no recording for fingerprint {key[:12]}…")
        response = self._call_with_retries(request)
        if cassette.mode in (MODE_RECORD, MODE_REPLAY_FALLTHROUGH):
            cassette.record(key, response)
        return response

    def complete_batch(
        self,
        requests: Sequence[CompletionRequest],
        cassette: Cassette,
        max_in_flight: int = 4,
    ) -> list[tuple[int, CompletionResponse | CostkitError]]:
        """Resolve many requests with bounded parallelism.

        Every request gets exactly one terminal outcome; failures are
        returned per item, never raised. Results come back sorted by the
        original request index.
        """
        if max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")
        if not requests:
            return []
        results: list[tuple[int, CompletionResponse | CostkitError]] = []

        def run(idx: int, req: CompletionRequest) -> tuple[int, CompletionResponse | CostkitError]:
            try:
                return idx, self.complete(req, cassette)
            except CostkitError as exc:
                return idx, exc

        with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
            futures = [pool.submit(run, i, r) for i, r in enumerate(requests)]
            for future in futures:
                results.append(future.result())
        results.sort(key=lambda pair: pair[0])
        return results

    def _call_with_retries(self, request: CompletionRequest) -> CompletionResponse:
        last_error: Exception | None = None
        for attempt in range(self.retry.max_attempts):
            if attempt:
                self._sleeper(self.retry.delay(attempt - 1, self._rng))
            try:
                return self._call_once(request)
            except AuthError:
                raise
            except (TransportError, httpx.TimeoutException, httpx.TransportError) as exc:
                last_error = exc
        raise TransportError(
            f"gave up after {self.retry.max_attempts} attempts: {last_error}"
        )

    def _call_once(self, request: CompletionRequest) -> CompletionResponse:
        url = self._resolve_base_url() + "/chat/completions"
        headers = {"Content-Type": "application/json"}
        api_key = self._resolve_api_key()
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        body = {
            "model": request.model_id,
            "messages": [{"role": "user", "content": request.prompt_text}],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        if request.stop_sequences:
            body["stop"] = list(request.stop_sequences)

        started = time.monotonic()
        response = httpx.post(url, json=body, headers=headers, timeout=self.timeout_s)
        latency = time.monotonic() - started

        if response.status_code in (401, 403):
            raise AuthError(f"endpoint rejected credential (HTTP {response.status_code})")
        if response.status_code in _RETRYABLE_STATUS:
            raise TransportError(f"HTTP {response.status_code}")
        if response.status_code != 200:
            raise TransportError(f"unexpected HTTP {response.status_code}: {response.text[:200]}")

        doc = response.json()
        choice = doc["choices"][0]
        finish = choice.get("finish_reason") or "other"
        if finish not in ("stop", "length"):
            finish = "other"
        usage = doc.get("usage", {})
        return CompletionResponse(
            text=choice["message"]["content"],
            finish_reason=finish,
            usage=tuple(sorted((k, int(v)) for k, v in usage.items() if isinstance(v, int))),
            latency_s=latency,
        )


def requests_for_prompts(
    model_id: str,
    prompts: Iterable[str],
    temperature: float = 0.7,
    max_tokens: int = 1024,
) -> list[CompletionRequest]:
    return [
        CompletionRequest(
            model_id=model_id,
            prompt_text=p,
            temperature=temperature,
            max_tokens=max_tokens,
        )
        for p in prompts
    ]
