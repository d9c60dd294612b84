"""Chat-completion gateway: an OpenAI-compatible HTTP client and a deterministic mock.

Both share the same front door, ``Gateway.complete``, which enforces the
request cap, the in-flight cap and the call/token accounting. Responses can
be cached by request hash so reruns with a warmed cache are reproducible.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Mapping

import requests

from .errors import BudgetExceeded, EndpointError, TransportError

log = logging.getLogger(__name__)

ENV_URL = "COREFORGE_LLM_URL"
ENV_MODEL = "COREFORGE_LLM_MODEL"
ENV_KEY = "COREFORGE_LLM_KEY"

CONSTRUCTION_TEMPERATURE = 0.0
GENERATION_TEMPERATURE = 1.0


@dataclass(frozen=True)
class LlmRequest:
    user_text: str
    system_text: str = ""
    temperature: float = CONSTRUCTION_TEMPERATURE
    max_output_tokens: int = 1024

    def __post_init__(self):
        if not self.user_text:
            raise ValueError("user_text must be non-empty")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")

    def digest(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class LlmResponse:
    text: str
    model_name: str
    token_counts: tuple[int, int]  # (input, output)


class ResponseCache:
    """Request-hash -> response text. Optionally backed by a JSON Lines file."""

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path else None
        self._lock = threading.Lock()
        self._data: dict[str, dict] = {}
        if self.path and self.path.exists():
            for line in self.path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    rec = json.loads(line)
                    self._data[rec["key"]] = rec

    def get(self, key: str) -> LlmResponse | None:
        rec = self._data.get(key)
        if rec is None:
            return None
        return LlmResponse(rec["text"], rec["model_name"], tuple(rec["token_counts"]))

    def put(self, key: str, resp: LlmResponse) -> None:
        rec = {"key": key, "text": resp.text, "model_name": resp.model_name, "token_counts": list(resp.token_counts)}
        with self._lock:
            if key in self._data:
                return
            self._data[key] = rec
            if self.path:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(rec, sort_keys=True, ensure_ascii=False) + "\n")

    def __len__(self) -> int:
        return len(self._data)


def _count_tokens(text: str) -> int:
    return len(text.split())


class Gateway:
    """Base class; subclasses implement ``_complete``."""

    model_name = "unknown"

    def __init__(self, *, max_requests: int | None = None, max_in_flight: int = 4,
                 cache: ResponseCache | None = None):
        if max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")
        self.max_requests = max_requests
        self.max_in_flight = max_in_flight
        self.cache = cache
        self._slots = threading.BoundedSemaphore(max_in_flight)
        self._lock = threading.Lock()
        self.calls = 0
        self.cache_hits = 0
        self.input_tokens = 0
        self.output_tokens = 0

    def complete(self, request: LlmRequest) -> LlmResponse:
        key = None
        if self.cache is not None:
            key = request.digest()
            hit = self.cache.get(key)
            if hit is not None:
                with self._lock:
                    self.cache_hits += 1
                return hit
        with self._lock:
            if self.max_requests is not None and self.calls >= self.max_requests:
                raise BudgetExceeded(f"request cap of {self.max_requests} reached")
            self.calls += 1
        with self._slots:
            resp = self._complete(request)
        with self._lock:
            self.input_tokens += resp.token_counts[0]
            self.output_tokens += resp.token_counts[1]
        if self.cache is not None and key is not None:
            self.cache.put(key, resp)
        return resp

    def _complete(self, request: LlmRequest) -> LlmResponse:
        raise NotImplementedError

    def accounting(self) -> dict:
        with self._lock:
            return {
                "model_name": self.model_name,
                "calls": self.calls,
                "cache_hits": self.cache_hits,
                "input_tokens": self.input_tokens,
                "output_tokens": self.output_tokens,
            }


class MockGateway(Gateway):
    """Answers from a ``user_text -> reply`` table, falling back to ``responder``.

    With no table entry and no responder the call fails with EndpointError,
    like an endpoint rejecting an unknown request.
    """

    def __init__(self, table: Mapping[str, str] | None = None,
                 responder: Callable[[LlmRequest], str] | None = None,
                 model_name: str = "mock", **kwargs):
        super().__init__(**kwargs)
        self.table = dict(table or {})
        self.responder = responder
        self.model_name = model_name

    def _complete(self, request: LlmRequest) -> LlmResponse:
        if request.user_text in self.table:
            text = self.table[request.user_text]
        elif self.responder is not None:
            text = self.responder(request)
        else:
            raise EndpointError(f"mock has no entry for request: {request.user_text[:80]!r}", status=404)
        return LlmResponse(
            text, self.model_name,
            (_count_tokens(request.system_text) + _count_tokens(request.user_text), _count_tokens(text)),
        )


_TRANSIENT_STATUS = frozenset({408, 409, 425, 429, 500, 502, 503, 504})


class HttpGateway(Gateway):
    """OpenAI-compatible ``/chat/completions`` client with exponential backoff."""

    def __init__(self, url: str, model: str, key: str | None = None, *,
                 attempts: int = 3, backoff: float = 1.0, timeout: float = 120.0,
                 session: requests.Session | None = None, sleep: Callable[[float], None] = time.sleep,
                 **kwargs):
        super().__init__(**kwargs)
        if attempts < 1:
            raise ValueError("attempts must be >= 1")
        url = url.rstrip("/")
        self.url = url if url.endswith("/chat/completions") else url + "/chat/completions"
        self.model_name = model
        self.key = key
        self.attempts = attempts
        self.backoff = backoff
        self.timeout = timeout
        self.session = session or requests.Session()
        self._sleep = sleep

    @classmethod
    def from_env(cls, **kwargs) -> "HttpGateway":
        url = os.environ.get(ENV_URL)
        model = os.environ.get(ENV_MODEL)
        if not url or not model:
            raise EndpointError(f"set {ENV_URL} and {ENV_MODEL} to use a live endpoint")
        return cls(url, model, os.environ.get(ENV_KEY), **kwargs)

    def _payload(self, request: LlmRequest) -> dict:
        messages = []
        if request.system_text:
            messages.append({"role": "system", "content": request.system_text})
        messages.append({"role": "user", "content": request.user_text})
        return {
            "model": self.model_name,
            "messages": messages,
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        }

    def _complete(self, request: LlmRequest) -> LlmResponse:
        headers = {"Content-Type": "application/json"}
        if self.key:
            headers["Authorization"] = f"Bearer {self.key}"
        payload = self._payload(request)
        last_exc: Exception | None = None
        for attempt in range(self.attempts):
            if attempt:
                self._sleep(self.backoff * 2 ** (attempt - 1))
            try:
                resp = self.session.post(self.url, json=payload, headers=headers, timeout=self.timeout)
            except (requests.ConnectionError, requests.Timeout) as exc:
                last_exc = exc
                log.warning("transport error (attempt %d/%d): %s", attempt + 1, self.attempts, exc)
                continue
            if resp.status_code in _TRANSIENT_STATUS and attempt + 1 < self.attempts:
                log.warning("status %d (attempt %d/%d), retrying", resp.status_code, attempt + 1, self.attempts)
                continue
            if resp.status_code >= 400:
                raise EndpointError(f"HTTP {resp.status_code}: {resp.text[:2000]}", status=resp.status_code)
            try:
                data = resp.json()
                text = data["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise EndpointError(f"malformed completion body: {resp.text[:2000]}") from exc
            usage = data.get("usage") or {}
            counts = (
                int(usage.get("prompt_tokens", _count_tokens(request.system_text + " " + request.user_text))),
                int(usage.get("completion_tokens", _count_tokens(text or ""))),
            )
            return LlmResponse(text or "", data.get("model", self.model_name), counts)
        raise TransportError(f"no response after {self.attempts} attempts: {last_exc}")
