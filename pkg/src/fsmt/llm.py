"""Chat-completion client with retries and a deterministic mock backend.

The wire format is the OpenAI-compatible chat-completions JSON shape.
Request bodies serialize with a fixed field order, so the same request
is always the same bytes; the mock backend exploits this by keying
canned responses on the SHA-256 of the body. 429 and 5xx responses (and
transport failures) are retried with exponential backoff; other 4xx
statuses fail immediately.

The auth token is sent only in the Authorization header. It is never
logged, never serialized, and never stored on records.
"""

from __future__ import annotations

import hashlib
import json
import re
import threading
import time
from dataclasses import dataclass
from pathlib import Path

import requests

from fsmt.errors import FsmtError


class ClientError(FsmtError):
    pass


class AttemptOutOfRange(ClientError):
    pass


class TransportFailure(ClientError):
    pass


class ExhaustedRetries(ClientError):
    def __init__(self, last_status: int | None):
        detail = "transport failure" if last_status is None else f"status {last_status}"
        super().__init__(f"all retry attempts failed (last: {detail})")
        self.last_status = last_status


class NonRetryableStatus(ClientError):
    def __init__(self, status: int):
        super().__init__(f"non-retryable HTTP status {status}")
        self.status = status


class MalformedResponse(ClientError):
    pass


class EmptyCandidate(ClientError):
    pass


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self):
        if self.role not in ("system", "user", "assistant"):
            raise ClientError(f"invalid message role {self.role!r}")
        if not self.content:
            raise ClientError("message content must be non-empty")


@dataclass(frozen=True)
class ChatRequest:
    model: str
    messages: tuple[ChatMessage, ...]
    temperature: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "temperature", float(self.temperature))
        if not any(m.role == "user" for m in self.messages):
            raise ClientError("request needs at least one user message")
        if not 0.0 <= self.temperature <= 2.0:
            raise ClientError(f"temperature {self.temperature} outside [0, 2]")


@dataclass(frozen=True)
class ChatResponse:
    content: str
    finish_reason: str
    raw_status: int


@dataclass(frozen=True)
class BackoffPolicy:
    max_attempts: int = 3
    base_delay_ms: int = 100
    multiplier: float = 2.0
    max_delay_ms: int = 10_000

    def __post_init__(self):
        if self.max_attempts < 1:
            raise ClientError("max_attempts must be >= 1")
        if self.multiplier < 1:
            raise ClientError("multiplier must be >= 1")
        if self.base_delay_ms > self.max_delay_ms:
            raise ClientError("base_delay_ms must not exceed max_delay_ms")


def compute_backoff(policy: BackoffPolicy, attempt: int) -> int:
    """Delay in ms before retrying after `attempt` (1-based), capped and truncated."""
    if not 1 <= attempt <= policy.max_attempts:
        raise AttemptOutOfRange(f"attempt {attempt} outside [1, {policy.max_attempts}]")
    return int(min(policy.base_delay_ms * policy.multiplier ** (attempt - 1), policy.max_delay_ms))


def request_body_bytes(request: ChatRequest) -> bytes:
    """Serialize with fixed field order; identical requests give identical bytes."""
    body = {
        "model": request.model,
        "messages": [{"role": m.role, "content": m.content} for m in request.messages],
        "temperature": request.temperature,
    }
    return json.dumps(body, ensure_ascii=False, separators=(",", ":")).encode("utf-8")


def request_key(request: ChatRequest) -> str:
    """SHA-256 hex digest of the request body; the mock backend's file key."""
    return hashlib.sha256(request_body_bytes(request)).hexdigest()


def _chat_payload(content: str, finish_reason: str = "stop") -> dict:
    return {
        "choices": [
            {
                "message": {"role": "assistant", "content": content},
                "finish_reason": finish_reason,
            }
        ]
    }


class MockBackend:
    """File-driven canned responses for byte-exact offline replay.

    A request whose body hashes to KEY is answered from KEY.json in the
    mock directory. The file holds either one response object
    ({"status": int, "content": str, "finish_reason": str}) or
    {"sequence": [...]} of such objects consumed one per call (the last
    entry repeats). Unknown keys fall back to the configured default:
    "echo" answers 200 with the last user message's content, "404"
    answers status 404.
    """

    def __init__(self, directory: str | Path, default: str = "echo"):
        self.directory = Path(directory)
        if not self.directory.is_dir():
            raise TransportFailure(f"mock directory not found: {self.directory}")
        if default not in ("echo", "404"):
            raise ClientError(f"unknown mock default {default!r}")
        self.default = default
        self.calls = 0
        self._per_key: dict[str, int] = {}
        self._lock = threading.Lock()

    def post(self, body: bytes) -> tuple[int, dict | None]:
        key = hashlib.sha256(body).hexdigest()
        with self._lock:
            self.calls += 1
            call_index = self._per_key.get(key, 0)
            self._per_key[key] = call_index + 1
        path = self.directory / f"{key}.json"
        if path.is_file():
            canned = json.loads(path.read_text(encoding="utf-8"))
            if "sequence" in canned:
                entries = canned["sequence"]
                entry = entries[min(call_index, len(entries) - 1)]
            else:
                entry = canned
            status = int(entry.get("status", 200))
            if status == 200:
                return 200, _chat_payload(entry.get("content", ""), entry.get("finish_reason", "stop"))
            return status, None
        if self.default == "echo":
            messages = json.loads(body.decode("utf-8"))["messages"]
            content = next(m["content"] for m in reversed(messages) if m["role"] == "user")
            return 200, _chat_payload(content)
        return 404, None


def save_canned_response(
    directory: str | Path,
    request: ChatRequest,
    content: str,
    finish_reason: str = "stop",
    status: int = 200,
) -> Path:
    """Write one canned mock response for `request`; returns the file path."""
    path = Path(directory) / f"{request_key(request)}.json"
    payload = {"status": status, "content": content, "finish_reason": finish_reason}
    path.write_text(json.dumps(payload, ensure_ascii=False), encoding="utf-8")
    return path


class HttpBackend:
    """Real HTTP transport for an OpenAI-compatible endpoint."""

    def __init__(self, endpoint: str, auth_token: str, timeout: float = 60.0):
        self.endpoint = endpoint
        self._auth_token = auth_token
        self.timeout = timeout

    def post(self, body: bytes) -> tuple[int, dict | None]:
        headers = {
            "Authorization": f"Bearer {self._auth_token}",
            "Content-Type": "application/json",
        }
        try:
            resp = requests.post(self.endpoint, data=body, headers=headers, timeout=self.timeout)
        except requests.RequestException as err:
            # the exception text carries the URL at most, never headers
            raise TransportFailure(f"POST {self.endpoint} failed: {err}") from None
        if resp.status_code != 200:
            return resp.status_code, None
        try:
            return 200, resp.json()
        except ValueError:
            raise MalformedResponse("response body is not JSON") from None


class TokenBucket:
    """Thread-safe requests-per-minute admission control.

    Callers block in acquire() until a token is available; waiting
    happens outside the lock so one sleeper never stalls another
    caller's bookkeeping.
    """

    def __init__(self, requests_per_minute: float, burst: float = 1.0,
                 time_fn=time.monotonic, sleep_fn=time.sleep):
        if requests_per_minute <= 0:
            raise ClientError("requests_per_minute must be positive")
        self._rate = requests_per_minute / 60.0
        self._capacity = max(1.0, burst)
        self._tokens = self._capacity
        self._time = time_fn
        self._sleep = sleep_fn
        self._last = time_fn()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = self._time()
                self._tokens = min(self._capacity, self._tokens + (now - self._last) * self._rate)
                self._last = now
                if self._tokens >= 1.0:
                    self._tokens -= 1.0
                    return
                wait = (1.0 - self._tokens) / self._rate
            self._sleep(wait)


def _parse_success(payload: dict | None) -> ChatResponse:
    try:
        choice = payload["choices"][0]
        content = choice["message"]["content"]
    except (TypeError, KeyError, IndexError):
        raise MalformedResponse("missing choices[0].message.content") from None
    if not isinstance(content, str):
        raise MalformedResponse("message content is not a string")
    finish_reason = choice.get("finish_reason")
    return ChatResponse(
        content=content,
        finish_reason=finish_reason if isinstance(finish_reason, str) else "",
        raw_status=200,
    )


class ChatClient:
    """Retrying client over a pluggable backend (HTTP or mock)."""

    def __init__(self, backend, policy: BackoffPolicy | None = None,
                 rate_limiter: TokenBucket | None = None, sleep_fn=time.sleep):
        self.backend = backend
        self.policy = policy if policy is not None else BackoffPolicy()
        self.rate_limiter = rate_limiter
        self._sleep = sleep_fn

    def send(self, request: ChatRequest) -> ChatResponse:
        body = request_body_bytes(request)
        last_status: int | None = None
        for attempt in range(1, self.policy.max_attempts + 1):
            if self.rate_limiter is not None:
                self.rate_limiter.acquire()
            try:
                status, payload = self.backend.post(body)
            except TransportFailure:
                status, payload = None, None
            if status == 200:
                return _parse_success(payload)
            if status is not None and status != 429 and not 500 <= status <= 599:
                raise NonRetryableStatus(status)
            last_status = status
            if attempt < self.policy.max_attempts:
                self._sleep(compute_backoff(self.policy, attempt) / 1000.0)
        raise ExhaustedRetries(last_status)


def send_chat(endpoint: str, auth_token: str, request: ChatRequest,
              policy: BackoffPolicy | None = None) -> ChatResponse:
    """One-call convenience wrapper over ChatClient with an HTTP backend."""
    return ChatClient(HttpBackend(endpoint, auth_token), policy).send(request)


_TRANSLATION_PREFIX = re.compile(r"translation:[ \t]*", re.IGNORECASE)

_QUOTE_PAIRS = {
    ('"', '"'),
    ("'", "'"),
    ("“", "”"),  # curly double
    ("‘", "’"),  # curly single
    ("«", "»"),  # guillemets
}


def extract_candidate(content: str) -> str:
    """Reduce a raw model reply to the bare translation.

    Trims whitespace, drops one leading "Translation:" label (case-
    insensitive), and unwraps one pair of quotes when the whole
    remainder is quoted.
    """
    text = content.strip()
    match = _TRANSLATION_PREFIX.match(text)
    if match:
        text = text[match.end():].strip()
    if len(text) >= 2 and (text[0], text[-1]) in _QUOTE_PAIRS:
        text = text[1:-1].strip()
    if not text:
        raise EmptyCandidate("reply is empty after stripping")
    return text
