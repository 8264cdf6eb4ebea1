"""Text-completion backends.

``deterministic`` means the rule engines in planning, reflection and frame
selection answer directly and no prompt is ever sent. ``stub`` replays a
script and ``remote`` talks to a chat-completion endpoint; both go through
the prompt path.
"""

from __future__ import annotations

import logging
import os
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

import httpx

logger = logging.getLogger(__name__)

DETERMINISTIC = "deterministic"
STUB = "stub"
REMOTE = "remote"
KINDS = (DETERMINISTIC, STUB, REMOTE)

SYSTEM_PROMPT = (
    "You assist a video surveillance transmitter that answers receivers' requests "
    "for semantic information using a fixed toolbox."
)


class BackendError(Exception):
    pass


class BackendTimeout(BackendError):
    pass


class BackendStatusError(BackendError):
    def __init__(self, status: int, body: str = ""):
        self.status = status
        super().__init__(f"endpoint answered HTTP {status}: {body[:200]}")


class RetriesExhausted(BackendError):
    pass


class ScriptExhausted(BackendError):
    pass


@dataclass(frozen=True)
class BackendConfig:
    kind: str = DETERMINISTIC
    endpoint: Optional[str] = None
    api_key: Optional[str] = field(default=None, repr=False)
    model: str = "gpt-4"
    timeout: float = 60.0
    max_retries: int = 2
    temperature: float = 0.0
    backoff_base: float = 1.0
    backoff_factor: float = 2.0

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"backend kind must be one of {KINDS}, got {self.kind!r}")
        if self.kind == REMOTE and not (self.endpoint and self.api_key):
            raise ValueError("remote backend needs an endpoint and an API key")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.max_retries < 0:
            raise ValueError("max_retries must be non-negative")

    @classmethod
    def from_env(cls, environ=os.environ, **overrides) -> "BackendConfig":
        """Read ``SEMCOM_LLM_*`` variables; explicit non-None overrides win."""
        values = {
            "endpoint": environ.get("SEMCOM_LLM_ENDPOINT"),
            "api_key": environ.get("SEMCOM_LLM_KEY"),
        }
        if environ.get("SEMCOM_LLM_MODEL"):
            values["model"] = environ["SEMCOM_LLM_MODEL"]
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


@dataclass
class CallRecord:
    attempt: int
    outcome: str
    delay: float = 0.0


class Backend:
    kind: str = ""

    @property
    def deterministic(self) -> bool:
        return self.kind == DETERMINISTIC

    def complete(self, prompt: str) -> str:
        raise NotImplementedError


class DeterministicBackend(Backend):
    kind = DETERMINISTIC

    def complete(self, prompt: str) -> str:
        raise BackendError("the deterministic backend answers through the rule engines, not free text")


class StubBackend(Backend):
    """Returns scripted responses in order; errors once the script runs out.

    Script entries that are exceptions are raised instead of returned.
    """

    kind = STUB

    def __init__(self, script: Iterable[str | BaseException]):
        self._script = list(script)
        self._lock = threading.Lock()
        self.prompts: list[str] = []

    def complete(self, prompt: str) -> str:
        with self._lock:
            self.prompts.append(prompt)
            if not self._script:
                raise ScriptExhausted("stub script exhausted")
            item = self._script.pop(0)
        if isinstance(item, BaseException):
            raise item
        return item

    @property
    def remaining(self) -> int:
        return len(self._script)


_RETRYABLE_STATUS = {429, 500, 502, 503, 504}


class RemoteBackend(Backend):
    """Single-turn chat-completion client with exponential backoff."""

    kind = REMOTE

    def __init__(
        self,
        config: BackendConfig,
        sleep: Callable[[float], None] = time.sleep,
        transport: httpx.BaseTransport | None = None,
    ):
        config.validate()
        self.config = config
        self._sleep = sleep
        self._client = httpx.Client(timeout=config.timeout, transport=transport)
        self._log_lock = threading.Lock()
        self.call_log: list[CallRecord] = []

    def close(self) -> None:
        self._client.close()

    def _record(self, attempt: int, outcome: str, delay: float = 0.0) -> None:
        with self._log_lock:
            self.call_log.append(CallRecord(attempt, outcome, delay))

    def _request(self, prompt: str) -> str:
        cfg = self.config
        body = {
            "model": cfg.model,
            "messages": [
                {"role": "system", "content": SYSTEM_PROMPT},
                {"role": "user", "content": prompt},
            ],
            "temperature": cfg.temperature,
        }
        headers = {"Authorization": f"Bearer {cfg.api_key}"}
        resp = self._client.post(cfg.endpoint, json=body, headers=headers)
        if resp.status_code != 200:
            raise BackendStatusError(resp.status_code, resp.text)
        try:
            return resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise BackendError(f"unexpected completion body: {exc}") from exc

    def complete(self, prompt: str) -> str:
        cfg = self.config
        attempts = 1 + cfg.max_retries
        last: BackendError | None = None
        for attempt in range(1, attempts + 1):
            try:
                text = self._request(prompt)
            except httpx.TimeoutException as exc:
                last = BackendTimeout(f"no answer within {cfg.timeout}s")
                last.__cause__ = exc
                outcome = "timeout"
            except httpx.TransportError as exc:
                last = RetriesExhausted(f"transport error: {exc}")
                last.__cause__ = exc
                outcome = "transport-error"
            except BackendStatusError as exc:
                if exc.status not in _RETRYABLE_STATUS:
                    self._record(attempt, f"status-{exc.status}")
                    raise
                last = exc
                outcome = f"status-{exc.status}"
            else:
                self._record(attempt, "ok")
                return text
            if attempt == attempts:
                self._record(attempt, outcome)
                break
            delay = cfg.backoff_base * cfg.backoff_factor ** (attempt - 1)
            self._record(attempt, outcome, delay)
            logger.warning("completion attempt %d/%d failed (%s); retrying in %.2fs", attempt, attempts, outcome, delay)
            self._sleep(delay)
        assert last is not None
        if isinstance(last, RetriesExhausted):
            raise RetriesExhausted(f"{attempts} attempts failed; last: {last}") from last.__cause__
        raise last


def make_backend(config: BackendConfig, script: Iterable[str] = ()) -> Backend:
    config.validate()
    if config.kind == DETERMINISTIC:
        return DeterministicBackend()
    if config.kind == STUB:
        return StubBackend(script)
    return RemoteBackend(config)


def complete(config: BackendConfig, prompt: str) -> str:
    """One-shot completion through a freshly built backend."""
    return make_backend(config).complete(prompt)
