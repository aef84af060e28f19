"""Text providers: a deterministic offline stub and an OpenAI-compatible HTTP client."""
from __future__ import annotations

import json
import logging
import os
import string
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Protocol

import httpx

log = logging.getLogger(__name__)

API_KEY_ENV = "DOCBACK_API_KEY"
RETRY_STATUS = {408, 409, 429, 500, 502, 503, 504}


class ProviderError(RuntimeError):
    def __init__(self, provider_id: str, message: str, retriable: bool = True):
        super().__init__(f"[{provider_id}] {message}")
        self.provider_id = provider_id
        self.retriable = retriable


class TextProvider(Protocol):
    id: str

    def complete(self, system_prompt: str, user_payload: str) -> str: ...


def prompt_task(system_prompt: str) -> str:
    """Read the ``task:`` header of a prompt template."""
    for line in system_prompt.splitlines():
        if line.startswith("task:"):
            return line.split(":", 1)[1].strip()
    return ""


_PUNCT = str.maketrans("", "", string.punctuation)


class StubProvider:
    """Offline provider with fixed, documented behavior.

    summarize: the first five whitespace tokens of the page text, lowercased,
    punctuation stripped.
    instruct: ``background: <summary>; style: <prompt>; continue: <last history
    entry>``, with ``none`` standing in for anything missing.
    """

    id = "stub"

    def __init__(self):
        self.calls: list[tuple[str, str]] = []

    def complete(self, system_prompt, user_payload):
        self.calls.append((system_prompt, user_payload))
        task = prompt_task(system_prompt)
        if task == "summarize":
            words = [w.translate(_PUNCT).lower() for w in user_payload.split()]
            return " ".join([w for w in words if w][:5])
        if task == "instruct":
            payload = json.loads(user_payload)
            history = payload.get("history") or []
            return "background: {}; style: {}; continue: {}".format(
                payload.get("summary") or "none",
                payload.get("prompt") or "none",
                history[-1] if history else "none",
            )
        raise ProviderError(self.id, f"unknown task {task!r}", retriable=False)


@dataclass
class ProviderConfig:
    endpoint_url: str = "https://api.openai.com/v1"
    model: str = "gpt-4o"
    temperature: float = 0.2
    timeout_s: float = 60.0
    max_retries: int = 3

    @classmethod
    def load(cls, path: str | Path) -> "ProviderConfig":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        unknown = set(data) - set(asdict(cls()))
        if unknown:
            raise ValueError(f"{path}: unknown provider config field(s) {sorted(unknown)}")
        if any("key" in k.lower() for k in data):
            raise ValueError("API keys belong in the environment, not the config file")
        return cls(**data)


class ChatCompletionsProvider:
    """Provider backed by any OpenAI-compatible ``/chat/completions`` endpoint."""

    def __init__(self, config: ProviderConfig, api_key: str | None = None,
                 client: httpx.Client | None = None, sleep=time.sleep):
        self.config = config
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        if not self.api_key:
            raise ProviderError(f"chat:{config.model}", f"{API_KEY_ENV} is not set", retriable=False)
        self.client = client or httpx.Client(timeout=config.timeout_s)
        self.id = f"chat:{config.model}"
        self._sleep = sleep

    def complete(self, system_prompt, user_payload):
        url = self.config.endpoint_url.rstrip("/") + "/chat/completions"
        body = {
            "model": self.config.model,
            "temperature": self.config.temperature,
            "messages": [
                {"role": "system", "content": system_prompt},
                {"role": "user", "content": user_payload},
            ],
        }
        headers = {"Authorization": f"Bearer {self.api_key}"}
        last = "no attempt made"
        for attempt in range(self.config.max_retries + 1):
            if attempt:
                self._sleep(min(2.0 ** (attempt - 1), 30.0))
            try:
                resp = self.client.post(url, json=body, headers=headers,
                                        timeout=self.config.timeout_s)
            except httpx.TransportError as e:
                last = f"transport error: {e}"
                log.warning("%s attempt %d: %s", self.id, attempt + 1, last)
                continue
            if resp.status_code in RETRY_STATUS:
                last = f"HTTP {resp.status_code}"
                log.warning("%s attempt %d: %s", self.id, attempt + 1, last)
                continue
            if resp.status_code >= 400:
                raise ProviderError(self.id, f"HTTP {resp.status_code}: {resp.text[:200]}",
                                    retriable=False)
            try:
                return resp.json()["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError):
                raise ProviderError(self.id, "malformed completion response", retriable=False)
        raise ProviderError(self.id, f"gave up after {self.config.max_retries + 1} attempts ({last})")


def make_provider(spec: str | None):
    """``None``/``"stub"`` -> StubProvider; anything else is a provider config path."""
    if spec in (None, "", "stub"):
        return StubProvider()
    return ChatCompletionsProvider(ProviderConfig.load(spec))
