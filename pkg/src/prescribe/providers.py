"""Chat-completion providers: scripted (tests/demo), HTTP (live), echo (debug).

The scripted backend replays ordered substring-match rules from a JSONL file,
so whole conversations are reproducible offline. The HTTP backend speaks the
common OpenAI-style messages payload; credentials come from the environment,
never from config files.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass
from pathlib import Path

import requests

from .errors import ProviderHttpError, ProviderTimeout, ProviderUnavailable, ScriptExhausted

ROLES = ("system", "user", "agent", "injected_system")


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")
        if self.role in ("user", "agent") and not self.content:
            raise ValueError(f"{self.role} message must have content")


@dataclass
class ProviderConfig:
    kind: str  # scripted | http | echo
    endpoint: str | None = None
    auth_env: str | None = None  # env var holding the bearer token
    script_path: str | None = None
    timeout: float = 30.0
    max_tokens: int = 300
    temperature: float = 0.2

    def __post_init__(self):
        if self.kind not in ("scripted", "http", "echo"):
            raise ValueError(f"unknown provider kind {self.kind!r}")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.kind == "scripted" and not self.script_path:
            raise ValueError("scripted provider requires a script path")
        if self.kind == "http" and not self.endpoint:
            raise ValueError("http provider requires an endpoint")


def _validate_messages(messages: list[ChatMessage]) -> None:
    if not messages:
        raise ValueError("message list is empty")
    if messages[0].role != "system":
        raise ValueError("first message must carry the system prompt")
    for i, m in enumerate(messages):
        if m.role == "injected_system" and i != len(messages) - 1:
            raise ValueError("injected_system must be the final pre-completion message")


class _BaseProvider:
    """Shared concurrency cap; providers are re-entrant and shareable."""

    def __init__(self, max_in_flight: int = 4):
        self._gate = threading.Semaphore(max_in_flight)

    def complete(self, messages: list[ChatMessage]) -> str:
        _validate_messages(messages)
        with self._gate:
            return self._complete(messages)

    def _complete(self, messages: list[ChatMessage]) -> str:  # pragma: no cover
        raise NotImplementedError


class EchoProvider(_BaseProvider):
    def _complete(self, messages: list[ChatMessage]) -> str:
        return messages[-1].content


@dataclass
class ScriptRule:
    match: str
    respond: str


class ScriptedProvider(_BaseProvider):
    """Ordered (pattern -> response) rules; first case-insensitive substring
    match of the last user/injected message wins. A rule with an empty match
    acts as the default line."""

    def __init__(self, rules: list[ScriptRule], max_in_flight: int = 4):
        super().__init__(max_in_flight)
        self.rules = list(rules)
        self.calls: list[tuple[str, str]] = []  # (matched text, response) transcript

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedProvider":
        rules = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                doc = json.loads(line)
                rules.append(ScriptRule(match=doc["match"], respond=doc["respond"]))
        return cls(rules)

    def _complete(self, messages: list[ChatMessage]) -> str:
        target = ""
        for m in reversed(messages):
            if m.role in ("user", "injected_system"):
                target = m.content
                break
        low = target.lower()
        for rule in self.rules:
            if rule.match == "" or rule.match.lower() in low:
                self.calls.append((target, rule.respond))
                return rule.respond
        raise ScriptExhausted(f"no scripted rule matches {target[:80]!r}")


class HttpProvider(_BaseProvider):
    def __init__(self, config: ProviderConfig, max_in_flight: int = 4):
        super().__init__(max_in_flight)
        self.config = config

    def _complete(self, messages: list[ChatMessage]) -> str:
        role_map = {"system": "system", "user": "user", "agent": "assistant", "injected_system": "system"}
        payload = {
            "messages": [{"role": role_map[m.role], "content": m.content} for m in messages],
            "max_tokens": self.config.max_tokens,
            "temperature": self.config.temperature,
        }
        headers = {"Content-Type": "application/json"}
        if self.config.auth_env:
            token = os.environ.get(self.config.auth_env, "")
            if token:
                headers["Authorization"] = f"Bearer {token}"
        try:
            resp = requests.post(
                self.config.endpoint,
                json=payload,
                headers=headers,
                timeout=self.config.timeout,
            )
        except requests.Timeout as exc:
            raise ProviderTimeout(f"provider timed out after {self.config.timeout}s") from exc
        except requests.RequestException as exc:
            raise ProviderUnavailable(str(exc)) from exc
        if resp.status_code >= 400:
            raise ProviderHttpError(resp.status_code, resp.text[:200])
        try:
            doc = resp.json()
            return doc["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ProviderUnavailable(f"malformed provider response: {exc}") from exc


def build_provider(config: ProviderConfig):
    if config.kind == "echo":
        return EchoProvider()
    if config.kind == "scripted":
        return ScriptedProvider.from_file(config.script_path)
    return HttpProvider(config)


def complete(messages: list[ChatMessage], config: ProviderConfig) -> str:
    return build_provider(config).complete(messages)
