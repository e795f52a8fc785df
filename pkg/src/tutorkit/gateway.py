"""Provider abstraction: prompt bundle in, ordered token events out.

Two backends share one event contract: a live OpenAI-compatible streaming
client and a deterministic scripted provider that quotes its context, which
lets every guardrail be verified offline.
"""

from __future__ import annotations

import json
import re
import time
from dataclasses import dataclass
from typing import Iterable, Iterator

import httpx

from .config import ProviderConfig
from .pedagogy import GUIDING_QUESTION, PromptBundle, Strategy

REFUSAL_TEXT = (
    "I can only help with questions about this course. "
    "Let's get back to the course material - which task are you working on?"
)

_TOKEN_SPLIT_RE = re.compile(r"\S+\s*|\s+")


def split_tokens(text: str) -> list[str]:
    """Whitespace-delimited tokens that concatenate back to the exact text."""
    return _TOKEN_SPLIT_RE.findall(text)


@dataclass(frozen=True)
class TokenEvent:
    """One element of a provider stream; done/error events are terminal."""

    kind: str  # "token" | "done" | "error"
    text: str = ""
    finish_reason: str = ""
    message: str = ""

    @classmethod
    def token(cls, text: str) -> "TokenEvent":
        return cls(kind="token", text=text)

    @classmethod
    def done(cls, finish_reason: str = "stop") -> "TokenEvent":
        return cls(kind="done", finish_reason=finish_reason)

    @classmethod
    def error(cls, message: str) -> "TokenEvent":
        return cls(kind="error", message=message)

    @property
    def is_terminal(self) -> bool:
        return self.kind in ("done", "error")


@dataclass
class ChatWireRequest:
    """JSON body of one streaming chat-completions call."""

    model: str
    messages: list[dict[str, str]]
    stream: bool = True
    max_tokens: int = 512

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "messages": self.messages,
            "stream": self.stream,
            "max_tokens": self.max_tokens,
        }


def encode_request(bundle: PromptBundle, config: ProviderConfig) -> ChatWireRequest:
    """Deterministic bundle-to-wire mapping.

    The system message carries the instructions plus a delimited excerpts
    block; history turns become alternating user/assistant messages in
    chronological order, followed by the student message.
    """
    system = bundle.system_instructions
    if bundle.context_segments:
        block = "\n---\n".join(seg.text for seg in bundle.context_segments)
        system = f"{system}\n\n[Knowledgebase excerpts]\n{block}"
    messages = [{"role": "system", "content": system}]
    for turn in bundle.history:
        role = "user" if turn.role == "student" else "assistant"
        messages.append({"role": role, "content": turn.text})
    messages.append({"role": "user", "content": bundle.student_message})
    return ChatWireRequest(
        model=config.model_name,
        messages=messages,
        stream=True,
        max_tokens=config.max_output_tokens,
    )


def decode_stream_chunk(raw_line: str) -> TokenEvent | None:
    """Decode one SSE line of a chat-completions stream.

    Content deltas become Token events, `[DONE]` (or a finish_reason chunk)
    becomes Done, keep-alives and comments decode to None, and malformed
    JSON yields a ProviderError event.
    """
    line = raw_line.rstrip("\r\n")
    if not line.strip() or line.startswith(":"):
        return None
    if not line.startswith("data:"):
        return None
    payload = line[len("data:") :].strip()
    if payload == "[DONE]":
        return TokenEvent.done("stop")
    try:
        obj = json.loads(payload)
    except json.JSONDecodeError:
        return TokenEvent.error("malformed stream chunk")
    choices = obj.get("choices") or []
    if not choices:
        return None
    choice = choices[0]
    content = (choice.get("delta") or {}).get("content")
    if content:
        return TokenEvent.token(content)
    finish = choice.get("finish_reason")
    if finish:
        return TokenEvent.done(finish)
    return None


def scripted_response(bundle: PromptBundle) -> str:
    """Deterministic stand-in reply that quotes the bundle's context."""
    if bundle.meta.strategy is Strategy.REFUSE:
        return REFUSAL_TEXT
    parts = [f"Strategy: {bundle.meta.strategy.value}."]
    parts.extend(seg.text for seg in bundle.context_segments)
    parts.append(GUIDING_QUESTION)
    return " ".join(parts)


class ScriptedProvider:
    """Offline provider: identical bundles yield byte-identical streams."""

    def __init__(self, token_delay: float = 0.0):
        self.token_delay = token_delay
        self.calls = 0

    def stream(self, bundle: PromptBundle) -> Iterator[TokenEvent]:
        self.calls += 1
        for token in split_tokens(scripted_response(bundle)):
            if self.token_delay:
                time.sleep(self.token_delay)
            yield TokenEvent.token(token)
        yield TokenEvent.done("stop")


def _scrub(text: str, secret: str) -> str:
    return text.replace(secret, "***") if secret else text


class LiveProvider:
    """Streaming client for an OpenAI-compatible chat-completions endpoint."""

    def __init__(self, config: ProviderConfig):
        self.config = config
        self.calls = 0

    def stream(self, bundle: PromptBundle) -> Iterator[TokenEvent]:
        self.calls += 1
        config = self.config
        request = encode_request(bundle, config)
        url = config.base_url.rstrip("/") + "/v1/chat/completions"
        headers = {"Authorization": f"Bearer {config.api_key}"}
        try:
            with httpx.stream(
                "POST",
                url,
                json=request.to_dict(),
                headers=headers,
                timeout=config.request_timeout,
            ) as response:
                if response.status_code >= 400:
                    yield TokenEvent.error(
                        f"provider returned HTTP {response.status_code}"
                    )
                    return
                for line in response.iter_lines():
                    event = decode_stream_chunk(line)
                    if event is None:
                        continue
                    yield event
                    if event.is_terminal:
                        return
            yield TokenEvent.error("truncated")
        except httpx.HTTPError as exc:
            yield TokenEvent.error(
                _scrub(f"{type(exc).__name__}: {exc}", config.api_key)
            )


def make_provider(config: ProviderConfig) -> ScriptedProvider | LiveProvider:
    if config.kind == "scripted":
        return ScriptedProvider(token_delay=config.token_delay)
    if config.kind == "live":
        return LiveProvider(config)
    raise ValueError(f"unknown provider kind {config.kind!r}")


def _enforce_ordering(events: Iterable[TokenEvent]) -> Iterator[TokenEvent]:
    """Guarantee that nothing follows the first terminal event."""
    terminated = False
    for event in events:
        yield event
        if event.is_terminal:
            terminated = True
            break
    if not terminated:
        yield TokenEvent.error("truncated")


def generate_stream(
    bundle: PromptBundle,
    provider: ProviderConfig | ScriptedProvider | LiveProvider,
) -> Iterator[TokenEvent]:
    """Stream token events for a bundle from a provider or provider config."""
    if isinstance(provider, ProviderConfig):
        provider = make_provider(provider)
    return _enforce_ordering(provider.stream(bundle))
