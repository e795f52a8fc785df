"""Operator configuration: JSON file with environment-variable overrides.

The API key is only ever read from the environment (TUTOR_API_KEY) or the
config file and is excluded from every dump, repr, and error message.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

ENV_API_KEY = "TUTOR_API_KEY"
ENV_LISTEN_ADDR = "TUTOR_LISTEN_ADDR"

DEFAULT_OFF_TOPIC_THRESHOLD = 0.34
DEFAULT_HISTORY_BUDGET = 20
DEFAULT_CONTEXT_CAP = 12


@dataclass
class ProviderConfig:
    """Which language-model backend to use and how to reach it."""

    kind: str = "scripted"  # "live" | "scripted"
    base_url: str = ""
    api_key: str = field(default="", repr=False)
    model_name: str = "gpt-4o"
    request_timeout: float = 60.0
    max_output_tokens: int = 512
    token_delay: float = 0.0  # scripted only; seconds between emitted tokens

    def to_dict(self) -> dict:
        # api_key deliberately omitted; it must never be serialized.
        return {
            "kind": self.kind,
            "base_url": self.base_url,
            "model_name": self.model_name,
            "request_timeout": self.request_timeout,
            "max_output_tokens": self.max_output_tokens,
            "token_delay": self.token_delay,
        }


@dataclass
class TutorConfig:
    """Everything the service needs to run one course deployment."""

    kb_dir: str = "fixtures/kb"
    data_dir: str = "data"
    language: str = "de"
    course_name: str = "the course"
    age_range: str = "14-16"
    tone: str = "friendly and encouraging"
    allow_solutions: bool = False
    off_topic_threshold: float = DEFAULT_OFF_TOPIC_THRESHOLD
    history_budget: int = DEFAULT_HISTORY_BUDGET
    context_cap: int = DEFAULT_CONTEXT_CAP
    provider: ProviderConfig = field(default_factory=ProviderConfig)
    listen_address: str = "127.0.0.1:8080"
    cors: bool = True
    system_template_path: str = ""  # optional override of the built-in template

    @property
    def host(self) -> str:
        return self.listen_address.rsplit(":", 1)[0]

    @property
    def port(self) -> int:
        return int(self.listen_address.rsplit(":", 1)[1])


def load_config(path: str | Path | None = None, **overrides) -> TutorConfig:
    """Build a TutorConfig from an optional JSON file plus env overrides."""
    raw: dict = {}
    if path is not None:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    provider_raw = raw.pop("provider", {})
    provider = ProviderConfig(**provider_raw)
    config = TutorConfig(provider=provider, **raw)
    if overrides:
        config = replace(config, **overrides)

    api_key = os.environ.get(ENV_API_KEY)
    if api_key:
        config.provider.api_key = api_key
    listen = os.environ.get(ENV_LISTEN_ADDR)
    if listen:
        config.listen_address = listen
    return config
