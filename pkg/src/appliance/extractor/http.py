"""Chat-completions client that fills the prompt templates and returns the reply text."""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from string import Template
from typing import Any, Sequence

from ..errors import BackendUnavailable
from ..model import ApplianceModel
from ..schema import dumps, model_to_json
from ..validator import Diagnostic
from .base import ExtractionRequest

DEFAULT_KEY_ENV = "APPLIANCE_API_KEY"


@dataclass(frozen=True)
class HttpConfig:
    endpoint: str
    model: str
    api_key_env: str = DEFAULT_KEY_ENV
    timeout: float = 60.0
    retries: int = 2
    temperature: float = 0.0

    @classmethod
    def load(cls, path: str | Path) -> "HttpConfig":
        """Read a JSON config file; unknown keys are rejected."""
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(data, dict):
            raise ValueError("config must be a JSON object")
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config key(s): {sorted(unknown)}")
        return cls(**data)


def load_prompt(name: str) -> Template:
    text = resources.files("appliance.extractor").joinpath("prompts", f"{name}.txt").read_text(encoding="utf-8")
    return Template(text)


def _feedback_block(feedback: Sequence[Diagnostic]) -> str:
    if not feedback:
        return ""
    lines = "\n".join(f"- {d.code} at {d.subject}: {d.message}" for d in feedback)
    return load_prompt("feedback").substitute(diagnostics=lines)


_FENCE = re.compile(r"^\s*```[a-zA-Z]*\s*\n(.*?)\n\s*```\s*$", re.S)


def strip_fences(text: str) -> str:
    m = _FENCE.match(text)
    return m.group(1) if m else text.strip()


class HttpBackend:
    """Talks to an OpenAI-style ``/chat/completions`` endpoint.

    The API key is read from the environment variable named in the config.
    Transport errors and 5xx replies are retried ``retries`` times before
    BackendUnavailable is raised.
    """

    def __init__(self, config: HttpConfig, client: Any | None = None):
        self.config = config
        try:
            import httpx
        except ImportError as exc:  # pragma: no cover - depends on the environment
            raise BackendUnavailable("the HTTP backend needs the 'httpx' package") from exc
        self._httpx = httpx
        self._client = client or httpx.Client(timeout=config.timeout)

    def _chat(self, system: str, user: str) -> str:
        httpx = self._httpx
        key = os.environ.get(self.config.api_key_env)
        if not key:
            raise BackendUnavailable(f"environment variable {self.config.api_key_env} is not set")
        body = {
            "model": self.config.model,
            "temperature": self.config.temperature,
            "messages": [{"role": "system", "content": system}, {"role": "user", "content": user}],
        }
        headers = {"Authorization": f"Bearer {key}"}
        last: Exception | None = None
        for _ in range(self.config.retries + 1):
            try:
                resp = self._client.post(self.config.endpoint, json=body, headers=headers)
            except httpx.TransportError as exc:
                last = exc
                continue
            if resp.status_code >= 500:
                last = BackendUnavailable(f"server error {resp.status_code}")
                continue
            if resp.status_code != 200:
                raise BackendUnavailable(f"endpoint returned {resp.status_code}: {resp.text[:200]}")
            try:
                return strip_fences(resp.json()["choices"][0]["message"]["content"])
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise BackendUnavailable("unexpected response shape") from exc
        raise BackendUnavailable(f"endpoint unreachable after {self.config.retries + 1} attempt(s): {last}")

    def extract_model(self, request: ExtractionRequest, feedback: Sequence[Diagnostic] = ()) -> str:
        user = load_prompt("model_user").substitute(
            manual=request.manual_text,
            panel_elements=", ".join(request.panel_elements) or "not provided",
            feedback=_feedback_block(feedback),
        )
        return self._chat(load_prompt("model_system").template, user)

    def extract_goal(self, model: ApplianceModel, instruction: str, feedback: Sequence[Diagnostic] = ()) -> str:
        user = load_prompt("goal_user").substitute(
            model=dumps(model_to_json(model)).decode("utf-8"),
            instruction=instruction,
            feedback=_feedback_block(feedback),
        )
        return self._chat(load_prompt("goal_system").template, user)
