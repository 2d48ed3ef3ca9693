"""Clients for the optional LLM stages (QA synthesis, qualitative judging).

The endpoint, model name, and timeout come from the pipeline config; only
the credential is read from the environment (SPATIALQA_API_KEY). Tests and
offline runs use the file-backed stub client, which replays canned
completions in order.
"""

from __future__ import annotations

import json
import logging
import os
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from typing import Protocol

from .errors import ClientError

log = logging.getLogger(__name__)

API_KEY_ENV = "SPATIALQA_API_KEY"

# System text sent to the QA-generation model, one rule per line.
GENERATION_SYSTEM_PROMPT = "\n".join(
    [
        "You are a helpful assistant tasked with generating spatial reasoning-based questions and answers from provided descriptions of scenes.",
        "Always craft a question without directly revealing specific details from the description.",
        "Always generate questions related to the description using <regionX>.",
        "The description should always be used to answer and not leak into the question.",
        "When mentioning the objects or regions, use <regionX> instead of the objects or regions.",
        "Speak like you are the observer's perspective.",
        "Always make sure all the description objects or regions are mentioned with <regionX> in the question.",
    ]
)


@dataclass(frozen=True)
class LlmPromptPayload:
    """System text, few-shot (user, assistant) turns, then the query."""

    system: str
    few_shot: tuple[tuple[str, str], ...]
    query: str

    def messages(self) -> list[dict]:
        msgs = [{"role": "system", "content": self.system}]
        for user, assistant in self.few_shot:
            msgs.append({"role": "user", "content": user})
            msgs.append({"role": "assistant", "content": assistant})
        msgs.append({"role": "user", "content": self.query})
        return msgs


class LlmClient(Protocol):
    def complete(self, payload: LlmPromptPayload) -> str: ...


@dataclass
class StubLlmClient:
    """Replays canned completions in order; raises when exhausted."""

    completions: list[str]
    cursor: int = 0

    @classmethod
    def from_file(cls, path) -> "StubLlmClient":
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        if not isinstance(doc, list) or not all(isinstance(c, str) for c in doc):
            raise ClientError(f"{path}: stub replay file must be a JSON list of strings")
        return cls(completions=doc)

    def complete(self, payload: LlmPromptPayload) -> str:
        if self.cursor >= len(self.completions):
            raise ClientError("stub client exhausted its canned completions")
        text = self.completions[self.cursor]
        self.cursor += 1
        return text


@dataclass
class HttpLlmClient:
    """Minimal JSON-over-HTTP chat client.

    Sends {model, messages} and accepts either {"completion": str} or an
    OpenAI-style {"choices": [{"message": {"content": str}}]} response.
    Transport failures are retried with backoff, then raised as ClientError.
    """

    endpoint: str
    model: str
    timeout_s: float = 60.0
    max_retries: int = 3
    backoff_s: float = 1.0
    _sleep: callable = field(default=time.sleep, repr=False)

    def complete(self, payload: LlmPromptPayload) -> str:
        body = json.dumps({"model": self.model, "messages": payload.messages()}).encode("utf-8")
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(API_KEY_ENV)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        last_error: Exception | None = None
        for attempt in range(self.max_retries):
            request = urllib.request.Request(self.endpoint, data=body, headers=headers)
            try:
                with urllib.request.urlopen(request, timeout=self.timeout_s) as response:
                    doc = json.loads(response.read().decode("utf-8"))
                return _extract_completion(doc)
            except (urllib.error.URLError, TimeoutError, json.JSONDecodeError, OSError) as exc:
                last_error = exc
                log.warning("llm request failed (attempt %d/%d): %s", attempt + 1, self.max_retries, exc)
                if attempt + 1 < self.max_retries:
                    self._sleep(self.backoff_s * (2**attempt))
        raise ClientError(f"llm endpoint {self.endpoint} failed after {self.max_retries} attempts: {last_error}")


def _extract_completion(doc) -> str:
    if isinstance(doc, dict):
        if isinstance(doc.get("completion"), str):
            return doc["completion"]
        try:
            return doc["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError):
            pass
    raise ClientError(f"llm response has no completion field: {json.dumps(doc)[:200]}")
