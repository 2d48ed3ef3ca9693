"""Pipeline configuration loaded from a single JSON file.

Every section is optional and falls back to defaults, but unknown keys
anywhere are rejected outright: a typo in a tuning knob should fail the
run, not silently run with defaults.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass

from .errors import ConfigError
from .geometry import DenoiseConfig
from .llm import HttpLlmClient, LlmClient, StubLlmClient


@dataclass(frozen=True)
class QaSettings:
    seed: int = 0
    per_pair_quota: int = 1
    randomize_units: bool = True
    max_description_facts: int | None = None

    def __post_init__(self):
        if self.per_pair_quota < 0:
            raise ConfigError(f"per_pair_quota must be >= 0, got {self.per_pair_quota}")
        if self.max_description_facts is not None and self.max_description_facts < 0:
            raise ConfigError(
                f"max_description_facts must be >= 0, got {self.max_description_facts}"
            )


@dataclass(frozen=True)
class LlmSettings:
    mode: str = "stub"
    replay_file: str | None = None
    endpoint: str | None = None
    model: str | None = None
    timeout_s: float = 60.0
    max_retries: int = 3

    def __post_init__(self):
        if self.mode not in ("stub", "http"):
            raise ConfigError(f"llm mode must be 'stub' or 'http', got {self.mode!r}")
        if self.timeout_s <= 0:
            raise ConfigError(f"timeout_s must be positive, got {self.timeout_s}")
        if self.max_retries < 0:
            raise ConfigError(f"max_retries must be >= 0, got {self.max_retries}")


@dataclass(frozen=True)
class PipelineConfig:
    denoise: DenoiseConfig = DenoiseConfig()
    qa: QaSettings = QaSettings()
    llm: LlmSettings = LlmSettings()


def _section(doc: dict, name: str, cls):
    entry = doc.get(name, {})
    if not isinstance(entry, dict):
        raise ConfigError(f"config section {name!r} must be an object")
    allowed = {f.name for f in dataclasses.fields(cls)}
    unknown = set(entry) - allowed
    if unknown:
        raise ConfigError(f"config section {name!r} has unknown keys: {sorted(unknown)}")
    try:
        return cls(**entry)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config section {name!r}: {exc}") from exc


def parse_config(doc: dict) -> PipelineConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")
    unknown = set(doc) - {"denoise", "qa", "llm"}
    if unknown:
        raise ConfigError(f"config has unknown sections: {sorted(unknown)}")
    return PipelineConfig(
        denoise=_section(doc, "denoise", DenoiseConfig),
        qa=_section(doc, "qa", QaSettings),
        llm=_section(doc, "llm", LlmSettings),
    )


def load_config(path) -> PipelineConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    return parse_config(doc)


def make_llm_client(settings: LlmSettings) -> LlmClient:
    """Build the client the llm section describes."""
    if settings.mode == "stub":
        if settings.replay_file is None:
            raise ConfigError("llm mode 'stub' needs replay_file")
        return StubLlmClient.from_file(settings.replay_file)
    if settings.endpoint is None or settings.model is None:
        raise ConfigError("llm mode 'http' needs endpoint and model")
    return HttpLlmClient(
        endpoint=settings.endpoint,
        model=settings.model,
        timeout_s=settings.timeout_s,
        max_retries=settings.max_retries,
    )
