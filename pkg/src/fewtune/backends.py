"""Generation backends: model references, a scripted mock, and an HTTP client.

Weights live server-side, so a model is always referenced (base id plus an
optional fine-tuned adapter id), never held in-process.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Protocol, Sequence

import requests

from .errors import BudgetExceededError, MockMissError, TransportError

API_KEY_ENV_VAR = "FEWTUNE_API_KEY"
DEFAULT_STOP_STRINGS = ("\n\n---\n\n",)


@dataclass(frozen=True)
class ModelRef:
    """Reference to LM weights: a base model and an optional trained adapter."""

    base_model_id: str
    adapter_id: str | None = None
    endpoint: str | None = None

    def __post_init__(self) -> None:
        if not self.base_model_id:
            raise ValueError("base_model_id must be non-empty")

    def with_adapter(self, adapter_id: str) -> "ModelRef":
        return replace(self, adapter_id=adapter_id)

    @property
    def wire_id(self) -> str:
        """Identifier sent to inference servers (adapter-qualified when tuned)."""
        if self.adapter_id:
            return f"{self.base_model_id}+{self.adapter_id}"
        return self.base_model_id


@dataclass(frozen=True)
class InferenceParams:
    """Sampling parameters shared by every module call in a run.

    ``top_k`` is carried as a real number; whether it is sent as the
    server's top-k or top-p field is the HTTP client's configuration
    (the value 0.97 is top-p-shaped but is not silently reinterpreted).
    ``max_total_tokens`` budgets prompt plus completion together.
    """

    temperature: float = 0.1
    top_k: float = 0.97
    max_total_tokens: int = 1024
    stop_strings: tuple[str, ...] = DEFAULT_STOP_STRINGS

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_total_tokens <= 0:
            raise ValueError("max_total_tokens must be > 0")


def default_inference_params() -> InferenceParams:
    return InferenceParams()


def approx_token_count(text: str) -> int:
    """Cheap whitespace proxy; exact accounting is the server's job."""
    return len(text.split())


def truncate_at_stop(text: str, stop_strings: Sequence[str]) -> str:
    cut = len(text)
    for stop in stop_strings:
        idx = text.find(stop)
        if idx != -1:
            cut = min(cut, idx)
    return text[:cut]


class GenerateBackend(Protocol):
    """Uniform generation capability; implementations must be shareable."""

    def generate(
        self,
        model: ModelRef,
        prompt: str,
        params: InferenceParams,
        *,
        tags: Mapping[str, str] | None = None,
    ) -> str: ...


def _check_budget(prompt: str, params: InferenceParams) -> None:
    if not prompt:
        raise ValueError("prompt must be non-empty")
    if approx_token_count(prompt) >= params.max_total_tokens:
        raise BudgetExceededError(
            f"prompt (~{approx_token_count(prompt)} tokens) consumes the whole "
            f"budget of {params.max_total_tokens}"
        )


@dataclass(frozen=True)
class MockScript:
    """Deterministic completion lookup for tests and desk-scale runs.

    Keys are either exact prompt text or a ``module_label@example_id``
    pair; exact text wins, then the keyed entry, then the default.
    """

    by_prompt: Mapping[str, str] = field(default_factory=dict)
    by_key: Mapping[str, str] = field(default_factory=dict)
    default: str | None = None

    @staticmethod
    def key(module_label: str, example_id: str) -> str:
        return f"{module_label}@{example_id}"

    def lookup(self, prompt: str, tags: Mapping[str, str] | None) -> str:
        if prompt in self.by_prompt:
            return self.by_prompt[prompt]
        if tags:
            key = self.key(tags.get("module_label", ""), tags.get("example_id", ""))
            if key in self.by_key:
                return self.by_key[key]
        if self.default is not None:
            return self.default
        label = (tags or {}).get("module_label", "?")
        example = (tags or {}).get("example_id", "?")
        raise MockMissError(f"no scripted completion for {label}@{example} and no default")

    @classmethod
    def from_file(cls, path: Path | str) -> "MockScript":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        by_prompt: dict[str, str] = {}
        by_key: dict[str, str] = {}
        for entry in doc.get("entries", []):
            key = entry["key"]
            completion = entry["completion"]
            if "prompt" in key:
                by_prompt.setdefault(key["prompt"], completion)
            else:
                mock_key = cls.key(key["module_label"], key["example_id"])
                by_key.setdefault(mock_key, completion)
        return cls(by_prompt=by_prompt, by_key=by_key, default=doc.get("default"))

    def to_file(self, path: Path | str) -> None:
        entries = [
            {"key": {"prompt": prompt}, "completion": completion}
            for prompt, completion in self.by_prompt.items()
        ]
        for key, completion in self.by_key.items():
            label, _, example_id = key.partition("@")
            entries.append(
                {"key": {"module_label": label, "example_id": example_id}, "completion": completion}
            )
        doc = {"entries": entries, "default": self.default}
        Path(path).write_text(json.dumps(doc, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


class MockBackend:
    """Scripted backend; lookup is read-only after construction."""

    def __init__(self, script: MockScript):
        self.script = script

    def generate(
        self,
        model: ModelRef,
        prompt: str,
        params: InferenceParams,
        *,
        tags: Mapping[str, str] | None = None,
    ) -> str:
        _check_budget(prompt, params)
        completion = self.script.lookup(prompt, tags)
        return truncate_at_stop(completion, params.stop_strings)


@dataclass(frozen=True)
class HttpBackendConfig:
    endpoint: str
    timeout_s: float = 60.0
    max_retries: int = 3
    backoff_s: float = 0.25
    sampling_field: str = "top_k"  # or "top_p"; see InferenceParams.top_k


class HttpBackend:
    """Client for an OpenAI-compatible completions endpoint.

    Sends POST JSON with model, prompt, sampling params, and stop strings.
    Retries are bounded with exponential backoff and always resend an
    identical body. The API key, when present in the environment, rides
    in the Authorization header.
    """

    RETRYABLE_STATUS = (429, 500, 502, 503, 504)

    def __init__(self, config: HttpBackendConfig):
        self.config = config

    def request_body(self, model: ModelRef, prompt: str, params: InferenceParams) -> dict:
        body = {
            "model": model.wire_id,
            "prompt": prompt,
            "temperature": params.temperature,
            "max_tokens": max(1, params.max_total_tokens - approx_token_count(prompt)),
            "stop": list(params.stop_strings),
        }
        if self.config.sampling_field == "top_p":
            body["top_p"] = params.top_k
        else:
            body["top_k"] = params.top_k
        return body

    def generate(
        self,
        model: ModelRef,
        prompt: str,
        params: InferenceParams,
        *,
        tags: Mapping[str, str] | None = None,
    ) -> str:
        _check_budget(prompt, params)
        endpoint = model.endpoint or self.config.endpoint
        body = self.request_body(model, prompt, params)
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(API_KEY_ENV_VAR)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        last_error: Exception | None = None
        for attempt in range(self.config.max_retries + 1):
            if attempt:
                time.sleep(self.config.backoff_s * (2 ** (attempt - 1)))
            try:
                resp = requests.post(
                    endpoint, json=body, headers=headers, timeout=self.config.timeout_s
                )
            except requests.RequestException as err:
                last_error = err
                continue
            if resp.status_code in self.RETRYABLE_STATUS:
                last_error = TransportError(f"server returned {resp.status_code}")
                continue
            if resp.status_code != 200:
                raise TransportError(f"server returned {resp.status_code}: {resp.text[:200]}")
            completion = self._extract_text(resp.json())
            return truncate_at_stop(completion, params.stop_strings)
        raise TransportError(
            f"generation failed after {self.config.max_retries + 1} attempts: {last_error}"
        )

    @staticmethod
    def _extract_text(payload: Mapping) -> str:
        try:
            return payload["choices"][0]["text"]
        except (KeyError, IndexError, TypeError) as err:
            raise TransportError(f"malformed completion response: {err}") from err
