"""Answer normalization and task metrics."""

from __future__ import annotations

import re
import string
from typing import Any, Mapping

from ..core import FieldMap, Metric

_NUMBER_RE = re.compile(r"[-+]?\d[\d,]*(?:\.\d+)?")


def normalize_answer(text: str) -> str:
    """Lowercase, strip, remove ASCII punctuation, collapse inner whitespace."""
    text = text.lower()
    text = "".join(ch for ch in text if ch not in string.punctuation)
    return " ".join(text.split())


def exact_match(pred: str, gold: str) -> float:
    return 1.0 if normalize_answer(pred) == normalize_answer(gold) else 0.0


def extract_last_number(line: str) -> float | None:
    """Last numeric token on a line; commas inside numbers are ignored."""
    tokens = _NUMBER_RE.findall(line)
    if not tokens:
        return None
    return float(tokens[-1].replace(",", ""))


def gsm8k_score(response: str, gold_number: int | float | str) -> float:
    """1.0 iff the last number on the response's first line equals gold."""
    first_line = response.split("\n", 1)[0]
    value = extract_last_number(first_line)
    if value is None:
        return 0.0
    return 1.0 if value == float(str(gold_number).replace(",", "")) else 0.0


def _answer_text(final_output: FieldMap) -> str:
    return str(final_output.get("answer", ""))


def exact_match_metric(name: str = "exact_match", threshold: float = 1.0) -> Metric:
    def fn(final_output: FieldMap, metadata: Mapping[str, Any]) -> float:
        return exact_match(_answer_text(final_output), str(metadata.get("answer", "")))

    return Metric(name=name, fn=fn, threshold=threshold)


def gsm8k_metric(threshold: float = 1.0) -> Metric:
    def fn(final_output: FieldMap, metadata: Mapping[str, Any]) -> float:
        return gsm8k_score(_answer_text(final_output), metadata.get("answer", ""))

    return Metric(name="gsm8k_last_number", fn=fn, threshold=threshold)
