"""Retriever interface with a deterministic mock and a remote JSON client.

Retrieval is frozen: nothing here is optimized, and the mock ranks by plain
keyword overlap so tests are reproducible without an index.
"""

from __future__ import annotations

import json
import re
from pathlib import Path
from typing import Protocol, Sequence

import requests

from ..errors import TransportError

_WORD_RE = re.compile(r"[a-z0-9]+")


def dedup_context(context: Sequence[str], passages: Sequence[str]) -> list[str]:
    """Concatenate and drop exact duplicates, keeping first occurrences."""
    seen: set[str] = set()
    out: list[str] = []
    for passage in list(context) + list(passages):
        if passage not in seen:
            seen.add(passage)
            out.append(passage)
    return out


class Retriever(Protocol):
    def query(self, text: str, k: int) -> list[str]: ...


class MockRetriever:
    """Keyword-overlap ranking over a small in-memory corpus.

    An inverted index keeps queries cheap; ties break on corpus order so
    results are fully deterministic.
    """

    def __init__(self, corpus: Sequence[str]):
        self.corpus = list(corpus)
        self._index: dict[str, list[int]] = {}
        for idx, passage in enumerate(self.corpus):
            for token in set(_WORD_RE.findall(passage.lower())):
                self._index.setdefault(token, []).append(idx)

    @classmethod
    def from_file(cls, path: Path | str) -> "MockRetriever":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(doc["passages"])

    def query(self, text: str, k: int) -> list[str]:
        query_tokens = set(_WORD_RE.findall(text.lower()))
        overlap: dict[int, int] = {}
        for token in query_tokens:
            for idx in self._index.get(token, ()):
                overlap[idx] = overlap.get(idx, 0) + 1
        ranked = sorted(overlap.items(), key=lambda item: (-item[1], item[0]))
        return [self.corpus[idx] for idx, _ in ranked[:k]]


class HttpRetriever:
    """Client for a simple JSON search endpoint: {query, k} -> {passages}."""

    def __init__(self, endpoint: str, timeout_s: float = 30.0):
        self.endpoint = endpoint
        self.timeout_s = timeout_s

    def query(self, text: str, k: int) -> list[str]:
        try:
            resp = requests.post(
                self.endpoint, json={"query": text, "k": k}, timeout=self.timeout_s
            )
        except requests.RequestException as err:
            raise TransportError(f"retriever request failed: {err}") from err
        if resp.status_code != 200:
            raise TransportError(f"retriever returned {resp.status_code}")
        passages = resp.json().get("passages", [])
        return list(passages)[:k]
