"""Trace bootstrapping and threshold filtering, shared by both optimizers."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .core import Example, LmEnvironment, LmProgram, Metric, Trace, _run_scored


@dataclass
class TraceSet:
    """Scored traces harvested from one program version."""

    traces: list[Trace] = field(default_factory=list)
    source_program_id: str = ""
    seed: int = 0

    def __len__(self) -> int:
        return len(self.traces)

    def scores(self) -> list[float]:
        return [t.score if t.score is not None else 0.0 for t in self.traces]


def bootstrap_traces(
    program: LmProgram,
    examples: Sequence[Example],
    metric: Metric,
    env: LmEnvironment,
    *,
    seed: int = 0,
    workers: int = 1,
) -> TraceSet:
    """Run the program over training examples, keeping every scored trace.

    Failed runs are retained with score 0.0 so they can be inspected; they
    never abort the sweep. Ordering follows the example order regardless of
    worker count.
    """
    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            scored = list(pool.map(lambda ex: _run_scored(program, ex, metric, env), examples))
    else:
        scored = [_run_scored(program, ex, metric, env) for ex in examples]
    traces = [trace for _, trace in scored]
    return TraceSet(traces=traces, source_program_id=program.fingerprint(), seed=seed)


def filter_traces(trace_set: TraceSet, metric: Metric) -> TraceSet:
    """Keep exactly the traces scoring at or above the metric threshold."""
    kept = [
        t
        for t in trace_set.traces
        if t.score is not None and t.score >= metric.threshold
    ]
    return TraceSet(
        traces=kept,
        source_program_id=trace_set.source_program_id,
        seed=trace_set.seed,
    )
