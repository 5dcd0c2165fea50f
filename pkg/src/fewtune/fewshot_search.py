"""Few-shot prompt optimization by random search over bootstrapped demos.

Candidate prompt configurations are built from subsets of kept traces (one
trace contributes a demo to every module it touched, keeping multi-hop
demos mutually consistent) and scored on a held-out validation split; the
highest-scoring configuration wins.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .bootstrap import TraceSet, bootstrap_traces, filter_traces
from .core import Demo, Example, LmEnvironment, LmProgram, Metric, evaluate
from .errors import InsufficientExamplesError
from .seeding import derived_rng


@dataclass
class BfrsConfig:
    n_candidates: int = 6
    max_demos: int = 3
    train_size: int = 100
    val_size: int = 250
    seed: int = 0
    workers: int = 1

    def __post_init__(self) -> None:
        if self.n_candidates < 1:
            raise ValueError("n_candidates must be >= 1")
        if self.max_demos < 0:
            raise ValueError("max_demos must be >= 0")
        if self.train_size <= 0 or self.val_size <= 0:
            raise ValueError("train and validation sizes must be positive")


@dataclass
class CandidateAssignment:
    """One prompt configuration attempt: per-module demos plus its score."""

    demos_by_label: dict[str, list[Demo]]
    candidate_index: int
    score: float | None = None

    def demo_sources(self) -> dict[str, list[str]]:
        return {
            label: [d.source or "" for d in demos]
            for label, demos in self.demos_by_label.items()
        }


def split_train_val(
    examples: Sequence[Example], cfg: BfrsConfig
) -> tuple[list[Example], list[Example]]:
    """Disjoint train/validation subsets drawn after a seeded shuffle."""
    needed = cfg.train_size + cfg.val_size
    if len(examples) < needed:
        raise InsufficientExamplesError(
            f"need {needed} examples for a {cfg.train_size}/{cfg.val_size} split, "
            f"got {len(examples)}"
        )
    pool = list(examples)
    derived_rng(cfg.seed, "split").shuffle(pool)
    return pool[: cfg.train_size], pool[cfg.train_size : needed]


def _demo_from_step(step, example_id: str, step_index: int) -> Demo | None:
    values = {**step.inputs, **step.outputs}
    if any(not str(v) for v in values.values()):
        return None
    return Demo(values=values, source=f"{example_id}/{step_index}")


def _demos_for_module(traces, label: str) -> list[Demo]:
    demos = []
    for trace in traces:
        for step_index, step in enumerate(trace.steps):
            if step.module_label == label:
                demo = _demo_from_step(step, trace.example_id, step_index)
                if demo is not None:
                    demos.append(demo)
                break
    return demos


def sample_fewshot_subsets(
    kept: TraceSet, cfg: BfrsConfig, labels: Sequence[str]
) -> list[CandidateAssignment]:
    """Exactly n_candidates assignments; index 0 is always the vanilla one.

    Candidate k draws up to max_demos distinct traces with an RNG derived
    from (seed, k); each drawn trace supplies one demo per module it has a
    usable step for. An empty kept set degrades to all-vanilla candidates.
    """
    candidates = [CandidateAssignment({label: [] for label in labels}, 0)]
    for k in range(1, cfg.n_candidates):
        rng = derived_rng(cfg.seed, "candidate", k)
        if kept.traces and cfg.max_demos > 0:
            draw = rng.randint(1, cfg.max_demos)
            chosen = rng.sample(kept.traces, min(draw, len(kept.traces)))
        else:
            chosen = []
        demos = {label: _demos_for_module(chosen, label) for label in labels}
        candidates.append(CandidateAssignment(demos, k))
    return candidates


def construct_fewshot_prompts(program: LmProgram, cand: CandidateAssignment) -> LmProgram:
    """A copy of the program with demo lists replaced; weights untouched."""
    return program.with_demos(cand.demos_by_label)


def bfrs(
    program: LmProgram,
    examples: Sequence[Example],
    metric: Metric,
    env: LmEnvironment,
    cfg: BfrsConfig,
) -> tuple[LmProgram, list[CandidateAssignment]]:
    """Search demo subsets and return the best-validated program.

    Zero kept traces is not an error: the vanilla candidate is still
    evaluated, so the search never returns something untested. Ties go to
    the lowest candidate index.
    """
    train, val = split_train_val(examples, cfg)
    traces = bootstrap_traces(program, train, metric, env, seed=cfg.seed, workers=cfg.workers)
    kept = filter_traces(traces, metric)
    candidates = sample_fewshot_subsets(kept, cfg, program.labels())
    for cand in candidates:
        candidate_program = construct_fewshot_prompts(program, cand)
        mean, _ = evaluate(candidate_program, val, metric, env, workers=cfg.workers)
        cand.score = mean
    best = max(candidates, key=lambda c: (c.score, -c.candidate_index))
    return construct_fewshot_prompts(program, best), candidates


def scoreboard_entry(cfg: BfrsConfig, candidates: Sequence[CandidateAssignment]) -> dict:
    return {
        "seed": cfg.seed,
        "candidates": [
            {
                "candidate_index": c.candidate_index,
                "score": c.score,
                "demos": c.demo_sources(),
            }
            for c in candidates
        ],
    }


def save_scoreboard(run_dir: Path | str, entries: Sequence[dict]) -> Path:
    """Persist every prompt-search attempt log for a run."""
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    path = run_dir / "bfrs_scoreboard.json"
    path.write_text(
        json.dumps({"steps": list(entries)}, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    return path
