"""Strategy plans composing prompt- and weight-optimization steps.

The flagship schedule is prompt -> weight -> prompt: optimize demos, fine-tune
on data bootstrapped under those demos, then rerun the prompt search from the
*original* prompts against the tuned weights. That literal reading (reset
rather than continue from the tuned demos) is the default; a flag flips it.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

from .core import Example, LmEnvironment, LmProgram, Metric, evaluate
from .errors import InsufficientDataError, UnknownStrategyError
from .fewshot_search import BfrsConfig, bfrs, scoreboard_entry
from .finetune import LoraHyperparams, Trainer, bft
from .seeding import derived_seed

PROMPT_OPT = "prompt_opt"
WEIGHT_OPT = "weight_opt"

STRATEGY_MENU: dict[str, tuple[str, ...]] = {
    "vanilla": (),
    "p": (PROMPT_OPT,),
    "w": (WEIGHT_OPT,),
    "p->p": (PROMPT_OPT, PROMPT_OPT),
    "w->w": (WEIGHT_OPT, WEIGHT_OPT),
    "p->w": (PROMPT_OPT, WEIGHT_OPT),
    "w->p": (WEIGHT_OPT, PROMPT_OPT),
    "p->w->p": (PROMPT_OPT, WEIGHT_OPT, PROMPT_OPT),
}


@dataclass(frozen=True)
class StrategyPlan:
    name: str
    steps: tuple[str, ...]
    seed: int = 0


def parse_strategy(name: str, seed: int = 0) -> StrategyPlan:
    try:
        steps = STRATEGY_MENU[name]
    except KeyError:
        raise UnknownStrategyError(
            f"unknown strategy {name!r}; choose from {sorted(STRATEGY_MENU)}"
        ) from None
    return StrategyPlan(name=name, steps=steps, seed=seed)


@dataclass
class StrategyRunConfig:
    bfrs: BfrsConfig = field(default_factory=BfrsConfig)
    hyperparams: LoraHyperparams = field(default_factory=LoraHyperparams)
    dev_examples: Sequence[Example] | None = None
    run_dir: Path | None = None
    min_records: int = 1
    workers: int = 1
    # p->w->p only: start the final prompt search from the tuned demos
    # instead of resetting to the original prompts.
    continue_from_tuned_prompts: bool = False


@dataclass
class StepEvent:
    index: int
    kind: str
    phase: str  # "start" | "end"
    program: LmProgram


@dataclass
class StepRecord:
    index: int
    kind: str
    seed: int
    before: dict
    after: dict
    dev_score: float | None = None
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "kind": self.kind,
            "seed": self.seed,
            "fingerprint_before": self.before["fingerprint"],
            "fingerprint_after": self.after["fingerprint"],
            "dev_score": self.dev_score,
            "detail": self.detail,
        }


@dataclass
class StrategyOutcome:
    status: str  # "ok" | "insufficient-data"
    program: LmProgram | None
    steps: list[StepRecord]
    scoreboards: list[dict] = field(default_factory=list)

    @property
    def aborted(self) -> bool:
        return self.status != "ok"


def _snapshot(program: LmProgram) -> dict:
    snap = program.snapshot()
    snap["fingerprint"] = program.fingerprint()
    return snap


def run_strategy(
    plan: StrategyPlan,
    program: LmProgram,
    examples: Sequence[Example],
    metric: Metric,
    env: LmEnvironment,
    trainer: Trainer,
    cfg: StrategyRunConfig,
    *,
    step_callback: Callable[[StepEvent], None] | None = None,
) -> StrategyOutcome:
    """Fold the plan's steps left to right over the program.

    Prompt steps touch only demos; weight steps touch only the model
    reference. An insufficient-data failure during a weight step aborts the
    plan and is reported as the "--" outcome rather than raised.
    """
    if not examples:
        raise ValueError("run_strategy requires a non-empty training pool")
    initial_demos = program.demos_by_label()
    current = program
    records: list[StepRecord] = []
    scoreboards: list[dict] = []
    is_reset_schedule = plan.steps == STRATEGY_MENU["p->w->p"]
    for index, kind in enumerate(plan.steps):
        step_seed = derived_seed(plan.seed, "step", index)
        if (
            is_reset_schedule
            and index == 2
            and not cfg.continue_from_tuned_prompts
        ):
            current = current.with_demos(initial_demos)
        before = _snapshot(current)
        if step_callback:
            step_callback(StepEvent(index, kind, "start", current))
        if kind == PROMPT_OPT:
            step_cfg = replace(cfg.bfrs, seed=step_seed, workers=cfg.workers)
            current, candidates = bfrs(current, examples, metric, env, step_cfg)
            board = scoreboard_entry(step_cfg, candidates)
            board["step_index"] = index
            scoreboards.append(board)
            detail = {
                "best_candidate": max(
                    candidates, key=lambda c: (c.score, -c.candidate_index)
                ).candidate_index,
                "best_score": max(c.score for c in candidates),
            }
        else:
            try:
                current, manifest = bft(
                    current,
                    examples,
                    metric,
                    env,
                    trainer,
                    cfg.hyperparams,
                    run_dir=cfg.run_dir,
                    min_records=cfg.min_records,
                    seed=step_seed,
                    workers=cfg.workers,
                )
            except InsufficientDataError as err:
                records.append(
                    StepRecord(
                        index=index,
                        kind=kind,
                        seed=step_seed,
                        before=before,
                        after=before,
                        detail={
                            "error": "insufficient-data",
                            "kept_traces": err.kept_traces,
                            "records": err.records,
                            "required": err.required,
                        },
                    )
                )
                if step_callback:
                    step_callback(StepEvent(index, kind, "end", current))
                return StrategyOutcome(
                    status="insufficient-data",
                    program=None,
                    steps=records,
                    scoreboards=scoreboards,
                )
            detail = {
                "adapter_id": current.model_ref.adapter_id,
                "dataset_records": manifest.count,
                "dataset_checksum": manifest.checksum,
            }
        if step_callback:
            step_callback(StepEvent(index, kind, "end", current))
        record = StepRecord(
            index=index,
            kind=kind,
            seed=step_seed,
            before=before,
            after=_snapshot(current),
            detail=detail,
        )
        if cfg.dev_examples:
            record.dev_score, _ = evaluate(
                current, cfg.dev_examples, metric, env, workers=cfg.workers
            )
        records.append(record)
    return StrategyOutcome(status="ok", program=current, steps=records, scoreboards=scoreboards)
