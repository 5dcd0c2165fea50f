from __future__ import annotations

from pathlib import Path

import pytest

from fewtune import LanguageModule, LmEnvironment, LmProgram, MockBackend, MockScript, ModelRef, make_signature

REPO_ROOT = Path(__file__).resolve().parent.parent
GOLDENS_DIR = REPO_ROOT / "goldens"


@pytest.fixture
def goldens_dir() -> Path:
    return GOLDENS_DIR


def simple_cot_signature():
    return make_signature(inputs=["question"], outputs=["reasoning", "answer"], blank_between_fields=False)


def make_single_module_program(model_id: str = "mock-lm", signature=None) -> LmProgram:
    sig = signature or simple_cot_signature()

    def control(ctx, inputs):
        return ctx.run("generate_answer", **{f: str(inputs[f]) for f in sig.input_names()})

    return LmProgram(
        modules=[LanguageModule("generate_answer", sig)],
        control=control,
        model_ref=ModelRef(model_id),
        name="single",
    )


def keyed_env(by_key: dict[str, str], default: str | None = None, **script_kwargs) -> LmEnvironment:
    script = MockScript(by_key=by_key, default=default, **script_kwargs)
    return LmEnvironment(backend=MockBackend(script))


def build_candidate_scoring_setup(target_scores: list[float], *, train_size: int, val_size: int, seed: int):
    """A single-module setup whose mock is prompt-sensitive, so each demo
    candidate earns a chosen validation score.

    Enumerates the candidates the search will draw (same seeds, same pieces),
    then scripts exact-prompt completions per (candidate, validation example).
    Returns (program, examples, metric, env, cfg): running the search against
    env must reproduce ``target_scores``.
    """
    from fewtune import (
        BfrsConfig,
        Example,
        Metric,
        bootstrap_traces,
        construct_fewshot_prompts,
        filter_traces,
        sample_fewshot_subsets,
        split_train_val,
    )
    from fewtune.formatting import render_prompt

    for score in target_scores:
        assert (score * val_size).is_integer(), "target scores must be exact fractions of val_size"

    program = make_single_module_program()
    sig = program.module("generate_answer").signature
    examples = [
        Example(id=f"cs-{i:03d}", inputs={"question": f"question number {i}?"}, metadata={"answer": f"g{i}"})
        for i in range(train_size + val_size)
    ]
    metric = Metric(
        name="em", fn=lambda out, meta: 1.0 if out.get("answer") == meta["answer"] else 0.0
    )
    cfg = BfrsConfig(
        n_candidates=len(target_scores),
        max_demos=3,
        train_size=train_size,
        val_size=val_size,
        seed=seed,
    )

    def correct(ex):
        return f"solve it. We work through question {ex.id} carefully.\n\nAnswer: {ex.metadata['answer']}"

    train, val = split_train_val(examples, cfg)
    by_key = {MockScript.key("generate_answer", ex.id): correct(ex) for ex in train}
    bootstrap_env = keyed_env(dict(by_key))
    kept = filter_traces(
        bootstrap_traces(program, train, metric, bootstrap_env, seed=cfg.seed), metric
    )
    assert len(kept) == train_size
    candidates = sample_fewshot_subsets(kept, cfg, program.labels())
    signatures_seen = set()
    by_prompt: dict[str, str] = {}
    for cand in candidates:
        demo_ids = tuple(d.source for d in cand.demos_by_label["generate_answer"])
        assert demo_ids not in signatures_seen, "candidate draws must be pairwise distinct"
        signatures_seen.add(demo_ids)
        candidate_program = construct_fewshot_prompts(program, cand)
        module = candidate_program.module("generate_answer")
        n_correct = round(target_scores[cand.candidate_index] * val_size)
        for j, ex in enumerate(val):
            prompt = render_prompt(module.signature, module.demos, ex.inputs).text
            completion = (
                correct(ex)
                if j < n_correct
                else f"guess. We cannot tell.\n\nAnswer: wrong-{cand.candidate_index}-{j}"
            )
            assert prompt not in by_prompt, "prompt collision across candidates"
            by_prompt[prompt] = completion
    env = LmEnvironment(backend=MockBackend(MockScript(by_prompt=by_prompt, by_key=by_key)))
    return program, examples, metric, env, cfg
