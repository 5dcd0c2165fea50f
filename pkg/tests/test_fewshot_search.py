from __future__ import annotations

import json

import pytest

from fewtune import (
    BfrsConfig,
    Demo,
    Example,
    InsufficientExamplesError,
    Metric,
    MockScript,
    ModelRef,
    SignatureError,
    TraceSet,
    bfrs,
    bootstrap_traces,
    construct_fewshot_prompts,
    filter_traces,
    sample_fewshot_subsets,
    split_train_val,
)
from fewtune.fewshot_search import save_scoreboard, scoreboard_entry
from fewtune.formatting import render_prompt
from fewtune.tasks import MockRetriever, exact_match_metric, make_hotpotqa_program

from .conftest import build_candidate_scoring_setup, keyed_env, make_single_module_program


def _examples(n, prefix="x"):
    return [
        Example(id=f"{prefix}{i}", inputs={"question": f"q{i}"}, metadata={"answer": "yes"})
        for i in range(n)
    ]


def test_split_sizes_and_disjointness():
    cfg = BfrsConfig(train_size=100, val_size=250, seed=0)
    train, val = split_train_val(_examples(1000), cfg)
    assert len(train) == 100 and len(val) == 250
    assert not {e.id for e in train} & {e.id for e in val}


def test_split_small_task_sizes():
    cfg = BfrsConfig(train_size=15, val_size=35, seed=3)
    train, val = split_train_val(_examples(50), cfg)
    assert len(train) == 15 and len(val) == 35
    assert not {e.id for e in train} & {e.id for e in val}


def test_split_boundary_error():
    cfg = BfrsConfig(train_size=10, val_size=20, seed=0)
    with pytest.raises(InsufficientExamplesError):
        split_train_val(_examples(29), cfg)
    train, val = split_train_val(_examples(30), cfg)
    assert len(train) + len(val) == 30


def test_split_is_seeded_shuffle():
    examples = _examples(40)
    cfg_a = BfrsConfig(train_size=10, val_size=20, seed=1)
    cfg_b = BfrsConfig(train_size=10, val_size=20, seed=2)
    train_a1, _ = split_train_val(examples, cfg_a)
    train_a2, _ = split_train_val(examples, cfg_a)
    train_b, _ = split_train_val(examples, cfg_b)
    assert [e.id for e in train_a1] == [e.id for e in train_a2]
    assert [e.id for e in train_a1] != [e.id for e in train_b]


def _kept_traces(n_examples=10):
    program = make_single_module_program()
    examples = _examples(n_examples, prefix="k")
    env = keyed_env(
        {
            MockScript.key("generate_answer", ex.id): f"reason about {ex.id}. We do.\nAnswer: yes"
            for ex in examples
        }
    )
    metric = Metric(name="em", fn=lambda out, meta: 1.0 if out.get("answer") == "yes" else 0.0)
    kept = filter_traces(bootstrap_traces(program, examples, metric, env), metric)
    return program, kept


def test_sample_candidate_count_and_demo_caps():
    program, kept = _kept_traces(10)
    cfg = BfrsConfig(n_candidates=6, max_demos=3, train_size=1, val_size=1, seed=0)
    candidates = sample_fewshot_subsets(kept, cfg, program.labels())
    assert len(candidates) == 6
    assert [c.candidate_index for c in candidates] == list(range(6))
    assert candidates[0].demos_by_label == {"generate_answer": []}
    for cand in candidates[1:]:
        demos = cand.demos_by_label["generate_answer"]
        assert 1 <= len(demos) <= 3


def test_sample_capped_by_available_traces():
    program, kept = _kept_traces(2)
    cfg = BfrsConfig(n_candidates=6, max_demos=3, train_size=1, val_size=1, seed=0)
    for cand in sample_fewshot_subsets(kept, cfg, program.labels()):
        assert len(cand.demos_by_label["generate_answer"]) <= 2


def test_sample_empty_kept_gives_vanilla_candidates():
    program, _ = _kept_traces(1)
    cfg = BfrsConfig(n_candidates=4, max_demos=3, train_size=1, val_size=1, seed=0)
    candidates = sample_fewshot_subsets(TraceSet(), cfg, program.labels())
    assert len(candidates) == 4
    assert all(c.demos_by_label == {"generate_answer": []} for c in candidates)


def test_sample_demo_provenance_and_field_coverage():
    program, kept = _kept_traces(8)
    cfg = BfrsConfig(n_candidates=6, max_demos=3, train_size=1, val_size=1, seed=1)
    kept_ids = {t.example_id for t in kept.traces}
    sig = program.module("generate_answer").signature
    for cand in sample_fewshot_subsets(kept, cfg, program.labels()):
        for demo in cand.demos_by_label["generate_answer"]:
            sig.validate_demo(demo)
            trace_id = demo.source.split("/")[0]
            assert trace_id in kept_ids


def test_sample_joint_across_modules():
    # One drawn trace supplies a demo to every module it stepped through.
    program = make_hotpotqa_program(ModelRef("mock-lm"))
    examples = [
        Example(id=f"hp{i}", inputs={"question": f"who built tower {i}?"}, metadata={"answer": "mason"})
        for i in range(5)
    ]
    by_key = {}
    for ex in examples:
        by_key[MockScript.key("generate_query[0]", ex.id)] = f"look for tower {ex.id}. We search.\n\nSearch Query: tower {ex.id}"
        by_key[MockScript.key("generate_query[1]", ex.id)] = f"look again at {ex.id}. We refine.\n\nSearch Query: builder of tower {ex.id}"
        by_key[MockScript.key("generate_answer", ex.id)] = "conclude. We conclude.\n\nAnswer: mason"
    env = keyed_env(by_key)
    env.tools["retrieve"] = MockRetriever([f"tower {i} | tower {i} was built by a mason." for i in range(5)])
    metric = exact_match_metric()
    kept = filter_traces(bootstrap_traces(program, examples, metric, env), metric)
    assert len(kept) == 5
    cfg = BfrsConfig(n_candidates=4, max_demos=2, train_size=1, val_size=1, seed=2)
    for cand in sample_fewshot_subsets(kept, cfg, program.labels()):
        if cand.candidate_index == 0:
            continue
        per_module_sources = {
            label: {d.source.split("/")[0] for d in demos}
            for label, demos in cand.demos_by_label.items()
        }
        # Same trace set feeds all three modules.
        assert (
            per_module_sources["generate_query[0]"]
            == per_module_sources["generate_query[1]"]
            == per_module_sources["generate_answer"]
        )


def test_sample_deterministic_per_seed():
    program, kept = _kept_traces(9)
    cfg = BfrsConfig(n_candidates=6, max_demos=3, train_size=1, val_size=1, seed=4)
    first = sample_fewshot_subsets(kept, cfg, program.labels())
    second = sample_fewshot_subsets(kept, cfg, program.labels())
    assert [c.demo_sources() for c in first] == [c.demo_sources() for c in second]


def test_construct_empty_assignment_renders_identically():
    program, kept = _kept_traces(3)
    from fewtune.fewshot_search import CandidateAssignment

    vanilla = construct_fewshot_prompts(program, CandidateAssignment({"generate_answer": []}, 0))
    module = program.module("generate_answer")
    before = render_prompt(module.signature, module.demos, {"question": "q"}).text
    after_module = vanilla.module("generate_answer")
    after = render_prompt(after_module.signature, after_module.demos, {"question": "q"}).text
    assert before == after


def test_construct_inserts_demo_block_and_keeps_model_ref():
    program, kept = _kept_traces(3)
    demo = Demo(values={"question": "q0", "reasoning": "r. We r.", "answer": "yes"}, source="k0/0")
    from fewtune.fewshot_search import CandidateAssignment

    updated = construct_fewshot_prompts(program, CandidateAssignment({"generate_answer": [demo]}, 1))
    module = updated.module("generate_answer")
    text = render_prompt(module.signature, module.demos, {"question": "live"}).text
    assert text.count("\n\n---\n\n") == 3  # instruction | format | demo | live
    assert "Question: q0" in text
    assert updated.model_ref == program.model_ref
    assert program.module("generate_answer").demos == []  # original untouched


def test_construct_module_isolation():
    program = make_hotpotqa_program(ModelRef("mock-lm"))
    demo = Demo(
        values={
            "context": "N/A",
            "question": "q",
            "reasoning": "r. We r.",
            "search_query": "s",
        },
        source="t/0",
    )
    from fewtune.fewshot_search import CandidateAssignment

    cand = CandidateAssignment(
        {"generate_query[0]": [demo], "generate_query[1]": [], "generate_answer": []}, 1
    )
    updated = construct_fewshot_prompts(program, cand)
    assert len(updated.module("generate_query[0]").demos) == 1
    assert updated.module("generate_query[1]").demos == []
    assert updated.module("generate_answer").demos == []


def test_construct_rejects_mismatched_demo():
    program, _ = _kept_traces(1)
    bad = Demo(values={"question": "q", "answer": "a"})  # reasoning missing
    from fewtune.fewshot_search import CandidateAssignment

    with pytest.raises(SignatureError):
        construct_fewshot_prompts(program, CandidateAssignment({"generate_answer": [bad]}, 1))


def test_bfrs_returns_first_max_and_exact_scoreboard():
    targets = [0.25, 0.75, 0.5, 0.75, 0.0, 0.25]
    program, examples, metric, env, cfg = build_candidate_scoring_setup(
        targets, train_size=6, val_size=8, seed=13
    )
    best_program, scoreboard = bfrs(program, examples, metric, env, cfg)
    assert [c.score for c in scoreboard] == targets
    best = max(scoreboard, key=lambda c: (c.score, -c.candidate_index))
    assert best.candidate_index == 1
    assert max(c.score for c in scoreboard) == best.score
    # The returned program is candidate 1's construction.
    expected = construct_fewshot_prompts(program, scoreboard[1])
    assert best_program.fingerprint() == expected.fingerprint()


def test_bfrs_single_candidate_returned_regardless():
    program, examples, metric, env, cfg = build_candidate_scoring_setup(
        [0.0], train_size=4, val_size=6, seed=5
    )
    best_program, scoreboard = bfrs(program, examples, metric, env, cfg)
    assert len(scoreboard) == 1
    assert scoreboard[0].score == 0.0
    assert best_program.fingerprint() == program.fingerprint()  # vanilla candidate


def test_bfrs_all_zero_scores_degenerate_tie():
    targets = [0.0] * 6
    program, examples, metric, env, cfg = build_candidate_scoring_setup(
        targets, train_size=6, val_size=8, seed=21
    )
    best_program, scoreboard = bfrs(program, examples, metric, env, cfg)
    assert [c.score for c in scoreboard] == targets
    assert best_program.fingerprint() == program.fingerprint()  # candidate 0 wins the tie


def test_bfrs_zero_kept_traces_still_evaluates_vanilla():
    program = make_single_module_program()
    examples = _examples(12, prefix="z")
    # Parseable but always wrong: nothing passes the filter.
    env = keyed_env({}, default="shrug. We give up.\nAnswer: no")
    metric = Metric(name="em", fn=lambda out, meta: 1.0 if out.get("answer") == "yes" else 0.0)
    cfg = BfrsConfig(n_candidates=3, max_demos=2, train_size=4, val_size=6, seed=0)
    best_program, scoreboard = bfrs(program, examples, metric, env, cfg)
    assert len(scoreboard) == 3
    assert all(c.score == 0.0 for c in scoreboard)
    assert all(not c.demos_by_label["generate_answer"] for c in scoreboard)
    assert best_program.fingerprint() == program.fingerprint()


def test_bfrs_never_touches_model_ref():
    targets = [0.25, 0.5]
    program, examples, metric, env, cfg = build_candidate_scoring_setup(
        targets, train_size=4, val_size=4, seed=9
    )
    best_program, _ = bfrs(program, examples, metric, env, cfg)
    assert best_program.model_ref == program.model_ref
    assert best_program.model_ref.adapter_id is None


def test_bfrs_seed_determinism():
    targets = [0.25, 0.75, 0.5]
    program, examples, metric, env, cfg = build_candidate_scoring_setup(
        targets, train_size=5, val_size=4, seed=17
    )
    first = bfrs(program, examples, metric, env, cfg)
    second = bfrs(program, examples, metric, env, cfg)
    assert [c.score for c in first[1]] == [c.score for c in second[1]]
    assert [c.demo_sources() for c in first[1]] == [c.demo_sources() for c in second[1]]
    assert first[0].fingerprint() == second[0].fingerprint()


def test_scoreboard_persistence(tmp_path):
    program, examples, metric, env, cfg = build_candidate_scoring_setup(
        [0.5, 0.25], train_size=4, val_size=4, seed=2
    )
    _, scoreboard = bfrs(program, examples, metric, env, cfg)
    path = save_scoreboard(tmp_path / "runs" / "r", [scoreboard_entry(cfg, scoreboard)])
    doc = json.loads(path.read_text())
    step = doc["steps"][0]
    assert step["seed"] == cfg.seed
    assert [c["score"] for c in step["candidates"]] == [0.5, 0.25]
    assert all("demos" in c for c in step["candidates"])
