"""Command-line interface: run optimization strategies and render reports.

``optimize`` runs one (task, strategy, seed) combination end to end and
writes ``runs/<run-id>/summary.json`` plus scoreboard and trace stores;
``report`` aggregates results.csv into a strategy-by-(model, task) table
with bar-chart figures; ``prepare-data`` materializes datasets and mock
scripts for desk-scale runs.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .backends import (
    HttpBackend,
    HttpBackendConfig,
    InferenceParams,
    MockBackend,
    MockScript,
    ModelRef,
    default_inference_params,
)
from .core import LmEnvironment, evaluate, save_trace_store
from .errors import FewtuneError
from .fewshot_search import BfrsConfig, save_scoreboard
from .finetune import CliTrainer, LoraHyperparams, StubTrainer
from .strategy import StrategyRunConfig, parse_strategy, run_strategy
from .tasks import (
    MockRetriever,
    TASK_SPECS,
    aggregate_runs,
    append_result,
    build_task,
    read_results,
    write_mock_script,
    write_task_data,
)
from .tasks.aggregate import ABORTED
from .tasks.data import read_examples
from .tasks.retrieval import HttpRetriever


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _build_backend(config: dict):
    backend_cfg = config.get("backend", {})
    kind = backend_cfg.get("kind", "mock")
    if kind == "mock":
        script_path = backend_cfg.get("script")
        if not script_path:
            raise FewtuneError("mock backend requires backend.script in the config")
        script = MockScript.from_file(script_path)
        if "default" in backend_cfg:
            script = replace(script, default=backend_cfg["default"])
        return MockBackend(script)
    if kind == "http":
        return HttpBackend(
            HttpBackendConfig(
                endpoint=backend_cfg["endpoint"],
                timeout_s=float(backend_cfg.get("timeout_s", 60.0)),
                max_retries=int(backend_cfg.get("max_retries", 3)),
                sampling_field=backend_cfg.get("sampling_field", "top_k"),
            )
        )
    raise FewtuneError(f"unknown backend kind {kind!r}")


def _build_params(config: dict) -> InferenceParams:
    overrides = config.get("params", {})
    params = default_inference_params()
    if overrides:
        params = replace(
            params,
            **{
                key: tuple(value) if key == "stop_strings" else value
                for key, value in overrides.items()
            },
        )
    return params


def _build_tools(task_name: str, config: dict, data_root: Path) -> dict:
    if task_name != "hotpotqa":
        return {}
    retriever_cfg = config.get("retriever", {})
    kind = retriever_cfg.get("kind", "mock")
    if kind == "mock":
        corpus_path = retriever_cfg.get("corpus", data_root / "hotpotqa" / "corpus.json")
        return {"retrieve": MockRetriever.from_file(corpus_path)}
    if kind == "http":
        return {"retrieve": HttpRetriever(retriever_cfg["endpoint"])}
    raise FewtuneError(f"unknown retriever kind {kind!r}")


def _build_trainer(config: dict, run_dir: Path):
    trainer_cfg = config.get("trainer", {})
    kind = trainer_cfg.get("kind", "stub")
    if kind == "stub":
        return StubTrainer(fail=bool(trainer_cfg.get("fail", False)))
    if kind == "cli":
        return CliTrainer(
            command=trainer_cfg["command"],
            output_root=trainer_cfg.get("output_root", run_dir / "trainer"),
        )
    raise FewtuneError(f"unknown trainer kind {kind!r}")


def run_id_for(task: str, strategy: str, seed: int) -> str:
    return f"{task}-{strategy.replace('->', '-')}-s{seed}"


def cmd_optimize(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    data_root = Path(config.get("data_root", "data"))
    task = build_task(args.task, args.seed, data_root)
    spec = task.spec

    model = ModelRef(
        base_model_id=config.get("model", {}).get("base_model_id", "mock-lm"),
        endpoint=config.get("model", {}).get("endpoint"),
    )
    program = spec.program_factory(model)

    env = LmEnvironment(
        backend=_build_backend(config),
        params=_build_params(config),
        tools=_build_tools(args.task, config, data_root),
    )

    out_root = Path(args.out)
    run_dir = out_root / "runs" / run_id_for(args.task, args.strategy, args.seed)
    run_dir.mkdir(parents=True, exist_ok=True)

    bfrs_cfg = BfrsConfig(
        n_candidates=int(config.get("bfrs", {}).get("n_candidates", 6)),
        max_demos=int(config.get("bfrs", {}).get("max_demos", 3)),
        train_size=spec.bfrs_train_size,
        val_size=spec.bfrs_val_size,
    )
    hp = LoraHyperparams(**config.get("hyperparams", {}))
    workers = int(config.get("workers", 1))
    run_cfg = StrategyRunConfig(
        bfrs=bfrs_cfg,
        hyperparams=hp,
        dev_examples=task.dev,
        run_dir=run_dir,
        min_records=int(config.get("min_records", 1)),
        workers=workers,
        continue_from_tuned_prompts=bool(config.get("continue_from_tuned_prompts", False)),
    )

    plan = parse_strategy(args.strategy, seed=args.seed)
    trainer = _build_trainer(config, run_dir)
    outcome = run_strategy(plan, program, task.train, spec.metric, env, trainer, run_cfg)

    summary: dict = {
        "run_id": run_dir.name,
        "task": args.task,
        "strategy": args.strategy,
        "seed": args.seed,
        "model": model.base_model_id,
        "steps": [record.to_dict() for record in outcome.steps],
        "status": outcome.status,
    }
    if outcome.scoreboards:
        save_scoreboard(run_dir, outcome.scoreboards)

    accuracy: float | None = None
    if outcome.aborted:
        summary["result"] = ABORTED
    else:
        final_program = outcome.program
        assert final_program is not None
        test_mean, per_example = evaluate(
            final_program, task.test, spec.metric, env, workers=workers
        )
        accuracy = 100.0 * test_mean
        summary["result"] = "ok"
        summary["test_score"] = test_mean
        summary["test_accuracy_percent"] = accuracy
        summary["final_fingerprint"] = final_program.fingerprint()
        summary["adapter_id"] = final_program.model_ref.adapter_id
        save_trace_store(
            run_dir,
            [trace for _, trace in per_example],
            config={"task": args.task, "strategy": args.strategy, "split": "test"},
            seed=args.seed,
        )

    (run_dir / "summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    append_result(
        out_root / "results.csv",
        strategy=args.strategy,
        model=model.base_model_id,
        task=args.task,
        seed=args.seed,
        accuracy=accuracy,
    )
    status = summary["result"] if outcome.aborted else f"{accuracy:.1f}%"
    print(f"{run_dir.name}: {status}")
    print(f"summary: {run_dir / 'summary.json'}")
    return 0


def _render_figures(rows, out_dir: Path) -> list[Path]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    paths = []
    tasks = sorted({r.task for r in rows})
    for task in tasks:
        task_rows = [r for r in rows if r.task == task]
        models = sorted({r.model for r in task_rows})
        strategies = _strategy_order(task_rows)
        fig, ax = plt.subplots(figsize=(max(6.0, 1.2 * len(strategies)), 4.0))
        width = 0.8 / max(1, len(models))
        for m_idx, model in enumerate(models):
            means = []
            for strategy in strategies:
                match = [r for r in task_rows if r.model == model and r.strategy == strategy]
                means.append(match[0].mean if match else 0.0)
            offsets = [i + m_idx * width for i in range(len(strategies))]
            ax.bar(offsets, means, width=width, label=model)
        ax.set_xticks([i + 0.4 - width / 2 for i in range(len(strategies))])
        ax.set_xticklabels(strategies, rotation=30, ha="right")
        ax.set_ylabel("test accuracy (%)")
        ax.set_title(task)
        ax.legend(fontsize="small")
        fig.tight_layout()
        path = out_dir / f"report_{task}.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        paths.append(path)
    return paths


def _strategy_order(rows) -> list[str]:
    from .strategy import STRATEGY_MENU

    present = {r.strategy for r in rows}
    ordered = [s for s in STRATEGY_MENU if s in present]
    ordered += sorted(present - set(ordered))
    return ordered


def cmd_report(args: argparse.Namespace) -> int:
    results_path = Path(args.results)
    completed, aborted = read_results(results_path)
    rows = aggregate_runs(completed)
    aborted_keys = {(r["strategy"], r["model"], r["task"]) for r in aborted}

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    summary_path = out_dir / "summary.csv"
    with summary_path.open("w", newline="", encoding="utf-8") as fh:
        import csv

        writer = csv.writer(fh)
        writer.writerow(["strategy", "model", "task", "runs", "mean_accuracy"])
        for row in rows:
            writer.writerow([row.strategy, row.model, row.task, row.runs, row.mean_text])
        for strategy, model, task in sorted(aborted_keys):
            if not any(r.strategy == strategy and r.model == model and r.task == task for r in rows):
                writer.writerow([strategy, model, task, 0, ABORTED])

    # Table: strategies as rows, (model, task) pairs as columns.
    columns = sorted({(r.model, r.task) for r in rows} | {(m, t) for _, m, t in aborted_keys})
    strategies = _strategy_order(rows)
    for strategy, model, task in aborted_keys:
        if strategy not in strategies:
            strategies.append(strategy)
    lookup = {(r.strategy, r.model, r.task): r.mean_text for r in rows}
    header = ["strategy"] + [f"{m}/{t}" for m, t in columns]
    widths = [max(len(h), 12) for h in header]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
    for strategy in strategies:
        cells = [strategy]
        for model, task in columns:
            if (strategy, model, task) in lookup:
                cells.append(lookup[(strategy, model, task)])
            elif (strategy, model, task) in aborted_keys:
                cells.append(ABORTED)
            else:
                cells.append("")
        lines.append("  ".join(c.ljust(w) for c, w in zip(cells, widths)))
    table = "\n".join(lines)
    print(table)
    (out_dir / "summary.txt").write_text(table + "\n", encoding="utf-8")

    figure_paths = _render_figures(rows, out_dir)
    print(f"wrote {summary_path}")
    for path in figure_paths:
        print(f"wrote {path}")
    return 0


def cmd_prepare_data(args: argparse.Namespace) -> int:
    root = write_task_data(args.task, args.root, seed=args.seed)
    print(f"wrote {root}")
    if args.with_mock:
        examples = []
        for split in ("train", "dev", "test"):
            examples.extend(read_examples(root / f"{split}.jsonl"))
        path = write_mock_script(
            args.task,
            examples,
            args.with_mock,
            accuracy=args.mock_accuracy,
            seed=args.seed,
        )
        print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fewtune")
    sub = parser.add_subparsers(dest="command", required=True)

    p_opt = sub.add_parser("optimize", help="run one optimization strategy end to end")
    p_opt.add_argument("--task", required=True, choices=sorted(TASK_SPECS))
    p_opt.add_argument("--strategy", required=True)
    p_opt.add_argument("--seed", type=int, default=0)
    p_opt.add_argument("--config", default=None, help="JSON run config")
    p_opt.add_argument("--out", default=".", help="output root (runs/, results.csv)")
    p_opt.set_defaults(fn=cmd_optimize)

    p_rep = sub.add_parser("report", help="aggregate results.csv into a table and figures")
    p_rep.add_argument("--results", default="results.csv")
    p_rep.add_argument("--out", default="report")
    p_rep.set_defaults(fn=cmd_report)

    p_data = sub.add_parser("prepare-data", help="materialize task datasets (and a mock script)")
    p_data.add_argument("--task", required=True, choices=sorted(TASK_SPECS))
    p_data.add_argument("--root", default="data")
    p_data.add_argument("--seed", type=int, default=0)
    p_data.add_argument("--with-mock", default=None, help="also write a mock script here")
    p_data.add_argument("--mock-accuracy", type=float, default=0.6)
    p_data.set_defaults(fn=cmd_prepare_data)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except FewtuneError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
