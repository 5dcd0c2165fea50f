"""Bootstrapped fine-tuning: dataset construction, export, and the trainer contract.

Kept traces become one flat multi-task dataset of vanilla-prompt/completion
pairs (one record per module step, demos stripped), which a trainer consumes
to produce an adapter reference. Trainers are job-shaped (submit, poll,
result) because training usually runs on different hardware.
"""

from __future__ import annotations

import hashlib
import json
import subprocess
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence

from .backends import ModelRef
from .bootstrap import TraceSet, bootstrap_traces, filter_traces
from .core import Example, LmEnvironment, LmProgram, Metric
from .errors import InsufficientDataError, TrainerFailedError
from .formatting import BLOCK_SEPARATOR, render_completion, render_prompt


@dataclass(frozen=True)
class LoraHyperparams:
    rank: int = 32
    alpha: int = 64
    dropout: float = 0.0
    target_layers: str = "qk"
    epochs: int = 5
    learning_rate: float = 1e-5
    effective_batch_size: int = 8
    precision: str = "bf16"

    def __post_init__(self) -> None:
        if min(self.rank, self.alpha, self.epochs, self.effective_batch_size) <= 0:
            raise ValueError("rank, alpha, epochs, and batch size must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")


@dataclass(frozen=True)
class FinetuneRecord:
    """One vanilla-prompt/completion training pair from a kept trace step."""

    prompt: str
    completion: str
    module_label: str
    trace_id: str


@dataclass
class TrainerJob:
    dataset_path: Path
    base_model: ModelRef
    hyperparams: LoraHyperparams
    status: str = "pending"  # pending | running | succeeded | failed
    result_adapter: str | None = None
    detail: str = ""


class Trainer(Protocol):
    def submit(self, dataset_path: Path, base_model: ModelRef, hp: LoraHyperparams) -> TrainerJob: ...

    def poll(self, job: TrainerJob) -> TrainerJob: ...


def build_finetune_dataset(
    kept: TraceSet,
    program: LmProgram,
    *,
    min_records: int = 1,
) -> list[FinetuneRecord]:
    """One record per (trace, step): vanilla prompt in, rendered outputs out.

    Prompts are zero-demo renders of each step's inputs no matter what
    prompts produced the trace; completions end with the stop marker so the
    tuned model learns to terminate.
    """
    records: list[FinetuneRecord] = []
    for trace in kept.traces:
        for step in trace.steps:
            sig = program.module(step.module_label).signature
            prompt = render_prompt(sig, [], step.inputs, module_label=step.module_label)
            completion = render_completion(sig, step.outputs) + BLOCK_SEPARATOR
            records.append(
                FinetuneRecord(
                    prompt=prompt.text,
                    completion=completion,
                    module_label=step.module_label,
                    trace_id=trace.example_id,
                )
            )
    if len(records) < min_records:
        raise InsufficientDataError(
            f"{len(kept.traces)} kept trace(s) yielded {len(records)} record(s); "
            f"need at least {min_records} to fine-tune",
            kept_traces=len(kept.traces),
            records=len(records),
            required=min_records,
        )
    return records


@dataclass(frozen=True)
class DatasetManifest:
    count: int
    checksum: str
    source_program_id: str
    path: Path


def export_dataset(
    records: Sequence[FinetuneRecord],
    path: Path | str,
    *,
    source_program_id: str = "",
) -> DatasetManifest:
    """Write records as JSON lines and a manifest alongside."""
    if not records:
        raise InsufficientDataError(
            "no records to export", kept_traces=0, records=0, required=1
        )
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [
        json.dumps(
            {
                "prompt": r.prompt,
                "completion": r.completion,
                "module_label": r.module_label,
                "trace_id": r.trace_id,
            },
            ensure_ascii=False,
        )
        for r in records
    ]
    payload = "\n".join(lines) + "\n"
    path.write_text(payload, encoding="utf-8")
    checksum = hashlib.sha256(payload.encode("utf-8")).hexdigest()
    manifest = DatasetManifest(
        count=len(records),
        checksum=checksum,
        source_program_id=source_program_id,
        path=path,
    )
    manifest_doc = {
        "count": manifest.count,
        "checksum": manifest.checksum,
        "source_program_id": manifest.source_program_id,
        "dataset": path.name,
    }
    path.with_suffix(path.suffix + ".manifest.json").write_text(
        json.dumps(manifest_doc, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return manifest


class StubTrainer:
    """Contract-satisfying trainer double: no training, deterministic adapter ids."""

    def __init__(self, *, fail: bool = False):
        self.fail = fail
        self.jobs: list[TrainerJob] = []

    def submit(self, dataset_path: Path, base_model: ModelRef, hp: LoraHyperparams) -> TrainerJob:
        job = TrainerJob(dataset_path=Path(dataset_path), base_model=base_model, hyperparams=hp)
        self.jobs.append(job)
        return job

    def poll(self, job: TrainerJob) -> TrainerJob:
        if self.fail:
            job.status = "failed"
            job.detail = "stub trainer configured to fail"
            return job
        digest = hashlib.sha256(
            job.dataset_path.read_bytes() + job.base_model.wire_id.encode("utf-8")
        ).hexdigest()[:12]
        job.status = "succeeded"
        job.result_adapter = f"adapter-{digest}"
        return job


def _format_float(value: float) -> str:
    text = f"{value:g}"
    if "e" in text:
        mantissa, _, exponent = text.partition("e")
        exponent = exponent.replace("-0", "-").replace("+0", "+").replace("+", "")
        text = f"{mantissa}e{exponent}"
    return text


class CliTrainer:
    """Runs an external trainer command speaking the train CLI contract.

    Invocation: ``<command> train --data <path> --base-model <id> --output
    <dir> --rank R --alpha A --epochs E --lr LR --batch B --precision P
    --target-layers T``; success is exit status 0 plus ``<dir>/result.json``
    containing the adapter id.
    """

    def __init__(self, command: Sequence[str], output_root: Path | str):
        self.command = list(command)
        self.output_root = Path(output_root)
        self._procs: dict[int, subprocess.Popen] = {}

    def submit(self, dataset_path: Path, base_model: ModelRef, hp: LoraHyperparams) -> TrainerJob:
        job = TrainerJob(dataset_path=Path(dataset_path), base_model=base_model, hyperparams=hp)
        out_dir = self.output_root / f"train-{hashlib.sha256(str(dataset_path).encode()).hexdigest()[:8]}"
        out_dir.mkdir(parents=True, exist_ok=True)
        argv = self.command + [
            "train",
            "--data", str(dataset_path),
            "--base-model", base_model.base_model_id,
            "--output", str(out_dir),
            "--rank", str(hp.rank),
            "--alpha", str(hp.alpha),
            "--epochs", str(hp.epochs),
            "--lr", _format_float(hp.learning_rate),
            "--batch", str(hp.effective_batch_size),
            "--precision", hp.precision,
            "--target-layers", hp.target_layers,
        ]
        if hp.dropout:
            argv += ["--dropout", _format_float(hp.dropout)]
        proc = subprocess.Popen(argv, stdout=subprocess.PIPE, stderr=subprocess.PIPE)
        job.status = "running"
        job.detail = str(out_dir)
        self._procs[id(job)] = proc
        return job

    def poll(self, job: TrainerJob) -> TrainerJob:
        proc = self._procs.get(id(job))
        if proc is None or job.status in ("succeeded", "failed"):
            return job
        code = proc.poll()
        if code is None:
            return job
        stdout, stderr = proc.communicate()
        result_path = Path(job.detail) / "result.json"
        if code == 0 and result_path.exists():
            result = json.loads(result_path.read_text(encoding="utf-8"))
            job.status = "succeeded"
            job.result_adapter = result["adapter_id"]
        else:
            job.status = "failed"
            job.detail = (stderr or stdout or b"").decode("utf-8", "replace")[-2000:]
        return job


def bft(
    program: LmProgram,
    examples: Sequence[Example],
    metric: Metric,
    env: LmEnvironment,
    trainer: Trainer,
    hp: LoraHyperparams | None = None,
    *,
    run_dir: Path | str | None = None,
    min_records: int = 1,
    seed: int = 0,
    poll_interval_s: float = 0.05,
    workers: int = 1,
) -> tuple[LmProgram, DatasetManifest]:
    """Bootstrap on all examples, train on kept traces, return the tuned program.

    The returned program carries the new adapter on its shared model
    reference; demos are untouched. Raises InsufficientDataError when too few
    traces pass the threshold and TrainerFailedError when the job fails
    (the input program is never mutated).
    """
    hp = hp or LoraHyperparams()
    traces = bootstrap_traces(program, examples, metric, env, seed=seed, workers=workers)
    kept = filter_traces(traces, metric)
    records = build_finetune_dataset(kept, program, min_records=min_records)
    run_dir = Path(run_dir) if run_dir is not None else Path("runs") / "adhoc"
    run_dir.mkdir(parents=True, exist_ok=True)
    manifest = export_dataset(
        records, run_dir / "finetune_dataset.jsonl", source_program_id=program.fingerprint()
    )
    job = trainer.submit(manifest.path, program.model_ref, hp)
    while True:
        job = trainer.poll(job)
        if job.status in ("succeeded", "failed"):
            break
        time.sleep(poll_interval_s)
    if job.status == "failed":
        raise TrainerFailedError(f"trainer job failed: {job.detail}")
    assert job.result_adapter, "succeeded trainer job must carry an adapter id"
    tuned = program.with_model_ref(program.model_ref.with_adapter(job.result_adapter))
    return tuned, manifest
