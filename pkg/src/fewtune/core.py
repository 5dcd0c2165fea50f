"""Program substrate: signatures, modules, programs, traces, and evaluation.

A program composes language modules (each a declarative input->output
contract implemented by one LM call) with a control procedure written as
code against a narrow environment interface: ``ctx.run`` for module calls
and ``ctx.tool`` for frozen tools such as a retriever.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

from .backends import GenerateBackend, InferenceParams, ModelRef, default_inference_params
from .errors import (
    EmptyDatasetError,
    EmptyProgramError,
    FewtuneError,
    ParseFailureError,
    ProgramRunError,
    SignatureError,
    ToolUnavailableError,
)
from .formatting import parse_completion, render_prompt

FieldMap = dict[str, Any]


@dataclass(frozen=True)
class Field:
    name: str
    description: str = ""


@dataclass(frozen=True)
class Demo:
    """One module-level input/output pair usable as a few-shot example.

    ``source`` identifies the originating trace step (``<example_id>/<step>``)
    so optimizer output can be audited back to bootstrapped data.
    """

    values: Mapping[str, str]
    source: str | None = None


@dataclass(frozen=True)
class Signature:
    """Declarative module contract: instruction plus named I/O fields."""

    instruction: str
    input_fields: tuple[Field, ...]
    output_fields: tuple[Field, ...]
    blank_between_fields: bool = True

    def __post_init__(self) -> None:
        names = [f.name for f in self.input_fields + self.output_fields]
        if len(set(names)) != len(names):
            raise SignatureError(f"duplicate field names in signature: {names}")
        if not self.input_fields or not self.output_fields:
            raise SignatureError("signature needs at least one input and one output field")
        out_names = [f.name for f in self.output_fields]
        if "reasoning" in out_names and out_names[0] != "reasoning":
            raise SignatureError("the reasoning field must be the first output field")

    def input_names(self) -> list[str]:
        return [f.name for f in self.input_fields]

    def output_names(self) -> list[str]:
        return [f.name for f in self.output_fields]

    def field_names(self) -> list[str]:
        return self.input_names() + self.output_names()

    def validate_demo(self, demo: Demo) -> None:
        expected = set(self.field_names())
        got = set(demo.values)
        if expected != got:
            raise SignatureError(f"demo fields {sorted(got)} != signature fields {sorted(expected)}")
        empty = [k for k, v in demo.values.items() if not str(v)]
        if empty:
            raise SignatureError(f"demo has empty field(s): {empty}")


def make_signature(
    inputs: Sequence[tuple[str, str] | str],
    outputs: Sequence[tuple[str, str] | str],
    instruction: str | None = None,
    *,
    blank_between_fields: bool = True,
) -> Signature:
    """Build a signature from terse field specs (name or (name, description))."""

    def to_fields(specs: Sequence[tuple[str, str] | str]) -> tuple[Field, ...]:
        out = []
        for spec in specs:
            if isinstance(spec, str):
                out.append(Field(spec))
            else:
                out.append(Field(*spec))
        return tuple(out)

    sig = Signature(
        instruction="",
        input_fields=to_fields(inputs),
        output_fields=to_fields(outputs),
        blank_between_fields=blank_between_fields,
    )
    if instruction is None:
        from .formatting import default_instruction

        instruction = default_instruction(sig)
    return replace(sig, instruction=instruction)


@dataclass
class LanguageModule:
    """A signature plus its current few-shot demos, addressed by label."""

    label: str
    signature: Signature
    demos: list[Demo] = field(default_factory=list)

    def with_demos(self, demos: Sequence[Demo]) -> "LanguageModule":
        for demo in demos:
            self.signature.validate_demo(demo)
        return LanguageModule(label=self.label, signature=self.signature, demos=list(demos))


ControlProcedure = Callable[["ModuleContext", Mapping[str, Any]], FieldMap]


@dataclass
class LmProgram:
    """Ordered language modules plus the control procedure that wires them.

    All modules share one ``model_ref``; optimizers replace demos
    (prompt side) or the model reference (weight side), never both at once.
    """

    modules: list[LanguageModule]
    control: ControlProcedure
    model_ref: ModelRef
    name: str = "program"

    def __post_init__(self) -> None:
        labels = [m.label for m in self.modules]
        if len(set(labels)) != len(labels):
            raise SignatureError(f"duplicate module labels: {labels}")

    def module(self, label: str) -> LanguageModule:
        for m in self.modules:
            if m.label == label:
                return m
        raise SignatureError(f"program has no module labeled {label!r}")

    def labels(self) -> list[str]:
        return [m.label for m in self.modules]

    def demos_by_label(self) -> dict[str, list[Demo]]:
        return {m.label: list(m.demos) for m in self.modules}

    def with_demos(self, demos_by_label: Mapping[str, Sequence[Demo]]) -> "LmProgram":
        modules = [m.with_demos(demos_by_label.get(m.label, m.demos)) for m in self.modules]
        return LmProgram(modules=modules, control=self.control, model_ref=self.model_ref, name=self.name)

    def with_model_ref(self, model_ref: ModelRef) -> "LmProgram":
        modules = [m.with_demos(m.demos) for m in self.modules]
        return LmProgram(modules=modules, control=self.control, model_ref=model_ref, name=self.name)

    def snapshot(self) -> dict:
        """JSON-able view of the optimizable state (prompts and weights)."""
        return {
            "name": self.name,
            "model_ref": {
                "base_model_id": self.model_ref.base_model_id,
                "adapter_id": self.model_ref.adapter_id,
            },
            "modules": [
                {
                    "label": m.label,
                    "instruction": m.signature.instruction,
                    "inputs": [[f.name, f.description] for f in m.signature.input_fields],
                    "outputs": [[f.name, f.description] for f in m.signature.output_fields],
                    "demos": [dict(d.values) for d in m.demos],
                }
                for m in self.modules
            ],
        }

    def fingerprint(self) -> str:
        payload = json.dumps(self.snapshot(), sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class Example:
    """One task input with optional metadata (gold answer or hints)."""

    id: str
    inputs: Mapping[str, Any]
    metadata: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.inputs:
            raise SignatureError(f"example {self.id!r} has empty inputs")


@dataclass
class TraceStep:
    module_label: str
    inputs: FieldMap
    outputs: FieldMap
    raw_completion: str


@dataclass
class Trace:
    """Module-level record of one program execution, scored by the metric."""

    example_id: str
    steps: list[TraceStep] = field(default_factory=list)
    final_output: FieldMap = field(default_factory=dict)
    score: float | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def to_dict(self) -> dict:
        return {
            "example_id": self.example_id,
            "steps": [
                {
                    "module_label": s.module_label,
                    "inputs": s.inputs,
                    "outputs": s.outputs,
                    "raw_completion": s.raw_completion,
                }
                for s in self.steps
            ],
            "final_output": self.final_output,
            "score": self.score,
            "error": self.error,
        }


@dataclass(frozen=True)
class Metric:
    """Named scoring procedure mapping (final_output, metadata) to [0, 1]."""

    name: str
    fn: Callable[[FieldMap, Mapping[str, Any]], float]
    threshold: float = 1.0

    def score(self, final_output: FieldMap, metadata: Mapping[str, Any]) -> float:
        value = float(self.fn(final_output, metadata))
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"metric {self.name!r} returned {value}, outside [0, 1]")
        return value


@dataclass
class LmEnvironment:
    """Everything a program needs at run time: a backend, params, and tools."""

    backend: GenerateBackend
    params: InferenceParams = field(default_factory=default_inference_params)
    tools: dict[str, Any] = field(default_factory=dict)


class ModuleContext:
    """Execution context handed to a program's control procedure."""

    def __init__(self, program: LmProgram, env: LmEnvironment, example_id: str):
        self._program = program
        self._env = env
        self._example_id = example_id
        self.steps: list[TraceStep] = []

    def run(self, label: str, **inputs: str) -> FieldMap:
        """Invoke one language module: render, generate, parse, record."""
        module = self._program.module(label)
        prompt = render_prompt(module.signature, module.demos, inputs, module_label=label)
        completion = self._env.backend.generate(
            self._program.model_ref,
            prompt.text,
            self._env.params,
            tags={"module_label": label, "example_id": self._example_id},
        )
        try:
            outputs = parse_completion(module.signature, completion)
        except ParseFailureError as err:
            raise err.with_module(label) from err
        self.steps.append(TraceStep(label, dict(inputs), outputs, completion))
        return outputs

    def tool(self, name: str) -> Any:
        try:
            return self._env.tools[name]
        except KeyError:
            raise ToolUnavailableError(f"environment provides no tool named {name!r}") from None


def run_program(
    program: LmProgram,
    inputs: Mapping[str, Any],
    env: LmEnvironment,
    *,
    example_id: str = "",
) -> tuple[FieldMap, Trace]:
    """Execute the program once, returning its final output and trace.

    Module failures raise ProgramRunError carrying the partial trace; a
    control procedure that never invokes a module is rejected.
    """
    ctx = ModuleContext(program, env, example_id)
    trace = Trace(example_id=example_id)
    try:
        final_output = program.control(ctx, inputs)
    except FewtuneError as err:
        trace.steps = ctx.steps
        trace.error = f"{type(err).__name__}: {err}"
        raise ProgramRunError(str(err), trace=trace) from err
    trace.steps = ctx.steps
    if not trace.steps:
        trace.error = "EmptyProgramError: control procedure invoked no modules"
        raise ProgramRunError(trace.error, trace=trace) from EmptyProgramError(trace.error)
    trace.final_output = dict(final_output)
    return trace.final_output, trace


def _run_scored(
    program: LmProgram,
    example: Example,
    metric: Metric,
    env: LmEnvironment,
) -> tuple[float, Trace]:
    try:
        final_output, trace = run_program(program, example.inputs, env, example_id=example.id)
    except ProgramRunError as err:
        trace = err.trace if err.trace is not None else Trace(example_id=example.id, error=str(err))
        trace.score = 0.0
        return 0.0, trace
    score = metric.score(final_output, example.metadata)
    trace.score = score
    return score, trace


def evaluate(
    program: LmProgram,
    dataset: Sequence[Example],
    metric: Metric,
    env: LmEnvironment,
    *,
    workers: int = 1,
) -> tuple[float, list[tuple[float, Trace]]]:
    """Mean metric over a dataset plus per-example (score, trace) pairs.

    Per-example failures score 0.0 and are flagged on the trace, never
    fatal. Results align with dataset order even when run concurrently,
    and the mean is permutation-invariant (exact summation).
    """
    if not dataset:
        raise EmptyDatasetError("evaluate requires a non-empty dataset")
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_example = list(pool.map(lambda ex: _run_scored(program, ex, metric, env), dataset))
    else:
        per_example = [_run_scored(program, ex, metric, env) for ex in dataset]
    mean = math.fsum(score for score, _ in per_example) / len(per_example)
    return mean, per_example


def save_trace_store(
    run_dir: Path | str,
    traces: Sequence[Trace],
    *,
    config: Mapping[str, Any],
    seed: int,
) -> Path:
    """Persist one run's traces as ``<run_dir>/traces.json``."""
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    path = run_dir / "traces.json"
    doc = {
        "config": dict(config),
        "seed": seed,
        "traces": [t.to_dict() for t in traces],
    }
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")
    return path


def load_trace_store(path: Path | str) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))
