"""The three built-in benchmark programs and their task specs."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Mapping

from ..backends import ModelRef
from ..core import FieldMap, LanguageModule, LmProgram, Metric, ModuleContext, make_signature
from ..formatting import render_context
from .metrics import exact_match_metric, gsm8k_metric
from .retrieval import dedup_context


@dataclass(frozen=True)
class TaskSpec:
    """A benchmark task: program factory, metric, and canonical split sizes."""

    name: str
    program_factory: Callable[[ModelRef], LmProgram]
    metric: Metric
    train_size: int
    dev_size: int
    test_size: int
    bfrs_train_size: int
    bfrs_val_size: int


def gsm8k_signature():
    return make_signature(
        inputs=["question"],
        outputs=["reasoning", "answer"],
        blank_between_fields=False,
    )


def make_gsm8k_program(model_ref: ModelRef) -> LmProgram:
    def control(ctx: ModuleContext, inputs: Mapping[str, Any]) -> FieldMap:
        return ctx.run("generate_answer", question=str(inputs["question"]))

    return LmProgram(
        modules=[LanguageModule("generate_answer", gsm8k_signature())],
        control=control,
        model_ref=model_ref,
        name="gsm8k",
    )


def iris_signature():
    return make_signature(
        inputs=["petal_length", "petal_width", "sepal_length", "sepal_width"],
        outputs=["reasoning", ("answer", "setosa, versicolor, or virginica")],
        instruction="Given the petal and sepal dimensions in cm, predict the iris species.",
    )


def make_iris_program(model_ref: ModelRef) -> LmProgram:
    def control(ctx: ModuleContext, inputs: Mapping[str, Any]) -> FieldMap:
        return ctx.run(
            "generate_answer",
            petal_length=str(inputs["petal_length"]),
            petal_width=str(inputs["petal_width"]),
            sepal_length=str(inputs["sepal_length"]),
            sepal_width=str(inputs["sepal_width"]),
        )

    return LmProgram(
        modules=[LanguageModule("generate_answer", iris_signature())],
        control=control,
        model_ref=model_ref,
        name="iris",
    )


def hotpotqa_query_signature():
    return make_signature(
        inputs=["context", "question"],
        outputs=["reasoning", "search_query"],
    )


def hotpotqa_answer_signature():
    return make_signature(
        inputs=["context", "question"],
        outputs=["reasoning", "answer"],
    )


def make_hotpotqa_program(model_ref: ModelRef, passages_per_hop: int = 3) -> LmProgram:
    """Two query hops against a frozen retriever, then an answer module."""

    def control(ctx: ModuleContext, inputs: Mapping[str, Any]) -> FieldMap:
        question = str(inputs["question"])
        retriever = ctx.tool("retrieve")
        context: list[str] = []
        for hop in range(2):
            out = ctx.run(
                f"generate_query[{hop}]",
                context=render_context(context),
                question=question,
            )
            passages = retriever.query(out["search_query"], passages_per_hop)
            context = dedup_context(context, passages)
        answer = ctx.run("generate_answer", context=render_context(context), question=question)
        return {**answer, "context": context}

    query_sig = hotpotqa_query_signature()
    return LmProgram(
        modules=[
            LanguageModule("generate_query[0]", query_sig),
            LanguageModule("generate_query[1]", query_sig),
            LanguageModule("generate_answer", hotpotqa_answer_signature()),
        ],
        control=control,
        model_ref=model_ref,
        name="hotpotqa",
    )


TASK_SPECS: dict[str, TaskSpec] = {
    "hotpotqa": TaskSpec(
        name="hotpotqa",
        program_factory=make_hotpotqa_program,
        metric=exact_match_metric(),
        train_size=1000,
        dev_size=500,
        test_size=1500,
        bfrs_train_size=100,
        bfrs_val_size=250,
    ),
    "gsm8k": TaskSpec(
        name="gsm8k",
        program_factory=make_gsm8k_program,
        metric=gsm8k_metric(),
        train_size=1000,
        dev_size=500,
        test_size=1319,
        bfrs_train_size=100,
        bfrs_val_size=250,
    ),
    "iris": TaskSpec(
        name="iris",
        program_factory=make_iris_program,
        metric=exact_match_metric(),
        train_size=50,
        dev_size=50,
        test_size=50,
        bfrs_train_size=15,
        bfrs_val_size=35,
    ),
}
