"""Built-in benchmark tasks, metrics, datasets, and results aggregation."""

from .aggregate import AggregateRow, RunResult, aggregate_runs, append_result, read_results
from .data import LoadedTask, build_task, read_examples, write_examples
from .metrics import exact_match, exact_match_metric, gsm8k_metric, gsm8k_score, normalize_answer
from .programs import (
    TASK_SPECS,
    TaskSpec,
    make_gsm8k_program,
    make_hotpotqa_program,
    make_iris_program,
)
from .retrieval import HttpRetriever, MockRetriever, Retriever, dedup_context
from .synthetic import build_mock_script, write_mock_script, write_task_data

__all__ = [
    "AggregateRow",
    "RunResult",
    "aggregate_runs",
    "append_result",
    "read_results",
    "LoadedTask",
    "build_task",
    "read_examples",
    "write_examples",
    "exact_match",
    "exact_match_metric",
    "gsm8k_metric",
    "gsm8k_score",
    "normalize_answer",
    "TASK_SPECS",
    "TaskSpec",
    "make_gsm8k_program",
    "make_hotpotqa_program",
    "make_iris_program",
    "HttpRetriever",
    "MockRetriever",
    "Retriever",
    "dedup_context",
    "build_mock_script",
    "write_mock_script",
    "write_task_data",
]
