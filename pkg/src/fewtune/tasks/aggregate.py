"""Per-seed run results, CSV persistence, and grouped aggregation."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Iterable, Sequence

from ..strategy import STRATEGY_MENU

ABORTED = "--"
_STRATEGY_ORDER = {name: i for i, name in enumerate(STRATEGY_MENU)}


@dataclass(frozen=True)
class RunResult:
    """One (strategy, model, task, seed) run's held-out test accuracy in percent."""

    strategy: str
    model: str
    task: str
    seed: int
    accuracy: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.accuracy <= 100.0:
            raise ValueError(f"accuracy {self.accuracy} outside [0, 100]")


@dataclass(frozen=True)
class AggregateRow:
    strategy: str
    model: str
    task: str
    runs: int
    mean_text: str  # one decimal, half away from zero

    @property
    def mean(self) -> float:
        return float(self.mean_text)


def _mean_one_decimal(values: Sequence[float]) -> str:
    total = sum(Decimal(str(v)) for v in values)
    mean = total / Decimal(len(values))
    return str(mean.quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


def aggregate_runs(results: Iterable[RunResult]) -> list[AggregateRow]:
    """Arithmetic mean per (strategy, model, task), to one decimal."""
    groups: dict[tuple[str, str, str], list[float]] = {}
    for result in results:
        key = (result.strategy, result.model, result.task)
        groups.setdefault(key, []).append(result.accuracy)
    rows = [
        AggregateRow(
            strategy=strategy,
            model=model,
            task=task,
            runs=len(values),
            mean_text=_mean_one_decimal(values),
        )
        for (strategy, model, task), values in groups.items()
    ]
    rows.sort(key=lambda r: (r.task, r.model, _STRATEGY_ORDER.get(r.strategy, 99), r.strategy))
    return rows


RESULTS_FIELDS = ("strategy", "model", "task", "seed", "accuracy")


def append_result(
    path: Path | str,
    *,
    strategy: str,
    model: str,
    task: str,
    seed: int,
    accuracy: float | None,
) -> None:
    """Append one row; an aborted (insufficient-data) run records ``--``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    new_file = not path.exists()
    with path.open("a", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if new_file:
            writer.writerow(RESULTS_FIELDS)
        cell = ABORTED if accuracy is None else f"{accuracy:.4f}".rstrip("0").rstrip(".")
        writer.writerow([strategy, model, task, seed, cell])


def read_results(path: Path | str) -> tuple[list[RunResult], list[dict]]:
    """Load results.csv, separating completed runs from aborted ``--`` rows."""
    completed: list[RunResult] = []
    aborted: list[dict] = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            if row["accuracy"].strip() == ABORTED:
                aborted.append(dict(row))
            else:
                completed.append(
                    RunResult(
                        strategy=row["strategy"],
                        model=row["model"],
                        task=row["task"],
                        seed=int(row["seed"]),
                        accuracy=float(row["accuracy"]),
                    )
                )
    return completed, aborted
