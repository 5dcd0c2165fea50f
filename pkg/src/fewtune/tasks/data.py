"""JSON-lines dataset IO and task loading with canonical split sizes."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from ..core import Example
from ..errors import DataError
from ..seeding import derived_rng
from .programs import TASK_SPECS, TaskSpec

SPLITS = ("train", "dev", "test")


def write_examples(path: Path | str, examples: Sequence[Example]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(
                json.dumps(
                    {"id": ex.id, "inputs": dict(ex.inputs), "metadata": dict(ex.metadata)},
                    ensure_ascii=False,
                )
                + "\n"
            )


def read_examples(path: Path | str) -> list[Example]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"dataset file not found: {path}")
    examples = []
    for line_no, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
            examples.append(
                Example(id=str(doc["id"]), inputs=doc["inputs"], metadata=doc.get("metadata", {}))
            )
        except (KeyError, ValueError) as err:
            raise DataError(f"{path}:{line_no}: malformed example: {err}") from err
    return examples


@dataclass
class LoadedTask:
    """A task spec plus its loaded splits; the train pool is seed-shuffled."""

    spec: TaskSpec
    train: list[Example]
    dev: list[Example]
    test: list[Example]
    seed: int

    @property
    def name(self) -> str:
        return self.spec.name


def build_task(name: str, seed: int, data_root: Path | str) -> LoadedTask:
    """Load a built-in task, checking each split has its canonical size.

    The train pool is reshuffled per seed; dev and test sets keep file order
    so they are seed-invariant.
    """
    try:
        spec = TASK_SPECS[name]
    except KeyError:
        raise DataError(f"unknown task {name!r}; choose from {sorted(TASK_SPECS)}") from None
    root = Path(data_root) / name
    splits = {}
    expected = {"train": spec.train_size, "dev": spec.dev_size, "test": spec.test_size}
    for split in SPLITS:
        examples = read_examples(root / f"{split}.jsonl")
        if len(examples) != expected[split]:
            raise DataError(
                f"{name} {split} split has {len(examples)} examples, expected {expected[split]}"
            )
        splits[split] = examples
    ids = [ex.id for split in SPLITS for ex in splits[split]]
    if len(set(ids)) != len(ids):
        raise DataError(f"{name}: splits share example ids")
    train = list(splits["train"])
    derived_rng("train-pool", name, seed).shuffle(train)
    return LoadedTask(spec=spec, train=train, dev=splits["dev"], test=splits["test"], seed=seed)
