"""Deterministic benchmark-shaped data and mock scripts for desk-scale runs.

Real HotPotQA/GSM8K corpora are not fetched here; these generators produce
datasets with the same shape and canonical split sizes so the whole pipeline
can run against the scripted mock backend. The iris task uses the real
150-row measurement table.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Sequence

from ..backends import MockScript
from ..core import Example
from ..seeding import derived_rng
from ._iris_table import IRIS_ROWS
from .data import write_examples
from .programs import TASK_SPECS

_FIRST_NAMES = (
    "Ava", "Boris", "Carla", "Deniz", "Ezra", "Farah", "Gustav", "Hana",
    "Ivor", "Jun", "Kiara", "Lev", "Mina", "Noor", "Otto", "Priya",
    "Quinn", "Rosa", "Sven", "Tara", "Umar", "Vera", "Wen", "Yara", "Zane",
)
_LAST_NAMES = (
    "Adler", "Brandt", "Calder", "Dorsey", "Eng", "Farkas", "Grieg",
    "Holt", "Ibarra", "Joshi", "Krug", "Lindqvist", "Moreau", "Nkemelu",
    "Okafor", "Petrov", "Quist", "Rahimi", "Sato", "Tanaka", "Ueda",
    "Vance", "Wolde", "Xia", "Yilmaz", "Zhou",
)
_COMPANY_WORDS = (
    "Veridian", "Northwind", "Bluepine", "Solstice", "Ironleaf", "Cobalt",
    "Lumen", "Argent", "Topaz", "Harbor", "Latitude", "Meridian",
    "Quarry", "Saffron", "Tundra", "Vortex", "Willow", "Zephyr",
)
_COMPANY_SUFFIXES = ("Labs", "Systems", "Analytics", "Dynamics", "Works", "Logistics")
_CITIES = (
    "Aarhus", "Bologna", "Cusco", "Dakar", "Esbjerg", "Fukuoka", "Ghent",
    "Hobart", "Izmir", "Jaipur", "Kigali", "Lublin", "Mendoza", "Nagoya",
    "Oulu", "Porto", "Quito", "Riga", "Sapporo", "Tartu", "Utrecht",
    "Valencia", "Windhoek", "Xalapa", "Yerevan", "Zagreb",
)
_ITEMS = ("apples", "marbles", "stickers", "pencils", "coins", "books", "shells", "cards")


def _gsm8k_example(task_id: str, rng) -> Example:
    kind = rng.randrange(4)
    name = rng.choice(_FIRST_NAMES)
    if kind == 0:
        a, b = rng.randint(3, 60), rng.randint(2, 40)
        item = rng.choice(_ITEMS)
        question = f"{name} has {a} {item} and buys {b} more. How many {item} does {name} have now?"
        answer = a + b
    elif kind == 1:
        a, b = rng.randint(4, 30), rng.randint(2, 12)
        question = f"{name} can read {a} pages per hour. How many pages can {name} read in {b} hours?"
        answer = a * b
    elif kind == 2:
        a = rng.randint(20, 90)
        b = rng.randint(2, a - 1)
        item = rng.choice(_ITEMS)
        question = f"{name} had {a} {item} and gave away {b}. How many {item} are left?"
        answer = a - b
    else:
        a, b = rng.randint(5, 35), rng.randint(2, 50)
        slower, faster = sorted((a, a + b))
        other = rng.choice([n for n in _FIRST_NAMES if n != name])
        question = (
            f"{name} can type {slower} words per minute and {other} can type {faster} words "
            f"per minute. How many more words can {other} type than {name} in an hour?"
        )
        answer = (faster - slower) * 60
    return Example(id=task_id, inputs={"question": question}, metadata={"answer": str(answer)})


def generate_gsm8k(sizes: dict[str, int], seed: int = 0) -> dict[str, list[Example]]:
    rng = derived_rng("synthetic-gsm8k", seed)
    return {
        split: [_gsm8k_example(f"gsm8k-{split}-{i:04d}", rng) for i in range(n)]
        for split, n in sizes.items()
    }


def generate_hotpotqa(
    sizes: dict[str, int], seed: int = 0
) -> tuple[dict[str, list[Example]], list[str]]:
    """Two-hop questions over a generated corpus of founder/company passages."""
    rng = derived_rng("synthetic-hotpotqa", seed)
    corpus: list[str] = []
    splits: dict[str, list[Example]] = {}
    for split, n in sizes.items():
        examples = []
        for i in range(n):
            person = f"{rng.choice(_FIRST_NAMES)} {rng.choice(_LAST_NAMES)}"
            company = f"{rng.choice(_COMPANY_WORDS)} {rng.choice(_COMPANY_SUFFIXES)} {i}"
            city = rng.choice(_CITIES)
            year = rng.randint(1970, 2020)
            corpus.append(f"{person} | {person} is an entrepreneur who founded {company} in {year}.")
            corpus.append(f"{company} | {company} is a company headquartered in {city}.")
            question = f"In which city is the company founded by {person} headquartered?"
            examples.append(
                Example(
                    id=f"hotpotqa-{split}-{i:04d}",
                    inputs={"question": question},
                    metadata={"answer": city, "founder": person, "company": company},
                )
            )
        splits[split] = examples
    return splits, corpus


def iris_splits() -> dict[str, list[Example]]:
    """The real iris table split into three equal, stratified, fixed parts."""
    splits: dict[str, list[Example]] = {"train": [], "dev": [], "test": []}
    order = ("train", "dev", "test")
    for i, (sl, sw, pl, pw, species) in enumerate(IRIS_ROWS):
        ex = Example(
            id=f"iris-{i:03d}",
            inputs={
                "petal_length": pl,
                "petal_width": pw,
                "sepal_length": sl,
                "sepal_width": sw,
            },
            metadata={"answer": species},
        )
        splits[order[i % 3]].append(ex)
    return splits


def write_task_data(task: str, data_root: Path | str, seed: int = 0) -> Path:
    """Materialize train/dev/test JSONL files (plus corpus.json for hotpotqa)."""
    spec = TASK_SPECS[task]
    sizes = {"train": spec.train_size, "dev": spec.dev_size, "test": spec.test_size}
    root = Path(data_root) / task
    if task == "gsm8k":
        splits = generate_gsm8k(sizes, seed)
    elif task == "hotpotqa":
        splits, corpus = generate_hotpotqa(sizes, seed)
        root.mkdir(parents=True, exist_ok=True)
        (root / "corpus.json").write_text(
            json.dumps({"passages": corpus}, indent=2, ensure_ascii=False) + "\n",
            encoding="utf-8",
        )
    elif task == "iris":
        splits = iris_splits()
    else:
        raise ValueError(f"unknown task {task!r}")
    for split, examples in splits.items():
        write_examples(root / f"{split}.jsonl", examples)
    return root


def correct_completion(task: str, module_label: str, example: Example) -> str:
    """The completion a perfectly behaved model would emit for this module."""
    answer = str(example.metadata["answer"])
    if task == "gsm8k":
        return (
            "work through the arithmetic. We compute each quantity in turn and "
            f"combine them.\n\nAnswer: The result is {answer}."
        )
    if task == "iris":
        return (
            "compare the measurements against the typical ranges of each species. "
            f"We find the closest match.\n\nAnswer: {answer}"
        )
    if task == "hotpotqa":
        founder = example.metadata.get("founder", "")
        company = example.metadata.get("company", "")
        if module_label == "generate_query[0]":
            return (
                f"find the company founded by {founder}. We search for the founder by "
                f"name.\n\nSearch Query: {founder}"
            )
        if module_label == "generate_query[1]":
            return (
                f"find where {company} is headquartered. We search for the company by "
                f"name.\n\nSearch Query: {company}"
            )
        return (
            "read the company passage. We take the headquarters city it names."
            f"\n\nAnswer: {answer}"
        )
    raise ValueError(f"unknown task {task!r}")


def wrong_completion(task: str, module_label: str, example: Example) -> str:
    if task == "gsm8k":
        wrong = int(example.metadata["answer"]) + 7
        return f"estimate the result. We guess from the numbers given.\n\nAnswer: The result is {wrong}."
    if module_label.startswith("generate_query"):
        return correct_completion(task, module_label, example)
    return "take a guess. We pick an unrelated value.\n\nAnswer: nowhere in particular"


def module_labels(task: str) -> list[str]:
    if task == "hotpotqa":
        return ["generate_query[0]", "generate_query[1]", "generate_answer"]
    return ["generate_answer"]


def build_mock_script(
    task: str,
    examples: Sequence[Example],
    *,
    accuracy: float,
    seed: int = 0,
) -> MockScript:
    """Keyed completions for every example; a seeded fraction answer correctly."""
    rng = derived_rng("mock-script", task, seed)
    ids = [ex.id for ex in examples]
    n_correct = round(accuracy * len(ids))
    correct_ids = set(rng.sample(ids, n_correct))
    by_key: dict[str, str] = {}
    for ex in examples:
        correct = ex.id in correct_ids
        for label in module_labels(task):
            completion = (
                correct_completion(task, label, ex)
                if correct
                else wrong_completion(task, label, ex)
            )
            by_key[MockScript.key(label, ex.id)] = completion
    return MockScript(by_key=by_key)


def write_mock_script(
    task: str,
    examples: Sequence[Example],
    path: Path | str,
    *,
    accuracy: float,
    seed: int = 0,
) -> Path:
    script = build_mock_script(task, examples, accuracy=accuracy, seed=seed)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    script.to_file(path)
    return path
