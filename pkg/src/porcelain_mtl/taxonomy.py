"""Canonical four-task label space for Song/Yuan porcelain.

Category order follows the reference label distribution and doubles as the
integer encoding used everywhere else in the package.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Mapping

import numpy as np

from .errors import IndexOutOfRange, UnknownCategory, UnknownTask

TASK_NAMES = ("dynasty", "ware", "glaze", "type")

_CANONICAL = (
    ("dynasty", (("Song", 5288), ("Yuan", 705))),
    (
        "ware",
        (
            ("Ding", 2296),
            ("Jizhou", 167),
            ("Ge", 416),
            ("Guan", 1401),
            ("Jun", 263),
            ("Longquan", 385),
            ("Ru", 677),
            ("Xianghu", 76),
            ("Linchuan", 98),
            ("Peng", 214),
        ),
    ),
    (
        "glaze",
        (
            ("White", 2668),
            ("Black", 113),
            ("Celadon", 2379),
            ("Green", 577),
            ("Moonwhite", 54),
            ("Yellowishgreen", 4),
            ("Bluishwhite", 64),
            ("Blue", 134),
        ),
    ),
    (
        "type",
        (
            ("Washer", 747),
            ("Dish", 1610),
            ("Bowl", 2002),
            ("Plate", 127),
            ("Teabowlstand", 64),
            ("Pillow", 112),
            ("Basin", 244),
            ("Vase", 565),
            ("Jar", 74),
            ("Incenseburner", 157),
            ("Vessel", 147),
            ("Cup", 144),
        ),
    ),
)


def _norm(name: str) -> str:
    return name.strip().casefold()


@dataclass(frozen=True)
class TaskSpec:
    name: str
    categories: tuple[str, ...]
    reference_counts: tuple[int, ...]

    def __post_init__(self):
        if len(self.categories) != len(self.reference_counts):
            raise ValueError(f"{self.name}: categories and reference_counts differ in length")
        if any(c < 0 for c in self.reference_counts):
            raise ValueError(f"{self.name}: negative reference count")
        if any(not c.strip() for c in self.categories):
            raise ValueError(f"{self.name}: empty category name")
        if len({_norm(c) for c in self.categories}) != len(self.categories):
            raise ValueError(f"{self.name}: duplicate category names")

    @property
    def num_categories(self) -> int:
        return len(self.categories)

    def index(self, category: str) -> int:
        key = _norm(category)
        for i, name in enumerate(self.categories):
            if _norm(name) == key:
                return i
        raise UnknownCategory(self.name, category, self.categories)


@dataclass(frozen=True)
class TaskTaxonomy:
    tasks: tuple[TaskSpec, ...]

    @property
    def task_names(self) -> tuple[str, ...]:
        return tuple(t.name for t in self.tasks)

    @property
    def cardinalities(self) -> tuple[int, ...]:
        return tuple(t.num_categories for t in self.tasks)

    def task(self, name: str) -> TaskSpec:
        for t in self.tasks:
            if t.name == name:
                return t
        raise UnknownTask(name, self.task_names)

    def encode(self, task: str, category: str) -> int:
        return self.task(task).index(category)

    def decode(self, task: str, index: int) -> str:
        spec = self.task(task)
        if not 0 <= index < spec.num_categories:
            raise IndexOutOfRange(
                f"{task} index {index} outside [0, {spec.num_categories})"
            )
        return spec.categories[index]

    def to_text(self) -> str:
        """Render as blocks of ``index<TAB>name`` lines, one block per task."""
        blocks = []
        for t in self.tasks:
            lines = [f"[{t.name}]"]
            lines += [f"{i}\t{name}" for i, name in enumerate(t.categories)]
            blocks.append("\n".join(lines))
        return "\n\n".join(blocks) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "TaskTaxonomy":
        tasks = []
        name, cats = None, []
        for raw in text.splitlines() + [""]:
            line = raw.strip()
            if line.startswith("[") and line.endswith("]"):
                name, cats = line[1:-1], []
            elif line:
                idx, cat = line.split("\t", 1)
                if int(idx) != len(cats):
                    raise ValueError(f"non-contiguous index {idx} in task {name}")
                cats.append(cat)
            elif name is not None:
                tasks.append(TaskSpec(name, tuple(cats), (0,) * len(cats)))
                name = None
        return cls(tuple(tasks))

    def fingerprint(self) -> str:
        """Hash of task names and category order; counts are ignored."""
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()[:16]


@lru_cache(maxsize=None)
def build_taxonomy() -> TaskTaxonomy:
    tasks = tuple(
        TaskSpec(
            name,
            tuple(c for c, _ in rows),
            tuple(n for _, n in rows),
        )
        for name, rows in _CANONICAL
    )
    return TaskTaxonomy(tasks)


def encode_label(taxonomy: TaskTaxonomy, task: str, category: str) -> int:
    return taxonomy.encode(task, category)


def decode_label(taxonomy: TaskTaxonomy, task: str, index: int) -> str:
    return taxonomy.decode(task, index)


def label_histogram(
    taxonomy: TaskTaxonomy, records: Iterable[Mapping[str, str] | object]
) -> dict[str, np.ndarray]:
    """Count records per category for every task.

    ``records`` may be sample records (attribute access) or plain mappings
    keyed by task name.
    """
    hist = {t.name: np.zeros(t.num_categories, dtype=np.int64) for t in taxonomy.tasks}
    for n, rec in enumerate(records):
        for t in taxonomy.tasks:
            value = rec[t.name] if isinstance(rec, Mapping) else getattr(rec, t.name)
            try:
                hist[t.name][t.index(value)] += 1
            except UnknownCategory as exc:
                ident = getattr(rec, "sample_id", None) or n
                raise UnknownCategory(t.name, value, t.categories, row=ident) from exc
    return hist

