"""Confusion matrices, per-task metrics and Markdown report tables.

All ratios are computed in exact rational arithmetic from integer counts and
rounded to float once, so identities such as weighted recall == accuracy hold
bit-for-bit.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import torch
from torch.utils.data import DataLoader

from .data.dataset import PorcelainDataset
from .data.transforms import PreprocessSpec
from .errors import EmptyMatrix, EmptyReportSet, IndexOutOfRange, ShapeMismatch
from .model import DISPLAY_NAMES
from .taxonomy import TaskTaxonomy, build_taxonomy


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """Rows are true categories, columns predicted categories."""

    counts: np.ndarray
    categories: tuple[str, ...] | None = None

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ShapeMismatch(f"confusion matrix must be square, got {c.shape}")
        if (c < 0).any():
            raise ValueError("confusion matrix entries must be >= 0")
        object.__setattr__(self, "counts", c)
        if self.categories is not None and len(self.categories) != c.shape[0]:
            raise ShapeMismatch("category names do not match matrix size")

    def __eq__(self, other):
        if not isinstance(other, ConfusionMatrix):
            return NotImplemented
        return self.names() == other.names() and np.array_equal(self.counts, other.counts)

    __hash__ = None

    @property
    def K(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def support(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.counts + other.counts, self.categories or other.categories)

    def names(self) -> tuple[str, ...]:
        return self.categories or tuple(str(i) for i in range(self.K))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["true\\pred", *self.names()])
        for name, row in zip(self.names(), self.counts):
            w.writerow([name, *(int(v) for v in row)])
        return buf.getvalue()

    def save(self, path: str | Path) -> Path:
        Path(path).write_text(self.to_csv(), encoding="utf-8")
        return Path(path)

    @classmethod
    def from_csv(cls, text: str) -> "ConfusionMatrix":
        rows = list(csv.reader(io.StringIO(text)))
        header, body = rows[0], rows[1:]
        names = tuple(header[1:])
        counts = np.array([[int(v) for v in r[1:]] for r in body], dtype=np.int64)
        return cls(counts, names)

    @classmethod
    def load(cls, path: str | Path) -> "ConfusionMatrix":
        return cls.from_csv(Path(path).read_text(encoding="utf-8"))


def confusion_matrix(predictions, targets, K: int, categories: Sequence[str] | None = None) -> ConfusionMatrix:
    p = np.asarray(predictions, dtype=np.int64).reshape(-1)
    t = np.asarray(targets, dtype=np.int64).reshape(-1)
    if p.shape != t.shape:
        raise ShapeMismatch(f"{p.size} predictions vs {t.size} targets")
    if p.size == 0:
        raise ShapeMismatch("no samples to tabulate")
    if (p < 0).any() or (p >= K).any() or (t < 0).any() or (t >= K).any():
        raise IndexOutOfRange(f"category indices must lie in [0, {K})")
    counts = np.zeros((K, K), dtype=np.int64)
    np.add.at(counts, (t, p), 1)
    return ConfusionMatrix(counts, tuple(categories) if categories is not None else None)


@dataclass(frozen=True)
class CategoryMetrics:
    name: str
    support: int
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class MetricsReport:
    task: str
    accuracy: float
    balanced_accuracy: float
    precision: float
    recall: float
    f1: float
    per_category: tuple[CategoryMetrics, ...]
    matrix: ConfusionMatrix

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "accuracy": self.accuracy,
            "balanced_accuracy": self.balanced_accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "per_category": [vars(c) for c in self.per_category],
            "categories": list(self.matrix.names()),
            "matrix": self.matrix.counts.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        return cls(
            task=d["task"],
            accuracy=d["accuracy"],
            balanced_accuracy=d["balanced_accuracy"],
            precision=d["precision"],
            recall=d["recall"],
            f1=d["f1"],
            per_category=tuple(CategoryMetrics(**c) for c in d["per_category"]),
            matrix=ConfusionMatrix(np.array(d["matrix"], dtype=np.int64), tuple(d["categories"])),
        )


def _ratio(num: int, den: int) -> Fraction:
    return Fraction(num, den) if den else Fraction(0)


def metrics_from_matrix(matrix: ConfusionMatrix, task: str = "") -> MetricsReport:
    """Accuracy, balanced accuracy and support-weighted precision/recall/F1.

    Categories absent from the evaluated samples (zero support) are left out
    of balanced accuracy and of the weighted averages. A zero denominator
    gives 0 for that category's precision or recall.
    """
    c = matrix.counts
    total = int(c.sum())
    if total == 0:
        raise EmptyMatrix("confusion matrix has no samples")
    tp = np.diag(c)
    pred_count = c.sum(axis=0)
    support = c.sum(axis=1)

    per_cat, recalls = [], []
    w_p = w_r = w_f = Fraction(0)
    for i, name in enumerate(matrix.names()):
        p = _ratio(int(tp[i]), int(pred_count[i]))
        r = _ratio(int(tp[i]), int(support[i]))
        f = 2 * p * r / (p + r) if p + r else Fraction(0)
        per_cat.append(CategoryMetrics(name, int(support[i]), float(p), float(r), float(f)))
        if support[i] > 0:
            recalls.append(r)
            w = Fraction(int(support[i]), total)
            w_p += w * p
            w_r += w * r
            w_f += w * f
    return MetricsReport(
        task=task,
        accuracy=float(Fraction(int(tp.sum()), total)),
        balanced_accuracy=float(sum(recalls, Fraction(0)) / len(recalls)),
        precision=float(w_p),
        recall=float(w_r),
        f1=float(w_f),
        per_category=tuple(per_cat),
        matrix=matrix,
    )


@torch.no_grad()
def predict(model, loader: Iterable) -> tuple[dict[str, np.ndarray], np.ndarray]:
    """Argmax predictions per task plus the stacked targets.

    Ties go to the lowest category index.
    """
    model.eval()
    preds: dict[str, list[np.ndarray]] = {}
    targets = []
    for x, y in loader:
        bundle = model(x)
        for task, logits in bundle.items():
            # numpy argmax returns the first maximal index
            preds.setdefault(task, []).append(np.argmax(logits.cpu().numpy(), axis=1))
        targets.append(np.asarray(y))
    return {k: np.concatenate(v) for k, v in preds.items()}, np.concatenate(targets)


def evaluate_model(model, records, pipeline: PreprocessSpec, taxonomy: TaskTaxonomy | None = None,
                   batch_size: int = 32) -> dict[str, MetricsReport]:
    """One MetricsReport per task over ``records``. No augmentation is applied."""
    taxonomy = taxonomy or model.spec.taxonomy
    ds = PorcelainDataset(records, taxonomy, pipeline, augment=None, cache=False)
    loader = DataLoader(ds, batch_size=batch_size, shuffle=False)
    preds, targets = predict(model, loader)
    reports = {}
    for j, spec in enumerate(taxonomy.tasks):
        cm = confusion_matrix(preds[spec.name], targets[:, j], spec.num_categories, spec.categories)
        reports[spec.name] = metrics_from_matrix(cm, spec.name)
    return reports


@dataclass(frozen=True)
class ReportRow:
    """One model x task x transfer-flag entry of the result tables."""

    model: str
    transfer: bool
    task: str
    report: MetricsReport
    val_accuracy: float | None = None
    run_id: str = ""

    @property
    def key(self) -> tuple[str, bool, str]:
        return (self.model, self.transfer, self.task)

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "transfer": self.transfer,
            "task": self.task,
            "val_accuracy": self.val_accuracy,
            "run_id": self.run_id,
            "metrics": self.report.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ReportRow":
        return cls(d["model"], bool(d["transfer"]), d["task"], MetricsReport.from_dict(d["metrics"]),
                   d.get("val_accuracy"), d.get("run_id", ""))


def save_reports(rows: Iterable[ReportRow], path: str | Path) -> Path:
    """Write rows as JSON lines, one record per model x task x transfer flag."""
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row.to_dict(), sort_keys=True) + "\n")
    return path


def load_reports(path: str | Path) -> list[ReportRow]:
    with open(path, encoding="utf-8") as fh:
        return [ReportRow.from_dict(json.loads(line)) for line in fh if line.strip()]


def merge_reports(existing: Sequence[ReportRow], new: Sequence[ReportRow]) -> list[ReportRow]:
    """Replace rows sharing a key, keep the rest, return in canonical order."""
    merged = {r.key: r for r in existing}
    merged.update({r.key: r for r in new})
    return sort_rows(merged.values())


_TASK_ORDER = {name: i for i, name in enumerate(build_taxonomy().task_names)}


def sort_rows(rows: Iterable[ReportRow]) -> list[ReportRow]:
    return sorted(rows, key=lambda r: (_display(r.model), _TASK_ORDER.get(r.task, 99), r.task, not r.transfer))


def _display(model: str) -> str:
    return DISPLAY_NAMES.get(model, model)


def _pct(x: float | None) -> str:
    return "-" if x is None else f"{100 * x:.1f}"


def _ratio3(x: float) -> str:
    return f"{x:.3f}"


def _markdown(header: Sequence[str], body: Sequence[Sequence[str]]) -> str:
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
    lines += ["| " + " | ".join(row) + " |" for row in body]
    return "\n".join(lines) + "\n"


def render_tables(rows: Sequence[ReportRow]) -> dict[str, str]:
    """Render the per-model comparison table and the transfer-learning table.

    Both are Markdown. Percentages carry one decimal and ratios three. The
    comparison table shows one row per model x task, taking the pretrained
    run where both exist.
    """
    if not rows:
        raise EmptyReportSet("no reports to render")
    ordered = sort_rows(rows)

    chosen: dict[tuple[str, str], ReportRow] = {}
    for r in ordered:
        prev = chosen.get((r.model, r.task))
        if prev is None or (r.transfer and not prev.transfer):
            chosen[(r.model, r.task)] = r
    t2_rows = [
        [_display(r.model), r.task.capitalize(), _pct(r.val_accuracy), _pct(r.report.accuracy),
         _pct(r.report.balanced_accuracy), _ratio3(r.report.precision), _ratio3(r.report.recall),
         _ratio3(r.report.f1)]
        for r in sort_rows(chosen.values())
    ]
    table2 = _markdown(
        ["Model", "Task", "Validation set accuracy(%)", "Test set accuracy(%)",
         "Test set balanced accuracy(%)", "Precision", "Recall", "F1 Score"],
        t2_rows,
    )
    t3_rows = [
        [_display(r.model), r.task.capitalize(), "Yes" if r.transfer else "No",
         _pct(r.report.accuracy), _pct(r.report.balanced_accuracy), _ratio3(r.report.precision),
         _ratio3(r.report.recall), _ratio3(r.report.f1)]
        for r in ordered
    ]
    table3 = _markdown(
        ["Model", "Task", "Transfer Learning", "Test Accuracy (%)", "Balanced Test Accuracy (%)",
         "Precision", "Recall", "F1 Score"],
        t3_rows,
    )
    return {"table2": table2, "table3": table3}


def parse_markdown_table(text: str) -> list[dict[str, str]]:
    lines = [ln for ln in text.strip().splitlines() if ln.startswith("|")]
    header = [c.strip() for c in lines[0].strip("|").split("|")]
    return [dict(zip(header, (c.strip() for c in ln.strip("|").split("|")))) for ln in lines[2:]]
