"""Manifest records and the CSV manifest format."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

from ..errors import DuplicateSampleId, EmptyManifest, MissingColumn, UnknownCategory
from ..taxonomy import TASK_NAMES, TaskTaxonomy

MANIFEST_COLUMNS = ("sample_id", "image_path") + TASK_NAMES


@dataclass(frozen=True)
class SampleRecord:
    sample_id: str
    image_path: Path
    dynasty: str
    ware: str
    glaze: str
    type: str

    def label(self, task: str) -> str:
        return getattr(self, task)

    def encode(self, taxonomy: TaskTaxonomy) -> tuple[int, ...]:
        return tuple(taxonomy.encode(t, self.label(t)) for t in taxonomy.task_names)


def load_manifest(path: str | Path, taxonomy: TaskTaxonomy) -> list[SampleRecord]:
    """Read and validate a manifest.

    Relative image paths are resolved against the manifest's directory.
    Category names are canonicalised to the taxonomy spelling. Images are
    not opened here.
    """
    path = Path(path)
    root = path.parent
    records: list[SampleRecord] = []
    seen: dict[str, int] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = [h.strip() for h in (reader.fieldnames or [])]
        missing = [c for c in MANIFEST_COLUMNS if c not in header]
        if missing:
            raise MissingColumn(f"{path}: missing column(s) {', '.join(missing)}")
        reader.fieldnames = header
        # row numbers are 1-based file lines; line 1 is the header
        for line_no, row in enumerate(reader, start=2):
            sid = (row["sample_id"] or "").strip()
            if sid in seen:
                raise DuplicateSampleId(sid, line_no)
            seen[sid] = line_no
            labels = {}
            for task in taxonomy.task_names:
                value = row.get(task) or ""
                try:
                    idx = taxonomy.encode(task, value)
                except UnknownCategory as exc:
                    raise UnknownCategory(
                        task, value, exc.valid, row=line_no
                    ) from None
                labels[task] = taxonomy.decode(task, idx)
            image_path = Path(row["image_path"].strip())
            if not image_path.is_absolute():
                image_path = root / image_path
            records.append(SampleRecord(sid, image_path, **labels))
    if not records:
        raise EmptyManifest(f"{path}: no data rows")
    return records


def write_manifest(records, path: str | Path, relative_to: str | Path | None = None) -> Path:
    path = Path(path)
    base = Path(relative_to) if relative_to is not None else path.parent
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MANIFEST_COLUMNS)
        for r in records:
            p = Path(r.image_path)
            try:
                p = p.relative_to(base)
            except ValueError:
                pass
            writer.writerow([r.sample_id, p.as_posix(), r.dynasty, r.ware, r.glaze, r.type])
    return path
