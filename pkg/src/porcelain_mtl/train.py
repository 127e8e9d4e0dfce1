"""Training loop, best-validation checkpointing, curve export and the
pretrained-vs-scratch ablation."""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import logging
import math
import random
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import torch
import torch.nn as nn
from torch.utils.data import DataLoader

from .checkpoint import load_checkpoint, save_checkpoint
from .data.dataset import PorcelainDataset
from .data.split import SplitAssignment
from .data.transforms import AugmentSpec, PreprocessSpec
from .errors import EmptySplit, NonFiniteLoss
from .metrics import ReportRow, evaluate_model, render_tables
from .model import ModelSpec, MultiTaskModel, build_model
from .objective import total_loss

log = logging.getLogger(__name__)

LOSS_KEYS = ("total", "dynasty", "ware", "glaze", "type")


@dataclass(frozen=True)
class TrainConfig:
    spec: ModelSpec
    epochs: int = 50
    batch_size: int = 32
    learning_rate: float = 1e-3
    seed: int = 42
    augmentation: AugmentSpec | None = field(default_factory=AugmentSpec)
    num_workers: int = 0
    deterministic: bool = True
    # batches of un-augmented train data used to re-estimate BN statistics
    # before each validation pass; 0 keeps the running averages from training
    bn_refresh_batches: int = 16

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.bn_refresh_batches < 0:
            raise ValueError(f"bn_refresh_batches must be >= 0, got {self.bn_refresh_batches}")

    def preprocess(self) -> PreprocessSpec:
        return PreprocessSpec(target_side=self.spec.input_side)

    def as_flat(self) -> dict[str, object]:
        """Flat, ordered key/value view used for hashing and config diffs."""
        aug = self.augmentation
        return {
            "arch": self.spec.arch,
            "pretrained": self.spec.pretrained,
            "freeze_backbone": self.spec.freeze_backbone,
            "input_side": self.spec.input_side,
            "taxonomy": self.spec.taxonomy.fingerprint(),
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "learning_rate": repr(float(self.learning_rate)),
            "optimizer": "adam",
            "seed": self.seed,
            "flip_prob": None if aug is None else repr(float(aug.horizontal_flip_prob)),
            "rotation_max": None if aug is None else repr(float(aug.rotation_max_degrees)),
            "bn_refresh_batches": self.bn_refresh_batches,
        }

    def config_hash(self) -> str:
        text = json.dumps(self.as_flat(), sort_keys=True)
        return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def config_diff(a: TrainConfig, b: TrainConfig) -> dict[str, tuple]:
    fa, fb = a.as_flat(), b.as_flat()
    return {k: (fa[k], fb[k]) for k in fa if fa[k] != fb[k]}


def run_id(config: TrainConfig, split_seed: int) -> str:
    payload = json.dumps({"config": config.as_flat(), "split_seed": split_seed}, sort_keys=True)
    digest = hashlib.sha256(payload.encode("utf-8")).hexdigest()[:10]
    mode = "pretrained" if config.spec.pretrained else "scratch"
    return f"{config.spec.arch}-{mode}-{digest}"


@dataclass(frozen=True)
class EpochLog:
    epoch: int
    train: dict[str, float]
    val: dict[str, float]
    val_accuracy: dict[str, float]
    wall_time: float

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "EpochLog":
        return cls(**json.loads(line))


@dataclass
class TrainedArtifact:
    run_dir: Path
    checkpoint: Path
    best_epoch: int
    best_val_loss: float
    logs: list[EpochLog]
    config: TrainConfig

    def load_model(self) -> MultiTaskModel:
        return load_checkpoint(self.run_dir, self.config.spec.taxonomy)


def seed_everything(seed: int, deterministic: bool = True) -> None:
    random.seed(seed)
    np.random.seed(seed % 2**32)
    torch.manual_seed(seed)
    if deterministic:
        torch.use_deterministic_algorithms(True, warn_only=True)


def train_epoch(model: MultiTaskModel, batches: Iterable, optimizer: torch.optim.Optimizer) -> dict[str, float]:
    """One pass over ``batches``; returns the sample-weighted mean losses."""
    model.train()
    sums = dict.fromkeys(LOSS_KEYS, 0.0)
    seen = 0
    for batch_id, (x, y) in enumerate(batches):
        bundle = model(x)
        losses = total_loss(bundle, y)
        if not torch.isfinite(losses.l_total):
            raise NonFiniteLoss(batch_id, float(losses.l_total.detach()))
        optimizer.zero_grad(set_to_none=True)
        losses.l_total.backward()
        optimizer.step()
        n = x.shape[0]
        for k, v in losses.as_floats().items():
            sums[k] += v * n
        seen += n
    return {k: v / seen for k, v in sums.items()}


@torch.no_grad()
def refresh_bn_statistics(model: MultiTaskModel, batches: Iterable, max_batches: int) -> int:
    """Re-estimate running mean/var of every BatchNorm layer that trains.

    With few optimizer steps per epoch the exponential running averages trail
    the weights by a couple of epochs, so eval-mode outputs lag the model that
    was actually learned. This replaces them with a plain average over up to
    ``max_batches`` batches computed with the current weights. Layers held in
    eval mode (a frozen backbone) keep their statistics. Returns the number of
    batches used.
    """
    if max_batches <= 0:
        return 0
    model.train()
    layers = [m for m in model.modules() if isinstance(m, nn.modules.batchnorm._BatchNorm) and m.training]
    if not layers:
        return 0
    momenta = [m.momentum for m in layers]
    for m in layers:
        m.reset_running_stats()
        m.momentum = None  # cumulative average
    used = 0
    try:
        for x, _ in batches:
            if used >= max_batches:
                break
            model(x)
            used += 1
    finally:
        for m, momentum in zip(layers, momenta):
            m.momentum = momentum
    return used


@torch.no_grad()
def evaluate_losses(model: MultiTaskModel, batches: Iterable) -> tuple[dict[str, float], dict[str, float]]:
    """Mean losses and per-task accuracy without gradients, in eval mode."""
    model.eval()
    sums = dict.fromkeys(LOSS_KEYS, 0.0)
    correct: dict[str, int] = {}
    seen = 0
    for x, y in batches:
        bundle = model(x)
        losses = total_loss(bundle, y)
        n = x.shape[0]
        for k, v in losses.as_floats().items():
            sums[k] += v * n
        for j, (task, logits) in enumerate(bundle.items()):
            correct[task] = correct.get(task, 0) + int((logits.argmax(dim=1) == y[:, j]).sum())
        seen += n
    return {k: v / seen for k, v in sums.items()}, {k: v / seen for k, v in correct.items()}


def _loader(ds, config: TrainConfig, shuffle: bool) -> DataLoader:
    gen = torch.Generator().manual_seed(config.seed)
    return DataLoader(ds, batch_size=config.batch_size, shuffle=shuffle, generator=gen,
                      num_workers=0 if config.deterministic else config.num_workers)


def fit(config: TrainConfig, splits: SplitAssignment, data, run_dir: str | Path) -> TrainedArtifact:
    """Train for ``config.epochs`` and keep the lowest-validation-loss weights.

    ``data`` is the full record list; membership comes from ``splits``.
    Writes ``split.txt``, ``epochs.log`` (one JSON line per epoch, flushed as
    it goes), ``best.ckpt`` and ``spec.txt`` into ``run_dir``.
    """
    run_dir = Path(run_dir)
    train_recs = splits.subset(data, "train")
    val_recs = splits.subset(data, "val")
    if not train_recs or not val_recs:
        raise EmptySplit(f"train/val sizes {len(train_recs)}/{len(val_recs)}; both must be nonempty")
    run_dir.mkdir(parents=True, exist_ok=True)
    splits.save(run_dir / "split.txt")

    seed_everything(config.seed, config.deterministic)
    taxonomy = config.spec.taxonomy
    model = build_model(config.spec)
    optimizer = torch.optim.Adam(model.trainable_parameters(), lr=config.learning_rate)

    pre = config.preprocess()
    train_ds = PorcelainDataset(train_recs, taxonomy, pre, config.augmentation, seed=config.seed)
    val_ds = PorcelainDataset(val_recs, taxonomy, pre, None, seed=config.seed)
    train_loader = _loader(train_ds, config, shuffle=True)
    refresh_loader = _loader(train_ds.plain_view(), config, shuffle=False)
    val_loader = _loader(val_ds, config, shuffle=False)

    chash = config.config_hash()
    logs: list[EpochLog] = []
    best_epoch, best_val = 0, math.inf
    ckpt = run_dir / "best.ckpt"
    with open(run_dir / "epochs.log", "w", encoding="utf-8") as journal:
        for epoch in range(1, config.epochs + 1):
            t0 = time.perf_counter()
            train_ds.set_epoch(epoch)
            train_losses = train_epoch(model, train_loader, optimizer)
            refresh_bn_statistics(model, refresh_loader, config.bn_refresh_batches)
            val_losses, val_acc = evaluate_losses(model, val_loader)
            entry = EpochLog(epoch, train_losses, val_losses, val_acc, time.perf_counter() - t0)
            logs.append(entry)
            journal.write(entry.to_json() + "\n")
            journal.flush()
            if val_losses["total"] < best_val:
                best_val, best_epoch = val_losses["total"], epoch
                save_checkpoint(model, run_dir, chash, {"best_epoch": epoch})
            log.info("epoch %d/%d train %.4f val %.4f%s", epoch, config.epochs,
                     train_losses["total"], val_losses["total"], " *" if best_epoch == epoch else "")
    return TrainedArtifact(run_dir, ckpt, best_epoch, best_val, logs, config)


def read_epoch_log(path: str | Path) -> list[EpochLog]:
    with open(path, encoding="utf-8") as fh:
        return [EpochLog.from_json(line) for line in fh if line.strip()]


CURVE_COLUMNS = (
    ("run", "epoch", "train_total", "val_total")
    + tuple(f"train_{t}" for t in LOSS_KEYS[1:])
    + tuple(f"val_{t}" for t in LOSS_KEYS[1:])
)


def export_curves(series: Mapping[str, Sequence[EpochLog]], path: str | Path) -> Path:
    """Write loss curves as CSV, one row per (run label, epoch)."""
    if not series or not any(series.values()):
        raise ValueError("no epoch logs to export")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CURVE_COLUMNS)
        for label, logs in series.items():
            for e in logs:
                w.writerow(
                    [label, e.epoch, repr(e.train["total"]), repr(e.val["total"])]
                    + [repr(e.train[t]) for t in LOSS_KEYS[1:]]
                    + [repr(e.val[t]) for t in LOSS_KEYS[1:]]
                )
    return path


def load_curves(path: str | Path) -> dict[str, list[dict[str, float]]]:
    out: dict[str, list[dict[str, float]]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            label = row.pop("run")
            rec = {k: (int(v) if k == "epoch" else float(v)) for k, v in row.items()}
            out.setdefault(label, []).append(rec)
    return out


def report_rows(artifact: TrainedArtifact, splits: SplitAssignment, data) -> list[ReportRow]:
    """Evaluate the best checkpoint on the test split (and val for accuracy)."""
    model = artifact.load_model()
    pre = artifact.config.preprocess()
    test = evaluate_model(model, splits.subset(data, "test"), pre)
    val = evaluate_model(model, splits.subset(data, "val"), pre)
    spec = artifact.config.spec
    return [
        ReportRow(spec.arch, spec.pretrained, task, rep, val[task].accuracy, artifact.run_dir.name)
        for task, rep in test.items()
    ]


@dataclass
class AblationResult:
    pretrained: TrainedArtifact
    scratch: TrainedArtifact
    rows: list[ReportRow]
    tables: dict[str, str]
    curves: Path | None = None


def ablation_configs(base: TrainConfig) -> tuple[TrainConfig, TrainConfig]:
    pt = dataclasses.replace(base, spec=dataclasses.replace(base.spec, pretrained=True, freeze_backbone=True))
    sc = dataclasses.replace(base, spec=dataclasses.replace(base.spec, pretrained=False, freeze_backbone=False))
    extra = set(config_diff(pt, sc)) - {"pretrained", "freeze_backbone"}
    assert not extra, f"ablation configs differ beyond the transfer flags: {extra}"
    return pt, sc


def run_ablation(base: TrainConfig, splits: SplitAssignment, data, out_dir: str | Path) -> AblationResult:
    """Two fits that differ only in pretrained+frozen vs scratch+trainable.

    Runs land in ``out_dir/runs/<run_id>``; the paired table and the two
    loss-curve series go to ``out_dir/reports``.
    """
    out_dir = Path(out_dir)
    pt_cfg, sc_cfg = ablation_configs(base)
    pt = fit(pt_cfg, splits, data, out_dir / "runs" / run_id(pt_cfg, splits.seed))
    sc = fit(sc_cfg, splits, data, out_dir / "runs" / run_id(sc_cfg, splits.seed))
    rows = report_rows(pt, splits, data) + report_rows(sc, splits, data)
    tables = render_tables(rows)
    reports = out_dir / "reports"
    reports.mkdir(parents=True, exist_ok=True)
    arch = base.spec.arch
    curves = export_curves({"pretrained": pt.logs, "scratch": sc.logs}, reports / f"curves_{arch}_ablation.csv")
    (reports / f"table3_{arch}.md").write_text(tables["table3"], encoding="utf-8")
    return AblationResult(pt, sc, rows, tables, curves)
