"""Flat key=value experiment configuration with command-line overrides."""

from __future__ import annotations

import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Mapping

from .data.split import DEFAULT_RATIOS
from .data.transforms import AugmentSpec
from .errors import InvalidModelSpec, InvalidValue, ParseError, UnknownArch, UnknownKey
from .model import ARCHITECTURES, ModelSpec
from .train import TrainConfig


@dataclass(frozen=True)
class ExperimentConfig:
    manifest: Path | None = None
    output_dir: Path | None = None
    run_dir: Path | None = None
    arch: tuple[str, ...] = ARCHITECTURES
    epochs: int = 50
    batch_size: int = 32
    learning_rate: float = 0.001
    seed: int = 42
    split_seed: int = 42
    split_ratios: tuple[float, float, float] = DEFAULT_RATIOS
    pretrained: bool = True
    freeze_backbone: bool = True
    input_side: int = 224
    flip_prob: float = 0.5
    rotation_max: float = 15.0
    ablation: bool = False
    deterministic: bool = True
    parallel: bool = False
    num_workers: int = 0
    bn_refresh_batches: int = 16
    n_samples: int = 240
    synth_seed: int = 7
    synth_side: int = 224

    def model_spec(self, arch: str, **changes) -> ModelSpec:
        kw = dict(arch=arch, pretrained=self.pretrained, freeze_backbone=self.freeze_backbone,
                  input_side=self.input_side)
        kw.update(changes)
        return ModelSpec(**kw)

    def train_config(self, arch: str, **spec_changes) -> TrainConfig:
        return TrainConfig(
            spec=self.model_spec(arch, **spec_changes),
            epochs=self.epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            seed=self.seed,
            augmentation=AugmentSpec(self.flip_prob, self.rotation_max),
            num_workers=self.num_workers,
            deterministic=self.deterministic,
            bn_refresh_batches=self.bn_refresh_batches,
        )

    @property
    def synth_dir(self) -> Path:
        return self.output_dir / "synthetic"

    @property
    def runs_dir(self) -> Path:
        return self.output_dir / "runs"

    @property
    def reports_dir(self) -> Path:
        return self.output_dir / "reports"


KEYS = tuple(f.name for f in fields(ExperimentConfig))
_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _coerce(key: str, raw) -> object:
    if not isinstance(raw, str):
        return raw
    value = raw.strip()
    try:
        if key in ("manifest", "output_dir", "run_dir"):
            return Path(value) if value else None
        if key == "arch":
            archs = tuple(a.strip().lower() for a in value.split(",") if a.strip())
            return archs
        if key == "split_ratios":
            return tuple(float(v) for v in value.split(","))
        if key in ("learning_rate", "flip_prob", "rotation_max"):
            return float(value)
        if key in ("pretrained", "freeze_backbone", "ablation", "deterministic", "parallel"):
            low = value.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError("expected a boolean")
        return int(value)
    except ValueError as exc:
        raise InvalidValue(key, raw, str(exc)) from None


def parse_file(path: str | Path) -> dict[str, str]:
    """Read ``key = value`` lines; ``#`` starts a comment."""
    values: dict[str, str] = {}
    for n, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ParseError(n, raw)
        key = key.strip()
        if key not in KEYS:
            raise UnknownKey(key)
        values[key] = value.strip()
    return values


def _validate(cfg: ExperimentConfig) -> None:
    if not cfg.arch:
        raise InvalidValue("arch", "", "architecture list is empty")
    for a in cfg.arch:
        if a not in ARCHITECTURES:
            raise InvalidValue("arch", a, f"expected one of {', '.join(ARCHITECTURES)}")
    if cfg.epochs < 1:
        raise InvalidValue("epochs", cfg.epochs, "must be >= 1")
    if cfg.batch_size < 1:
        raise InvalidValue("batch_size", cfg.batch_size, "must be >= 1")
    if not cfg.learning_rate > 0:
        raise InvalidValue("learning_rate", cfg.learning_rate, "must be > 0")
    if len(cfg.split_ratios) != 3 or abs(sum(cfg.split_ratios) - 1.0) > 1e-9 or min(cfg.split_ratios) < 0:
        raise InvalidValue("split_ratios", cfg.split_ratios, "need three nonnegative ratios summing to 1")
    if cfg.freeze_backbone and not cfg.pretrained:
        raise InvalidValue("freeze_backbone", True, "freezing requires pretrained=true")
    if cfg.bn_refresh_batches < 0:
        raise InvalidValue("bn_refresh_batches", cfg.bn_refresh_batches, "must be >= 0")
    if not 0 <= cfg.flip_prob <= 1:
        raise InvalidValue("flip_prob", cfg.flip_prob, "must lie in [0, 1]")
    if cfg.rotation_max < 0:
        raise InvalidValue("rotation_max", cfg.rotation_max, "must be >= 0")
    if cfg.input_side < 64:
        raise InvalidValue("input_side", cfg.input_side, "must be >= 64")
    for a in cfg.arch:
        try:
            cfg.model_spec(a, pretrained=False, freeze_backbone=False)
        except (InvalidModelSpec, UnknownArch) as exc:
            raise InvalidValue("input_side", cfg.input_side, str(exc)) from None
    if cfg.output_dir is not None:
        try:
            cfg.output_dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise InvalidValue("output_dir", str(cfg.output_dir), str(exc)) from None
        if not os.access(cfg.output_dir, os.W_OK):
            raise InvalidValue("output_dir", str(cfg.output_dir), "not writable")


def parse_config(path: str | Path | None = None, overrides: Mapping[str, object] | None = None) -> ExperimentConfig:
    """Defaults, then file values, then ``overrides`` (``None`` entries ignored)."""
    raw: dict[str, object] = {}
    if path is not None:
        raw.update(parse_file(path))
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in KEYS:
            raise UnknownKey(key)
        raw[key] = value
    cfg = ExperimentConfig(**{k: _coerce(k, v) for k, v in raw.items()})
    _validate(cfg)
    return cfg
