"""Weight archive plus ``spec.txt`` sidecar for trained runs."""

from __future__ import annotations

from pathlib import Path

import torch

from .errors import TaxonomyMismatch
from .model import ModelSpec, MultiTaskModel, build_backbone
from .taxonomy import TaskTaxonomy, build_taxonomy

CKPT_NAME = "best.ckpt"
SPEC_NAME = "spec.txt"


def write_kv(path: Path, values: dict) -> None:
    lines = [f"{k}={_fmt(v)}" for k, v in values.items()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_kv(path: Path) -> dict[str, str]:
    out = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        k, _, v = line.partition("=")
        out[k.strip()] = v.strip()
    return out


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def _bool(s: str) -> bool:
    return s.strip().lower() in ("1", "true", "yes", "on")


def save_checkpoint(model: MultiTaskModel, run_dir: str | Path, config_hash: str = "",
                    extra: dict | None = None) -> Path:
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    ckpt = run_dir / CKPT_NAME
    torch.save(model.state_dict(), ckpt)
    spec = model.spec
    values = {
        "arch": spec.arch,
        "pretrained": spec.pretrained,
        "freeze_backbone": spec.freeze_backbone,
        "input_side": spec.input_side,
        "taxonomy_fingerprint": spec.taxonomy.fingerprint(),
        "config_hash": config_hash,
    }
    values.update(extra or {})
    write_kv(run_dir / SPEC_NAME, values)
    return ckpt


def read_spec(run_dir: str | Path, taxonomy: TaskTaxonomy | None = None) -> ModelSpec:
    kv = read_kv(Path(run_dir) / SPEC_NAME)
    return ModelSpec(
        arch=kv["arch"],
        pretrained=_bool(kv["pretrained"]),
        freeze_backbone=_bool(kv["freeze_backbone"]),
        taxonomy=taxonomy or build_taxonomy(),
        input_side=int(kv["input_side"]),
    )


def load_checkpoint(run_dir: str | Path, taxonomy: TaskTaxonomy | None = None) -> MultiTaskModel:
    """Rebuild a model from ``run_dir`` without fetching pretrained weights.

    Refuses checkpoints written against a different label taxonomy.
    """
    run_dir = Path(run_dir)
    taxonomy = taxonomy or build_taxonomy()
    kv = read_kv(run_dir / SPEC_NAME)
    if kv.get("taxonomy_fingerprint") != taxonomy.fingerprint():
        raise TaxonomyMismatch(
            f"{run_dir}: checkpoint taxonomy {kv.get('taxonomy_fingerprint')} "
            f"!= current {taxonomy.fingerprint()}"
        )
    spec = read_spec(run_dir, taxonomy)
    # weights come from the archive, so skip the pretrained fetch
    backbone, channels = build_backbone(spec.arch, pretrained=False)
    if spec.arch == "inceptionv3":
        backbone.transform_input = spec.pretrained
    model = MultiTaskModel(spec, backbone, channels)
    state = torch.load(run_dir / CKPT_NAME, map_location="cpu", weights_only=True)
    model.load_state_dict(state)
    model.eval()
    return model
