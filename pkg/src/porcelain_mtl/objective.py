"""Per-task cross-entropy and the unweighted sum over the four tasks."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import torch

from .errors import EmptyBatch, ShapeMismatch, TargetOutOfRange


def log_softmax(logits: torch.Tensor) -> torch.Tensor:
    shifted = logits - logits.max(dim=1, keepdim=True).values.detach()
    return shifted - torch.log(torch.exp(shifted).sum(dim=1, keepdim=True))


def cross_entropy(logits: torch.Tensor, targets: torch.Tensor, reduction: str = "mean") -> torch.Tensor:
    """-log softmax(logits)[target], averaged over the batch.

    The row max is subtracted before exponentiating, so any finite logits give
    a finite loss.
    """
    if logits.dim() != 2:
        raise ShapeMismatch(f"logits must be (batch, K), got {tuple(logits.shape)}")
    n, k = logits.shape
    if n == 0:
        raise EmptyBatch("cross_entropy on an empty batch")
    targets = torch.as_tensor(targets, device=logits.device).long().reshape(-1)
    if targets.shape[0] != n:
        raise ShapeMismatch(f"{n} logit rows but {targets.shape[0]} targets")
    if bool(((targets < 0) | (targets >= k)).any()):
        raise TargetOutOfRange(f"targets must lie in [0, {k}), got {targets.tolist()}")
    per_sample = -log_softmax(logits).gather(1, targets.unsqueeze(1)).squeeze(1)
    if reduction == "mean":
        return per_sample.mean()
    if reduction == "sum":
        return per_sample.sum()
    if reduction == "none":
        return per_sample
    raise ValueError(f"unknown reduction {reduction!r}")


@dataclass
class LossBreakdown:
    """Per-task losses and their sum. Tensor fields keep the autograd graph."""

    l_dynasty: torch.Tensor
    l_ware: torch.Tensor
    l_glaze: torch.Tensor
    l_type: torch.Tensor
    l_total: torch.Tensor

    def task_losses(self) -> dict[str, torch.Tensor]:
        return {"dynasty": self.l_dynasty, "ware": self.l_ware, "glaze": self.l_glaze, "type": self.l_type}

    def as_floats(self) -> dict[str, float]:
        out = {k: float(v.detach()) for k, v in self.task_losses().items()}
        out["total"] = float(self.l_total.detach())
        return out


def _targets_for(targets, task: str, column: int) -> torch.Tensor:
    if isinstance(targets, Mapping):
        return torch.as_tensor(targets[task])
    t = torch.as_tensor(targets)
    if t.dim() != 2:
        raise ShapeMismatch(f"stacked targets must be (batch, tasks), got {tuple(t.shape)}")
    return t[:, column]


def total_loss(bundle: Mapping[str, torch.Tensor], targets) -> LossBreakdown:
    """Sum of the four per-task cross-entropies, equal weights.

    ``targets`` is either a mapping task -> index vector or a (batch, 4) tensor
    whose columns follow the bundle's task order.
    """
    batch = {v.shape[0] for v in bundle.values()}
    if len(batch) != 1:
        raise ShapeMismatch(f"logit batch sizes disagree: {sorted(batch)}")
    parts = {}
    for col, (task, logits) in enumerate(bundle.items()):
        t = _targets_for(targets, task, col)
        if t.reshape(-1).shape[0] != logits.shape[0]:
            raise ShapeMismatch(f"{task}: {logits.shape[0]} logit rows but {t.numel()} targets")
        parts[task] = cross_entropy(logits, t)
    total = parts["dynasty"] + parts["ware"] + parts["glaze"] + parts["type"]
    return LossBreakdown(parts["dynasty"], parts["ware"], parts["glaze"], parts["type"], total)

