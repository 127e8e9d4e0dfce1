"""torch Dataset over manifest records."""

from __future__ import annotations

import copy
import hashlib
from typing import Sequence

import numpy as np
import torch
from torch.utils.data import Dataset

from ..taxonomy import TaskTaxonomy
from .manifest import SampleRecord
from .transforms import AugmentSpec, PreprocessSpec, augment_image, decode_image, preprocess_image


def sample_rng(global_seed: int, sample_id: str, epoch: int = 0) -> np.random.Generator:
    """Independent random source per (seed, sample, epoch), stable across processes."""
    digest = hashlib.sha256(sample_id.encode("utf-8")).digest()
    key = int.from_bytes(digest[:8], "little")
    return np.random.default_rng([int(global_seed) & 0xFFFFFFFF, key, int(epoch)])


class PorcelainDataset(Dataset):
    """Yields ``(image_tensor, targets)`` with targets a length-4 int64 tensor
    in taxonomy task order.

    Augmentation is only applied when ``augment`` is given; callers pass it
    for the train split alone. Call :meth:`set_epoch` before each epoch so the
    augmentation draws change between epochs but stay reproducible.
    """

    def __init__(self, records: Sequence[SampleRecord], taxonomy: TaskTaxonomy,
                 preprocess: PreprocessSpec, augment: AugmentSpec | None = None,
                 seed: int = 0, cache: bool = True):
        self.records = list(records)
        self.taxonomy = taxonomy
        self.preprocess = preprocess
        self.augment = augment
        self.seed = seed
        self.epoch = 0
        self._targets = torch.tensor([r.encode(taxonomy) for r in self.records], dtype=torch.long)
        self._cache: dict[int, object] | None = {} if cache else None

    def set_epoch(self, epoch: int) -> None:
        self.epoch = epoch

    def plain_view(self) -> "PorcelainDataset":
        """Same records and image cache, without augmentation."""
        view = copy.copy(self)
        view.augment = None
        return view

    def __len__(self):
        return len(self.records)

    def _image(self, idx: int):
        if self._cache is None:
            return decode_image(self.records[idx].image_path)
        if idx not in self._cache:
            im = decode_image(self.records[idx].image_path)
            side = self.preprocess.target_side
            # store at working resolution; augmentation then runs on the small copy
            if im.size != (side, side):
                im = im.resize((side, side))
            self._cache[idx] = im
        return self._cache[idx]

    def __getitem__(self, idx: int):
        im = self._image(idx)
        if self.augment is not None:
            rng = sample_rng(self.seed, self.records[idx].sample_id, self.epoch)
            im = augment_image(im, self.augment, rng)
        return preprocess_image(im, self.preprocess), self._targets[idx]

    @property
    def targets(self) -> torch.Tensor:
        return self._targets
