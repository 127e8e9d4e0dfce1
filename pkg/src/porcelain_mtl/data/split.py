"""Seeded, unstratified train/val/test partitioning."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from ..errors import TooFewSamples

DEFAULT_RATIOS = (0.8, 0.1, 0.1)
SPLIT_NAMES = ("train", "val", "test")


@dataclass(frozen=True)
class SplitAssignment:
    train: tuple[str, ...]
    val: tuple[str, ...]
    test: tuple[str, ...]
    seed: int
    ratios: tuple[float, float, float] = DEFAULT_RATIOS

    def ids(self, split: str) -> tuple[str, ...]:
        if split not in SPLIT_NAMES:
            raise KeyError(split)
        return getattr(self, split)

    @property
    def sizes(self) -> tuple[int, int, int]:
        return len(self.train), len(self.val), len(self.test)

    def membership(self) -> dict[str, str]:
        return {sid: name for name in SPLIT_NAMES for sid in self.ids(name)}

    def subset(self, records, split: str) -> list:
        """Records of one split, in the split's stored order."""
        by_id = {r.sample_id: r for r in records}
        return [by_id[sid] for sid in self.ids(split)]

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        lines = [
            f"# seed={self.seed}",
            "# ratios=" + ",".join(repr(float(r)) for r in self.ratios),
        ]
        lines += [f"{sid}\t{name}" for name in SPLIT_NAMES for sid in self.ids(name)]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    @classmethod
    def load(cls, path: str | Path) -> "SplitAssignment":
        seed, ratios = None, DEFAULT_RATIOS
        parts: dict[str, list[str]] = {name: [] for name in SPLIT_NAMES}
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                if key == "seed":
                    seed = int(value)
                elif key == "ratios":
                    ratios = tuple(float(v) for v in value.split(","))
                continue
            sid, name = line.rsplit("\t", 1)
            parts[name].append(sid)
        if seed is None:
            raise ValueError(f"{path}: split file lacks a seed header")
        return cls(*(tuple(parts[n]) for n in SPLIT_NAMES), seed=seed, ratios=ratios)


def split_sizes(n: int, ratios: Sequence[float] = DEFAULT_RATIOS) -> tuple[int, int, int]:
    # exact rational arithmetic so that e.g. 0.8 * 10 floors to 8, not 7
    n_train = math.floor(Fraction(str(ratios[0])) * n)
    n_val = math.floor(Fraction(str(ratios[1])) * n)
    return n_train, n_val, n - n_train - n_val


def split_dataset(records, seed: int, ratios: Sequence[float] = DEFAULT_RATIOS) -> SplitAssignment:
    """Shuffle with a seeded permutation, then slice train/val/test contiguously.

    Sizes are floor(r_train * N), floor(r_val * N) and the remainder.
    """
    ids = [r.sample_id if hasattr(r, "sample_id") else str(r) for r in records]
    n = len(ids)
    if n < 3:
        raise TooFewSamples(f"need at least 3 samples to split, got {n}")
    n_train, n_val, _ = split_sizes(n, ratios)
    perm = np.random.default_rng(seed).permutation(n)
    order = [ids[i] for i in perm]
    return SplitAssignment(
        train=tuple(order[:n_train]),
        val=tuple(order[n_train : n_train + n_val]),
        test=tuple(order[n_train + n_val :]),
        seed=int(seed),
        ratios=tuple(float(r) for r in ratios),
    )
