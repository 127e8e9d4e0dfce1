"""Image decoding, resizing/normalisation and train-time augmentation."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image, ImageOps, UnidentifiedImageError

from ..errors import UndecodableImage, ZeroSizeImage

# Per-channel statistics of the large-corpus pretraining data used by the
# torchvision checkpoints.
IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)


@dataclass(frozen=True)
class AugmentSpec:
    horizontal_flip_prob: float = 0.5
    rotation_max_degrees: float = 15.0

    def __post_init__(self):
        if not 0.0 <= self.horizontal_flip_prob <= 1.0:
            raise ValueError(f"horizontal_flip_prob must be in [0, 1], got {self.horizontal_flip_prob}")
        if self.rotation_max_degrees < 0:
            raise ValueError(f"rotation_max_degrees must be >= 0, got {self.rotation_max_degrees}")


@dataclass(frozen=True)
class PreprocessSpec:
    target_side: int = 224
    channel_means: tuple[float, float, float] = IMAGENET_MEAN
    channel_stds: tuple[float, float, float] = IMAGENET_STD
    augmentation: AugmentSpec | None = None

    def __post_init__(self):
        if self.target_side < 64:
            raise ValueError(f"target_side must be >= 64, got {self.target_side}")
        if len(self.channel_means) != 3 or len(self.channel_stds) != 3:
            raise ValueError("channel_means and channel_stds need 3 entries each")
        if any(s <= 0 for s in self.channel_stds):
            raise ValueError("channel_stds must be strictly positive")


def decode_image(path: str | Path) -> Image.Image:
    """Open an image file as RGB, honouring EXIF orientation."""
    try:
        with Image.open(path) as im:
            im = ImageOps.exif_transpose(im)
            im = im.convert("RGB")
            im.load()
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise UndecodableImage(f"{path}: {exc}") from exc
    if im.width == 0 or im.height == 0:
        raise ZeroSizeImage(f"{path}: zero-size image")
    return im


def _as_pil(image) -> Image.Image:
    if isinstance(image, Image.Image):
        if image.width == 0 or image.height == 0:
            raise ZeroSizeImage("zero-size image")
        return image if image.mode == "RGB" else image.convert("RGB")
    arr = np.asarray(image)
    if arr.ndim not in (2, 3) or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ZeroSizeImage(f"cannot interpret array of shape {arr.shape} as an image")
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    if arr.ndim == 3 and arr.shape[2] not in (3, 4):
        raise UndecodableImage(f"unsupported channel count {arr.shape[2]}")
    if arr.dtype != np.uint8:
        arr = np.clip(np.rint(arr), 0, 255).astype(np.uint8)
    return Image.fromarray(arr).convert("RGB")


def preprocess_image(image, spec: PreprocessSpec) -> torch.Tensor:
    """Rescale to a square of ``spec.target_side`` and normalise per channel.

    The rescale ignores aspect ratio. Returns a float32 tensor of shape
    (3, side, side).
    """
    im = _as_pil(image)
    side = spec.target_side
    if im.size != (side, side):
        im = im.resize((side, side), Image.BILINEAR)
    x = torch.from_numpy(np.asarray(im, dtype=np.float32) / 255.0).permute(2, 0, 1)
    mean = torch.tensor(spec.channel_means, dtype=torch.float32).view(3, 1, 1)
    std = torch.tensor(spec.channel_stds, dtype=torch.float32).view(3, 1, 1)
    return ((x - mean) / std).contiguous()


def _border_fill(im: Image.Image) -> tuple[int, int, int]:
    a = np.asarray(im)
    ring = np.concatenate([a[0], a[-1], a[:, 0], a[:, -1]], axis=0)
    return tuple(int(v) for v in np.rint(ring.mean(axis=0)))


def augment_image(image, spec: AugmentSpec, rng: np.random.Generator) -> Image.Image:
    """Random horizontal mirror, then a random rotation about the centre.

    Exactly two draws are taken from ``rng`` per call, so the stream stays
    aligned regardless of which branches fire. Uncovered corners are filled
    with the mean colour of the image's outer pixel ring.
    """
    im = _as_pil(image)
    flip = rng.random() < spec.horizontal_flip_prob
    angle = rng.uniform(-spec.rotation_max_degrees, spec.rotation_max_degrees)
    if flip:
        im = ImageOps.mirror(im)
    if spec.rotation_max_degrees > 0 and angle != 0.0:
        im = im.rotate(angle, resample=Image.BILINEAR, expand=False, fillcolor=_border_fill(im))
    return im
