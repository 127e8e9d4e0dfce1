"""Synthetic porcelain-like fixture images for desk-scale experiments.

Every task label is drawn as its own visual cue so a network can learn all
four tasks at once:

* glaze   -> background hue
* dynasty -> global brightness band
* ware    -> texture of a frame running along the image border
* type    -> dark shape centred in the image

Labels are sampled independently and uniformly per task.
"""

from __future__ import annotations

import colorsys
import math
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from ..taxonomy import TaskTaxonomy, build_taxonomy
from .manifest import SampleRecord, write_manifest

DYNASTY_BRIGHTNESS = (1.0, 0.45)
SHAPES = (
    "disc",
    "dot",
    "ring",
    "triangle_up",
    "triangle_down",
    "h_bar",
    "v_bar",
    "plus",
    "x_cross",
    "star",
    "dot_pair",
    "dot_column",
)
_LIGHT, _DARK = 235, 25


def _glaze_colour(index: int, n: int) -> np.ndarray:
    r, g, b = colorsys.hsv_to_rgb(index / n, 0.8, 0.85)
    return np.array([r, g, b], dtype=np.float32) * 255.0


def _frame_texture(index: int, side: int) -> np.ndarray:
    """Grey-level texture (side x side) for one of ten frame styles.

    All styles are unchanged by a horizontal mirror, so flip augmentation
    never turns one style into another.
    """
    yy, xx = np.mgrid[0:side, 0:side]
    on = {
        0: np.ones_like(yy, dtype=bool),
        1: np.zeros_like(yy, dtype=bool),
        2: (yy // 8) % 2 == 0,
        3: (xx // 8) % 2 == 0,
        4: ((yy // 8) + (xx // 8)) % 2 == 0,
        5: (yy // 20) % 2 == 0,
        6: (xx // 20) % 2 == 0,
        7: ((yy // 20) + (xx // 20)) % 2 == 0,
        8: ((xx % 20) < 6) & ((yy % 20) < 6),
        9: ~(((xx % 20) < 6) & ((yy % 20) < 6)),
    }[index]
    return np.where(on, _LIGHT, _DARK).astype(np.float32)


def _shape_mask(name: str, side: int, rng: np.random.Generator) -> np.ndarray:
    scale = rng.uniform(0.9, 1.1)
    cx = side / 2 + rng.uniform(-side / 50, side / 50)
    cy = side / 2 + rng.uniform(-side / 50, side / 50)
    r = side * 0.26 * scale
    w = max(2, int(round(r * 0.35)))
    im = Image.new("L", (side, side), 0)
    d = ImageDraw.Draw(im)

    def poly(points):
        d.polygon([(cx + px * r, cy + py * r) for px, py in points], fill=255)

    def disc(x, y, q):
        d.ellipse([x - q, y - q, x + q, y + q], fill=255)

    if name == "disc":
        disc(cx, cy, r)
    elif name == "dot":
        disc(cx, cy, 0.45 * r)
    elif name == "triangle_up":
        poly([(0, -1), (0.95, 0.75), (-0.95, 0.75)])
    elif name == "triangle_down":
        poly([(0, 1), (0.95, -0.75), (-0.95, -0.75)])
    elif name == "plus":
        d.rectangle([cx - r, cy - w, cx + r, cy + w], fill=255)
        d.rectangle([cx - w, cy - r, cx + w, cy + r], fill=255)
    elif name == "x_cross":
        for a in (math.pi / 4, -math.pi / 4):
            ux, uy = math.cos(a), math.sin(a)
            vx, vy = -uy, ux
            t = w / r
            poly([(ux + vx * t, uy + vy * t), (ux - vx * t, uy - vy * t),
                  (-ux - vx * t, -uy - vy * t), (-ux + vx * t, -uy + vy * t)])
    elif name == "star":
        pts = []
        for k in range(10):
            rad = 1.1 if k % 2 == 0 else 0.45
            a = -math.pi / 2 + k * math.pi / 5
            pts.append((rad * math.cos(a), rad * math.sin(a)))
        poly(pts)
    elif name == "ring":
        d.ellipse([cx - r, cy - r, cx + r, cy + r], fill=255)
        d.ellipse([cx - r + w, cy - r + w, cx + r - w, cy + r - w], fill=0)
    elif name == "h_bar":
        d.rectangle([cx - 1.1 * r, cy - w, cx + 1.1 * r, cy + w], fill=255)
    elif name == "v_bar":
        d.rectangle([cx - w, cy - 1.1 * r, cx + w, cy + 1.1 * r], fill=255)
    elif name == "dot_pair":
        for sx in (-0.6, 0.6):
            disc(cx + sx * r, cy, 0.38 * r)
    elif name == "dot_column":
        for sy in (-0.75, 0.0, 0.75):
            disc(cx, cy + sy * r, 0.3 * r)
    else:  # pragma: no cover
        raise ValueError(name)
    return np.asarray(im, dtype=np.float32) / 255.0


def render_sample(labels: tuple[int, int, int, int], side: int, rng: np.random.Generator,
                  taxonomy: TaskTaxonomy) -> Image.Image:
    """Draw one RGB image for encoded labels (dynasty, ware, glaze, type)."""
    dyn, ware, glaze, kind = labels
    n_glaze = taxonomy.task("glaze").num_categories
    img = np.empty((side, side, 3), dtype=np.float32)
    img[:] = _glaze_colour(glaze, n_glaze)

    band = max(4, side // 6)
    frame = np.zeros((side, side), dtype=bool)
    frame[:band] = frame[-band:] = True
    frame[:, :band] = frame[:, -band:] = True
    tex = _frame_texture(ware, side)
    img[frame] = tex[frame][:, None]

    mask = _shape_mask(SHAPES[kind], side, rng)[:, :, None]
    img = img * (1.0 - mask) + 20.0 * mask

    img *= DYNASTY_BRIGHTNESS[dyn]
    img += rng.normal(0.0, 3.0, size=img.shape)
    return Image.fromarray(np.clip(np.rint(img), 0, 255).astype(np.uint8), "RGB")


def generate_synthetic_dataset(n_samples: int, seed: int, out_dir: str | Path,
                               image_side: int = 224,
                               taxonomy: TaskTaxonomy | None = None) -> Path:
    """Write ``n_samples`` PNG images and ``manifest.csv`` under ``out_dir``.

    Output is a pure function of (n_samples, seed, image_side).
    """
    if n_samples < 12:
        raise ValueError(f"n_samples must be >= 12, got {n_samples}")
    taxonomy = taxonomy or build_taxonomy()
    out_dir = Path(out_dir)
    img_dir = out_dir / "images"
    img_dir.mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(seed)
    labels = np.stack([rng.integers(0, k, size=n_samples) for k in taxonomy.cardinalities], axis=1)
    records = []
    for i in range(n_samples):
        enc = tuple(int(v) for v in labels[i])
        sample_rng = np.random.default_rng([seed, i])
        im = render_sample(enc, image_side, sample_rng, taxonomy)
        sid = f"syn_{i:05d}"
        path = img_dir / f"{sid}.png"
        im.save(path, format="PNG", optimize=False)
        names = {t: taxonomy.decode(t, enc[j]) for j, t in enumerate(taxonomy.task_names)}
        records.append(SampleRecord(sid, path, **names))
    return write_manifest(records, out_dir / "manifest.csv")
