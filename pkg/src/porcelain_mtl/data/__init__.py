from .dataset import PorcelainDataset, sample_rng
from .manifest import MANIFEST_COLUMNS, SampleRecord, load_manifest, write_manifest
from .split import DEFAULT_RATIOS, SplitAssignment, split_dataset, split_sizes
from .synthetic import generate_synthetic_dataset
from .transforms import (
    IMAGENET_MEAN,
    IMAGENET_STD,
    AugmentSpec,
    PreprocessSpec,
    augment_image,
    decode_image,
    preprocess_image,
)

__all__ = [
    "AugmentSpec",
    "DEFAULT_RATIOS",
    "IMAGENET_MEAN",
    "IMAGENET_STD",
    "MANIFEST_COLUMNS",
    "PorcelainDataset",
    "PreprocessSpec",
    "SampleRecord",
    "SplitAssignment",
    "augment_image",
    "decode_image",
    "generate_synthetic_dataset",
    "load_manifest",
    "preprocess_image",
    "sample_rng",
    "split_dataset",
    "split_sizes",
    "write_manifest",
]
