"""Multi-task classification of porcelain images by dynasty, ware, glaze and type."""

from .taxonomy import TASK_NAMES, TaskSpec, TaskTaxonomy, build_taxonomy, decode_label, encode_label, label_histogram

__version__ = "0.1.0"

__all__ = [
    "TASK_NAMES",
    "TaskSpec",
    "TaskTaxonomy",
    "build_taxonomy",
    "decode_label",
    "encode_label",
    "label_histogram",
]
