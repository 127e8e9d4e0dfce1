"""Exception hierarchy shared across the toolkit."""

from __future__ import annotations


class PorcelainError(Exception):
    """Base class for every error raised by this package."""


class UnknownTask(PorcelainError, KeyError):
    def __init__(self, task, valid=()):
        self.task = task
        self.valid = tuple(valid)
        super().__init__(f"unknown task {task!r}; expected one of {', '.join(self.valid)}")

    def __str__(self):
        return self.args[0]


class UnknownCategory(PorcelainError, ValueError):
    def __init__(self, task, category, valid=(), row=None):
        self.task = task
        self.category = category
        self.valid = tuple(valid)
        self.row = row
        where = f"row {row}: " if row is not None else ""
        super().__init__(
            f"{where}unknown {task} category {category!r}; valid names: {', '.join(self.valid)}"
        )


class IndexOutOfRange(PorcelainError, IndexError):
    pass


class MissingColumn(PorcelainError, ValueError):
    pass


class DuplicateSampleId(PorcelainError, ValueError):
    def __init__(self, sample_id, row):
        self.sample_id = sample_id
        self.row = row
        super().__init__(f"row {row}: duplicate sample_id {sample_id!r}")


class EmptyManifest(PorcelainError, ValueError):
    pass


class TooFewSamples(PorcelainError, ValueError):
    pass


class UndecodableImage(PorcelainError, ValueError):
    pass


class ZeroSizeImage(PorcelainError, ValueError):
    pass


class InvalidChannels(PorcelainError, ValueError):
    pass


class UnknownArch(PorcelainError, ValueError):
    pass


class InvalidModelSpec(PorcelainError, ValueError):
    pass


class WeightsUnavailable(PorcelainError, RuntimeError):
    pass


class ShapeMismatch(PorcelainError, ValueError):
    pass


class TargetOutOfRange(PorcelainError, ValueError):
    pass


class EmptyBatch(PorcelainError, ValueError):
    pass


class EmptyMatrix(PorcelainError, ValueError):
    pass


class EmptyReportSet(PorcelainError, ValueError):
    pass


class NonFiniteLoss(PorcelainError, FloatingPointError):
    def __init__(self, batch_id, value):
        self.batch_id = batch_id
        self.value = value
        super().__init__(f"non-finite loss {value} at batch {batch_id}")


class EmptySplit(PorcelainError, ValueError):
    pass


class TaxonomyMismatch(PorcelainError, ValueError):
    pass


class ConfigError(PorcelainError, ValueError):
    pass


class ParseError(ConfigError):
    def __init__(self, line, text):
        self.line = line
        super().__init__(f"line {line}: cannot parse {text!r}")


class UnknownKey(ConfigError):
    def __init__(self, key):
        self.key = key
        super().__init__(f"unknown config key {key!r}")


class InvalidValue(ConfigError):
    def __init__(self, key, value, reason=""):
        self.key = key
        self.value = value
        msg = f"invalid value {value!r} for {key!r}"
        super().__init__(f"{msg}: {reason}" if reason else msg)


class UnknownCommand(PorcelainError, ValueError):
    pass
