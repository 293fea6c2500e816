"""Exception hierarchy shared across the package.

Errors are grouped the way the CLI maps them to exit codes: configuration
problems, data problems, and numeric problems.
"""


class StageRankError(Exception):
    """Base class for all package errors."""


class ConfigError(StageRankError):
    """Invalid configuration or parameters."""


class DataError(StageRankError):
    """Invalid or inconsistent input data."""


class NumericError(StageRankError):
    """Numerical failure (non-finite values, failed audit)."""


class ConfigInvalid(ConfigError):
    """A configuration violates its invariants."""


class ShapeMismatch(DataError):
    """Array shapes or dimensions do not line up."""


class EmptyMask(DataError):
    """A mask with no foreground voxels where one is required."""


class MaskExceedsBox(DataError):
    """A mask's tight extent does not fit in the requested bounding box."""


class ClassTooSmall(DataError):
    """A class has too few members for the requested operation."""


class DegenerateTask(DataError):
    """A binary sub-task has no positives or no negatives."""


class SingleClass(DataError):
    """Only one class present where at least two are required."""


class DegenerateBatch(DataError):
    """A batch too small to normalize."""


class LabelOutOfRange(DataError):
    """A class label outside the declared 1..K range."""


class EmptyClass(DataError):
    """A true class with zero samples makes the metric undefined."""


class ModelFormatError(DataError):
    """A model container file is malformed or fails its checksum."""


class NoValidPairsWarning(UserWarning):
    """Mask too sparse to form any co-occurrence pair; features fall back to 0."""
