"""Exception hierarchy shared by all transientpy modules.

Everything derives from ``TransientPyError`` (itself a ``ValueError``), so callers
that only care about "bad input" can keep catching ``ValueError``. ``DataError``
marks problems with the data or files being processed; the CLI maps those to exit
code 2 and everything else to a usage error.
"""


class TransientPyError(ValueError):
    """Base class for all transientpy errors."""


class ConfigError(TransientPyError):
    """Invalid configuration or hyperparameter value."""


class ShapeError(TransientPyError):
    """Array dimensions are not mutually consistent."""


class DataError(TransientPyError):
    """Problem with the data being read or processed."""


class SchemaError(DataError):
    """A required column is missing from a light-curve table."""


class ParseError(DataError):
    """A cell could not be parsed or violates a measurement invariant.

    Attributes:
        row (int | None): 1-based line number in the source file (header is line 1).
    """

    def __init__(self, msg: str, row: int | None = None):
        super().__init__(msg)
        self.row = row


class EmptyInput(DataError):
    """The input stream holds no data rows."""


class UnknownClass(DataError):
    """A class id is not one of the fourteen known original classes."""

    def __init__(self, class_id):
        super().__init__(f"Unknown original class id: {class_id}")
        self.class_id = class_id


class NoDetection(DataError):
    """A light curve has no detected measurement to anchor truncation."""

    def __init__(self, object_id: int):
        super().__init__(f"Object {object_id} has no detected measurement.")
        self.object_id = object_id


class SequenceTooLong(DataError):
    """A light curve has more measurements than the padded sequence length."""

    def __init__(self, length: int, target_len: int, object_id: int | None = None):
        where = f" (object {object_id})" if object_id is not None else ""
        super().__init__(
            f"Sequence of {length} measurements{where} exceeds target length {target_len}."
        )
        self.length = length
        self.target_len = target_len
        self.object_id = object_id


class EmptySequence(DataError):
    """A sequence mask has no valid timestep."""


class MissingLabel(DataError):
    """A labeled operation received an unlabeled example."""


class DegenerateLabels(DataError):
    """A one-vs-rest curve needs positives (and negatives for ROC)."""


class LabelError(DataError):
    """A class label is outside 0-4."""


class VersionError(DataError):
    """A checkpoint was written with an unsupported format version."""


class CorruptCheckpoint(DataError):
    """A checkpoint file is truncated or inconsistent with its manifest."""


class TrainingDiverged(TransientPyError):
    """Training produced a non-finite validation loss before any usable epoch."""
