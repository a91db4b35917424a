"""Exception hierarchy shared across the package.

``FieldmetaError`` subclasses are "data" errors (bad input, bad vocabulary,
leaked split) and map to CLI exit code 3; anything else escaping to the CLI
is an internal error (exit code 4).
"""


class FieldmetaError(Exception):
    """Base class for all recoverable errors raised by this package."""


class MalformedInput(FieldmetaError):
    """Input file cannot be parsed (ragged rows, undecodable bytes, bad JSON)."""


class EmptyTable(FieldmetaError):
    """Input has no data rows, or every cell is empty."""


class MissingVocabulary(FieldmetaError):
    """A rule or head needs a vocabulary that was not loaded."""


class DuplicateType(FieldmetaError):
    """A vocabulary file defines the same entry twice."""


class EmptyVocabulary(FieldmetaError):
    """A vocabulary file contains no entries."""


class MissingMapping(FieldmetaError):
    """The property-to-measure-type mapping file is absent or unreadable."""


class UnknownAggFunction(FieldmetaError):
    """An artifact references an aggregation function outside the vocabulary."""


class IndexOutOfRange(FieldmetaError):
    """An artifact references a field index the table does not have."""


class DegenerateLabels(FieldmetaError):
    """Training labels contain a single class (reported, not always raised)."""


class LayoutMismatch(FieldmetaError):
    """Feature vector layout does not match the model's feature order."""


class ShapeMismatch(FieldmetaError):
    """Tensor shapes are inconsistent with the configured dimensions."""


class NonFiniteActivation(FieldmetaError):
    """A forward pass produced NaN or infinite activations."""


class NonFiniteLoss(FieldmetaError):
    """Training loss became NaN or infinite."""


class EmptyColumn(FieldmetaError):
    """Pooling encountered a column with no tokens."""


class EmptyEvaluation(FieldmetaError):
    """A metric was asked to evaluate zero labeled samples."""


class NoPositives(FieldmetaError):
    """A ranking table has no gold positives (excluded with a warning)."""


class SplitLeakage(FieldmetaError):
    """A test-split schema fingerprint also occurs in the training split."""


class CheckpointMismatch(FieldmetaError):
    """A checkpoint file does not match the expected config or version."""
