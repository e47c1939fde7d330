"""Exception hierarchy for the schatten package.

Every error raised by this package derives from :class:`SchattenError`, so
callers can catch one type. The subclasses also derive from the closest
builtin category (ValueError, IndexError, ...) to stay friendly to generic
handlers.
"""


class SchattenError(Exception):
    """Base class for all errors raised by this package."""


class InvalidParameterError(SchattenError, ValueError):
    """A parameter is outside its documented domain."""


class IndexOutOfRangeError(SchattenError, IndexError):
    """A stream update addresses an entry outside the declared dimensions."""


class DuplicateEntryError(SchattenError, ValueError):
    """An (row, col) pair occurs twice in an entry-wise or row-order stream."""


class ShapeMismatchError(SchattenError, ValueError):
    """Matrix dimensions are incompatible with the requested operation."""


class ModeMismatchError(SchattenError, ValueError):
    """Stream access mode is incompatible with the operation (e.g. row order
    required, or rows arriving out of order)."""


class KindMismatchError(SchattenError, TypeError):
    """A sketch-generator query does not match the generator's kind."""


class NoConvergenceError(SchattenError, RuntimeError):
    """The eigensolver did not reach the residual target within its sweep cap."""


class RequiresPSDError(SchattenError, ValueError):
    """Odd powers need the caller to assert the input is positive
    semidefinite; general matrices are supported for even powers only."""


class StreamDriftError(SchattenError, RuntimeError):
    """A replayed stream produced different content than an earlier pass."""


class PassOverflowError(SchattenError, RuntimeError):
    """More passes were attempted than the algorithm performs."""


class NotFinalizedError(SchattenError, RuntimeError):
    """A result was requested before the required ingest/passes completed."""


class SparsityExceededError(SchattenError, ValueError):
    """A row carries more non-zeros than the declared sparsity bound."""


class UnsupportedPError(SchattenError, ValueError):
    """The requested norm power is outside the algorithm's supported set."""


class StreamFormatError(SchattenError, ValueError):
    """A stream file does not conform to the v1 grammar."""
