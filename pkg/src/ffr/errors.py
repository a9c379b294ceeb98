"""Exception hierarchy shared by every module of the toolkit.

Plain file/OS problems and invalid UTF-8 are reported with the builtin
``OSError`` / ``UnicodeDecodeError``; everything domain-specific gets a
class here so callers can catch precisely.
"""


class FfrError(Exception):
    """Base class for toolkit errors."""


# -- corpus ---------------------------------------------------------------

class FormatError(FfrError):
    """A corpus line is malformed (wrong tab count or an empty side)."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class EmptyCorpusError(FfrError):
    """An operation that needs at least one sentence got none."""


class DomainError(FfrError):
    """Argument outside the operation's domain (e.g. word count 0)."""


class SizeError(FfrError):
    """Requested split sizes exceed the corpus."""


# -- tokenizer ------------------------------------------------------------

class EmptyInputError(FfrError):
    """Tokenization or encoding of an empty sentence."""


class IdRangeError(FfrError):
    """A token or target id is outside the vocabulary."""


# -- gradient engine ------------------------------------------------------

class ShapeError(FfrError):
    """Operand shapes incompatible with the operation."""


class AllMaskedError(FfrError):
    """Every position is masked out; nothing to average."""


class NotRecordedError(FfrError):
    """backward() called on a value that was not produced while recording."""


# -- training -------------------------------------------------------------

class NonFiniteGradientError(FfrError):
    """A gradient contains NaN or infinity."""


class ConfigMismatchError(FfrError):
    """Inconsistent configuration (e.g. vocabulary modes differ)."""


class ConfigFileError(FfrError):
    """Malformed training config file (bad syntax, unknown or missing key)."""


class CorruptCheckpointError(FfrError):
    """Checkpoint file rejected: bad magic, version, shape, or checksum."""


# -- metrics --------------------------------------------------------------

class LengthMismatchError(FfrError):
    """Hypothesis and reference lists differ in length."""


class EmptyHypothesisError(FfrError):
    """Sentence-level score of an empty hypothesis."""


class LineCountMismatchError(FfrError):
    """Hypothesis and reference files have different line counts."""


# -- annotation service ---------------------------------------------------

class DuplicateItemIdError(FfrError):
    """Two items in one session share an id."""


class EmptyItemsError(FfrError):
    """A session needs at least one item."""


class UnknownSessionError(FfrError):
    """No session with that id."""


class UnknownItemError(FfrError):
    """No item with that id in the session."""


class RangeError(FfrError):
    """Score outside [0, 1]."""


class CorruptLogError(FfrError):
    """Event log is unreadable: malformed line or non-monotonic sequence."""
