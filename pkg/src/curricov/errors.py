"""Exception hierarchy shared by all engine modules.

Every error raised on purpose by the engine derives from ``EngineError``.
``exit_code`` is what the CLI translates the error into: 2 for input and
contract violations, 3 for numeric failures.
"""


class EngineError(Exception):
    """Base class for all engine contract violations."""

    exit_code = 2


class ZeroVectorError(EngineError):
    """Vector norm below the representable threshold; direction undefined."""


class NonFiniteError(EngineError):
    """Input contains NaN or infinity."""


class DimMismatchError(EngineError):
    """Vector dimensions disagree where they must match."""


class ParseError(EngineError):
    """Malformed record in a line-delimited input file."""

    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class DuplicateIdError(EngineError):
    """A question id appears more than once within one corpus."""


class TooFewPointsError(EngineError):
    """Fewer corpus points than requested clusters."""


class FormatError(EngineError):
    """A persisted artifact file violates its schema or invariants."""


class BadParamError(EngineError):
    """A parameter is outside its documented domain."""


class LengthMismatchError(EngineError):
    """Two aligned vectors have different lengths."""


class EmptyRolloutsError(EngineError):
    """Solvability requested for an empty verdict list."""


class MissingVectorError(EngineError):
    """A batch references a question id with no embedding available."""

    def __init__(self, question_id: str):
        super().__init__(f"no embedding vector for question id {question_id!r}")
        self.question_id = question_id


class GroupTooSmallError(EngineError):
    """Group-relative advantages need at least two rewards."""


class SupportViolationError(EngineError):
    """KL divergence undefined: q assigns zero mass where p is positive."""


class NotNormalizedError(EngineError):
    """A probability vector does not sum to one."""


class AllZeroError(EngineError):
    """A counts vector with no positive entry has no frequency distribution."""


class NumericError(EngineError):
    """Numeric failure, e.g. clustering a degenerate corpus."""

    exit_code = 3
