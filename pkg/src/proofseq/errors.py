"""Exception types shared across the package."""

from __future__ import annotations


class ProofseqError(Exception):
    """Base class for all package errors."""


class ModelParseError(ProofseqError):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.line = line
        self.col = col
        super().__init__(f"line {line}, col {col}: {message}" if line else message)


class EmptyDomainWarning(UserWarning):
    """A variable was declared with an empty domain."""


class ProofParseError(ProofseqError):
    def __init__(self, message: str, line: int = 0):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


class ForwardReferenceError(ProofParseError):
    pass


class DanglingReferenceError(ProofParseError):
    pass


class UnknownConstraintError(ProofParseError):
    pass


class ProofShapeError(ProofseqError):
    """A proof does not meet an operation's structural precondition."""


class ProofSerializeError(ProofseqError):
    pass


class FlattenError(ProofseqError):
    pass


class LiftBeforeSimplifyError(ProofseqError):
    """Lifting was attempted while derived constraints still mention auxiliaries."""


class SatInputError(ProofseqError):
    """MUS extraction was asked about a satisfiable constraint set."""


class BudgetExceededError(ProofseqError):
    """The oracle or MUS engine ran out of its resource budget."""


class GenerationError(ProofseqError):
    """Instance generation failed to reach an unsatisfiable model in budget."""
