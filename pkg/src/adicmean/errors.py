"""Exception hierarchy. CLI maps ``AdicError`` subclasses to exit status 2."""

from __future__ import annotations


class AdicError(Exception):
    """Base class for every error raised by this package."""


class DomainError(AdicError, ValueError):
    """An argument lies outside the domain of an operation."""


class SpecError(AdicError, ValueError):
    """A construction spec violates a precondition."""


class InfeasibleError(SpecError):
    """A linear solve produced a value outside its admissible range."""


class HorizonExhausted(SpecError):
    """The greedy switch search ran out of blocks before a threshold was reached.

    ``partial`` holds whatever was computed up to that point.
    """

    def __init__(self, phase: int, partial):
        super().__init__(f"horizon exhausted at phase {phase}")
        self.phase = phase
        self.partial = partial


class StreamFormatError(DomainError):
    """A digit-stream file is malformed; ``offset`` is the byte offset of the problem."""

    def __init__(self, message: str, offset: int | None = None):
        super().__init__(message if offset is None else f"{message} at byte offset {offset}")
        self.offset = offset
