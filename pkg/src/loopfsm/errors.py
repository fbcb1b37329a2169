"""Exception types shared across the package."""

from __future__ import annotations


class LoopFsmError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(LoopFsmError):
    """Source text could not be parsed; carries a position."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col


class NestedLoopError(ParseError):
    pass


class UndefinedVariableError(LoopFsmError):
    pass


class DuplicateConstError(ParseError):
    pass


class MissingPredicateImpl(LoopFsmError):
    pass


class BudgetExceeded(LoopFsmError):
    pass


class UnsatPath(LoopFsmError):
    pass


class UnboundBranchLabel(LoopFsmError):
    pass


class JsonSchemaError(LoopFsmError):
    pass


class ConfigError(LoopFsmError):
    pass


class SortError(ParseError):
    """A statement mixes byte-stream and integer operands illegally."""
