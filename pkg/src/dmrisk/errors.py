"""Exception hierarchy shared by all modules."""
from __future__ import annotations


class DMRiskError(Exception):
    """Base class for errors raised by dmrisk."""


class DomainError(DMRiskError, ValueError):
    """An argument lies outside the domain of the operation."""


class StateError(DMRiskError, RuntimeError):
    """An object is not in a state that allows the operation (e.g. empty table)."""


class NumericError(DMRiskError, ArithmeticError):
    """A numerical procedure failed to converge or produced non-finite values."""


class InputError(DMRiskError, ValueError):
    """A data or configuration file could not be parsed; carries its location."""

    def __init__(self, message: str, path=None, line: int | None = None, column: int | None = None):
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
                if column is not None:
                    where += f":{column}"
            where += ": "
        super().__init__(where + message)
        self.path = path
        self.line = line
        self.column = column
