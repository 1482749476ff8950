"""Shared exception root for the package.

Every error this package raises on bad input derives from FermiError, so
callers (and the CLI) can catch one type and map it to an exit code.
Concrete errors live next to the code that raises them: unit errors in
units.py, parse errors in program.py, and so on.
"""


class FermiError(Exception):
    """Base class for all errors raised by fermibench on invalid input."""


class SchemaError(FermiError):
    """A malformed line in a structured input file (KB, records, keys)."""

    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")
