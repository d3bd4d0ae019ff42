"""Exception types shared across the package.

The CLI maps these onto exit codes: ``ConfigError`` -> 2, ``InvariantError``
(and ``SolverError``, which is a kind of broken invariant) -> 3.
"""


class PmviError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(PmviError):
    """Bad user input: malformed game files, impossible parameter combos, ..."""


class InvariantError(PmviError):
    """A mathematical invariant of the model or an algorithm was violated."""


class SolverError(InvariantError):
    """The matrix-game solver failed to produce a certified equilibrium."""
