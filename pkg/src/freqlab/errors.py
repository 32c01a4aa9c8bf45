"""Exception types shared across the package.

The split matters to the CLI: ScenarioError and PreconditionError map to the
usage/config exit code, everything else deriving from FreqlabError maps to
the internal-error exit code, and verdict failures are not exceptions at all
(reports carry them).
"""

from __future__ import annotations


class FreqlabError(Exception):
    """Base class for all package-specific errors."""


class QuadratureDomainError(FreqlabError, ValueError):
    """A radius or point lies outside the region an operation accepts."""


class EvaluationError(FreqlabError):
    """A field produced a non-finite value; carries the offending point."""

    def __init__(self, message: str, point=None):
        super().__init__(message)
        self.point = point


class PreconditionError(FreqlabError, ValueError):
    """A documented operation precondition was violated."""


class DegenerateSolutionError(FreqlabError):
    """H(r) fell below the positivity floor; frequency is undefined."""


class SolverError(FreqlabError):
    """The Dirichlet solver failed; carries diagnostics in the message."""


class FitFailureError(FreqlabError):
    """A constant-fitting procedure found no admissible value below its cap."""


class ScenarioError(FreqlabError, ValueError):
    """A scenario file failed to parse or validate; names the field."""
