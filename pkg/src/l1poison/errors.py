"""Exception types shared across the package."""

from __future__ import annotations


class ConvergenceError(RuntimeError):
    """Newton path failed to reach its tolerance.

    Carries the last iterate as ``solution`` (a ``SolverSolution`` or None)
    so callers can inspect or report partial progress.
    """

    def __init__(self, message: str, solution=None):
        super().__init__(message)
        self.solution = solution


class InteriorViolationError(ValueError):
    """An iterate left the strict interior of the barrier domain."""


class SensitivityError(RuntimeError):
    """KKT Jacobian could not be factorized reliably.

    ``condition`` holds the 1-norm condition estimate when available.
    """

    def __init__(self, message: str, condition: float | None = None):
        super().__init__(message)
        self.condition = condition
