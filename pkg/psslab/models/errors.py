"""Exception hierarchy for the lab."""

from __future__ import annotations


class PsslabError(Exception):
    """Base class for every error raised by psslab."""


class TopologyError(PsslabError):
    """Raised when a topology cannot be loaded or violates its invariants."""

    def __init__(self, message: str, violations: list[str] | None = None) -> None:
        super().__init__(message)
        self.violations = violations or []


class InfeasibleError(PsslabError):
    """Raised when no x >= 0 satisfies Rx = lambda."""


class LPSolverError(PsslabError):
    """Raised when the simplex stops without an optimal solution where one must exist."""


class HeavyTrafficViolated(PsslabError):
    """Raised when the polytope {x >= 0, Rx = lambda, Ax = e} is empty."""


class ConsistencyViolation(PsslabError):
    """Raised when dual propagation leaves an unused basic equation unsatisfied."""


class SimulationError(PsslabError):
    """Raised for invalid simulation parameters."""


class ExperimentError(PsslabError):
    """Raised for invalid experiment specifications."""
