"""Domain models."""

from psslab.models.allocation import AnalysisResult, DualSolution, LimitPrediction, PrimalSolution
from psslab.models.errors import PsslabError
from psslab.models.policy import Policy
from psslab.models.system import Activity, Architecture, SystemConfig, SystemMatrices

__all__ = [
    "Activity",
    "AnalysisResult",
    "Architecture",
    "DualSolution",
    "LimitPrediction",
    "Policy",
    "PrimalSolution",
    "PsslabError",
    "SystemConfig",
    "SystemMatrices",
]
