"""Pydantic schemas for input files and reports."""

from psslab.schemas.experiment import ExperimentSpec
from psslab.schemas.metrics import MetricsReport
from psslab.schemas.policy import PolicySpec
from psslab.schemas.topology import TopologyFile

__all__ = ["ExperimentSpec", "MetricsReport", "PolicySpec", "TopologyFile"]
