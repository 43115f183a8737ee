"""Pydantic schema for experiment files."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field, field_validator

from psslab.schemas.policy import PolicySpec


class ExperimentSpec(BaseModel):
    """An experiment over one topology.

    Settings left out (horizon, warmup, replications, r values, doublings) fall back
    to the `[lab]` and `[simulation]` sections of the settings file. Without a horizon
    each point runs for `base_horizon / r`.
    """

    name: str = Field(..., min_length=1, description="Used as the prefix of every artifact file")
    topology: str | None = Field(None, description="Topology path relative to the experiment file")
    policies: list[PolicySpec] = Field(..., min_length=1, description="Policies to run")
    r_values: list[float] | None = Field(None, description="Heavy-traffic parameters, each in (0, 1)")
    loads: list[float] | None = Field(None, description="System loads 1 - r, each in (0, 1)")
    horizon: float | None = Field(None, gt=0, description="Run length per replication")
    horizon_scaling: Literal["fixed", "inverse_r"] | None = Field(
        None, description="inverse_r divides the horizon by r; defaults to inverse_r without a horizon"
    )
    warmup_fraction: float | None = Field(None, ge=0, lt=1, description="Warmup as a fraction of the horizon")
    replications: int | None = Field(None, description="Independent replications per point, at least 2")
    doublings: int | None = Field(None, ge=2, description="Horizon doublings of the stability probe")
    spill_samples: bool = Field(False, description="Write the weighted workload samples to CSV")
    tie_break: bool = Field(False, description="verify also compares smallest-index and random tie-breaking")

    @field_validator("r_values", "loads")
    @classmethod
    def validate_unit_interval(cls, v: list[float] | None) -> list[float] | None:
        """Every r and every load must lie strictly between 0 and 1."""
        if v is not None:
            if not v:
                raise ValueError("list must not be empty")
            bad = [x for x in v if not 0.0 < x < 1.0]
            if bad:
                raise ValueError(f"values must lie in (0, 1), got {bad}")
        return v

    @field_validator("replications")
    @classmethod
    def validate_replications(cls, v: int | None) -> int | None:
        """Confidence intervals need at least two replications."""
        if v is not None and v < 2:
            raise ValueError("replications must be at least 2")
        return v

    def heavy_traffic_points(self, default: list[float]) -> list[float]:
        """r values of the experiment, taken from loads when only those are given."""
        if self.r_values is not None:
            return list(self.r_values)
        if self.loads is not None:
            return [1.0 - load for load in self.loads]
        return list(default)

    def scales_with_r(self) -> bool:
        """Whether the horizon of a point is divided by its r."""
        if self.horizon_scaling is None:
            return self.horizon is None
        return self.horizon_scaling == "inverse_r"
