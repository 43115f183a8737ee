"""Pydantic schema for topology files.

Ids are 1-based in files and converted to 0-based when building a SystemConfig.
"""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field

from psslab.models.system import Architecture


class ActivityEntry(BaseModel):
    """One activity as written in a topology file."""

    model_config = ConfigDict(populate_by_name=True)

    class_id: int = Field(..., alias="class", description="1-based class id")
    server: int = Field(..., description="1-based server id")
    rate: float = Field(..., description="Service rate mu_ik per unit time")


class TopologyFile(BaseModel):
    """Schema for a topology JSON file."""

    name: str | None = Field(None, description="Human-readable topology name")
    num_classes: int = Field(..., description="Number of job classes I")
    num_servers: int = Field(..., description="Number of servers K")
    arrival_rates: list[float] = Field(..., description="Arrival rate per class, length I")
    activities: list[ActivityEntry] = Field(..., description="Activities in declaration order")
    architecture: Architecture = Field(Architecture.IMMEDIATE, description="immediate | delayed")
