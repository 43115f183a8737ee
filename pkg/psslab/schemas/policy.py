"""Pydantic schemas for routing and scheduling policy specifications."""

from __future__ import annotations

from enum import Enum
from typing import Annotated, Literal, Union

from pydantic import BaseModel, Field, field_validator, model_validator


class RoutingKind(str, Enum):
    """Routing rule applied to arrivals in the immediate architecture."""

    WWTA = "wwta"
    JSQ = "jsq"


class SchedulingKind(str, Enum):
    """Service-effort rule of a policy."""

    HLPPS = "hlpps"
    SBP = "sbp"
    MAXWEIGHT = "maxweight"
    CLASS_PRIORITY = "class_priority"


class HlppsSpec(BaseModel):
    """Head-of-line proportional processor sharing, optionally weighted per activity."""

    type: Literal["hlpps"] = "hlpps"
    weights: list[float] | None = Field(
        None, description="Positive weight per activity in declaration order; all ones when omitted"
    )

    @field_validator("weights")
    @classmethod
    def validate_weights(cls, v: list[float] | None) -> list[float] | None:
        """Weights must be strictly positive."""
        if v is not None and any(not w > 0 for w in v):
            raise ValueError("HLPPS weights must be strictly positive")
        return v


class SbpSpec(BaseModel):
    """Static buffer priority; `order` maps a 1-based server id to classes, highest priority first."""

    type: Literal["sbp"] = "sbp"
    order: dict[int, list[int]] | None = Field(
        None, description="Per-server class ranking; shortest mean processing time first when omitted"
    )


class MaxWeightSpec(BaseModel):
    """MaxWeight over class queues (delayed architecture)."""

    type: Literal["maxweight"] = "maxweight"


class ClassPrioritySpec(BaseModel):
    """Fixed class priority over class queues (delayed architecture)."""

    type: Literal["class_priority"] = "class_priority"
    order: dict[int, list[int]] | None = Field(
        None, description="Per-server class ranking; shortest mean processing time first when omitted"
    )


SchedulingSpec = Annotated[
    Union[HlppsSpec, SbpSpec, MaxWeightSpec, ClassPrioritySpec],
    Field(discriminator="type"),
]

_DELAYED_SCHEDULERS = ("maxweight", "class_priority")


class PolicySpec(BaseModel):
    """A routing rule paired with a scheduling rule.

    Immediate-architecture policies (hlpps, sbp) need a routing rule; delayed-architecture
    policies (maxweight, class_priority) pick jobs from class queues and take none.
    """

    label: str | None = Field(None, description="Name used in CSV rows and file names")
    routing: RoutingKind | None = Field(None, description="wwta | jsq; omitted for delayed scheduling")
    scheduling: SchedulingSpec = Field(..., description="Scheduling rule")
    random_tie_break: bool = Field(False, description="Break routing ties uniformly at random")

    @model_validator(mode="after")
    def validate_routing(self) -> PolicySpec:
        """Routing is required exactly for the immediate-architecture schedulers."""
        delayed = self.scheduling.type in _DELAYED_SCHEDULERS
        if delayed and self.routing is not None:
            raise ValueError(f"{self.scheduling.type} scheduling routes from class queues; drop 'routing'")
        if not delayed and self.routing is None:
            raise ValueError(f"{self.scheduling.type} scheduling needs a routing rule (wwta | jsq)")
        return self

    @property
    def is_delayed(self) -> bool:
        return self.scheduling.type in _DELAYED_SCHEDULERS

    @property
    def name(self) -> str:
        """Label, or a generated "<routing>+<scheduling>" name."""
        if self.label:
            return self.label
        if self.routing is None:
            return self.scheduling.type
        return f"{self.routing.value}+{self.scheduling.type}"
