"""Policies resolved against a concrete topology."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from psslab.schemas.policy import RoutingKind, SchedulingKind


@dataclass(frozen=True)
class Policy:
    """A policy with every index already mapped to 0-based activities and classes.

    `priority[k]` lists, highest first, the activities of server k (immediate
    architecture) or the classes server k may serve (delayed architecture).
    """

    name: str
    routing: RoutingKind | None
    scheduling: SchedulingKind
    weights: np.ndarray
    priority: tuple[tuple[int, ...], ...] = ()
    random_tie_break: bool = False

    @property
    def is_delayed(self) -> bool:
        return self.scheduling in (SchedulingKind.MAXWEIGHT, SchedulingKind.CLASS_PRIORITY)
