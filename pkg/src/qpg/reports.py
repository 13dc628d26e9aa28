"""Bound evaluation records shared by the stability and bound modules."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

PASS_TOL = 1e-8


@dataclass
class BoundReport:
    """One bound evaluation: what was certified, with what inputs, and the
    margin between the bound and the measured quantity."""

    name: str
    inputs: dict
    info_value: float
    alpha: float | None
    bound: float
    empirical: float
    flagged_infinite: bool = False

    @property
    def margin(self) -> float:
        if math.isinf(self.bound):
            return math.inf
        return self.bound - self.empirical

    @property
    def passed(self) -> bool:
        return self.margin >= -PASS_TOL

    def to_json(self) -> dict:
        return {
            "certifies": self.name,
            "inputs": self.inputs,
            "information_value": self.info_value,
            "alpha": self.alpha,
            "bound": self.bound,
            "empirical": self.empirical,
            "margin": self.margin,
            "flagged_infinite": self.flagged_infinite,
            "pass": self.passed,
        }
