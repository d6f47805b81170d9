"""Estimate and report containers shared by the verification suites."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from .errors import InvalidParameterError


def hoeffding_halfwidth(reps: int, delta: float) -> float:
    """Distribution-free half-width sqrt(ln(2/delta) / (2 reps)) for the mean
    of a [0, 1]-bounded statistic, valid at confidence 1 - delta."""
    if reps < 1 or not 0 < delta < 1:
        raise InvalidParameterError("need reps >= 1 and 0 < delta < 1")
    return math.sqrt(math.log(2.0 / delta) / (2.0 * reps))


@dataclass(frozen=True)
class EstimateWithCI:
    """Monte Carlo mean of a [0, 1]-bounded statistic with Hoeffding CI."""

    mean: float
    halfwidth: float
    reps: int
    delta: float

    def __post_init__(self):
        if not -1e-12 <= self.mean <= 1 + 1e-12:
            raise InvalidParameterError(f"mean {self.mean} outside [0, 1]")

    @property
    def low(self) -> float:
        return self.mean - self.halfwidth

    @property
    def high(self) -> float:
        return self.mean + self.halfwidth

    def overlaps(self, other: "EstimateWithCI", margin: float = 0.0) -> bool:
        return self.low - margin <= other.high and other.low - margin <= self.high


@dataclass
class CheckReport:
    """One verification suite's outcome.

    ``passed`` is a pure function of ``statistics`` and ``tolerances``;
    ``runtime`` lives outside the reproducible body.
    """

    name: str
    passed: bool
    statistics: dict
    tolerances: dict
    seeds: dict
    runtime: float = 0.0
    details: dict = field(default_factory=dict)

    def body(self) -> dict:
        """The byte-reproducible part (same seeds => identical body)."""
        return {
            "name": self.name,
            "pass": bool(self.passed),
            "statistics": self.statistics,
            "tolerances": self.tolerances,
            "seeds": self.seeds,
            "details": self.details,
        }
