"""Result records produced by the simulation engine."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any

from toc_manager.core.trace import TraceEvent


class Outcome(Enum):
    PARKED = "parked"
    STOPPED_ON_LANE = "stopped_on_lane"
    NO_TOC = "no_toc"
    DRIVER_TAKEOVER = "driver_takeover"


class BatchMode(Enum):
    ENUMERATE = "enumerate"
    MONTE_CARLO = "mc"


RUN_COLUMNS = [
    "run",
    "scheme",
    "variant",
    "d_mrm",
    "spot_count",
    "layout_id",
    "seed",
    "toc_x",
    "outcome",
    "stop_x",
    "dist_mrm_speed",
    "parked_window",
]


def _fmt(value: float | None) -> str:
    return "" if value is None else f"{value:.3f}"


@dataclass
class RunResult:
    """KPIs of one simulated run.

    stop_x is set exactly when the vehicle stopped on the driving lane.
    """

    scheme: str
    variant: str
    d_mrm: str
    spot_count: int
    layout_id: str
    seed: int
    toc_x: float | None
    outcome: Outcome
    stop_x: float | None = None
    dist_at_mrm_speed: float = 0.0
    parked_window: int | None = None
    run_index: int = 0
    trace: list[TraceEvent] = field(default_factory=list)

    def __post_init__(self) -> None:
        if (self.outcome == Outcome.STOPPED_ON_LANE) != (self.stop_x is not None):
            raise ValueError("stop_x must be set exactly for stopped_on_lane runs")
        if self.dist_at_mrm_speed < 0:
            raise ValueError(f"dist_at_mrm_speed must be >= 0, got {self.dist_at_mrm_speed}")

    @property
    def success(self) -> bool:
        return self.outcome == Outcome.PARKED

    def to_row(self) -> dict[str, Any]:
        return {
            "run": self.run_index,
            "scheme": self.scheme,
            "variant": self.variant,
            "d_mrm": self.d_mrm,
            "spot_count": self.spot_count,
            "layout_id": self.layout_id,
            "seed": self.seed,
            "toc_x": _fmt(self.toc_x),
            "outcome": self.outcome.value,
            "stop_x": _fmt(self.stop_x),
            "dist_mrm_speed": _fmt(self.dist_at_mrm_speed),
            "parked_window": "" if self.parked_window is None else self.parked_window,
        }
