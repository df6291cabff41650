"""Vehicle state and mode types shared by the agents and the engine."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

from toc_manager.messages.models import Advice, ComplianceStatus


class Lane(Enum):
    DRIVING = "driving"
    EMERGENCY = "emergency"


class Mode(Enum):
    AUTOMATED = "automated"
    TOR_PENDING = "tor_pending"
    MRM_BRAKE_TO_MRM_SPEED = "mrm_brake_to_mrm_speed"
    MRM_CRUISE = "mrm_cruise"
    MRM_SEARCH = "mrm_search"
    LANE_CHANGE = "lane_change"
    MRM_BRAKE_TO_STOP = "mrm_brake_to_stop"
    STOPPED_ON_DRIVING_LANE = "stopped_on_driving_lane"
    PARKED_IN_SAFE_SPOT = "parked_in_safe_spot"
    MANUAL_DRIVING = "manual_driving"

    @property
    def is_terminal(self) -> bool:
        return self in TERMINAL_MODES


TERMINAL_MODES = frozenset(
    {Mode.STOPPED_ON_DRIVING_LANE, Mode.PARKED_IN_SAFE_SPOT, Mode.MANUAL_DRIVING}
)

# Modes during which cruising at v_mrm counts toward the distance KPI
MRM_SPEED_MODES = frozenset({Mode.MRM_CRUISE, Mode.MRM_SEARCH})


@dataclass(frozen=True)
class AdviceRecord:
    """An advice received by the CAV and the status it last reported."""

    advice: Advice
    status: ComplianceStatus = ComplianceStatus.RECEIVED_WILL_TRY
    acknowledged: bool = False

    @property
    def advice_id(self) -> int:
        return self.advice.advice_id


@dataclass(frozen=True)
class VehicleState:
    """Point-mass state of the CAV.

    x is the distance from the vehicle front to the no-AD-zone entry and
    only decreases. trigger_x and deadline are the next position and time
    at which the mode machine must be consulted; target_v is the speed the
    current acceleration is heading for.
    """

    x: float
    v: float
    a: float = 0.0
    t: float = 0.0
    lane: Lane = Lane.DRIVING
    mode: Mode = Mode.AUTOMATED
    target_v: float | None = None
    trigger_x: float | None = None
    deadline: float | None = None
    lc_remaining: float = 0.0
    toc_x: float | None = None
    assigned_spot: int | None = None
    search_limit_x: float | None = None
    park_x: float | None = None
    dist_at_mrm_speed: float = 0.0
    received_advices: tuple[AdviceRecord, ...] = field(default=())

    def with_mode(self, mode: Mode, **changes) -> VehicleState:
        return replace(self, mode=mode, **changes)

    def advice(self, kind) -> AdviceRecord | None:
        for record in self.received_advices:
            if record.advice.kind == kind:
                return record
        return None

    def at_speed(self, v: float, tol: float = 1e-6) -> bool:
        return math.isclose(self.v, v, abs_tol=tol)
