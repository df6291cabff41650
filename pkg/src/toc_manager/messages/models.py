"""Data models for the extended CAM, DENM and MCM messages.

All quantities are stored at wire resolution: distances in millimeters,
speeds and accelerations in centimeters per second (squared), times in
milliseconds. Values are rounded on construction so a decoded message
compares equal to the one that was encoded.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum


# BTP destination ports
DENM_PORT = 2001
CAM_PORT = 2002
MCM_PORT = 2010

PROTOCOL_VERSION = 2


class MessageId(IntEnum):
    DENM = 1
    CAM = 2
    MCM = 10


class EventType(IntEnum):
    ROADWORKS = 3


class StationType(IntEnum):
    VEHICLE = 5
    RSU = 15


class ComplianceStatus(IntEnum):
    RECEIVED_WILL_TRY = 0
    FOLLOWING = 1
    REJECTED = 2


class AdviceKind(IntEnum):
    TRANSITION_OF_CONTROL = 0
    SAFE_SPOT = 1
    # Declared for forward compatibility, never constructed
    GAP = 2
    LANE_CHANGE = 3
    SPEED = 4


SUPPORTED_ADVICE_KINDS = frozenset(
    {AdviceKind.TRANSITION_OF_CONTROL, AdviceKind.SAFE_SPOT}
)


class TriggerKind(IntEnum):
    DISTANCE_RANGE = 0
    TIME_WINDOW = 1


class UnsupportedAdviceError(ValueError):
    """Raised when a reserved advice kind is requested."""


def quantize_distance(value: float) -> float:
    return round(float(value) * 1000) / 1000


def quantize_speed(value: float) -> float:
    return round(float(value) * 100) / 100


def _set(obj: object, name: str, value: object) -> None:
    object.__setattr__(obj, name, value)


@dataclass(frozen=True)
class DistanceRange:
    """Stretch of road between far_x and near_x (far_x >= near_x)."""

    far_x: float
    near_x: float

    def __post_init__(self) -> None:
        _set(self, "far_x", quantize_distance(self.far_x))
        _set(self, "near_x", quantize_distance(self.near_x))

    def validate(self, prefix: str = "range") -> list[str]:
        problems: list[str] = []
        if self.near_x < 0:
            problems.append(f"{prefix}.near_x must be >= 0, got {self.near_x}")
        if self.far_x < self.near_x:
            problems.append(
                f"{prefix}.far_x {self.far_x} is below near_x {self.near_x}"
            )
        return problems

    def contains(self, x: float) -> bool:
        return self.near_x <= x <= self.far_x


@dataclass(frozen=True)
class TimeWindow:
    """Generation-time window in milliseconds."""

    start: int
    end: int

    def __post_init__(self) -> None:
        _set(self, "start", int(round(self.start)))
        _set(self, "end", int(round(self.end)))

    def validate(self, prefix: str = "window") -> list[str]:
        problems: list[str] = []
        if self.start < 0:
            problems.append(f"{prefix}.start must be >= 0, got {self.start}")
        if self.end < self.start:
            problems.append(f"{prefix}.end {self.end} is before start {self.start}")
        return problems


@dataclass(frozen=True)
class TransitionOfControl:
    advice_id: int
    target_automation_level: int = 0
    trigger: DistanceRange | TimeWindow = field(
        default_factory=lambda: DistanceRange(0.0, 0.0)
    )

    @property
    def kind(self) -> AdviceKind:
        return AdviceKind.TRANSITION_OF_CONTROL

    def validate(self) -> list[str]:
        problems: list[str] = []
        if not 0 <= self.advice_id <= 0xFFFF:
            problems.append(f"toc.advice_id out of range: {self.advice_id}")
        if not 0 <= self.target_automation_level <= 5:
            problems.append(
                f"toc.target_automation_level must be 0..5, "
                f"got {self.target_automation_level}"
            )
        problems.extend(self.trigger.validate("toc.trigger"))
        return problems


@dataclass(frozen=True)
class SafeSpot:
    advice_id: int
    range: DistanceRange = field(default_factory=lambda: DistanceRange(0.0, 0.0))

    @property
    def kind(self) -> AdviceKind:
        return AdviceKind.SAFE_SPOT

    def validate(self) -> list[str]:
        problems: list[str] = []
        if not 0 <= self.advice_id <= 0xFFFF:
            problems.append(f"safe_spot.advice_id out of range: {self.advice_id}")
        problems.extend(self.range.validate("safe_spot.range"))
        return problems


Advice = TransitionOfControl | SafeSpot


def make_advice(kind: AdviceKind | int, **fields) -> Advice:
    """Build an advice of the given kind; reserved kinds are rejected."""
    kind = AdviceKind(kind)
    if kind == AdviceKind.TRANSITION_OF_CONTROL:
        return TransitionOfControl(**fields)
    if kind == AdviceKind.SAFE_SPOT:
        return SafeSpot(**fields)
    raise UnsupportedAdviceError(f"Advice kind {kind.name} carries no behavior")


@dataclass(frozen=True)
class AdviceResponse:
    advice_id: int
    compliance_status: ComplianceStatus = ComplianceStatus.RECEIVED_WILL_TRY

    def __post_init__(self) -> None:
        _set(self, "compliance_status", ComplianceStatus(self.compliance_status))


@dataclass(frozen=True)
class Dynamics:
    position: float
    speed: float
    acceleration: float = 0.0

    def __post_init__(self) -> None:
        _set(self, "position", quantize_distance(self.position))
        _set(self, "speed", quantize_speed(self.speed))
        _set(self, "acceleration", quantize_speed(self.acceleration))


@dataclass(frozen=True)
class Waypoint:
    x: float
    v: float

    def __post_init__(self) -> None:
        _set(self, "x", quantize_distance(self.x))
        _set(self, "v", quantize_speed(self.v))


def _trajectory_problems(points: tuple[Waypoint, ...], name: str) -> list[str]:
    problems: list[str] = []
    if not points:
        problems.append(f"{name} must not be empty")
    for prev, cur in zip(points, points[1:]):
        if cur.x >= prev.x:
            problems.append(f"{name} x must be strictly decreasing ({prev.x} -> {cur.x})")
            break
    for point in points:
        if point.x < 0 or point.v < 0:
            problems.append(f"{name} waypoint must be non-negative: {point}")
            break
    return problems


@dataclass(frozen=True)
class VehicleManeuverContainer:
    dynamics: Dynamics
    planned_trajectory: tuple[Waypoint, ...]
    desired_trajectory: tuple[Waypoint, ...] | None = None
    advice_responses: tuple[AdviceResponse, ...] = ()

    def __post_init__(self) -> None:
        _set(self, "planned_trajectory", tuple(self.planned_trajectory))
        if self.desired_trajectory is not None:
            _set(self, "desired_trajectory", tuple(self.desired_trajectory))
        _set(self, "advice_responses", tuple(self.advice_responses))

    def validate(self) -> list[str]:
        problems: list[str] = []
        if self.dynamics.position < 0:
            problems.append(f"dynamics.position must be >= 0, got {self.dynamics.position}")
        if self.dynamics.speed < 0:
            problems.append(f"dynamics.speed must be >= 0, got {self.dynamics.speed}")
        problems.extend(_trajectory_problems(self.planned_trajectory, "planned_trajectory"))
        if self.desired_trajectory is not None:
            problems.extend(
                _trajectory_problems(self.desired_trajectory, "desired_trajectory")
            )
        return problems


@dataclass(frozen=True)
class RsuAdviceEntry:
    """Advices addressed to a single target station."""

    target_station_id: int
    advices: tuple[Advice, ...] = ()

    def __post_init__(self) -> None:
        _set(self, "advices", tuple(self.advices))

    def validate(self) -> list[str]:
        problems: list[str] = []
        kinds = [a.kind for a in self.advices]
        for kind in SUPPORTED_ADVICE_KINDS:
            if kinds.count(kind) > 1:
                problems.append(
                    f"entries[{self.target_station_id}] holds more than one "
                    f"{kind.name} advice"
                )
        for advice in self.advices:
            problems.extend(advice.validate())
        return problems


@dataclass(frozen=True)
class RsuSuggestedManeuverContainer:
    entries: tuple[RsuAdviceEntry, ...] = ()

    def __post_init__(self) -> None:
        _set(self, "entries", tuple(self.entries))

    def validate(self) -> list[str]:
        problems: list[str] = []
        for entry in self.entries:
            problems.extend(entry.validate())
        return problems

    def advices_for(self, station_id: int) -> tuple[Advice, ...]:
        found: list[Advice] = []
        for entry in self.entries:
            if entry.target_station_id == station_id:
                found.extend(entry.advices)
        return tuple(found)


@dataclass(frozen=True)
class CamMessage:
    station_id: int
    gen_time: int
    position: float
    speed: float
    acceleration: float = 0.0
    sae_level: int = 3

    def __post_init__(self) -> None:
        _set(self, "gen_time", int(round(self.gen_time)))
        _set(self, "position", quantize_distance(self.position))
        _set(self, "speed", quantize_speed(self.speed))
        _set(self, "acceleration", quantize_speed(self.acceleration))

    @property
    def port(self) -> int:
        return CAM_PORT

    def validate(self) -> list[str]:
        problems: list[str] = []
        if self.position < 0:
            problems.append(f"position must be >= 0, got {self.position}")
        if self.speed < 0:
            problems.append(f"speed must be >= 0, got {self.speed}")
        if not 0 <= self.sae_level <= 5:
            problems.append(f"sae_level must be 0..5, got {self.sae_level}")
        return problems


@dataclass(frozen=True)
class DenmMessage:
    station_id: int
    gen_time: int = 0
    event_type: EventType = EventType.ROADWORKS
    event_position: float = 0.0
    affected_lane: int = 0
    relevance_distance: float = 500.0

    def __post_init__(self) -> None:
        _set(self, "gen_time", int(round(self.gen_time)))
        _set(self, "event_type", EventType(self.event_type))
        _set(self, "event_position", quantize_distance(self.event_position))
        _set(self, "relevance_distance", quantize_distance(self.relevance_distance))

    @property
    def port(self) -> int:
        return DENM_PORT

    def validate(self) -> list[str]:
        problems: list[str] = []
        if self.relevance_distance <= 0:
            problems.append(
                f"relevance_distance must be > 0, got {self.relevance_distance}"
            )
        if self.event_position < 0:
            problems.append(f"event_position must be >= 0, got {self.event_position}")
        return problems


@dataclass(frozen=True)
class McmMessage:
    station_id: int
    gen_time: int
    station_type: StationType
    body: VehicleManeuverContainer | RsuSuggestedManeuverContainer

    def __post_init__(self) -> None:
        _set(self, "gen_time", int(round(self.gen_time)))
        _set(self, "station_type", StationType(self.station_type))

    @property
    def port(self) -> int:
        return MCM_PORT

    def validate(self) -> list[str]:
        problems: list[str] = []
        from_rsu = self.station_type == StationType.RSU
        if from_rsu != isinstance(self.body, RsuSuggestedManeuverContainer):
            problems.append(
                f"station_type {self.station_type.name} does not match body "
                f"{type(self.body).__name__}"
            )
        problems.extend(self.body.validate())
        return problems


Message = CamMessage | DenmMessage | McmMessage
