"""Per-run event trace with SIM_LOG style verbosity filtering."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

TRACE_LEVELS = {"error": 0, "info": 1, "debug": 2}


@dataclass(frozen=True)
class TraceEvent:
    t: float
    entity: str
    event: str
    payload: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {"t": round(self.t, 6), "entity": self.entity, "event": self.event,
                "payload": self.payload}


class Trace:
    """Collects events at or below the configured verbosity."""

    def __init__(self, level: str = "info"):
        if level not in TRACE_LEVELS:
            raise ValueError(f"Unknown trace level '{level}'")
        self._threshold = TRACE_LEVELS[level]
        self.events: list[TraceEvent] = []

    def enabled(self, level: str) -> bool:
        return TRACE_LEVELS[level] <= self._threshold

    def record(self, t: float, entity: str, event: str, level: str = "info", **payload) -> None:
        if self.enabled(level):
            self.events.append(TraceEvent(t, entity, event, payload))
