"""Local view of the emergency lane from the CAV's own sensors."""

from __future__ import annotations

import math
from dataclasses import dataclass

from toc_manager.scenario.scenario import EmergencyLaneOccupancy


@dataclass(frozen=True)
class SensorView:
    """Sections overlapping [x - sensor_range, x), nearest the vehicle first."""

    x: float
    sensor_range: float
    sections: tuple[tuple[int, bool], ...]
    s_len: float

    @classmethod
    def observe(
        cls, x: float, occ: EmergencyLaneOccupancy, sensor_range: float
    ) -> SensorView:
        if sensor_range <= 0:
            raise ValueError(f"sensor_range must be positive, got {sensor_range}")
        top = min(occ.section_at(x), occ.n_sections - 1)
        bottom = max(math.floor((x - sensor_range) / occ.s_len + 1e-9), 0)
        sections = tuple((j, occ.free[j]) for j in range(top, bottom - 1, -1))
        return cls(x, sensor_range, sections, occ.s_len)

    def nearest_free(self, below: float | None = None) -> int | None:
        """Highest visible free section whose near edge lies below 'below'."""
        limit = self.x if below is None else below
        for j, free in self.sections:
            if free and j * self.s_len < limit - 1e-9:
                return j
        return None
