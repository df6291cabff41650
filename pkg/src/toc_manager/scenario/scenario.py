"""Road geometry, emergency-lane occupancy and safe-spot enumeration.

Positions are distances to the no-AD-zone entry. Section j covers
[j * s_len, (j + 1) * s_len); window k is the run of spot_sections
sections starting at section k.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np


class Scheme(Enum):
    DENM = "denm"
    MCM = "mcm"


class DenmVariant(Enum):
    ZERO = "zero"
    FIFTY = "fifty"
    UNLIMITED = "unlimited"

    @property
    def extra_search(self) -> float | None:
        """Meters searched at v_mrm beyond the point v_mrm is reached."""
        return {"zero": 0.0, "fifty": 50.0, "unlimited": None}[self.value]


class RsuOption(Enum):
    MIN_DMRM = "min_dmrm"
    DISTR_TOC = "distr_toc"


class CavOption(Enum):
    RSU_ADVICE = "rsu_advice"
    CAV_DECISION = "cav_decision"


class Placement(Enum):
    GRID_ENUMERATE = "grid_enumerate"
    GRID_RANDOM = "grid_random"
    EXPLICIT = "explicit"


class ScenarioError(ValueError):
    """Raised when a scenario violates its invariants.

    problems holds one message per offending field.
    """

    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = list(problems)


class InvalidLayoutError(ValueError):
    """Raised for safe-spot placements that overlap or leave the grid."""


@dataclass(frozen=True)
class ScenarioConfig:
    relevance_distance: float = 500.0
    max_toc_range: float = 900.0
    s_len: float = 25.0
    n_sections: int = 20
    spot_sections: int = 3
    spot_count: int = 1
    placement: Placement = Placement.GRID_ENUMERATE
    explicit_windows: tuple[int, ...] = field(default=())
    scheme: Scheme = Scheme.DENM
    denm_d_mrm: DenmVariant = DenmVariant.ZERO
    mcm_rsu_option: RsuOption = RsuOption.MIN_DMRM
    mcm_cav_option: CavOption = CavOption.RSU_ADVICE
    y_margin: float = 15.0
    timestep: float = 0.1
    comm_range: float = math.inf
    p_loss: float = 0.0

    @property
    def spot_length(self) -> float:
        return self.spot_sections * self.s_len

    @property
    def n_windows(self) -> int:
        return self.n_sections - self.spot_sections + 1

    def far_edge(self, window: int) -> float:
        return (window + self.spot_sections) * self.s_len

    def near_edge(self, window: int) -> float:
        return window * self.s_len

    @property
    def variant(self) -> str:
        """Short label used in result files (e.g. 'zero', 'distr_toc_cav')."""
        if self.scheme == Scheme.DENM:
            return self.denm_d_mrm.value
        cav = "rsu" if self.mcm_cav_option == CavOption.RSU_ADVICE else "cav"
        return f"{self.mcm_rsu_option.value}_{cav}"

    def validate(self) -> list[str]:
        """Return a list of problems; empty when the scenario is usable."""
        problems: list[str] = []
        if self.s_len <= 0:
            problems.append(f"s_len must be positive, got {self.s_len}")
        if self.n_sections <= 0:
            problems.append(f"n_sections must be positive, got {self.n_sections}")
        if not 0 < self.spot_sections <= self.n_sections:
            problems.append(
                f"spot_sections must lie in 1..n_sections, got {self.spot_sections}"
            )
        if not math.isclose(self.relevance_distance, self.n_sections * self.s_len):
            problems.append(
                f"relevance_distance {self.relevance_distance} must equal "
                f"n_sections * s_len = {self.n_sections * self.s_len}"
            )
        if self.max_toc_range < self.relevance_distance:
            problems.append(
                f"max_toc_range {self.max_toc_range} is below relevance_distance "
                f"{self.relevance_distance}"
            )
        if self.spot_count not in (1, 2):
            problems.append(f"spot_count must be 1 or 2, got {self.spot_count}")
        if self.placement == Placement.EXPLICIT:
            if len(self.explicit_windows) != self.spot_count:
                problems.append(
                    f"placement lists {len(self.explicit_windows)} windows for "
                    f"spot_count {self.spot_count}"
                )
        elif self.explicit_windows:
            problems.append("explicit windows given without explicit placement")
        if self.y_margin < 0:
            problems.append(f"y_margin must be >= 0, got {self.y_margin}")
        if self.timestep <= 0:
            problems.append(f"timestep must be positive, got {self.timestep}")
        if self.comm_range < 0:
            problems.append(f"comm_range must be >= 0, got {self.comm_range}")
        if not 0 <= self.p_loss <= 1:
            problems.append(f"p_loss must lie in [0, 1], got {self.p_loss}")
        return problems

    def ensure_valid(self) -> ScenarioConfig:
        problems = self.validate()
        if problems:
            raise ScenarioError(problems)
        return self

    def with_overrides(self, **changes) -> ScenarioConfig:
        return replace(self, **changes).ensure_valid()


@dataclass(frozen=True)
class EmergencyLaneOccupancy:
    """Free/occupied flag per emergency-lane section, index 0 nearest the zone.

    Free sections are exactly the union of the placed windows; windows that
    touch merge into one contiguous free run.
    """

    free: tuple[bool, ...]
    windows: tuple[int, ...]
    s_len: float

    @classmethod
    def from_windows(
        cls, windows: tuple[int, ...] | list[int], cfg: ScenarioConfig
    ) -> EmergencyLaneOccupancy:
        windows = tuple(sorted(int(k) for k in windows))
        for k in windows:
            if not 0 <= k < cfg.n_windows:
                raise InvalidLayoutError(
                    f"Window {k} outside 0..{cfg.n_windows - 1}"
                )
        for a, b in zip(windows, windows[1:]):
            if b - a < cfg.spot_sections:
                raise InvalidLayoutError(f"Windows {a} and {b} overlap")
        free = [False] * cfg.n_sections
        for k in windows:
            for j in range(k, k + cfg.spot_sections):
                free[j] = True
        return cls(tuple(free), windows, cfg.s_len)

    @property
    def layout_id(self) -> str:
        return "-".join(str(k) for k in self.windows) or "none"

    @property
    def n_sections(self) -> int:
        return len(self.free)

    def section_at(self, x: float) -> int:
        """Index of the section alongside position x (covering (x - eps, x])."""
        return math.ceil(x / self.s_len - 1e-9) - 1

    def run_start(self, j: int) -> int:
        """Lowest index of the free run containing section j."""
        while j > 0 and self.free[j - 1]:
            j -= 1
        return j


def enumerate_windows(cfg: ScenarioConfig) -> list[int]:
    """Candidate safe-spot windows 0..n-1."""
    return list(range(cfg.n_windows))


def enumerate_layouts(cfg: ScenarioConfig) -> list[EmergencyLaneOccupancy]:
    """All layouts for the configured spot count, or the explicit one."""
    if cfg.placement == Placement.EXPLICIT:
        return [EmergencyLaneOccupancy.from_windows(cfg.explicit_windows, cfg)]
    if cfg.spot_count not in (1, 2):
        raise InvalidLayoutError(f"spot_count must be 1 or 2, got {cfg.spot_count}")
    windows = enumerate_windows(cfg)
    if cfg.spot_count == 1:
        return [EmergencyLaneOccupancy.from_windows((k,), cfg) for k in windows]
    return [
        EmergencyLaneOccupancy.from_windows(pair, cfg)
        for pair in itertools.combinations(windows, 2)
        if pair[1] - pair[0] >= cfg.spot_sections
    ]


def random_layout(cfg: ScenarioConfig, rng: np.random.Generator) -> EmergencyLaneOccupancy:
    """Uniform draw over the enumerated layouts."""
    layouts = enumerate_layouts(cfg)
    return layouts[int(rng.integers(len(layouts)))]


def first_spot_encounter(
    x: float, occ: EmergencyLaneOccupancy, cfg: ScenarioConfig | None = None
) -> tuple[float, float] | None:
    """First free stretch met at or below x.

    Returns (encounter_x, clearance): encounter_x is x itself when the
    vehicle is already alongside a free section, else the far edge of
    the nearest free run below; clearance is the free length from
    encounter_x toward the zone.
    """
    if x < 0:
        raise ValueError(f"x must be >= 0, got {x}")
    s_len = cfg.s_len if cfg is not None else occ.s_len
    j = min(occ.section_at(x), occ.n_sections - 1)
    while j >= 0 and not occ.free[j]:
        j -= 1
    if j < 0:
        return None
    encounter_x = min(x, (j + 1) * s_len)
    clearance = encounter_x - occ.run_start(j) * s_len
    return encounter_x, clearance
