"""Roadside unit: DENM broadcasting, safe-spot assignment and ToC scheduling.

Ground-truth occupancy of the emergency lane is handed to the RSU by the
scenario.
"""

from __future__ import annotations

import logging

import numpy as np

from toc_manager.core.calibration import CalibrationProfile
from toc_manager.core.trace import Trace
from toc_manager.messages.models import (
    AdviceResponse,
    CamMessage,
    ComplianceStatus,
    DenmMessage,
    DistanceRange,
    McmMessage,
    Message,
    RsuAdviceEntry,
    RsuSuggestedManeuverContainer,
    SafeSpot,
    StationType,
    TransitionOfControl,
    VehicleManeuverContainer,
    quantize_distance,
)
from toc_manager.rsu.ledger import AdviceLedger
from toc_manager.scenario.scenario import (
    EmergencyLaneOccupancy,
    RsuOption,
    ScenarioConfig,
    Scheme,
)

logger = logging.getLogger(__name__)

_ACK_STATUSES = (ComplianceStatus.FOLLOWING, ComplianceStatus.RECEIVED_WILL_TRY)


class NoSafeSpotError(LookupError):
    """No free safe spot is available ahead of the vehicle."""


class InfeasibleScheduleError(ValueError):
    """The ToC cannot be scheduled early enough for the assigned spot."""


def assign_safe_spot(cav_x: float, occ: EmergencyLaneOccupancy, cfg: ScenarioConfig) -> int:
    """Free window nearest to the zone among those still ahead of the CAV."""
    ahead = [k for k in occ.windows if cfg.far_edge(k) <= cav_x]
    if not ahead:
        raise NoSafeSpotError(f"No free safe spot ahead of x={cav_x:.1f}")
    return min(ahead)


def min_dist_to_safespot(spot: int, profile: CalibrationProfile, cfg: ScenarioConfig) -> float:
    """Earliest-possible ToC trigger that still reaches the spot at v_mrm."""
    return cfg.far_edge(spot) + profile.d_toc(cfg.y_margin)


def schedule_tor(
    cav_x: float,
    spot: int,
    option: RsuOption,
    rng: np.random.Generator | None,
    profile: CalibrationProfile,
    cfg: ScenarioConfig,
) -> float:
    """ToC trigger position for the assigned spot.

    min_dmrm triggers exactly at the minimum distance and draws nothing;
    distr_toc draws uniformly between that minimum and the nearer of the
    CAV position and max_toc_range.
    """
    lo = min_dist_to_safespot(spot, profile, cfg)
    if option == RsuOption.MIN_DMRM:
        if cav_x < lo:
            raise InfeasibleScheduleError(
                f"CAV at {cav_x:.1f} is already past the trigger {lo:.1f} for window {spot}"
            )
        return lo
    hi = min(cav_x, cfg.max_toc_range)
    if hi < lo:
        raise InfeasibleScheduleError(
            f"Trigger range [{lo:.1f}, {hi:.1f}] is empty for window {spot}"
        )
    if rng is None:
        raise ValueError("distr_toc scheduling needs a random generator")
    return float(rng.uniform(lo, hi))


def plan_tor(
    cav_x: float,
    occ: EmergencyLaneOccupancy,
    profile: CalibrationProfile,
    cfg: ScenarioConfig,
    rng: np.random.Generator | None,
) -> tuple[int, float]:
    """Assign a spot and schedule the ToC; returns (window, trigger_x).

    A distr_toc range that max_toc_range leaves empty falls back to the
    min_dmrm trigger. The trigger is rounded to wire resolution.
    """
    spot = assign_safe_spot(cav_x, occ, cfg)
    try:
        tor_x = schedule_tor(cav_x, spot, cfg.mcm_rsu_option, rng, profile, cfg)
    except InfeasibleScheduleError as e:
        if cfg.mcm_rsu_option != RsuOption.DISTR_TOC:
            raise
        logger.warning(f"{e}; falling back to the minimum-distance trigger")
        tor_x = schedule_tor(cav_x, spot, RsuOption.MIN_DMRM, None, profile, cfg)
    return spot, quantize_distance(tor_x)


class RsuAgent:
    """Infrastructure station placed at the zone entry (x = 0)."""

    entity = "rsu"

    def __init__(
        self,
        cfg: ScenarioConfig,
        profile: CalibrationProfile,
        occupancy: EmergencyLaneOccupancy,
        rng: np.random.Generator | None = None,
        station_id: int = 1,
        denm_rate_hz: float = 1.0,
        retransmit_hz: float = 1.0,
        trace: Trace | None = None,
    ):
        self.cfg = cfg
        self.profile = profile
        self.occupancy = occupancy
        self.rng = rng
        self.station_id = station_id
        self.ledger = AdviceLedger(1.0 / retransmit_hz)
        self.trace = trace or Trace("error")
        self._denm_period = 1.0 / denm_rate_hz
        self._next_denm = 0.0
        self._last_cam: dict[int, CamMessage] = {}
        self.plans: dict[int, tuple[int, float] | None] = {}

    @property
    def x(self) -> float:
        return 0.0

    def tick_denm(self, now: float) -> DenmMessage | None:
        """One DENM per DENM period, the first at now = 0."""
        if now + 1e-9 < self._next_denm:
            return None
        self._next_denm += self._denm_period
        return DenmMessage(
            station_id=self.station_id,
            gen_time=round(now * 1000),
            event_position=0.0,
            relevance_distance=self.cfg.relevance_distance,
        )

    def estimate_x(self, station_id: int, at: float) -> float | None:
        """Position of a station extrapolated from its latest CAM."""
        cam = self._last_cam.get(station_id)
        if cam is None:
            return None
        elapsed = max(at - cam.gen_time / 1000, 0.0)
        return max(cam.position - cam.speed * elapsed, 0.0)

    def build_mcm(self, target: int, tor_x: float, spot: int, now: float) -> McmMessage:
        """RSU MCM carrying a fresh ToC advice and SafeSpot advice for target."""
        far = self.cfg.far_edge(spot)
        near = far - self.cfg.spot_length
        toc = self.ledger.issue(
            target,
            lambda advice_id: TransitionOfControl(advice_id, 0, DistanceRange(tor_x, tor_x)),
            now,
        )
        safe = self.ledger.issue(
            target, lambda advice_id: SafeSpot(advice_id, DistanceRange(far, near)), now
        )
        self.trace.record(now, self.entity, "advice_issued", target=target,
                          toc_id=toc.advice_id, tor_x=tor_x,
                          spot_id=safe.advice_id, window=spot)
        return self._mcm(now, {target: [toc, safe]})

    def _mcm(self, now: float, advices: dict) -> McmMessage:
        entries = tuple(RsuAdviceEntry(t, tuple(a)) for t, a in sorted(advices.items()))
        return McmMessage(self.station_id, round(now * 1000), StationType.RSU,
                          RsuSuggestedManeuverContainer(entries))

    def retransmit(self, now: float) -> McmMessage | None:
        """Re-send unacknowledged advices under their original ids."""
        due = self.ledger.due(now)
        if not due:
            return None
        for target, advices in due.items():
            self.trace.record(now, self.entity, "advice_retransmitted", level="debug",
                              target=target, ids=[a.advice_id for a in advices])
        return self._mcm(now, due)

    def handle_vehicle_mcm(self, msg: McmMessage, now: float = 0.0) -> None:
        """Mark advices acknowledged from the vehicle's responses."""
        if not isinstance(msg.body, VehicleManeuverContainer):
            return
        for response in msg.body.advice_responses:
            self._handle_response(msg.station_id, response, now)

    def _handle_response(self, station: int, response: AdviceResponse, now: float) -> None:
        record = self.ledger.get(station, response.advice_id)
        if record is None:
            logger.warning(
                f"Station {station} answered unknown advice {response.advice_id}; ignored"
            )
            return
        if response.compliance_status not in _ACK_STATUSES or record.acknowledged:
            return
        self.ledger.acknowledge(station, response.advice_id)
        self.trace.record(now, self.entity, "advice_acknowledged", target=station,
                          advice_id=response.advice_id,
                          status=response.compliance_status.name.lower())

    def _maybe_plan(self, station: int, now: float, delivery: float) -> McmMessage | None:
        if station in self.plans:
            return None
        x_est = self.estimate_x(station, delivery)
        if x_est is None:
            return None
        try:
            spot, tor_x = plan_tor(x_est, self.occupancy, self.profile, self.cfg, self.rng)
            if tor_x > x_est:
                raise InfeasibleScheduleError(
                    f"Trigger {tor_x:.1f} lies behind the vehicle estimate {x_est:.1f}"
                )
        except (InfeasibleScheduleError, NoSafeSpotError) as e:
            # Vehicle already past every feasible trigger; it gets no advice.
            self.plans[station] = None
            logger.warning(f"No ToC advice for station {station}: {e}")
            self.trace.record(now, self.entity, "advice_skipped", target=station,
                              x_est=round(x_est, 3), reason=str(e))
            return None
        self.plans[station] = (spot, tor_x)
        logger.debug(f"Planned ToC for station {station}: window {spot}, trigger {tor_x:.3f}")
        return self.build_mcm(station, tor_x, spot, now)

    def tick(self, now: float, inbox: list[Message], dt: float) -> list[Message]:
        """Process received messages and return what to send this tick."""
        for msg in inbox:
            if isinstance(msg, CamMessage):
                self._last_cam[msg.station_id] = msg
            elif isinstance(msg, McmMessage) and msg.station_type == StationType.VEHICLE:
                self.handle_vehicle_mcm(msg, now)
        out: list[Message] = []
        if self.cfg.scheme == Scheme.DENM:
            denm = self.tick_denm(now)
            if denm is not None:
                out.append(denm)
            return out
        fresh: list[Message] = []
        for station in sorted(self._last_cam):
            mcm = self._maybe_plan(station, now, now + dt)
            if mcm is not None:
                fresh.append(mcm)
        if not fresh:
            repeat = self.retransmit(now)
            if repeat is not None:
                out.append(repeat)
        out.extend(fresh)
        return out


def far_trigger_bound(profile: CalibrationProfile, cfg: ScenarioConfig) -> float:
    """Largest trigger any layout can receive."""
    farthest = max(
        (min_dist_to_safespot(k, profile, cfg) for k in range(cfg.n_windows)),
        default=0.0,
    )
    return max(cfg.max_toc_range, farthest)
