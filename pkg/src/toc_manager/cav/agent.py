"""Automated-driving decision logic of the CAV.

DENM scheme: the TOR is issued at the relevance distance; when it expires
the vehicle slows to v_mrm and searches the emergency lane up to the
variant's limit, parking on the first stretch with enough clearance or
braking to a stop on the driving lane.

MCM scheme: the TOR is issued at the RSU's advised trigger; when it
expires the vehicle heads for the advised safe spot, either slowing down
at once (rsu_advice) or holding v_drive until it is d_2speedmrm before
the spot (cav_decision), then changes lane and parks.
"""

from __future__ import annotations

import logging
from dataclasses import replace
from typing import Callable

from toc_manager.cav.sensors import SensorView
from toc_manager.core.calibration import CalibrationProfile, calibrate_deceleration
from toc_manager.core.kinematics import Boundary, advance
from toc_manager.core.models import AdviceRecord, Mode, VehicleState
from toc_manager.core.trace import Trace
from toc_manager.messages.models import (
    AdviceKind,
    AdviceResponse,
    CamMessage,
    ComplianceStatus,
    DenmMessage,
    DistanceRange,
    Dynamics,
    McmMessage,
    Message,
    RsuSuggestedManeuverContainer,
    StationType,
    TimeWindow,
    TransitionOfControl,
    VehicleManeuverContainer,
    Waypoint,
    quantize_distance,
)
from toc_manager.scenario.scenario import (
    CavOption,
    EmergencyLaneOccupancy,
    ScenarioConfig,
    Scheme,
    first_spot_encounter,
)

logger = logging.getLogger(__name__)

_EPS = 1e-6
# Slack for advised triggers rounded to wire resolution
_TRIGGER_SLACK = 0.5

TakeoverHook = Callable[[VehicleState], bool]


class CavAgent:
    """One CAV; owns its pending responses and the cached DENM."""

    entity = "cav"

    def __init__(
        self,
        cfg: ScenarioConfig,
        profile: CalibrationProfile,
        occupancy: EmergencyLaneOccupancy,
        station_id: int = 7,
        sae_level: int = 3,
        sensor_range: float = 100.0,
        cam_rate_hz: float = 10.0,
        mcm_rate_hz: float = 1.0,
        trajectory_waypoints: int = 3,
        takeover: TakeoverHook | None = None,
        trace: Trace | None = None,
    ):
        self.cfg = cfg
        self.profile = profile
        self.occupancy = occupancy
        self.station_id = station_id
        self.sae_level = sae_level
        self.sensor_range = sensor_range
        self.trajectory_waypoints = trajectory_waypoints
        self.takeover = takeover
        self.trace = trace or Trace("error")
        self._cam_period = 1.0 / cam_rate_hz
        self._mcm_period = 1.0 / mcm_rate_hz
        self._next_cam = 0.0
        self._next_mcm = 0.0
        self._denm: DenmMessage | None = None
        self._tor_trigger: float | None = None
        self.pending_responses: dict[int, ComplianceStatus] = {}
        self.entered_zone = False

    def initial_state(self, x: float) -> VehicleState:
        """Automated driving at v_drive; the zone entry is the only trigger."""
        return VehicleState(x=x, v=self.profile.v_drive, trigger_x=0.0)

    # ---- shared phases ---------------------------------------------------

    def _note(self, state: VehicleState, event: str, level: str = "info", **payload) -> None:
        self.trace.record(state.t, self.entity, event, level, x=round(state.x, 6), **payload)

    def _transition(self, old: VehicleState, new: VehicleState) -> VehicleState:
        if new.mode != old.mode:
            self._note(new, "mode", mode=new.mode.value, previous=old.mode.value)
        return new

    def issue_tor(self, state: VehicleState) -> VehicleState:
        """Issue the single TOR of the run at the current position."""
        if state.mode != Mode.AUTOMATED:
            return state
        new = state.with_mode(
            Mode.TOR_PENDING,
            toc_x=state.x,
            deadline=state.t + self.profile.t_tor,
            trigger_x=None,
        )
        self._note(new, "tor_issued", toc_x=round(state.x, 6))
        if self.cfg.scheme == Scheme.MCM:
            records = tuple(
                replace(r, status=ComplianceStatus.FOLLOWING) for r in new.received_advices
            )
            for r in records:
                self.pending_responses[r.advice_id] = ComplianceStatus.FOLLOWING
            new = replace(new, received_advices=records)
        return self._transition(state, new)

    def _on_automated_boundary(self, state: VehicleState, boundary: Boundary) -> VehicleState:
        if boundary == Boundary.DEADLINE:
            # time-window ToC advice
            return self.issue_tor(state)
        if self._tor_trigger is not None and state.x <= self._tor_trigger + _EPS:
            return self.issue_tor(state)
        if state.x <= _EPS:
            if not self.entered_zone:
                self.entered_zone = True
                self._note(state, "zone_entered_without_tor", level="error")
            return state
        return replace(state, trigger_x=self._tor_trigger if self._tor_trigger is not None else 0.0)

    def _on_tor_expired(self, state: VehicleState) -> VehicleState | None:
        """Driver takeover check; returns the new state when the driver took over."""
        if self.takeover is not None and self.takeover(state):
            new = state.with_mode(Mode.MANUAL_DRIVING, a=0.0, trigger_x=None, deadline=None)
            self._note(new, "driver_takeover", level="error")
            return self._transition(state, new)
        return None

    def _brake_to_mrm_speed(self, state: VehicleState, **changes) -> VehicleState:
        return state.with_mode(
            Mode.MRM_BRAKE_TO_MRM_SPEED,
            a=self.profile.a_to_mrm,
            target_v=self.profile.v_mrm,
            **changes,
        )

    def _brake_to_stop(self, state: VehicleState) -> VehicleState:
        if state.v <= 0:
            return state.with_mode(Mode.STOPPED_ON_DRIVING_LANE, a=0.0, trigger_x=None)
        return state.with_mode(
            Mode.MRM_BRAKE_TO_STOP,
            a=self.profile.a_to_stop,
            target_v=0.0,
            trigger_x=None,
        )

    def _start_lane_change(self, state: VehicleState) -> VehicleState:
        return state.with_mode(
            Mode.LANE_CHANGE,
            a=0.0,
            lc_remaining=self.profile.d_lc,
            park_x=state.x,
            trigger_x=None,
        )

    def _adjacent_clearance(self, x: float) -> float | None:
        """Free length from x toward the zone when x is alongside a free section."""
        if x < 0:
            return None
        encounter = first_spot_encounter(x, self.occupancy, self.cfg)
        if encounter is None or encounter[0] != x:
            return None
        return encounter[1]

    # ---- DENM scheme -----------------------------------------------------

    def on_denm(self, msg: DenmMessage, state: VehicleState) -> VehicleState:
        """Act on a DENM once inside its relevance area.

        A DENM heard farther out is kept and arms the relevance trigger so
        the TOR is issued exactly at the relevance distance.
        """
        if self.cfg.scheme != Scheme.DENM or state.mode != Mode.AUTOMATED:
            return state
        relevance = msg.event_position + msg.relevance_distance
        if self._denm is None:
            self._note(state, "denm_processed", relevance=relevance)
        self._denm = msg
        if state.x <= relevance + _EPS:
            return self.issue_tor(state)
        self._tor_trigger = relevance
        return replace(state, trigger_x=relevance)

    def _search_limit(self, x_v: float) -> float:
        extra = self.cfg.denm_d_mrm.extra_search
        if extra is None:
            limit = self.profile.d_2stop
        else:
            limit = x_v - extra
        return min(limit, x_v)

    def _search(self, state: VehicleState) -> VehicleState:
        """Look for a qualifying stretch and schedule the next check."""
        x = state.x
        limit = state.search_limit_x if state.search_limit_x is not None else x
        view = SensorView.observe(max(x, 0.0), self.occupancy, self.sensor_range)
        below = None
        clearance = self._adjacent_clearance(x)
        if clearance is not None:
            if clearance >= self.profile.theta_park:
                self._note(state, "safe_spot_found", clearance=round(clearance, 6))
                return self._transition(state, self._start_lane_change(state))
            below = x - clearance
            self._note(state, "safe_spot_too_short", level="debug",
                       clearance=round(clearance, 6))
        if x <= limit + _EPS:
            return self._transition(state, self._brake_to_stop(state))
        j = view.nearest_free(below)
        candidate = min(x, (j + 1) * view.s_len) if j is not None else float("-inf")
        trigger = max(limit, candidate, x - self.sensor_range)
        return replace(state, trigger_x=min(trigger, x))

    def _on_denm_boundary(self, state: VehicleState, boundary: Boundary) -> VehicleState:
        mode = state.mode
        if mode == Mode.AUTOMATED:
            return self._on_automated_boundary(state, boundary)
        if mode == Mode.TOR_PENDING and boundary == Boundary.DEADLINE:
            taken = self._on_tor_expired(state)
            if taken is not None:
                return taken
            x_v = state.x - self.profile.d_2speedmrm
            new = self._brake_to_mrm_speed(state, search_limit_x=self._search_limit(x_v))
            return self._transition(state, new)
        if mode == Mode.MRM_BRAKE_TO_MRM_SPEED and boundary == Boundary.TARGET_SPEED:
            searching = state.with_mode(Mode.MRM_SEARCH)
            return self._search(self._transition(state, searching))
        if mode == Mode.MRM_SEARCH and boundary == Boundary.TRIGGER:
            return self._search(state)
        return state

    def denm_mrm_step(self, state: VehicleState, dt: float) -> VehicleState:
        """Advance one step under the DENM mode machine.

        The sensor view is taken afresh at every search checkpoint inside
        the step.
        """
        return advance(state, dt, self.profile, self._on_denm_boundary)

    # ---- MCM scheme ------------------------------------------------------

    def on_mcm(
        self, msg: McmMessage, state: VehicleState, now: float
    ) -> tuple[VehicleState, list[AdviceResponse]]:
        """Store advices addressed to this station and answer them."""
        if msg.station_type != StationType.RSU or not isinstance(
            msg.body, RsuSuggestedManeuverContainer
        ):
            return state, []
        responses: list[AdviceResponse] = []
        for advice in msg.body.advices_for(self.station_id):
            known = next(
                (r for r in state.received_advices if r.advice_id == advice.advice_id), None
            )
            if known is not None:
                responses.append(AdviceResponse(advice.advice_id, known.status))
                continue
            status = self._admit(advice, state)
            responses.append(AdviceResponse(advice.advice_id, status))
            self._note(state, "advice_received", advice_id=advice.advice_id,
                       kind=advice.kind.name.lower(), status=status.name.lower())
            if status == ComplianceStatus.REJECTED:
                continue
            kept = tuple(r for r in state.received_advices if r.advice.kind != advice.kind)
            state = replace(state, received_advices=kept + (AdviceRecord(advice, status),))
            if isinstance(advice, TransitionOfControl):
                state = self._arm_toc(advice, state, now)
        if state.mode != Mode.AUTOMATED:
            # execution already started
            responses = [
                AdviceResponse(r.advice_id, ComplianceStatus.FOLLOWING)
                if r.compliance_status != ComplianceStatus.REJECTED else r
                for r in responses
            ]
            state = replace(state, received_advices=tuple(
                replace(r, status=ComplianceStatus.FOLLOWING) for r in state.received_advices
            ))
        for r in responses:
            self.pending_responses[r.advice_id] = r.compliance_status
        return state, responses

    def _admit(self, advice, state: VehicleState) -> ComplianceStatus:
        if self.cfg.scheme != Scheme.MCM or advice.validate():
            return ComplianceStatus.REJECTED
        if isinstance(advice, TransitionOfControl):
            trigger = advice.trigger
            if state.mode != Mode.AUTOMATED:
                return ComplianceStatus.REJECTED
            if isinstance(trigger, DistanceRange) and state.x < trigger.near_x - _TRIGGER_SLACK:
                return ComplianceStatus.REJECTED
        return ComplianceStatus.RECEIVED_WILL_TRY

    def _arm_toc(self, advice: TransitionOfControl, state: VehicleState, now: float) -> VehicleState:
        trigger = advice.trigger
        if isinstance(trigger, TimeWindow):
            start = trigger.start / 1000
            if now >= start - _EPS:
                return self.issue_tor(state)
            return replace(state, deadline=start)
        self._tor_trigger = trigger.far_x
        if state.x <= trigger.far_x + _EPS:
            return self.issue_tor(state)
        return replace(state, trigger_x=trigger.far_x)

    def _spot_far_edge(self, state: VehicleState) -> float | None:
        record = state.advice(AdviceKind.SAFE_SPOT)
        return record.advice.range.far_x if record is not None else None

    def _arrive(self, state: VehicleState) -> VehicleState:
        """At the advised spot: park if it is free alongside, else stop."""
        clearance = self._adjacent_clearance(state.x)
        if clearance is not None and clearance >= self.profile.theta_park - _EPS:
            return self._transition(state, self._start_lane_change(state))
        logger.warning(f"Advised safe spot at x={state.x:.1f} is not usable; stopping on lane")
        self._note(state, "safe_spot_occupied", level="error")
        return self._transition(state, self._brake_to_stop(state))

    def _cruise_to(self, state: VehicleState, far: float) -> VehicleState:
        if state.x <= far + _EPS:
            return self._arrive(replace(state, x=min(state.x, far)))
        return self._transition(state, state.with_mode(Mode.MRM_CRUISE, a=0.0, trigger_x=far))

    def _on_mcm_boundary(self, state: VehicleState, boundary: Boundary) -> VehicleState:
        mode = state.mode
        far = self._spot_far_edge(state)
        if mode == Mode.AUTOMATED:
            return self._on_automated_boundary(state, boundary)
        if mode == Mode.TOR_PENDING and boundary == Boundary.DEADLINE:
            taken = self._on_tor_expired(state)
            if taken is not None:
                return taken
            if far is None:
                logger.warning("ToC expired without a SafeSpot advice; braking on lane")
                return self._transition(state, self._brake_to_mrm_speed(state))
            if self.cfg.mcm_cav_option == CavOption.RSU_ADVICE:
                return self._transition(state, self._brake_to_mrm_speed(state))
            return self._hold_then_brake(state, far)
        if mode == Mode.MRM_BRAKE_TO_MRM_SPEED and boundary == Boundary.TARGET_SPEED:
            if far is None:
                return self._transition(state, self._brake_to_stop(state))
            return self._cruise_to(state, far)
        if mode == Mode.MRM_CRUISE and boundary == Boundary.TRIGGER and far is not None:
            if state.x <= far + _EPS:
                return self._arrive(state)
            # cav_decision: d_2speedmrm before the spot
            return self._transition(state, self._brake_to_mrm_speed(state, trigger_x=None))
        return state

    def _hold_then_brake(self, state: VehicleState, far: float) -> VehicleState:
        brake_x = far + self.profile.d_2speedmrm
        if state.x > brake_x + _EPS:
            return self._transition(
                state, state.with_mode(Mode.MRM_CRUISE, a=0.0, trigger_x=brake_x)
            )
        if state.x <= far + _EPS or state.v <= self.profile.v_mrm:
            return self._cruise_to(state, far)
        a = calibrate_deceleration(state.v, self.profile.v_mrm, state.x - far)
        new = state.with_mode(Mode.MRM_BRAKE_TO_MRM_SPEED, a=a, target_v=self.profile.v_mrm)
        return self._transition(state, new)

    def mcm_step(self, state: VehicleState, dt: float) -> VehicleState:
        """Advance one step under the MCM mode machine."""
        return advance(state, dt, self.profile, self._on_mcm_boundary)

    # ---- both schemes ----------------------------------------------------

    def handle(self, state: VehicleState, inbox: list[Message], now: float) -> VehicleState:
        for msg in inbox:
            if isinstance(msg, DenmMessage):
                state = self.on_denm(msg, state)
            elif isinstance(msg, McmMessage):
                state, _ = self.on_mcm(msg, state, now)
        return state

    def step(self, state: VehicleState, dt: float) -> VehicleState:
        if self.cfg.scheme == Scheme.DENM:
            return self.denm_mrm_step(state, dt)
        return self.mcm_step(state, dt)

    def planned_trajectory(self, state: VehicleState) -> tuple[Waypoint, ...]:
        """Own prediction at +1, +2, ... s with x strictly decreasing."""
        points: list[Waypoint] = []
        last_x = quantize_distance(max(state.x, 0.0))
        ahead = replace(state, trigger_x=None, deadline=None)
        for _ in range(self.trajectory_waypoints):
            if ahead.mode.is_terminal:
                break
            ahead = advance(ahead, 1.0, self.profile)
            wp = Waypoint(max(ahead.x, 0.0), ahead.v)
            if wp.x < last_x:
                points.append(wp)
                last_x = wp.x
        if not points:
            points.append(Waypoint(max(state.x, 0.0), state.v))
        return tuple(points)

    def emit_cam(self, state: VehicleState, now: float) -> CamMessage | None:
        if now + 1e-9 < self._next_cam:
            return None
        self._next_cam += self._cam_period
        automated = state.mode != Mode.MANUAL_DRIVING
        return CamMessage(
            station_id=self.station_id,
            gen_time=round(now * 1000),
            position=max(state.x, 0.0),
            speed=state.v,
            acceleration=state.a,
            sae_level=self.sae_level if automated else 0,
        )

    def emit_mcm(
        self,
        state: VehicleState,
        now: float,
        responses: dict[int, ComplianceStatus] | None = None,
    ) -> McmMessage | None:
        """Vehicle MCM with the planned trajectory and pending responses."""
        if self.cfg.scheme != Scheme.MCM or now + 1e-9 < self._next_mcm:
            return None
        self._next_mcm += self._mcm_period
        pending = self.pending_responses if responses is None else responses
        body = VehicleManeuverContainer(
            dynamics=Dynamics(max(state.x, 0.0), state.v, state.a),
            planned_trajectory=self.planned_trajectory(state),
            advice_responses=tuple(
                AdviceResponse(advice_id, status) for advice_id, status in sorted(pending.items())
            ),
        )
        if responses is None:
            self.pending_responses = {}
        return McmMessage(self.station_id, round(now * 1000), StationType.VEHICLE, body)
