"""Tests for calibration, vehicle state, kinematics and traces."""

import math

import numpy as np
import pytest

from toc_manager.core.calibration import (
    CalibrationProfile,
    InvalidCalibrationError,
    InvalidParameterError,
    braking_distance,
    calibrate_deceleration,
)
from toc_manager.core.kinematics import Boundary, BoundaryLoopError, advance
from toc_manager.core.models import Lane, Mode, TERMINAL_MODES, VehicleState
from toc_manager.core.trace import Trace


@pytest.fixture
def profile():
    return CalibrationProfile()


class TestCalibration:
    def test_default_decelerations(self, profile):
        assert profile.a_to_mrm == pytest.approx(-0.8231, abs=1e-4)
        assert profile.a_to_stop == pytest.approx(-0.6431, abs=1e-4)

    def test_derived_distances(self, profile):
        assert profile.d_tor == pytest.approx(166.67)
        assert profile.d_toc(15.0) == pytest.approx(331.67)

    def test_calibrate_is_inverse_of_braking_distance(self):
        a = calibrate_deceleration(16.667, 5.556, 150.0)
        assert braking_distance(16.667, 5.556, a) == pytest.approx(150.0)

    @pytest.mark.parametrize("v0,v1,d", [(10, 5, 0), (10, 5, -1), (5, 10, 20), (10, -1, 20)])
    def test_calibrate_rejects_bad_input(self, v0, v1, d):
        with pytest.raises(InvalidCalibrationError):
            calibrate_deceleration(v0, v1, d)

    def test_braking_distance_rejects_acceleration(self):
        with pytest.raises(InvalidParameterError):
            braking_distance(10, 5, 0.5)
        with pytest.raises(InvalidParameterError):
            braking_distance(5, 10, -1)

    def test_profile_rejects_mrm_above_drive(self):
        with pytest.raises(InvalidCalibrationError):
            CalibrationProfile(v_mrm=20.0)

    def test_theta_park_bounded_by_spot(self, profile):
        profile.validate(75.0)
        with pytest.raises(InvalidCalibrationError):
            CalibrationProfile(theta_park=80.0).validate(75.0)


class TestVehicleState:
    def test_terminal_modes(self):
        assert Mode.PARKED_IN_SAFE_SPOT.is_terminal
        assert Mode.STOPPED_ON_DRIVING_LANE.is_terminal
        assert not Mode.MRM_SEARCH.is_terminal
        assert len(TERMINAL_MODES) == 3

    def test_with_mode_keeps_other_fields(self):
        state = VehicleState(x=300.0, v=10.0, toc_x=500.0)
        new = state.with_mode(Mode.MRM_CRUISE, a=0.0)
        assert new.mode == Mode.MRM_CRUISE
        assert new.toc_x == 500.0
        assert state.mode == Mode.AUTOMATED


class TestAdvance:
    def test_cruise(self, profile):
        state = VehicleState(x=1000.0, v=profile.v_drive)
        new = advance(state, 1.0, profile)
        assert new.x == pytest.approx(1000.0 - profile.v_drive)
        assert new.t == pytest.approx(1.0)

    def test_brake_to_mrm_reaches_speed_at_calibrated_distance(self, profile):
        state = VehicleState(x=400.0, v=profile.v_drive, a=profile.a_to_mrm,
                             target_v=profile.v_mrm, mode=Mode.MRM_BRAKE_TO_MRM_SPEED)
        hits = []

        def on_boundary(s, boundary):
            hits.append((s.x, boundary))
            return s

        for _ in range(300):
            state = advance(state, 0.1, profile, on_boundary)
        assert hits[0][1] == Boundary.TARGET_SPEED
        assert hits[0][0] == pytest.approx(250.0, abs=1e-6)
        assert state.v == pytest.approx(profile.v_mrm)
        assert state.a == 0.0

    def test_brake_to_stop_ends_stopped(self, profile):
        state = VehicleState(x=100.0, v=profile.v_mrm, a=profile.a_to_stop, target_v=0.0,
                             mode=Mode.MRM_BRAKE_TO_STOP)
        for _ in range(100):
            state = advance(state, 0.1, profile)
        assert state.mode == Mode.STOPPED_ON_DRIVING_LANE
        assert state.x == pytest.approx(76.0, abs=1e-6)
        assert state.v == 0.0

    def test_trigger_snaps_exactly(self, profile):
        state = VehicleState(x=510.0, v=profile.v_drive, trigger_x=500.0)
        seen = []

        def on_boundary(s, boundary):
            seen.append(s.x)
            return s

        advance(state, 1.0, profile, on_boundary)
        assert seen == [pytest.approx(500.0)]

    def test_lane_change_parks(self, profile):
        state = VehicleState(x=75.0, v=profile.v_mrm, mode=Mode.LANE_CHANGE,
                             lc_remaining=profile.d_lc)
        for _ in range(200):
            state = advance(state, 0.1, profile)
        assert state.mode == Mode.PARKED_IN_SAFE_SPOT
        assert state.lane == Lane.EMERGENCY
        assert state.x == pytest.approx(75.0 - profile.d_lc)

    def test_distance_at_mrm_speed_accumulates_only_in_mrm_modes(self, profile):
        cruise = VehicleState(x=200.0, v=profile.v_mrm, mode=Mode.MRM_CRUISE)
        assert advance(cruise, 2.0, profile).dist_at_mrm_speed == pytest.approx(2 * profile.v_mrm)
        automated = VehicleState(x=200.0, v=profile.v_mrm)
        assert advance(automated, 2.0, profile).dist_at_mrm_speed == 0.0

    def test_timestep_invariance(self, profile):
        def brake_after(dt):
            state = VehicleState(x=400.0, v=profile.v_drive, deadline=3.0)

            def on_boundary(s, boundary):
                if boundary == Boundary.DEADLINE:
                    return s.with_mode(Mode.MRM_BRAKE_TO_MRM_SPEED, a=profile.a_to_mrm,
                                       target_v=profile.v_mrm)
                return s

            for _ in range(int(round(30.0 / dt))):
                state = advance(state, dt, profile, on_boundary)
            return state.x

        assert brake_after(0.01) == pytest.approx(brake_after(0.1), abs=1e-6)

    def test_rejects_non_positive_dt(self, profile):
        with pytest.raises(ValueError):
            advance(VehicleState(x=10.0, v=1.0), 0.0, profile)

    def test_boundary_loop_detected(self, profile):
        state = VehicleState(x=100.0, v=1.0, trigger_x=100.0)

        def rearm(s, boundary):
            return s.with_mode(s.mode, trigger_x=s.x)

        with pytest.raises(BoundaryLoopError):
            advance(state, 0.1, profile, rearm)

    def test_randomized_states_never_move_backward(self, profile):
        rng = np.random.default_rng(3)
        for _ in range(200):
            v = float(rng.uniform(0, profile.v_drive))
            state = VehicleState(x=float(rng.uniform(0, 1000)), v=v,
                                 a=float(rng.uniform(-1.0, 0.0)), target_v=0.0)
            new = advance(state, float(rng.uniform(0.01, 1.0)), profile)
            assert new.x <= state.x
            assert new.v >= 0.0
            assert not math.isnan(new.x)


class TestTrace:
    def test_levels_filter(self):
        trace = Trace("info")
        trace.record(0.0, "cav", "outcome", "error")
        trace.record(0.1, "cav", "tor_issued", "info", x=500.0)
        trace.record(0.2, "cav", "tx", "debug")
        assert [e.event for e in trace.events] == ["outcome", "tor_issued"]

    def test_event_to_dict(self):
        trace = Trace("debug")
        trace.record(1.23456789, "rsu", "advice_issued", target=7)
        assert trace.events[0].to_dict() == {
            "t": 1.234568, "entity": "rsu", "event": "advice_issued", "payload": {"target": 7}
        }

    def test_unknown_level(self):
        with pytest.raises(ValueError):
            Trace("verbose")
