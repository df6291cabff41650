"""Constant-acceleration point-mass motion with exact phase splitting.

A step is cut at every instant where the vehicle reaches its target
speed, passes its trigger position, hits its deadline or finishes a lane
change. Values are snapped at the cut so the final state does not depend
on how dt is chosen.
"""

from __future__ import annotations

import math
from dataclasses import replace
from enum import Enum
from typing import Callable

from toc_manager.core.calibration import CalibrationProfile
from toc_manager.core.models import MRM_SPEED_MODES, Lane, Mode, VehicleState

_EPS = 1e-9
_MAX_ZERO_STEPS = 64


class Boundary(Enum):
    TARGET_SPEED = "target_speed"
    TRIGGER = "trigger"
    DEADLINE = "deadline"


class BoundaryLoopError(RuntimeError):
    """The mode machine kept scheduling boundaries without time passing."""


BoundaryHandler = Callable[[VehicleState, Boundary], VehicleState]


def _time_to_distance(d: float, v: float, a: float) -> float:
    """Time needed to cover d meters starting at v with acceleration a."""
    if d <= 0:
        return 0.0
    disc = v * v + 2.0 * a * d
    if disc < 0:
        return math.inf
    denom = v + math.sqrt(disc)
    if denom <= 0:
        return math.inf
    return 2.0 * d / denom


def _speed_target(state: VehicleState, profile: CalibrationProfile) -> float | None:
    if state.a < 0:
        return max(state.target_v if state.target_v is not None else 0.0, 0.0)
    if state.a > 0:
        return min(
            state.target_v if state.target_v is not None else profile.v_drive,
            profile.v_drive,
        )
    return None


def _next_boundary(
    state: VehicleState, profile: CalibrationProfile
) -> tuple[float, str | None]:
    candidates: list[tuple[float, str]] = []
    target = _speed_target(state, profile)
    if target is not None:
        candidates.append((max((target - state.v) / state.a, 0.0), "speed"))
    if state.mode == Mode.LANE_CHANGE:
        candidates.append(
            (_time_to_distance(state.lc_remaining, state.v, state.a), "lane_change")
        )
    if state.trigger_x is not None:
        candidates.append(
            (_time_to_distance(state.x - state.trigger_x, state.v, state.a), "trigger")
        )
    if state.deadline is not None:
        candidates.append((max(state.deadline - state.t, 0.0), "deadline"))
    if not candidates:
        return math.inf, None
    return min(candidates, key=lambda c: c[0])


def _move(state: VehicleState, h: float, profile: CalibrationProfile) -> VehicleState:
    dx = state.v * h + 0.5 * state.a * h * h
    dx = max(dx, 0.0)
    v = min(max(state.v + state.a * h, 0.0), profile.v_drive)
    extra = {}
    if state.mode in MRM_SPEED_MODES and state.a == 0 and state.at_speed(profile.v_mrm):
        extra["dist_at_mrm_speed"] = state.dist_at_mrm_speed + dx
    if state.mode == Mode.LANE_CHANGE:
        extra["lc_remaining"] = max(state.lc_remaining - dx, 0.0)
    return replace(state, x=state.x - dx, v=v, t=state.t + h, **extra)


def _snap(
    state: VehicleState, kind: str, profile: CalibrationProfile
) -> tuple[VehicleState, Boundary | None]:
    if kind == "speed":
        target = _speed_target(state, profile)
        state = replace(state, v=target, a=0.0)
        if state.mode == Mode.MRM_BRAKE_TO_STOP and target == 0.0:
            return state.with_mode(Mode.STOPPED_ON_DRIVING_LANE, target_v=None), None
        return state, Boundary.TARGET_SPEED
    if kind == "lane_change":
        parked = state.with_mode(
            Mode.PARKED_IN_SAFE_SPOT,
            lane=Lane.EMERGENCY,
            v=0.0,
            a=0.0,
            lc_remaining=0.0,
            target_v=None,
            trigger_x=None,
            deadline=None,
        )
        return parked, None
    if kind == "trigger":
        x = min(state.x, state.trigger_x)
        return replace(state, x=x, trigger_x=None), Boundary.TRIGGER
    t = max(state.t, state.deadline)
    return replace(state, t=t, deadline=None), Boundary.DEADLINE


def advance(
    state: VehicleState,
    dt: float,
    profile: CalibrationProfile,
    on_boundary: BoundaryHandler | None = None,
) -> VehicleState:
    """Move the vehicle forward by dt seconds.

    on_boundary is called at each target-speed, trigger or deadline
    crossing and returns the state to continue with (the next phase).
    Without a handler the vehicle holds the reached speed.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    t_end = state.t + dt
    zero_steps = 0
    while not state.mode.is_terminal:
        remaining = t_end - state.t
        if remaining <= _EPS:
            break
        h, kind = _next_boundary(state, profile)
        if kind is None or h >= remaining:
            state = _move(state, remaining, profile)
            break
        if h > _EPS:
            state = _move(state, h, profile)
            zero_steps = 0
        else:
            zero_steps += 1
            if zero_steps > _MAX_ZERO_STEPS:
                raise BoundaryLoopError(
                    f"Boundary '{kind}' repeats without progress at x={state.x:.3f}, "
                    f"mode={state.mode.value}"
                )
        state, boundary = _snap(state, kind, profile)
        if boundary is not None and on_boundary is not None:
            state = on_boundary(state, boundary)
    return replace(state, t=t_end)
