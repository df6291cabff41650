"""Discrete-time orchestration of one run and of run batches.

Tick order: deliver the frames sent during the previous tick, let the RSU
react, let the CAV handle its inbox and emit, queue the new frames, move
the CAV, then check for a terminal state.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable

import numpy as np

from toc_manager.cav.agent import CavAgent, TakeoverHook
from toc_manager.core.calibration import CalibrationProfile
from toc_manager.core.models import Mode
from toc_manager.core.trace import Trace
from toc_manager.rsu.agent import RsuAgent, far_trigger_bound, plan_tor
from toc_manager.scenario.scenario import (
    EmergencyLaneOccupancy,
    Placement,
    RsuOption,
    ScenarioConfig,
    Scheme,
    enumerate_layouts,
    random_layout,
)
from toc_manager.sim.channel import MessageBus
from toc_manager.sim.models import BatchMode, Outcome, RunResult
from toc_manager.sim.rng import run_seed, stream

if TYPE_CHECKING:
    from toc_manager.config.config import ConfigManager

logger = logging.getLogger(__name__)

# Callback: (completed runs, total runs)
ProgressCallback = Callable[[int, int], None]


class StuckRunError(RuntimeError):
    """A run did not reach a terminal state within the watchdog time."""


@dataclass(frozen=True)
class EngineSettings:
    """Station and batch knobs read from the tool settings."""

    cav_station_id: int = 7
    rsu_station_id: int = 1
    sae_level: int = 3
    sensor_range: float = 100.0
    cam_rate_hz: float = 10.0
    mcm_rate_hz: float = 1.0
    trajectory_waypoints: int = 3
    denm_rate_hz: float = 1.0
    mcm_retransmit_hz: float = 1.0
    start_offset: float = 100.0
    watchdog_factor: float = 10.0
    replicates: int = 1000
    workers: int = 1
    trace_level: str = "info"

    @classmethod
    def from_config(cls, config: ConfigManager | None) -> EngineSettings:
        if config is None:
            return cls()
        return cls(
            cav_station_id=int(config.get("vehicle.station_id", 7)),
            rsu_station_id=int(config.get("rsu.station_id", 1)),
            sae_level=int(config.get("vehicle.sae_level", 3)),
            sensor_range=float(config.get("vehicle.sensor_range", 100.0)),
            cam_rate_hz=float(config.get("vehicle.cam_rate_hz", 10.0)),
            mcm_rate_hz=float(config.get("vehicle.mcm_rate_hz", 1.0)),
            trajectory_waypoints=int(config.get("vehicle.trajectory_waypoints", 3)),
            denm_rate_hz=float(config.get("rsu.denm_rate_hz", 1.0)),
            mcm_retransmit_hz=float(config.get("rsu.mcm_retransmit_hz", 1.0)),
            start_offset=float(config.get("vehicle.start_offset", 100.0)),
            watchdog_factor=float(config.get("batch.watchdog_factor", 10.0)),
            replicates=int(config.get("batch.replicates", 1000)),
            workers=int(config.get("batch.workers", 1)),
            trace_level=str(config.get("logging.trace_level", "info")),
        )


def start_position(
    cfg: ScenarioConfig, profile: CalibrationProfile, settings: EngineSettings
) -> float:
    """Where the CAV enters the simulation, beyond any advisable trigger."""
    return far_trigger_bound(profile, cfg) + settings.start_offset


def _parked_window(occ: EmergencyLaneOccupancy, cfg: ScenarioConfig, park_x: float | None) -> int | None:
    if park_x is None:
        return None
    for k in occ.windows:
        if cfg.near_edge(k) < park_x <= cfg.far_edge(k) + 1e-6:
            return k
    return None


def run(
    cfg: ScenarioConfig,
    layout: EmergencyLaneOccupancy,
    seed: int,
    profile: CalibrationProfile | None = None,
    settings: EngineSettings | None = None,
    run_index: int = 0,
    takeover: TakeoverHook | None = None,
) -> RunResult:
    """Simulate one run until the CAV parks, stops or leaves automation.

    Equal (cfg, layout, seed) give identical results, trace included.
    """
    profile = profile or CalibrationProfile()
    settings = settings or EngineSettings()
    profile.validate(cfg.spot_length)
    trace = Trace(settings.trace_level)
    rsu = RsuAgent(
        cfg, profile, layout,
        rng=stream(seed, "schedule"),
        station_id=settings.rsu_station_id,
        denm_rate_hz=settings.denm_rate_hz,
        retransmit_hz=settings.mcm_retransmit_hz,
        trace=trace,
    )
    cav = CavAgent(
        cfg, profile, layout,
        station_id=settings.cav_station_id,
        sae_level=settings.sae_level,
        sensor_range=settings.sensor_range,
        cam_rate_hz=settings.cam_rate_hz,
        mcm_rate_hz=settings.mcm_rate_hz,
        trajectory_waypoints=settings.trajectory_waypoints,
        takeover=takeover,
        trace=trace,
    )
    bus = MessageBus(cfg.comm_range, cfg.p_loss, stream(seed, "channel"), trace)

    x0 = start_position(cfg, profile, settings)
    dt = cfg.timestep
    time_limit = settings.watchdog_factor * (x0 / profile.v_mrm + profile.t_tor + 10.0)
    state = cav.initial_state(x0)
    tick = 0
    while True:
        now = tick * dt
        inboxes = bus.deliver({rsu.entity: rsu.x, cav.entity: state.x}, now)
        for msg in rsu.tick(now, inboxes[rsu.entity], dt):
            bus.send(rsu.entity, rsu.x, msg, now)
        state = cav.handle(state, inboxes[cav.entity], now)
        for msg in (cav.emit_cam(state, now), cav.emit_mcm(state, now)):
            if msg is not None:
                bus.send(cav.entity, state.x, msg, now)
        state = cav.step(state, dt)
        tick += 1
        if state.mode.is_terminal or cav.entered_zone:
            break
        if tick * dt > time_limit:
            raise StuckRunError(
                f"Run {run_index} (layout {layout.layout_id}) still in "
                f"{state.mode.value} at x={state.x:.1f} after {tick * dt:.1f} s"
            )

    if cav.entered_zone and state.mode == Mode.AUTOMATED:
        outcome = Outcome.NO_TOC
    elif state.mode == Mode.PARKED_IN_SAFE_SPOT:
        outcome = Outcome.PARKED
    elif state.mode == Mode.MANUAL_DRIVING:
        outcome = Outcome.DRIVER_TAKEOVER
    else:
        outcome = Outcome.STOPPED_ON_LANE
    trace.record(state.t, "sim", "outcome", "error", outcome=outcome.value,
                 x=round(state.x, 6))
    logger.debug(f"Run {run_index} layout {layout.layout_id}: {outcome.value}")
    return RunResult(
        scheme=cfg.scheme.value,
        variant=cfg.variant,
        d_mrm=cfg.denm_d_mrm.value if cfg.scheme == Scheme.DENM else "",
        spot_count=len(layout.windows),
        layout_id=layout.layout_id,
        seed=seed,
        toc_x=state.toc_x,
        outcome=outcome,
        stop_x=state.x if outcome == Outcome.STOPPED_ON_LANE else None,
        dist_at_mrm_speed=state.dist_at_mrm_speed,
        parked_window=_parked_window(layout, cfg, state.park_x) if outcome == Outcome.PARKED else None,
        run_index=run_index,
        trace=list(trace.events),
    )


def is_randomized(cfg: ScenarioConfig) -> bool:
    """Whether runs on one layout differ by seed (distr_toc scheduling or loss)."""
    distr = cfg.scheme == Scheme.MCM and cfg.mcm_rsu_option == RsuOption.DISTR_TOC
    return distr or 0 < cfg.p_loss < 1


def _layout_for(cfg: ScenarioConfig, seed: int) -> EmergencyLaneOccupancy:
    if cfg.placement == Placement.EXPLICIT:
        return enumerate_layouts(cfg)[0]
    return random_layout(cfg, stream(seed, "layout"))


def batch(
    cfg: ScenarioConfig,
    mode: BatchMode | str = BatchMode.ENUMERATE,
    seed: int = 0,
    runs: int | None = None,
    profile: CalibrationProfile | None = None,
    settings: EngineSettings | None = None,
    replicates: int | None = None,
    progress_callback: ProgressCallback | None = None,
) -> list[RunResult]:
    """Run an enumeration or Monte-Carlo battery.

    enumerate: one run per layout, or layouts x replicates when the
    scheme is randomized. mc: `runs` runs, each drawing its own layout.
    Run i always uses run_seed(seed, i); results come back in run order
    whatever the number of workers.
    """
    mode = BatchMode(mode)
    profile = profile or CalibrationProfile()
    settings = settings or EngineSettings()
    cfg.ensure_valid()

    jobs: list[tuple[int, EmergencyLaneOccupancy, int]] = []
    if mode == BatchMode.ENUMERATE:
        reps = 1
        if is_randomized(cfg):
            reps = replicates if replicates is not None else settings.replicates
        index = 0
        for layout in enumerate_layouts(cfg):
            for _ in range(reps):
                jobs.append((index, layout, run_seed(seed, index)))
                index += 1
    else:
        if runs is None or runs <= 0:
            raise ValueError("Monte-Carlo batches need a positive run count")
        for i in range(runs):
            rs = run_seed(seed, i)
            jobs.append((i, _layout_for(cfg, rs), rs))

    logger.info(
        f"Batch {cfg.scheme.value}/{cfg.variant}: {len(jobs)} runs "
        f"({mode.value}, seed {seed}, {settings.workers} workers)"
    )

    def _one(job: tuple[int, EmergencyLaneOccupancy, int]) -> RunResult:
        index, layout, rs = job
        return run(cfg, layout, rs, profile, settings, run_index=index)

    results: list[RunResult] = []
    if settings.workers > 1:
        with ThreadPoolExecutor(max_workers=settings.workers) as executor:
            for result in executor.map(_one, jobs):
                results.append(result)
                if progress_callback:
                    progress_callback(len(results), len(jobs))
    else:
        for job in jobs:
            results.append(_one(job))
            if progress_callback:
                progress_callback(len(results), len(jobs))
    return results


def sample_toc_positions(
    cfg: ScenarioConfig,
    runs: int,
    seed: int,
    profile: CalibrationProfile | None = None,
    settings: EngineSettings | None = None,
) -> np.ndarray:
    """ToC positions of `runs` Monte-Carlo runs without simulating motion.

    Draws the same layout and schedule streams as batch(..., 'mc'), so
    entry i equals the toc_x of run i on an ideal channel.
    """
    profile = profile or CalibrationProfile()
    settings = settings or EngineSettings()
    cfg.ensure_valid()
    if cfg.scheme == Scheme.DENM:
        return np.full(runs, cfg.relevance_distance, dtype=float)
    x0 = start_position(cfg, profile, settings)
    values = np.empty(runs, dtype=float)
    for i in range(runs):
        rs = run_seed(seed, i)
        layout = _layout_for(cfg, rs)
        _, tor_x = plan_tor(x0, layout, profile, cfg, stream(rs, "schedule"))
        values[i] = tor_x
    return values
