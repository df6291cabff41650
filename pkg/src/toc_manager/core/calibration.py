"""Kinematic calibration of the CAV from the measured ToC distances."""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from toc_manager.config.config import ConfigManager


class InvalidCalibrationError(ValueError):
    """Raised when a calibration input cannot yield a braking deceleration."""


class InvalidParameterError(ValueError):
    """Raised when a kinematic helper receives an out-of-domain argument."""


def calibrate_deceleration(v0: float, v1: float, d: float) -> float:
    """Constant deceleration that brings v0 down to v1 over d meters."""
    if d <= 0:
        raise InvalidCalibrationError(f"Braking distance must be positive, got {d}")
    if v1 < 0:
        raise InvalidCalibrationError(f"Final speed must be non-negative, got {v1}")
    if v1 >= v0:
        raise InvalidCalibrationError(
            f"Final speed {v1} must be below initial speed {v0}"
        )
    return (v1 * v1 - v0 * v0) / (2.0 * d)


def braking_distance(v0: float, v1: float, a: float) -> float:
    """Distance covered while braking from v0 to v1 at constant a < 0."""
    if a >= 0:
        raise InvalidParameterError(f"Deceleration must be negative, got {a}")
    if not v0 >= v1 >= 0:
        raise InvalidParameterError(
            f"Speeds must satisfy v0 >= v1 >= 0, got v0={v0}, v1={v1}"
        )
    return (v1 * v1 - v0 * v0) / (2.0 * a)


@dataclass(frozen=True)
class CalibrationProfile:
    """Speeds, TOR lead time and the measured distance characterization."""

    v_drive: float = 16.667  # 60 km/h
    v_mrm: float = 5.556  # 20 km/h
    t_tor: float = 10.0
    d_2speedmrm: float = 150.0
    d_2stop: float = 24.0
    d_lc: float = 68.0
    # Minimum free clearance ahead needed to complete the parking maneuver
    theta_park: float = 50.0

    def __post_init__(self) -> None:
        if self.v_drive <= 0 or self.v_mrm <= 0:
            raise InvalidCalibrationError("Speeds must be positive")
        if self.t_tor <= 0:
            raise InvalidCalibrationError(f"t_tor must be positive, got {self.t_tor}")
        if self.d_lc <= 0:
            raise InvalidCalibrationError(f"d_lc must be positive, got {self.d_lc}")
        if self.theta_park <= 0:
            raise InvalidCalibrationError(
                f"theta_park must be positive, got {self.theta_park}"
            )
        # Both decelerations must be derivable
        calibrate_deceleration(self.v_drive, self.v_mrm, self.d_2speedmrm)
        calibrate_deceleration(self.v_mrm, 0.0, self.d_2stop)

    @property
    def a_to_mrm(self) -> float:
        return calibrate_deceleration(self.v_drive, self.v_mrm, self.d_2speedmrm)

    @property
    def a_to_stop(self) -> float:
        return calibrate_deceleration(self.v_mrm, 0.0, self.d_2stop)

    @property
    def d_tor(self) -> float:
        """Distance driven at v_drive during the TOR lead time."""
        return self.v_drive * self.t_tor

    def d_toc(self, y_margin: float) -> float:
        """Trigger-to-v_mrm distance the RSU plans with, margin included."""
        return self.d_tor + self.d_2speedmrm + y_margin

    def validate(self, spot_length: float) -> None:
        """Check the parking clearance against the safe-spot length."""
        if not 0 < self.theta_park <= spot_length:
            raise InvalidCalibrationError(
                f"theta_park must lie in (0, {spot_length}], got {self.theta_park}"
            )

    @classmethod
    def from_config(cls, config: ConfigManager | None) -> CalibrationProfile:
        """Build a profile from the 'calibration' settings section."""
        if config is None:
            return cls()
        section = config.get("calibration", {}) or {}
        known = {k: float(v) for k, v in section.items() if k in cls.__dataclass_fields__}
        return cls(**known)
