"""Scenario files: flat ``key = value`` text with '#' comments.

Keys are the ScenarioConfig field names. Explicit placement is written as
the window indices, e.g. ``placement = 3, 10``.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from enum import Enum
from pathlib import Path
from typing import Any

from toc_manager.scenario.scenario import (
    CavOption,
    DenmVariant,
    Placement,
    RsuOption,
    ScenarioConfig,
    ScenarioError,
    Scheme,
)

logger = logging.getLogger(__name__)

_ENUM_FIELDS: dict[str, type[Enum]] = {
    "scheme": Scheme,
    "denm_d_mrm": DenmVariant,
    "mcm_rsu_option": RsuOption,
    "mcm_cav_option": CavOption,
}
_INT_FIELDS = {"n_sections", "spot_sections", "spot_count"}
_FIELD_NAMES = [f.name for f in dataclasses.fields(ScenarioConfig) if f.name != "explicit_windows"]


def _parse_placement(raw: str) -> dict[str, Any]:
    text = raw.strip().lower()
    try:
        return {"placement": Placement(text), "explicit_windows": ()}
    except ValueError:
        pass
    if text.startswith("explicit"):
        text = text[len("explicit"):].strip(" :()[]")
    windows = tuple(int(part) for part in text.replace(";", ",").split(",") if part.strip())
    if not windows:
        raise ValueError(f"no window indices in '{raw}'")
    return {"placement": Placement.EXPLICIT, "explicit_windows": windows}


def _parse_value(key: str, raw: str) -> dict[str, Any]:
    if key == "placement":
        return _parse_placement(raw)
    if key in _ENUM_FIELDS:
        return {key: _ENUM_FIELDS[key](raw.strip().lower())}
    if key in _INT_FIELDS:
        return {key: int(raw)}
    return {key: float(raw)}


def parse_overrides(pairs: dict[str, str]) -> dict[str, Any]:
    """Convert string values into typed ScenarioConfig fields.

    Raises ScenarioError listing every unknown key and unparsable value.
    """
    values: dict[str, Any] = {}
    problems: list[str] = []
    for key, raw in pairs.items():
        if key not in _FIELD_NAMES:
            problems.append(f"unknown key '{key}'")
            continue
        try:
            values.update(_parse_value(key, str(raw)))
        except ValueError as e:
            problems.append(f"{key}: invalid value '{raw}' ({e})")
    if problems:
        raise ScenarioError(problems)
    return values


def apply_overrides(cfg: ScenarioConfig, **overrides: Any) -> ScenarioConfig:
    """Return cfg with overrides applied; None values are skipped.

    Values may be typed or raw strings as they come from the command line.
    """
    given = {k: v for k, v in overrides.items() if v is not None}
    raw = {k: v for k, v in given.items() if isinstance(v, str)}
    typed = {k: v for k, v in given.items() if not isinstance(v, str)}
    typed.update(parse_overrides(raw))
    if "explicit_windows" in typed and "placement" not in typed:
        typed["placement"] = Placement.EXPLICIT
    return dataclasses.replace(cfg, **typed).ensure_valid()


def load_scenario(path: str | Path) -> ScenarioConfig:
    """Load a scenario file; missing keys keep their defaults."""
    path = Path(path)
    if not path.exists():
        raise ScenarioError([f"scenario file not found: {path}"])
    pairs: dict[str, str] = {}
    problems: list[str] = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                problems.append(f"line {lineno}: expected 'key = value', got '{line}'")
                continue
            key, value = (part.strip() for part in line.split("=", 1))
            if key in pairs:
                logger.warning(f"{path}:{lineno}: duplicate key '{key}', last value wins")
            pairs[key] = value
    if problems:
        raise ScenarioError(problems)
    cfg = dataclasses.replace(ScenarioConfig(), **parse_overrides(pairs))
    logger.info(f"Loaded scenario {path} ({cfg.scheme.value}/{cfg.variant})")
    return cfg.ensure_valid()


def _format_value(cfg: ScenarioConfig, name: str) -> str:
    if name == "placement" and cfg.placement == Placement.EXPLICIT:
        return ", ".join(str(k) for k in cfg.explicit_windows)
    value = getattr(cfg, name)
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, float) and math.isinf(value):
        return "inf"
    return str(value)


def save_scenario(cfg: ScenarioConfig, path: str | Path) -> None:
    """Write every field so the file documents the full scenario."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["# ToC manager scenario"]
    lines += [f"{name} = {_format_value(cfg, name)}" for name in _FIELD_NAMES]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
