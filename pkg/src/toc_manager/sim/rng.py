"""Deterministic random streams per (master seed, run index, purpose)."""

from __future__ import annotations

import numpy as np

PURPOSES = {"layout": 0, "schedule": 1, "channel": 2}


def run_seed(master_seed: int, run_index: int) -> int:
    """Sub-seed of one run; depends only on the master seed and the index."""
    if master_seed < 0 or run_index < 0:
        raise ValueError("Seeds and run indices must be non-negative")
    ss = np.random.SeedSequence([int(master_seed), int(run_index)])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def stream(seed: int, purpose: str) -> np.random.Generator:
    """Independent generator for one purpose of one run."""
    if purpose not in PURPOSES:
        raise ValueError(f"Unknown random stream '{purpose}'")
    return np.random.default_rng([int(seed), PURPOSES[purpose]])
