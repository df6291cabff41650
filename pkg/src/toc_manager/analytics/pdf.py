"""Closed-form distributions of the ToC position and histogram comparison.

A distribution is a set of atoms (point masses) plus piecewise-constant
bands. Histogram bins are s_len wide and aligned on the nearest possible
trigger, d_toc + spot length, shifted slightly downward so that atoms and
wire-rounded samples sitting on an edge fall into a single bin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from toc_manager.core.calibration import CalibrationProfile
from toc_manager.scenario.scenario import ScenarioConfig, Scheme, RsuOption

EDGE_GUARD = 1e-3


class DegenerateGeometryError(ValueError):
    """The geometry leaves no room for the distributed ToC range."""


@dataclass(frozen=True)
class AnalyticalPdf:
    atoms: tuple[tuple[float, float], ...] = ()
    bands: tuple[tuple[float, float, float], ...] = ()

    def total_mass(self) -> float:
        return math.fsum(m for _, m in self.atoms) + math.fsum(
            d * (hi - lo) for lo, hi, d in self.bands
        )

    def validate(self, tol: float = 1e-9) -> list[str]:
        problems: list[str] = []
        if any(m < 0 for _, m in self.atoms):
            problems.append("negative atom mass")
        if any(d < 0 for _, _, d in self.bands):
            problems.append("negative band density")
        ordered = sorted(self.bands)
        for (_, hi, _), (lo, _, _) in zip(ordered, ordered[1:]):
            if lo < hi - 1e-12:
                problems.append(f"bands overlap at {lo}")
        total = self.total_mass()
        if abs(total - 1.0) > tol:
            problems.append(f"total mass {total} differs from 1")
        return problems

    def mass_between(self, lo: float, hi: float) -> float:
        """Mass on [lo, hi)."""
        mass = math.fsum(m for x, m in self.atoms if lo <= x < hi)
        for b_lo, b_hi, density in self.bands:
            overlap = min(hi, b_hi) - max(lo, b_lo)
            if overlap > 0:
                mass += density * overlap
        return mass

    def bin_masses(self, edges: np.ndarray) -> np.ndarray:
        return np.array([self.mass_between(lo, hi) for lo, hi in zip(edges[:-1], edges[1:])])

    @property
    def support(self) -> tuple[float, float]:
        xs = [x for x, _ in self.atoms] + [v for lo, hi, _ in self.bands for v in (lo, hi)]
        return min(xs), max(xs)


@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    masses: np.ndarray
    outside: float = 0.0


def reference_position(cfg: ScenarioConfig, profile: CalibrationProfile) -> float:
    """Nearest possible trigger: d_toc plus one spot length."""
    return profile.d_toc(cfg.y_margin) + cfg.spot_length


def pdf_denm(cfg: ScenarioConfig) -> AnalyticalPdf:
    """All ToCs at the relevance distance."""
    return AnalyticalPdf(atoms=((cfg.relevance_distance, 1.0),))


def pdf_min_dmrm(cfg: ScenarioConfig, profile: CalibrationProfile) -> AnalyticalPdf:
    """One equally likely atom per window, s_len apart."""
    n = cfg.n_windows
    ref = reference_position(cfg, profile)
    return AnalyticalPdf(atoms=tuple((ref + i * cfg.s_len, 1.0 / n) for i in range(n)))


def pdf_distr_toc(cfg: ScenarioConfig, profile: CalibrationProfile) -> AnalyticalPdf:
    """Uniform trigger per window over [its minimum distance, max_toc_range].

    Window i (probability 1/n) spreads its mass uniformly over a range
    i * s_len shorter than window 0's, so band k collects the densities of
    windows 0..k-1. The last band runs up to max_toc_range. Assumes the
    one-spot scenario, where each window is assigned with probability 1/n.
    """
    n = cfg.n_windows
    ref = reference_position(cfg, profile)
    toc_range = cfg.max_toc_range - ref
    if toc_range <= (n - 1) * cfg.s_len:
        raise DegenerateGeometryError(
            f"max_toc_range {cfg.max_toc_range} must exceed "
            f"{ref + (n - 1) * cfg.s_len:.1f} for {n} windows"
        )
    p_park = 1.0 / n
    bands = []
    density = 0.0
    for k in range(1, n + 1):
        density += p_park / (toc_range - (k - 1) * cfg.s_len)
        lo = ref + (k - 1) * cfg.s_len
        hi = ref + k * cfg.s_len if k < n else cfg.max_toc_range
        bands.append((lo, hi, density))
    return AnalyticalPdf(bands=tuple(bands))


def pdf_for(cfg: ScenarioConfig, profile: CalibrationProfile) -> AnalyticalPdf:
    """Closed form matching the scenario's scheme and scheduling option."""
    if cfg.scheme == Scheme.DENM:
        return pdf_denm(cfg)
    if cfg.mcm_rsu_option == RsuOption.MIN_DMRM:
        return pdf_min_dmrm(cfg, profile)
    return pdf_distr_toc(cfg, profile)


def aligned_edges(lo: float, hi: float, origin: float, width: float) -> np.ndarray:
    """Bin edges origin - guard + k * width covering [lo, hi]."""
    if width <= 0:
        raise ValueError(f"bin width must be positive, got {width}")
    start = origin - EDGE_GUARD
    k_lo = math.floor((lo - start) / width)
    k_hi = math.floor((hi - start) / width) + 1
    return start + width * np.arange(k_lo, k_hi + 1)


def toc_histogram(
    values, origin: float, width: float, span: tuple[float, float] | None = None
) -> Histogram:
    """Normalized histogram of ToC positions on aligned bins."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("Cannot build a histogram from no values")
    lo, hi = float(values.min()), float(values.max())
    if span is not None:
        lo, hi = min(lo, span[0]), max(hi, span[1])
    edges = aligned_edges(lo, hi, origin, width)
    counts, _ = np.histogram(values, bins=edges)
    masses = counts / values.size
    return Histogram(edges, masses, float(1.0 - masses.sum()))


def l1_distance(hist: Histogram, pdf: AnalyticalPdf) -> float:
    """Sum of absolute bin-mass differences, mass off the bins included."""
    analytical = pdf.bin_masses(hist.edges)
    outside_pdf = max(1.0 - float(analytical.sum()), 0.0)
    return float(np.abs(hist.masses - analytical).sum() + hist.outside + outside_pdf)
