"""KPI aggregation over run results and CSV export of summaries and PDFs."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from toc_manager.analytics.pdf import AnalyticalPdf, Histogram, toc_histogram
from toc_manager.sim.models import Outcome, RunResult
from toc_manager.sim.results import write_csv

logger = logging.getLogger(__name__)

SUMMARY_COLUMNS = [
    "scheme",
    "variant",
    "spot_count",
    "runs",
    "parked",
    "success_rate",
    "stop_x_mean",
    "stop_x_max",
    "dist_p5",
    "dist_q1",
    "dist_median",
    "dist_q3",
    "dist_p95",
    "dist_max",
]

PDF_COLUMNS = ["x_lo", "x_hi", "mass"]


class EmptyResultsError(ValueError):
    """Raised when aggregating an empty result list."""


@dataclass(frozen=True)
class DistanceStats:
    """Box statistics; whiskers at the 5th and 95th percentiles."""

    p5: float
    q1: float
    median: float
    q3: float
    p95: float
    max: float

    @classmethod
    def of(cls, values: np.ndarray) -> DistanceStats:
        p5, q1, med, q3, p95 = np.percentile(values, [5, 25, 50, 75, 95])
        return cls(float(p5), float(q1), float(med), float(q3), float(p95),
                   float(values.max()))


@dataclass(frozen=True)
class KpiSummary:
    scheme: str
    variant: str
    spot_count: int
    runs: int
    parked: int
    outcomes: dict[str, int]
    stop_x_mean: float | None
    stop_x_max: float | None
    dist: DistanceStats
    toc: Histogram | None

    @property
    def success_rate(self) -> float:
        return self.parked / self.runs

    def to_row(self) -> dict[str, Any]:
        def fmt(value: float | None) -> str:
            return "" if value is None else f"{value:.3f}"

        return {
            "scheme": self.scheme,
            "variant": self.variant,
            "spot_count": self.spot_count,
            "runs": self.runs,
            "parked": self.parked,
            "success_rate": f"{self.success_rate:.6f}",
            "stop_x_mean": fmt(self.stop_x_mean),
            "stop_x_max": fmt(self.stop_x_max),
            "dist_p5": fmt(self.dist.p5),
            "dist_q1": fmt(self.dist.q1),
            "dist_median": fmt(self.dist.median),
            "dist_q3": fmt(self.dist.q3),
            "dist_p95": fmt(self.dist.p95),
            "dist_max": fmt(self.dist.max),
        }


def aggregate(
    results: list[RunResult],
    toc_origin: float | None = None,
    bin_width: float = 25.0,
) -> KpiSummary:
    """Summarize a batch of runs of one scenario variant.

    The ToC histogram is aligned on toc_origin (the smallest observed
    trigger when not given); runs without a ToC are left out of it.
    """
    if not results:
        raise EmptyResultsError("No run results to aggregate")

    outcomes = {o.value: 0 for o in Outcome}
    for r in results:
        outcomes[r.outcome.value] += 1

    stops = np.array([r.stop_x for r in results if r.stop_x is not None], dtype=float)
    dist = np.array([r.dist_at_mrm_speed for r in results], dtype=float)
    tocs = np.array([r.toc_x for r in results if r.toc_x is not None], dtype=float)

    hist = None
    if tocs.size:
        origin = float(tocs.min()) if toc_origin is None else toc_origin
        hist = toc_histogram(tocs, origin, bin_width)

    first = results[0]
    return KpiSummary(
        scheme=first.scheme,
        variant=first.variant,
        spot_count=first.spot_count,
        runs=len(results),
        parked=outcomes[Outcome.PARKED.value],
        outcomes=outcomes,
        stop_x_mean=float(stops.mean()) if stops.size else None,
        stop_x_max=float(stops.max()) if stops.size else None,
        dist=DistanceStats.of(dist),
        toc=hist,
    )


def export_summary_csv(summaries: list[KpiSummary], path: str | Path) -> None:
    write_csv(path, [s.to_row() for s in summaries], SUMMARY_COLUMNS)
    logger.info(f"Wrote {len(summaries)} summary rows to {path}")


def export_pdf_csv(pdf: AnalyticalPdf, path: str | Path, edges: np.ndarray | None = None) -> None:
    """One row per atom (x_lo == x_hi) and band, or per bin when edges are given."""
    if edges is None:
        rows = [{"x_lo": f"{x:.3f}", "x_hi": f"{x:.3f}", "mass": f"{m:.9f}"} for x, m in pdf.atoms]
        rows += [
            {"x_lo": f"{lo:.3f}", "x_hi": f"{hi:.3f}", "mass": f"{d * (hi - lo):.9f}"}
            for lo, hi, d in pdf.bands
        ]
    else:
        masses = pdf.bin_masses(edges)
        rows = [
            {"x_lo": f"{lo:.3f}", "x_hi": f"{hi:.3f}", "mass": f"{m:.9f}"}
            for lo, hi, m in zip(edges[:-1], edges[1:], masses)
        ]
    write_csv(path, rows, PDF_COLUMNS)


def export_histogram_csv(hist: Histogram, path: str | Path) -> None:
    rows = [
        {"x_lo": f"{lo:.3f}", "x_hi": f"{hi:.3f}", "mass": f"{m:.9f}"}
        for lo, hi, m in zip(hist.edges[:-1], hist.edges[1:], hist.masses)
    ]
    write_csv(path, rows, PDF_COLUMNS)
