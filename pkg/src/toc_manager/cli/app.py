"""Command-line entry point for the ToC manager simulator.

Usage:
    toc-manager run [--config FILE] [--scheme S] [--variant V] [--spots N]
                    [--mode enumerate|mc] [--runs N] [--seed N] [--out DIR]
    toc-manager reproduce {table2,table3,fig14,fig15,all} [--range 700|900]
    toc-manager validate-pdf {denm,min_dmrm,distr_toc} [--runs N]

Common options:
    --settings <path>   Tool settings YAML (calibration, stations, batches)
    --seed <n>          Master seed
    --out <dir>         Output directory

Exit codes: 0 success, 1 reproduction mismatch, 2 configuration error,
3 runtime error. SIM_LOG={error,info,debug} sets log and trace verbosity.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from toc_manager.analytics.kpi import aggregate, export_histogram_csv, export_pdf_csv, export_summary_csv
from toc_manager.analytics.pdf import (
    DegenerateGeometryError,
    l1_distance,
    pdf_for,
    reference_position,
    toc_histogram,
)
from toc_manager.cli.reproduce import ReproContext, Target, reproduce
from toc_manager.config.config import ConfigManager
from toc_manager.core.calibration import (
    CalibrationProfile,
    InvalidCalibrationError,
    InvalidParameterError,
)
from toc_manager.scenario.loader import apply_overrides, load_scenario
from toc_manager.scenario.scenario import (
    CavOption,
    DenmVariant,
    InvalidLayoutError,
    Placement,
    RsuOption,
    ScenarioConfig,
    ScenarioError,
    Scheme,
)
from toc_manager.sim.engine import EngineSettings, StuckRunError, batch, sample_toc_positions
from toc_manager.sim.models import BatchMode
from toc_manager.sim.results import write_runs_csv, write_traces_jsonl

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

CONFIG_ERRORS = (
    ScenarioError,
    InvalidLayoutError,
    InvalidCalibrationError,
    InvalidParameterError,
    DegenerateGeometryError,
)

PDF_VARIANTS = ("denm", "min_dmrm", "distr_toc")


def variant_overrides(variant: str, scheme: str | None = None) -> dict[str, Any]:
    """Scenario fields selected by a variant label.

    Accepts DENM search variants (zero, fifty, unlimited), RSU options
    (min_dmrm, distr_toc) and full MCM labels such as distr_toc_cav.
    """
    label = variant.strip().lower()
    values: dict[str, Any] | None = None
    if label in {v.value for v in DenmVariant}:
        values = {"scheme": Scheme.DENM, "denm_d_mrm": DenmVariant(label)}
    for rsu in RsuOption:
        if label == rsu.value:
            values = {"scheme": Scheme.MCM, "mcm_rsu_option": rsu}
        for suffix, cav in (("rsu", CavOption.RSU_ADVICE), ("cav", CavOption.CAV_DECISION)):
            if label in (f"{rsu.value}_{suffix}", f"{rsu.value}_{cav.value}"):
                values = {"scheme": Scheme.MCM, "mcm_rsu_option": rsu, "mcm_cav_option": cav}
    if values is None:
        raise ScenarioError([f"variant: unknown variant '{variant}'"])
    if scheme is not None and Scheme(scheme) != values["scheme"]:
        raise ScenarioError(
            [f"variant: '{variant}' belongs to scheme {values['scheme'].value}, not {scheme}"]
        )
    return values


def parse_assignments(items: list[str] | None) -> dict[str, str]:
    pairs: dict[str, str] = {}
    problems: list[str] = []
    for item in items or []:
        if "=" not in item:
            problems.append(f"--set expects key=value, got '{item}'")
            continue
        key, value = item.split("=", 1)
        pairs[key.strip()] = value.strip()
    if problems:
        raise ScenarioError(problems)
    return pairs


@dataclass
class ExperimentSpec:
    """One batch invocation: scenario, overrides, seed, run mode and output."""

    scenario_path: Path | None = None
    overrides: dict[str, Any] = field(default_factory=dict)
    seed: int = 0
    mode: BatchMode = BatchMode.ENUMERATE
    runs: int | None = None
    out_dir: Path = Path("results")

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> ExperimentSpec:
        overrides: dict[str, Any] = dict(parse_assignments(args.set))
        if args.scheme:
            overrides["scheme"] = Scheme(args.scheme)
        if args.variant:
            overrides.update(variant_overrides(args.variant, args.scheme))
        if args.spots is not None:
            overrides["spot_count"] = args.spots
        return cls(
            scenario_path=Path(args.config) if args.config else None,
            overrides=overrides,
            seed=args.seed,
            mode=BatchMode(args.mode),
            runs=args.runs,
            out_dir=Path(args.out),
        )

    def validate(self) -> list[str]:
        problems: list[str] = []
        if self.seed < 0:
            problems.append(f"seed must be >= 0, got {self.seed}")
        if self.mode == BatchMode.MONTE_CARLO and (self.runs is None or self.runs <= 0):
            problems.append("mode mc needs --runs N with N > 0")
        if self.out_dir.exists() and not self.out_dir.is_dir():
            problems.append(f"output path {self.out_dir} is not a directory")
        return problems

    def scenario(self) -> ScenarioConfig:
        problems = self.validate()
        if problems:
            raise ScenarioError(problems)
        cfg = load_scenario(self.scenario_path) if self.scenario_path else ScenarioConfig()
        return apply_overrides(cfg, **self.overrides)


def setup_logging(config: ConfigManager) -> None:
    level = getattr(logging, str(config.get("logging.level", "INFO")).upper(), logging.INFO)
    handlers: list[logging.Handler] = [logging.StreamHandler()]
    if config.get("logging.log_to_file", False):
        handlers.append(logging.FileHandler(config.get("logging.log_file", "toc_manager.log")))
    logging.basicConfig(
        level=level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        handlers=handlers,
        force=True,
    )


def load_settings(path: str | None) -> tuple[ConfigManager, CalibrationProfile, EngineSettings]:
    config = ConfigManager()
    if path:
        settings_path = Path(path)
        if not settings_path.exists():
            raise ScenarioError([f"settings file not found: {settings_path}"])
        config.load(settings_path)
    config.apply_sim_log()
    return config, CalibrationProfile.from_config(config), EngineSettings.from_config(config)


def _log_progress(done: int, total: int) -> None:
    if done == total or done % max(total // 10, 1) == 0:
        logger.info(f"{done}/{total} runs done")


def cmd_run(
    spec: ExperimentSpec,
    config: ConfigManager,
    profile: CalibrationProfile,
    settings: EngineSettings,
) -> int:
    """Run a batch and write runs.csv, traces.jsonl and summary.csv."""
    cfg = spec.scenario()
    profile.validate(cfg.spot_length)
    results = batch(cfg, spec.mode, spec.seed, runs=spec.runs, profile=profile,
                    settings=settings, progress_callback=_log_progress)

    spec.out_dir.mkdir(parents=True, exist_ok=True)
    write_runs_csv(results, spec.out_dir / "runs.csv")
    write_traces_jsonl(results, spec.out_dir / "traces.jsonl")
    origin = reference_position(cfg, profile) if cfg.scheme == Scheme.MCM else None
    summary = aggregate(results, toc_origin=origin,
                        bin_width=float(config.get("analytics.bin_width", cfg.s_len)))
    export_summary_csv([summary], spec.out_dir / "summary.csv")
    if summary.toc is not None:
        export_histogram_csv(summary.toc, spec.out_dir / "toc_histogram.csv")

    print(
        f"{cfg.scheme.value}/{cfg.variant}: {summary.runs} runs, "
        f"success {100.0 * summary.success_rate:.2f}%, results in {spec.out_dir}"
    )
    return EXIT_OK


def cmd_reproduce(
    target: str,
    ctx: ReproContext,
) -> int:
    """Run reproduction batteries; exit 0 iff no cell fails."""
    targets = list(Target) if target == "all" else [Target(target)]
    if ctx.out_dir is not None:
        ctx.out_dir.mkdir(parents=True, exist_ok=True)
    failed = 0
    for t in targets:
        for cell in reproduce(t, ctx):
            print(f"{cell.target:7s} {cell.cell:40s} {cell.published:>9g} "
                  f"{cell.computed:>11.4f} +-{cell.tolerance:<7g} {cell.status}")
            failed += not cell.passed
    if failed:
        print(f"{failed} cell(s) outside tolerance")
        return EXIT_MISMATCH
    return EXIT_OK


def cmd_validate_pdf(
    variant: str,
    runs: int,
    seed: int,
    config: ConfigManager,
    profile: CalibrationProfile,
    settings: EngineSettings,
    base: ScenarioConfig | None = None,
    out_dir: Path | None = None,
) -> int:
    """Compare sampled ToC positions with the closed form; exit 0 iff L1 is small."""
    if variant not in PDF_VARIANTS:
        raise ScenarioError([f"variant: expected one of {', '.join(PDF_VARIANTS)}, got '{variant}'"])
    if runs <= 0:
        raise ScenarioError([f"runs must be positive, got {runs}"])
    if runs < 10_000:
        logger.warning(f"{runs} runs are too few for a reliable distribution comparison")
    threshold = float(config.get("analytics.l1_threshold", 0.02))
    width = float(config.get("analytics.bin_width", 25.0))

    cfg = dataclasses.replace(base or ScenarioConfig(), spot_count=1,
                              placement=Placement.GRID_RANDOM, explicit_windows=())
    overrides = {"scheme": Scheme.DENM} if variant == "denm" else variant_overrides(variant)
    cfg = apply_overrides(cfg, **overrides)
    pdf = pdf_for(cfg, profile)
    values = sample_toc_positions(cfg, runs, seed, profile, settings)
    origin = pdf.support[0] if cfg.scheme == Scheme.DENM else reference_position(cfg, profile)
    hist = toc_histogram(values, origin, width, span=pdf.support)
    distance = l1_distance(hist, pdf)

    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        export_histogram_csv(hist, out_dir / f"{variant}_hist.csv")
        export_pdf_csv(pdf, out_dir / f"{variant}_pdf.csv", edges=hist.edges)

    print(f"{variant}: L1 distance {distance:.5f} over {runs} runs (threshold {threshold:g})")
    if distance >= threshold:
        print(f"{variant}: sampled distribution does not match the closed form; "
              f"more runs may be needed")
        return EXIT_MISMATCH
    return EXIT_OK


def _run(args: argparse.Namespace, config, profile, settings) -> int:
    return cmd_run(ExperimentSpec.from_args(args), config, profile, settings)


def _reproduce(args: argparse.Namespace, config, profile, settings) -> int:
    ctx = ReproContext(
        config=config,
        profile=profile,
        settings=settings,
        seed=args.seed,
        out_dir=Path(args.out),
        toc_range=float(args.range),
    )
    return cmd_reproduce(args.target, ctx)


def _validate_pdf(args: argparse.Namespace, config, profile, settings) -> int:
    base = load_scenario(args.config) if args.config else None
    return cmd_validate_pdf(args.variant, args.runs, args.seed, config, profile, settings,
                            base=base, out_dir=Path(args.out) if args.out else None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Infrastructure-assisted ToC/MRM simulator",
        prog="toc-manager",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--settings",
        help="Path to tool settings YAML file",
        default=None,
    )
    common.add_argument(
        "--seed",
        type=int,
        default=0,
        help="Master seed (default: 0)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", parents=[common], help="Run a simulation batch")
    run_p.add_argument("--config", "-c", help="Scenario file", default=None)
    run_p.add_argument("--scheme", choices=[s.value for s in Scheme], default=None)
    run_p.add_argument(
        "--variant",
        default=None,
        help="zero|fifty|unlimited, or min_dmrm|distr_toc with optional _rsu|_cav",
    )
    run_p.add_argument("--spots", type=int, choices=[1, 2], default=None)
    run_p.add_argument("--mode", choices=[m.value for m in BatchMode], default="enumerate")
    run_p.add_argument("--runs", type=int, default=None, help="Run count for mode mc")
    run_p.add_argument(
        "--set",
        action="append",
        metavar="KEY=VALUE",
        help="Override a scenario key (repeatable)",
    )
    run_p.add_argument("--out", "-o", default="results", help="Output directory")
    run_p.set_defaults(handler=_run)

    repro_p = sub.add_parser("reproduce", parents=[common],
                             help="Reproduce a published table or figure")
    repro_p.add_argument("target", choices=[t.value for t in Target] + ["all"])
    repro_p.add_argument(
        "--range",
        type=float,
        choices=[700.0, 900.0],
        default=700.0,
        help="max_toc_range for fig14 (default: 700)",
    )
    repro_p.add_argument("--out", "-o", default="reproduce", help="Output directory")
    repro_p.set_defaults(handler=_reproduce)

    pdf_p = sub.add_parser("validate-pdf", parents=[common],
                           help="Compare sampled ToC positions with the closed form")
    pdf_p.add_argument("variant", choices=PDF_VARIANTS)
    pdf_p.add_argument("--runs", type=int, default=100_000)
    pdf_p.add_argument("--config", "-c", help="Base scenario file", default=None)
    pdf_p.add_argument("--out", "-o", default=None, help="Write histogram and PDF CSVs here")
    pdf_p.set_defaults(handler=_validate_pdf)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        config, profile, settings = load_settings(args.settings)
    except (OSError, yaml.YAMLError, ValueError) as e:
        print(f"Error: invalid settings: {e}", file=sys.stderr)
        return EXIT_CONFIG
    setup_logging(config)

    try:
        return args.handler(args, config, profile, settings)
    except CONFIG_ERRORS as e:
        problems = getattr(e, "problems", None) or [str(e)]
        for problem in problems:
            print(f"Error: {problem}", file=sys.stderr)
        return EXIT_CONFIG
    except StuckRunError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as e:
        logger.exception(f"Run failed: {e}")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
