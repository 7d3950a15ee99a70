#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
PRISM - Subgroup Identification Command Line

Subcommands:
- analyze    Run a PRISM configuration (MOB, PRISM_A, PRISM_B or custom) on a trial CSV
- bootstrap  Same as analyze, with bootstrap smoothing of the subgroup estimates
- simulate   Write a simulated trial (CSV + JSON sidecar with the oracle truth)
- study      Run the simulation study and write tidy metric tables and charts

Exit codes: 0 ok, 1 input error, 2 numeric failure.
Process settings (LOG_LEVEL, STAGE_LOG_LEVEL, PRISM_WORKERS, PRISM_OUTPUT_DIR) come
from the environment or a .env file.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from dotenv import load_dotenv

# Fix encoding for Windows console
if sys.platform == "win32":
    try:
        sys.stdout.reconfigure(encoding="utf-8")
    except AttributeError:
        pass

load_dotenv()

from shared import __version__
from shared.config import (
    Config,
    EffectSetting,
    get_output_base_dir,
    load_pipeline_config,
    load_study_config,
)
from shared.data import file_sha256, load_csv
from shared.errors import ConfigError, PrismError, exit_code_for
from shared.logging_config import add_file_logging, remove_file_logging, setup_logging

logger = logging.getLogger(__name__)

OUTPUT_FORMATS = ("json", "text", "svg")


# ============================================================================
# ARGUMENTS
# ============================================================================

def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=str, help="YAML config file")
    parser.add_argument("--seed", type=int, help="Override the base seed")
    parser.add_argument("--out", type=str, help="Output directory (default: under PRISM_OUTPUT_DIR or ./runs)")
    parser.add_argument("--workers", type=int, help="Parallel workers (default: PRISM_WORKERS)")
    parser.add_argument("--log-level", type=str, help="Console log level (default: LOG_LEVEL)")


def _add_analysis(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--input", "-i", type=str, required=True, help="Trial CSV with outcome, treatment and covariates")
    parser.add_argument(
        "--configuration",
        choices=["MOB", "PRISM_A", "PRISM_B"],
        help="Preset to run (overrides the config file's configuration)",
    )
    parser.add_argument("--outcome-col", type=str, help="Outcome column (default: y)")
    parser.add_argument("--treatment-col", type=str, help="Treatment column (default: a)")
    parser.add_argument("--family", choices=["continuous", "binary", "auto"], help="Outcome family")
    parser.add_argument(
        "--threshold", type=float, action="append", dest="thresholds",
        help="Comparator c for P(theta > c) / P(theta < c); repeatable",
    )
    parser.add_argument(
        "--format", choices=OUTPUT_FORMATS, action="append", dest="formats",
        help="Output format; repeatable (default: all)",
    )
    parser.add_argument("--ple-dump", action="store_true", help="Also write ple.csv")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="prism",
        description="PRISM: subgroup identification and estimation for randomized trials",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    analyze = sub.add_parser("analyze", help="Run PRISM on a trial CSV")
    _add_common(analyze)
    _add_analysis(analyze)

    bootstrap = sub.add_parser("bootstrap", help="Run PRISM with bootstrap-smoothed subgroup estimates")
    _add_common(bootstrap)
    _add_analysis(bootstrap)
    bootstrap.add_argument("--resamples", "-B", type=int, default=500, help="Bootstrap resamples (default: 500)")
    bootstrap.add_argument("--save-vectors", action="store_true", help="Keep per-resample estimate vectors")

    simulate = sub.add_parser("simulate", help="Write a simulated trial")
    _add_common(simulate)
    simulate.add_argument("--family", choices=["continuous", "binary"], default="continuous")
    simulate.add_argument("--setting", choices=[s.value for s in EffectSetting], default=EffectSetting.SUBGROUP4.value)
    simulate.add_argument("--n", type=int, default=800, help="Patients (even)")
    simulate.add_argument("--n-noise", type=int, default=6, help="Noise covariates (6 or 56 canonical)")

    study = sub.add_parser("study", help="Run the simulation study")
    _add_common(study)
    study.add_argument("--replicates", "-R", type=int, help="Replicates per scenario")
    study.add_argument("--no-svg", action="store_true", help="Skip the SVG charts")
    return parser


# ============================================================================
# COMMANDS
# ============================================================================

def _output_dir(args: argparse.Namespace, default_name: str) -> Path:
    out = Path(args.out) if args.out else get_output_base_dir() / default_name
    out.mkdir(parents=True, exist_ok=True)
    return out


def _pipeline_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    overrides: Dict[str, Any] = {}
    if args.configuration:
        overrides["configuration"] = args.configuration
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.family:
        overrides["outcome_family"] = args.family
    data = {}
    if args.outcome_col:
        data["outcome_col"] = args.outcome_col
    if args.treatment_col:
        data["treatment_col"] = args.treatment_col
    if data:
        overrides["data"] = data
    if args.thresholds:
        overrides["bayes"] = {"thresholds": args.thresholds}
    if args.command == "bootstrap":
        overrides["bootstrap"] = {"resamples": args.resamples, "save_vectors": args.save_vectors}
    return overrides


def cmd_analyze(args: argparse.Namespace, settings: Config) -> int:
    from report import render_text, write_bootstrap_vectors, write_report_outputs
    from Stages.Supervisor.pipeline_supervisor import execute_pipeline

    cfg = load_pipeline_config(args.config, _pipeline_overrides(args))
    out_dir = _output_dir(args, f"{args.command}_{cfg.configuration.value}_{cfg.seed}")
    handler = add_file_logging(out_dir / "run.log")
    try:
        ds = load_csv(args.input, cfg.data.outcome_col, cfg.data.treatment_col, cfg.data.kind_overrides)
        run = execute_pipeline(
            ds, cfg,
            input_path=str(args.input),
            input_sha256=file_sha256(args.input),
            workers=args.workers or settings.workers,
        )
        formats = args.formats or list(OUTPUT_FORMATS)
        paths = write_report_outputs(run, out_dir, formats, ple_dump=args.ple_dump)
        if run.bootstrap is not None and cfg.bootstrap.save_vectors:
            paths["vectors"] = write_bootstrap_vectors(run, out_dir)
        if "text" in formats:
            print(render_text(run.report))
        logger.info(f"📁 Outputs: {out_dir}")
    finally:
        remove_file_logging(handler)
    return 0


def cmd_simulate(args: argparse.Namespace, settings: Config) -> int:
    from simulation import SimScenario, generate_trial, scenario_ate, write_simulation

    try:
        scenario = SimScenario(
            outcome_family=args.family,
            effect_setting=args.setting,
            n_noise=args.n_noise,
            n=args.n,
            seed=args.seed if args.seed is not None else 0,
        )
    except ValueError as e:
        raise ConfigError(f"Invalid simulation scenario: {e}") from e

    out_dir = _output_dir(args, "simulate_" + scenario.label().replace("/", "_"))
    ds = generate_trial(scenario)
    paths = write_simulation(ds, scenario, out_dir, oracle_ate=scenario_ate(scenario))
    logger.info(f"✅ Simulated {scenario.label()}: n={ds.n}, p={ds.p} -> {paths['csv']}")
    return 0


def cmd_study(args: argparse.Namespace, settings: Config) -> int:
    from simulation.study import run_study, write_study_outputs

    overrides: Dict[str, Any] = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.replicates is not None:
        overrides["replicates"] = args.replicates
    if args.workers is not None:
        overrides["workers"] = args.workers
    cfg = load_study_config(args.config, overrides)
    out_dir = _output_dir(args, f"study_{cfg.seed}")
    handler = add_file_logging(out_dir / "study.log", log_level=logging.INFO)
    try:
        result = run_study(cfg)
        write_study_outputs(result, out_dir, svg=not args.no_svg)
        failures = result.failures()
        if not failures.empty:
            logger.warning(f"⚠️  {int(failures['failures'].sum())} method run(s) failed; see study_replicates.csv")
        logger.info(f"📁 Outputs: {out_dir}")
    finally:
        remove_file_logging(handler)
    return 0


COMMANDS = {
    "analyze": cmd_analyze,
    "bootstrap": cmd_analyze,
    "simulate": cmd_simulate,
    "study": cmd_study,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    settings = Config()
    try:
        settings.validate()
    except PrismError as e:
        print(f"❌ {e}", file=sys.stderr)
        return exit_code_for(e)
    setup_logging(args.log_level or settings.log_level, settings.stage_log_level)

    try:
        return COMMANDS[args.command](args, settings)
    except PrismError as e:
        logger.error(f"❌ {type(e).__name__}: {e}")
        return exit_code_for(e)


if __name__ == "__main__":
    sys.exit(main())
