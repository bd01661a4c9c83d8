"""
Main entry point for the commodity causality pipeline.

Subcommands:
    run <config>        run the selected stages and write tables, draws and a manifest
    validate <config>   check a config without computing anything
    simulate <dgp>      write a simulated monthly series from one of the volatility models

Exit codes: 0 on success, 2 on a configuration error, 3 when a stage failed.
"""

import argparse
import sys
from pathlib import Path
from typing import List, Optional

import logfire
import numpy as np
import pandas as pd
from dotenv import load_dotenv
from pydantic import ValidationError

from econometrics.errors import ConfigError, InvalidParams
from econometrics.garch import simulate_garch
from econometrics.sv import simulate_sv
from flow.graph import run_pipeline
from models.config import DgpConfig, PipelineConfig, load_config, load_dgp
from models.schema import Series
from models.volatility import Family, GarchParams, SvParams, VolatilityModelSpec
from utils.logging import initialize_logfire, log_workflow_event

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_STAGE_FAILURE = 3


def parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    """
    Parse command-line arguments.

    Returns:
        Parsed command-line arguments.
    """
    parser = argparse.ArgumentParser(
        description="Causality and volatility diagnostics for commodity returns"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Run the pipeline described by a YAML config")
    run.add_argument("config", type=Path, help="Pipeline config file")
    run.add_argument("--output", type=Path, default=None, help="Override the output directory")

    validate = sub.add_parser("validate", help="Validate a YAML config without running it")
    validate.add_argument("config", type=Path, help="Pipeline config file")

    simulate = sub.add_parser("simulate", help="Simulate a monthly series from a YAML DGP spec")
    simulate.add_argument("dgp", type=Path, help="DGP spec file")
    simulate.add_argument("--output", type=Path, default=Path("simulated.csv"), help="CSV to write")

    return parser.parse_args(argv)


def with_output(config: PipelineConfig, directory: Optional[Path]) -> PipelineConfig:
    if directory is None:
        return config
    return config.model_copy(update={"output": config.output.model_copy(update={"directory": directory})})


def run_command(args: argparse.Namespace) -> int:
    try:
        config = with_output(load_config(args.config), args.output)
    except ConfigError as e:
        print(f"Config error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    print(f"Running {len(config.stages)} stages, seed {config.seed}, output {config.output.directory}")
    with logfire.span("pipeline_run") as span:
        span.set_attributes(
            {
                "service": "commodity-causality",
                "config_hash": config.config_hash(),
                "seed": config.seed,
                "stages": [s.value for s in config.stages],
            }
        )
        try:
            manifest = run_pipeline(config)
        except Exception as e:
            print(f"Error during pipeline execution: {e}", file=sys.stderr)
            logfire.exception("Pipeline execution failed", error_type=type(e).__name__)
            return EXIT_STAGE_FAILURE

    for name, record in manifest.stages.items():
        detail = f": {record.error_message}" if record.error_message else ""
        print(f"  {name:<22} {record.status.value:<9} {record.wall_time_ms / 1000:8.1f}s{detail}")
    print(f"{len(manifest.tables)} tables written to {config.output.directory}")
    return EXIT_STAGE_FAILURE if manifest.failed else EXIT_OK


def validate_command(args: argparse.Namespace) -> int:
    try:
        config = load_config(args.config)
    except ConfigError as e:
        print(f"Config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"Config is valid: {len(config.stages)} stages, hash {config.config_hash()}")
    return EXIT_OK


def simulate_series(dgp: DgpConfig) -> Series:
    """One draw from the DGP, as a monthly series of percentage returns."""
    spec = VolatilityModelSpec.from_name(dgp.model)
    try:
        if spec.family == Family.GARCH:
            return simulate_garch(spec, GarchParams(**dgp.params), dgp.length, dgp.seed, start=dgp.start)
        params = SvParams(**dgp.params)
        return simulate_sv(spec, params, dgp.length, dgp.seed, dgp.in_mean_scale, start=dgp.start)
    except (InvalidParams, ValidationError) as e:
        raise ConfigError(f"parameters do not fit {dgp.model}: {e}") from e


def write_simulated_csv(dgp: DgpConfig, path: Path) -> Path:
    """
    Write the simulated returns and the price path they imply.

    The price starts at 100 so the file can feed the pipeline either as prices or, through
    the ``levels`` transform, as ready-made returns.
    """
    series = simulate_series(dgp)
    price = 100.0 * np.exp(np.cumsum(series.values) / 100.0)
    frame = pd.DataFrame(
        {
            "date": [str(p) for p in series.timestamps],
            dgp.column: series.values,
            f"{dgp.column}_price": price,
        }
    )
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, lineterminator="\n", float_format="%.10g")
    return path


def simulate_command(args: argparse.Namespace) -> int:
    try:
        dgp = load_dgp(args.dgp)
        path = write_simulated_csv(dgp, args.output)
    except ConfigError as e:
        print(f"Config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    log_workflow_event("simulate_complete", {"model": dgp.model, "length": dgp.length, "path": str(path)})
    print(f"Wrote {dgp.length} months of {dgp.model} to {path}")
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    """
    Main function that dispatches the subcommands.

    Returns:
        Exit code (0 success, 2 configuration error, 3 stage failure).
    """
    # Load environment variables from .env file
    load_dotenv()

    # Initialize logfire for structured logging
    initialize_logfire()

    try:
        args = parse_args(argv)
    except SystemExit as e:
        # argparse exits 2 on bad usage and 0 on --help
        return int(e.code or 0)

    commands = {"run": run_command, "validate": validate_command, "simulate": simulate_command}
    return commands[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
