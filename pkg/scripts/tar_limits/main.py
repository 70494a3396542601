#!/usr/bin/env python3
"""
tar-limits command-line tool

Simulates TAR(1) paths, runs Monte Carlo experiments comparing finite-sample
estimator laws with their limits, samples limit laws and applies the
unit-root test.

Exit codes: 0 success (including statistically inconclusive results),
1 unexpected error, 2 configuration error, 3 numeric guard.
"""

import argparse
import json
import sys
import time
from datetime import datetime, timezone
from typing import Any, Dict, List, Optional

import pandas as pd
from rich.console import Console

from . import __version__
from .config import RunConfig, workers_from_env
from .errors import ConfigError, EmptyDistribution, NumericGuardError
from .estimators import lse
from .models import RunManifest
from .monte_carlo import (
    CONVERGENCE_STATS,
    ExperimentRunner,
    convergence_table,
    ks_against_limit,
    sample_limit_law,
    split_half_ks,
    summarize,
)
from .noise import RngStream
from .reporters import (
    ExperimentReport,
    MultiFormatReporter,
    ResultsWriter,
    print_convergence_table,
    print_limit_summary,
)
from .tar_model import classify_regime, count_lower_visits, simulate_path
from .unit_root import (
    CALIBRATIONS,
    DEFAULT_CALIBRATION_REPLICATIONS,
    DEFAULT_CALIBRATION_SEED,
    DEFAULT_TABLE_DRAWS,
    DEFAULT_TABLE_M,
    DEFAULT_TABLE_SEED,
    DFQuantileTable,
    load_df_table,
    packaged_table_path,
    unit_root_test,
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _manifest(command: str, config: Optional[RunConfig], master_seed: Optional[int]) -> RunManifest:
    return RunManifest(
        tool_version=__version__,
        command=command,
        config_hash=config.config_hash if config else "",
        master_seed=master_seed,
        started_at=_now(),
        config=config.to_dict() if config else {},
    )


def _finish(manifest: RunManifest, writer: ResultsWriter, console: Console) -> None:
    manifest.finished_at = _now()
    path = writer.write_manifest(manifest)
    console.print(f"[green]Results written to {writer.directory} (manifest: {path.name})[/green]")


def cmd_simulate(args: argparse.Namespace, console: Console) -> int:
    """Simulate one path; write it as CSV + JSON with a summary.json of visits and estimates."""
    config = RunConfig.from_file(args.config, console)
    params = config.tar_params()
    n, seed, stream_id = config.simulate_settings()
    manifest = _manifest("simulate", config, seed)

    regime = sorted(f.value for f in classify_regime(params))
    console.print(f"[blue]Regime: {{{', '.join(regime)}}}[/blue]")

    path = simulate_path(params, n, RngStream(seed, stream_id))

    writer = ResultsWriter(args.output, console)
    writer.write_config(config.to_dict(), config.config_hash)
    writer.write_path(path)

    lower_visits = count_lower_visits(path)
    console.print(f"Lower-regime visits: {lower_visits} of {len(path.values)} values")
    summary: Dict[str, Any] = {"regime": regime}
    summary["lower_visits"] = lower_visits
    if len(path.values) >= 3:
        estimate = lse(path, params.r, params.gamma)
        alpha = f"{estimate.alpha_hat:.6g}" if estimate.alpha_hat is not None else "undefined"
        beta = f"{estimate.beta_hat:.6g}" if estimate.beta_hat is not None else "undefined"
        console.print(
            f"LSE: alpha_hat={alpha} ({estimate.n_upper} upper), "
            f"beta_hat={beta} ({estimate.n_lower} lower)"
        )
        summary["lse"] = {"alpha_hat": estimate.alpha_hat, "beta_hat": estimate.beta_hat}
    writer.write_json("summary.json", summary)
    _finish(manifest, writer, console)
    return EXIT_OK


def cmd_experiment(args: argparse.Namespace, console: Console) -> int:
    """Run the experiment, sample its limit law and write the results directory."""
    config = RunConfig.from_file(args.config, console)
    experiment = config.experiment_config(require_limit_law=True)
    if args.workers is not None:
        experiment.workers = args.workers
    manifest = _manifest("experiment", config, experiment.master_seed)
    config.print_configuration()

    started = time.perf_counter()
    runner = ExperimentRunner(experiment, console)
    results = runner.run()

    limit = None
    ks: Dict[int, float] = {}
    if experiment.limit_law is not None:
        limit = sample_limit_law(
            experiment.limit_law, experiment.params, experiment.workers, console
        )
        if limit.is_empty:
            console.print("[yellow]Every limit-law draw was dropped; KS distances skipped[/yellow]")
        else:
            ks = ks_against_limit(results, limit)

    report = ExperimentReport(
        config=experiment,
        results=results,
        limit=limit,
        ks_vs_limit=ks,
        drop_reasons=runner.drop_reasons,
        split_half={
            n: split_half_ks(values)
            for n, values in runner.ordered_samples.items()
            if len(values) >= 2
        },
        wall_clock_seconds=time.perf_counter() - started,
    )

    writer = ResultsWriter(args.output, console)
    writer.write_config(config.to_dict(), config.config_hash)
    writer.write_experiment(report)

    reporter = MultiFormatReporter(console)
    if args.format == "json":
        print(reporter.generate_report(report, "json"))
    else:
        reporter.generate_report(report, "console")
    _finish(manifest, writer, console)
    return EXIT_OK


def cmd_sample_limit(args: argparse.Namespace, console: Console) -> int:
    """Draw from the configured limit law only."""
    config = RunConfig.from_file(args.config, console)
    spec = config.limit_law_spec()
    params = config.tar_params()
    manifest = _manifest("sample-limit", config, spec.seed)
    workers = args.workers if args.workers is not None else workers_from_env()

    dist = sample_limit_law(spec, params, workers, console)
    if dist.is_empty:
        raise EmptyDistribution(f"every {spec.kind} draw was dropped")

    writer = ResultsWriter(args.output, console)
    writer.write_config(config.to_dict(), config.config_hash)
    writer.write_samples("limit_samples.csv", dist.samples)
    writer.write_json(
        "summary.json", {"limit_law": spec.describe(params), "summary": summarize(dist)}
    )
    print_limit_summary(dist, f"Limit law: {spec.kind}", console)
    _finish(manifest, writer, console)
    return EXIT_OK


def cmd_convergence(args: argparse.Namespace, console: Console) -> int:
    """Median |error| and IQR per n for the constrained or beta error."""
    config = RunConfig.from_file(args.config, console)
    experiment = config.experiment_config(require_limit_law=False)
    if args.workers is not None:
        experiment.workers = args.workers
    if experiment.stat not in CONVERGENCE_STATS:
        allowed = ", ".join(s.value for s in CONVERGENCE_STATS)
        raise ConfigError(f"convergence tables need one of {allowed}", "experiment.stat")
    manifest = _manifest("convergence", config, experiment.master_seed)
    frame = convergence_table(experiment, console)

    writer = ResultsWriter(args.output, console)
    writer.write_config(config.to_dict(), config.config_hash)
    writer.write_frame("convergence.csv", frame)
    print_convergence_table(frame, console)
    _finish(manifest, writer, console)
    return EXIT_OK


def _read_series(path: str, column: Optional[str]) -> List[float]:
    try:
        frame = pd.read_csv(path)
    except (OSError, ValueError) as e:
        raise ConfigError(f"cannot read series CSV {path}: {e}", "series")
    if column is None:
        column = "Y_t" if "Y_t" in frame.columns else frame.columns[0]
    if column not in frame.columns:
        available = ", ".join(frame.columns)
        raise ConfigError(f"column '{column}' not found. Available: {available}", "column")
    return frame[column].astype(float).tolist()


def cmd_unit_root_test(args: argparse.Namespace, console: Console) -> int:
    """Print the unit-root decision as JSON on stdout."""
    series = _read_series(args.series, args.column)
    table = load_df_table(args.table)
    try:
        decision = unit_root_test(
            series,
            args.r,
            args.level,
            table,
            calibration=args.calibration,
            replications=args.replications,
            seed=args.seed,
        )
    except ValueError as e:
        message = str(e)
        key = next((k for k in ("series", "replications") if k in message), "level")
        raise ConfigError(message, key)

    payload: Dict[str, Any] = decision.to_dict()
    if decision.reject is None:
        console.print(f"[yellow]Inconclusive: {decision.inconclusive_reason}[/yellow]")

    if args.output:
        writer = ResultsWriter(args.output, console)
        writer.write_json("decision.json", payload)
        manifest = RunManifest(
            tool_version=__version__,
            command="unit-root-test",
            config_hash="",
            master_seed=None,
            started_at=_now(),
            config={
                "series": str(args.series),
                "column": args.column,
                "r": args.r,
                "level": args.level,
                "calibration": args.calibration,
                "replications": args.replications,
                "seed": args.seed,
                "table": {
                    "version": table.version,
                    "source": table.source,
                    "m": table.m,
                    "draws": table.draws,
                    "seed": table.seed,
                },
            },
        )
        _finish(manifest, writer, console)
    print(json.dumps(payload, indent=2))
    return EXIT_OK


def cmd_df_table(args: argparse.Namespace, console: Console) -> int:
    """Regenerate the Dickey-Fuller quantile table."""
    table = DFQuantileTable.generate(args.m, args.draws, args.seed, console)
    path = table.save(args.output or packaged_table_path())
    console.print(f"[green]Dickey-Fuller table written to {path}[/green]")
    for p, q in sorted(table.quantiles.items()):
        console.print(f"  p={p:g}: {q:.6f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tar-limits",
        description="Simulate TAR(1) models and check estimator limit laws by Monte Carlo",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser("simulate", help="Simulate one path")
    simulate.add_argument("config", help="YAML/JSON configuration file")
    simulate.add_argument("--output", "-o", default="results/simulate", help="Output directory")
    simulate.set_defaults(handler=cmd_simulate)

    experiment = sub.add_parser("experiment", help="Run a Monte Carlo experiment")
    experiment.add_argument("config", help="YAML/JSON configuration file")
    experiment.add_argument(
        "--output", "-o", default="results/experiment", help="Output directory"
    )
    experiment.add_argument(
        "--workers", type=int, help="Worker processes (overrides config and TAR_LIMITS_WORKERS)"
    )
    experiment.add_argument(
        "--format", choices=["console", "json"], default="console", help="Report format"
    )
    experiment.set_defaults(handler=cmd_experiment)

    sample_limit = sub.add_parser("sample-limit", help="Sample a limit law")
    sample_limit.add_argument("config", help="YAML/JSON configuration file")
    sample_limit.add_argument("--output", "-o", default="results/limit", help="Output directory")
    sample_limit.add_argument("--workers", type=int, help="Worker processes")
    sample_limit.set_defaults(handler=cmd_sample_limit)

    convergence = sub.add_parser("convergence", help="Convergence table of an estimation error")
    convergence.add_argument("config", help="YAML/JSON configuration file")
    convergence.add_argument(
        "--output", "-o", default="results/convergence", help="Output directory"
    )
    convergence.add_argument("--workers", type=int, help="Worker processes")
    convergence.set_defaults(handler=cmd_convergence)

    unit_root = sub.add_parser("unit-root-test", help="Test alpha = 1 on an observed series")
    unit_root.add_argument(
        "series", help="CSV file with the series (column Y_t or the first column)"
    )
    unit_root.add_argument("--r", type=float, required=True, help="Known threshold")
    unit_root.add_argument(
        "--level", type=float, default=0.05, help="Test level: 0.01, 0.05 or 0.10"
    )
    unit_root.add_argument("--column", help="Column holding the series")
    unit_root.add_argument(
        "--table",
        help="Dickey-Fuller table JSON (default: TAR_LIMITS_DF_TABLE or the packaged table)",
    )
    unit_root.add_argument(
        "--calibration",
        choices=CALIBRATIONS,
        default="finite-n",
        help="Critical value simulated at the observed n, or the asymptotic table value",
    )
    unit_root.add_argument(
        "--replications",
        type=int,
        default=DEFAULT_CALIBRATION_REPLICATIONS,
        help="Simulated series for the finite-n critical value",
    )
    unit_root.add_argument(
        "--seed", type=int, default=DEFAULT_CALIBRATION_SEED, help="Seed of the finite-n simulation"
    )
    unit_root.add_argument("--output", "-o", help="Also write decision.json and a manifest here")
    unit_root.set_defaults(handler=cmd_unit_root_test)

    df_table = sub.add_parser("df-table", help="Regenerate the Dickey-Fuller quantile table")
    df_table.add_argument("--output", "-o", help="Table path (default: the packaged table)")
    df_table.add_argument("--m", type=int, default=DEFAULT_TABLE_M, help="Grid resolution")
    df_table.add_argument("--draws", type=int, default=DEFAULT_TABLE_DRAWS, help="Number of draws")
    df_table.add_argument("--seed", type=int, default=DEFAULT_TABLE_SEED, help="Master seed")
    df_table.set_defaults(handler=cmd_df_table)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point for tar-limits."""
    parser = build_parser()
    args = parser.parse_args(argv)

    console = Console(stderr=True)

    if getattr(args, "workers", None) is not None and args.workers < 1:
        console.print(f"[red]Configuration error: --workers must be >= 1, got {args.workers}[/red]")
        return EXIT_CONFIG

    try:
        return args.handler(args, console)
    except ConfigError as e:
        console.print(f"[red]Configuration error: {e}[/red]")
        return EXIT_CONFIG
    except NumericGuardError as e:
        console.print(f"[red]Numeric guard: {e}[/red]")
        return EXIT_NUMERIC
    except Exception as e:
        console.print(f"[red]Error: {e}[/red]")
        import traceback

        console.print(f"[red]Traceback: {traceback.format_exc()}[/red]")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
