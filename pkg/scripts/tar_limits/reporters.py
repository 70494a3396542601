"""
Report generation for experiments, limit-law samples and convergence tables.

Console output uses rich tables; files are written to a results directory as
CSV (pandas, full double precision) and JSON.
"""

import json
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path as FilePath
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd
from rich.console import Console
from rich.table import Table

from .estimators import scaling_description
from .models import EmpiricalDistribution, Path, RunManifest
from .monte_carlo import ExperimentConfig, ks_critical_value, summarize

FLOAT_FORMAT = "%.17g"
KS_REPORT_LEVEL = 0.05


@dataclass
class ExperimentReport:
    """Everything an experiment produced, ready to be rendered."""

    config: ExperimentConfig
    results: Dict[int, EmpiricalDistribution]
    limit: Optional[EmpiricalDistribution] = None
    ks_vs_limit: Dict[int, float] = field(default_factory=dict)
    drop_reasons: Dict[int, Dict[str, int]] = field(default_factory=dict)
    split_half: Dict[int, float] = field(default_factory=dict)
    wall_clock_seconds: float = 0.0

    def critical_value(self, n: int) -> Optional[float]:
        """Two-sample KS critical value at level 0.05 for the sizes behind n."""
        if self.limit is None or self.limit.is_empty:
            return None
        return ks_critical_value(KS_REPORT_LEVEL, len(self.results[n]), len(self.limit))

    def to_dict(self) -> Dict[str, Any]:
        per_n = {}
        for n, dist in self.results.items():
            entry = summarize(dist)
            entry["drop_reasons"] = dict(sorted(self.drop_reasons.get(n, {}).items()))
            if n in self.split_half:
                entry["split_half_ks"] = self.split_half[n]
            if n in self.ks_vs_limit:
                entry["ks_vs_limit"] = self.ks_vs_limit[n]
                entry["ks_critical_value_0.05"] = self.critical_value(n)
            per_n[str(n)] = entry
        return {
            "stat": self.config.stat.value,
            "config_hash": self.config.config_hash,
            "master_seed": self.config.master_seed,
            "replications": self.config.replications,
            "per_n": per_n,
            "ks_vs_limit": {str(n): ks for n, ks in self.ks_vs_limit.items()},
            "limit_law": (
                {
                    "settings": (
                        self.config.limit_law.describe(self.config.params)
                        if self.config.limit_law
                        else None
                    ),
                    "summary": summarize(self.limit),
                }
                if self.limit is not None and not self.limit.is_empty
                else None
            ),
            "timing": {"wall_clock_seconds": self.wall_clock_seconds},
        }


class ReportGenerator(ABC):
    """Abstract base class for report generators."""

    @abstractmethod
    def generate(self, report: ExperimentReport) -> str:
        """Generate a report from experiment results."""
        pass


class ConsoleReportGenerator(ReportGenerator):
    """Prints per-n quantiles and KS distances as a rich table."""

    def __init__(self, console: Optional[Console] = None):
        """
        Initialize the console report generator.

        Args:
            console: Rich console instance. If None, creates a new one.
        """
        self.console = console or Console()

    def generate(self, report: ExperimentReport) -> str:
        table = Table(
            title=f"{report.config.stat.value}: finite-n laws",
            caption=scaling_description()[report.config.stat.value],
        )
        table.add_column("n", style="cyan", justify="right")
        table.add_column("count", justify="right")
        table.add_column("dropped", style="yellow", justify="right")
        table.add_column("q05", justify="right")
        table.add_column("median", justify="right")
        table.add_column("q95", justify="right")
        table.add_column("KS vs limit", style="magenta", justify="right")
        table.add_column("crit 5%", style="green", justify="right")

        for n, dist in report.results.items():
            summary = summarize(dist)
            quantiles = summary["quantiles"]
            ks = report.ks_vs_limit.get(n)
            crit = report.critical_value(n)
            table.add_row(
                str(n),
                str(summary["count"]),
                str(summary["n_dropped"]),
                f"{quantiles['0.05']:.4g}",
                f"{quantiles['0.5']:.4g}",
                f"{quantiles['0.95']:.4g}",
                f"{ks:.4f}" if ks is not None else "-",
                f"{crit:.4f}" if crit is not None else "-",
            )
        self.console.print(table)

        if report.limit is not None and not report.limit.is_empty:
            limit = summarize(report.limit)
            self.console.print(
                f"Limit law: {limit['count']} draws, median {limit['quantiles']['0.5']:.4g}, "
                f"{limit['n_dropped']} dropped"
            )
        self.console.print(f"Wall clock: {report.wall_clock_seconds:.1f}s")
        return f"{len(report.results)} path lengths reported"


class JSONReportGenerator(ReportGenerator):
    """summary.json content."""

    def generate(self, report: ExperimentReport) -> str:
        return json.dumps(report.to_dict(), indent=2)


def print_convergence_table(frame: pd.DataFrame, console: Optional[Console] = None) -> None:
    """Render a convergence table (n, median |error|, IQR) to the console."""
    console = console or Console()
    table = Table(title="Convergence of the estimation error")
    table.add_column("n", style="cyan", justify="right")
    table.add_column("median |error|", justify="right")
    table.add_column("IQR", justify="right")
    table.add_column("count", justify="right")
    table.add_column("dropped", style="yellow", justify="right")
    for row in frame.to_dict("records"):
        table.add_row(
            str(row["n"]),
            f"{row['median_abs_error']:.4g}",
            f"{row['iqr']:.4g}",
            str(row["count"]),
            str(row["n_dropped"]),
        )
    console.print(table)


def print_limit_summary(
    dist: EmpiricalDistribution, title: str, console: Optional[Console] = None
) -> None:
    """Render the quantile table of a limit-law sample."""
    console = console or Console()
    summary = summarize(dist)
    table = Table(title=title)
    table.add_column("p", style="cyan", justify="right")
    table.add_column("quantile", justify="right")
    for p, q in summary["quantiles"].items():
        table.add_row(p, f"{q:.6g}")
    console.print(table)
    console.print(
        f"count={summary['count']} dropped={summary['n_dropped']} "
        f"mean={summary['mean']:.6g} sd={summary['sd']:.6g}"
    )


class ResultsWriter:
    """Writes run artifacts into one directory and records them for the manifest."""

    def __init__(self, directory: Union[str, FilePath], console: Optional[Console] = None):
        """
        Initialize the writer.

        Args:
            directory: Results directory (created if missing)
            console: Rich console for output
        """
        self.directory = FilePath(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self.console = console or Console()
        self.outputs: Dict[str, str] = {}

    def _record(self, name: str, path: FilePath) -> FilePath:
        self.outputs[name] = str(path)
        return path

    def write_json(self, name: str, data: Any) -> FilePath:
        path = self.directory / name
        path.write_text(json.dumps(data, indent=2) + "\n")
        return self._record(name, path)

    def write_frame(self, name: str, frame: pd.DataFrame) -> FilePath:
        path = self.directory / name
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
        return self._record(name, path)

    def write_config(self, config: Dict[str, Any], config_hash: str) -> FilePath:
        return self.write_json("config.json", {"config": config, "config_hash": config_hash})

    def write_path(self, path: Path, stem: str = "path") -> List[FilePath]:
        """Path as CSV (t, Y_t, eps_t) plus the JSON form with provenance."""
        return [
            self.write_frame(f"{stem}.csv", path.to_frame()),
            self.write_json(f"{stem}.json", path.to_dict()),
        ]

    def write_samples(self, name: str, samples: np.ndarray) -> FilePath:
        return self.write_frame(name, pd.DataFrame({"value": np.asarray(samples, dtype=float)}))

    def write_experiment(self, report: ExperimentReport) -> List[FilePath]:
        """samples_n<k>.csv per n, limit_samples.csv and summary.json."""
        written = [
            self.write_samples(f"samples_n{n}.csv", dist.samples)
            for n, dist in report.results.items()
        ]
        if report.limit is not None:
            written.append(self.write_samples("limit_samples.csv", report.limit.samples))
        written.append(self.write_json("summary.json", report.to_dict()))
        return written

    def write_manifest(self, manifest: RunManifest) -> FilePath:
        manifest.outputs = dict(self.outputs)
        return self.write_json("manifest.json", manifest.to_dict())


class MultiFormatReporter:
    """Unified access to the experiment report formats."""

    def __init__(self, console: Optional[Console] = None):
        """
        Initialize the multi-format reporter.

        Args:
            console: Rich console instance for console output
        """
        self.console = console or Console()
        self._generators = {
            "console": ConsoleReportGenerator(self.console),
            "json": JSONReportGenerator(),
        }

    def generate_report(self, report: ExperimentReport, format_type: str) -> str:
        """
        Generate a report in the specified format.

        Raises:
            ValueError: If format_type is not supported
        """
        if format_type not in self._generators:
            available = ", ".join(self._generators.keys())
            raise ValueError(f"Unsupported format '{format_type}'. Available: {available}")
        return self._generators[format_type].generate(report)

    def get_available_formats(self) -> List[str]:
        return list(self._generators.keys())
