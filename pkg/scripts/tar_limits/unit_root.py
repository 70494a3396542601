"""
Unit-root test on the upper-regime slope.

Under alpha = 1 the statistic n(alpha_hat - 1) has the Dickey-Fuller limit
law, so the test rejects the unit root when the statistic falls below the
lower ``level`` quantile of that law. The asymptotic quantiles ship with the
package as a versioned JSON table. At moderate n the lower-regime excursions
shift the left tail of the statistic, so by default the critical value is
simulated at the observed n from the fitted null model instead.
"""

import json
import os
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path as FilePath
from typing import Any, Dict, Optional, Union

import numpy as np
from rich.console import Console

from .errors import ConfigError
from .estimators import lse
from .limit_laws import sample_df_functional_batch
from .models import EmpiricalDistribution, NoiseSpec, Path, TarParams
from .monte_carlo import empirical_quantile
from .noise import RngStream

TEST_LEVELS = (0.01, 0.05, 0.10)
TABLE_PROBABILITIES = (0.01, 0.025, 0.05, 0.10, 0.25, 0.5, 0.75, 0.90, 0.95, 0.975, 0.99)

DEFAULT_TABLE_M = 2000
DEFAULT_TABLE_DRAWS = 200_000
DEFAULT_TABLE_SEED = 20100601
TABLE_VERSION = 1

CALIBRATIONS = ("finite-n", "asymptotic")
DEFAULT_CALIBRATION_REPLICATIONS = 999
DEFAULT_CALIBRATION_SEED = 20100602

MIN_SERIES_LENGTH = 20


@dataclass
class DFQuantileTable:
    """Quantiles of the Dickey-Fuller functional with their generation settings."""

    quantiles: Dict[float, float]
    m: int = DEFAULT_TABLE_M
    draws: int = DEFAULT_TABLE_DRAWS
    seed: int = DEFAULT_TABLE_SEED
    version: int = TABLE_VERSION
    generated_at: Optional[str] = None
    source: str = "generated"

    def critical_value(self, level: float) -> float:
        """Lower-tail critical value at ``level``."""
        for p, q in self.quantiles.items():
            if abs(p - level) < 1e-12:
                return q
        available = ", ".join(f"{p:g}" for p in sorted(self.quantiles))
        raise ValueError(f"No quantile for level {level}. Available: {available}")

    @classmethod
    def generate(
        cls,
        m: int = DEFAULT_TABLE_M,
        draws: int = DEFAULT_TABLE_DRAWS,
        seed: int = DEFAULT_TABLE_SEED,
        console: Optional[Console] = None,
    ) -> "DFQuantileTable":
        """Sample the functional and tabulate its quantiles (linear interpolation)."""
        console = console or Console(stderr=True)
        console.print(
            f"[blue]Generating Dickey-Fuller table: m={m}, draws={draws}, seed={seed}[/blue]"
        )
        values, _ = sample_df_functional_batch(m, draws, RngStream(seed, 0))
        dist = EmpiricalDistribution(values)
        quantiles = {p: empirical_quantile(dist, p) for p in TABLE_PROBABILITIES}
        return cls(
            quantiles=quantiles,
            m=m,
            draws=draws,
            seed=seed,
            generated_at=datetime.now(timezone.utc).isoformat(),
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "version": self.version,
            "source": self.source,
            "settings": {"m": self.m, "draws": self.draws, "seed": self.seed},
            "generated_at": self.generated_at,
            "quantiles": {repr(p): q for p, q in sorted(self.quantiles.items())},
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "DFQuantileTable":
        settings = data.get("settings", {})
        return cls(
            quantiles={float(p): float(q) for p, q in data["quantiles"].items()},
            m=int(settings.get("m", DEFAULT_TABLE_M)),
            draws=int(settings.get("draws", DEFAULT_TABLE_DRAWS)),
            seed=int(settings.get("seed", DEFAULT_TABLE_SEED)),
            version=int(data.get("version", TABLE_VERSION)),
            generated_at=data.get("generated_at"),
            source=data.get("source", "generated"),
        )

    def save(self, path: Union[str, FilePath]) -> FilePath:
        path = FilePath(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2) + "\n")
        return path

    @classmethod
    def load(cls, path: Union[str, FilePath]) -> "DFQuantileTable":
        return cls.from_dict(json.loads(FilePath(path).read_text()))


def packaged_table_path() -> FilePath:
    """The table shipped in the package's data directory."""
    return FilePath(__file__).resolve().parent / "data" / f"df_quantiles_v{TABLE_VERSION}.json"


def load_df_table(path: Optional[Union[str, FilePath]] = None) -> DFQuantileTable:
    """
    Load a Dickey-Fuller table.

    The lookup order is ``path``, then TAR_LIMITS_DF_TABLE, then the packaged
    table.

    Raises:
        ConfigError: If the file cannot be read, has another version, or lacks
            a quantile for one of the test levels
    """
    env_path = os.getenv("TAR_LIMITS_DF_TABLE")
    path = FilePath(path) if path else FilePath(env_path) if env_path else packaged_table_path()
    try:
        table = DFQuantileTable.load(path)
    except (OSError, ValueError, KeyError) as e:
        raise ConfigError(f"cannot read Dickey-Fuller table {path}: {e}", "table")
    if table.version != TABLE_VERSION:
        raise ConfigError(
            f"{path} has version {table.version}, expected {TABLE_VERSION}", "table"
        )
    for level in TEST_LEVELS:
        try:
            table.critical_value(level)
        except ValueError as e:
            raise ConfigError(f"{path}: {e}", "table")
    return table


def finite_n_critical_value(
    path: Path,
    r: float,
    level: float,
    replications: int = DEFAULT_CALIBRATION_REPLICATIONS,
    seed: int = DEFAULT_CALIBRATION_SEED,
) -> Optional[float]:
    """
    ``level`` quantile of n(alpha_hat - 1) under the null fitted to ``path``.

    The simulated series start at Y_0, keep alpha = 1 above r and the fitted
    lower slope (clipped to [-1, 1]) at or below r, and are driven by centred
    null residuals resampled with replacement. All replications advance
    together, one time step per iteration.

    Returns:
        The critical value, or None when the lower regime is empty and there
        is no lower slope to fit
    """
    beta_hat = lse(path, r).beta_hat
    if beta_hat is None:
        return None
    beta = float(np.clip(beta_hat, -1.0, 1.0))

    y_prev, y_next = path.values[:-1], path.values[1:]
    residuals = y_next - np.where(y_prev > r, y_prev, beta * y_prev)
    residuals = residuals - residuals.mean()
    n = len(residuals)

    generator = RngStream(seed, 0).generator
    current = np.full(replications, float(path.values[0]))
    numerator = np.zeros(replications)
    denominator = np.zeros(replications)
    for _ in range(n):
        shocks = residuals[generator.integers(0, n, size=replications)]
        above = current > r
        following = np.where(above, current, beta * current) + shocks
        weight = np.where(above, current, 0.0)
        numerator += weight * (following - current)
        denominator += weight * current
        current = following

    usable = denominator > 0
    if not usable.any():
        return None
    statistics = n * numerator[usable] / denominator[usable]
    return empirical_quantile(EmpiricalDistribution(statistics), level)


@dataclass
class UnitRootDecision:
    """Outcome of the unit-root test; reject is None when inconclusive."""

    statistic: Optional[float]
    critical_value: float
    reject: Optional[bool]
    level: float
    n: int
    n_upper: int
    n_lower: int
    asymptotic_critical_value: float
    calibration: str = "asymptotic"
    inconclusive_reason: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "statistic": self.statistic,
            "critical_value": self.critical_value,
            "reject": self.reject,
            "level": self.level,
            "n": self.n,
            "n_upper": self.n_upper,
            "n_lower": self.n_lower,
            "calibration": self.calibration,
            "asymptotic_critical_value": self.asymptotic_critical_value,
            "inconclusive_reason": self.inconclusive_reason,
        }


def unit_root_test(
    series: np.ndarray,
    r: float,
    level: float,
    table: DFQuantileTable,
    calibration: str = "finite-n",
    replications: int = DEFAULT_CALIBRATION_REPLICATIONS,
    seed: int = DEFAULT_CALIBRATION_SEED,
) -> UnitRootDecision:
    """
    Test alpha = 1 against alpha < 1 using n(alpha_hat - 1) with gamma = 0.

    Args:
        series: Observed values Y_0..Y_n (at least 20)
        r: Known threshold
        level: One of 0.01, 0.05, 0.10
        table: Dickey-Fuller quantile table
        calibration: "finite-n" simulates the critical value at the observed n
            and falls back to the table when the lower regime is empty;
            "asymptotic" uses the table
        replications: Simulated series for the finite-n critical value
        seed: Master seed of the finite-n simulation

    Returns:
        UnitRootDecision; an empty upper regime is reported as inconclusive
    """
    series = np.asarray(series, dtype=float)
    if series.ndim != 1 or len(series) < MIN_SERIES_LENGTH:
        raise ValueError(f"series must hold at least {MIN_SERIES_LENGTH} values, got {len(series)}")
    if not np.isfinite(series).all():
        raise ValueError("series contains non-finite values")
    if not any(abs(level - allowed) < 1e-12 for allowed in TEST_LEVELS):
        raise ValueError(f"level must be one of {TEST_LEVELS}, got {level}")
    if calibration not in CALIBRATIONS:
        raise ValueError(
            f"Unknown calibration '{calibration}'. Available: {', '.join(CALIBRATIONS)}"
        )
    if replications < 2:
        raise ValueError(f"replications must be >= 2, got {replications}")

    params = TarParams(alpha=1.0, r=r, noise=NoiseSpec.degenerate())
    path = Path(series, np.diff(series), params)
    result = lse(path, r, gamma=0.0)
    asymptotic = table.critical_value(level)

    if result.alpha_hat is None:
        return UnitRootDecision(
            statistic=None,
            critical_value=asymptotic,
            reject=None,
            level=level,
            n=path.n,
            n_upper=result.n_upper,
            n_lower=result.n_lower,
            asymptotic_critical_value=asymptotic,
            inconclusive_reason="regime_empty:upper",
        )

    critical, used = asymptotic, "asymptotic"
    if calibration == "finite-n":
        simulated = finite_n_critical_value(path, r, level, replications, seed)
        if simulated is not None:
            critical, used = simulated, "finite-n"

    statistic = path.n * (result.alpha_hat - 1.0)
    return UnitRootDecision(
        statistic=statistic,
        critical_value=critical,
        reject=bool(statistic < critical),
        level=level,
        n=path.n,
        n_upper=result.n_upper,
        n_lower=result.n_lower,
        asymptotic_critical_value=asymptotic,
        calibration=used,
    )
