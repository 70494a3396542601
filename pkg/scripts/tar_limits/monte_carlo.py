"""
Monte Carlo harness: replicate simulate -> estimate -> scale, sample limit laws
and compare the two with the two-sample Kolmogorov-Smirnov distance.

Replication i always uses the stream (master_seed, i), so results do not depend
on the worker count or on the order in which workers finish.
"""

import math
from dataclasses import dataclass
from functools import partial
from multiprocessing import Pool
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from rich.console import Console
from rich.progress import BarColumn, Progress, SpinnerColumn, TextColumn

from .errors import (
    AllReplicationsDegenerate,
    ConfigError,
    DegenerateIntegral,
    DegenerateProblem,
    DivisionGuard,
    EmptyDistribution,
    RegimeEmpty,
    TailGuardFailed,
)
from .estimators import QN_CONVENTIONS, SIGNS, scaled_statistic
from .limit_laws import (
    eta_truncated_variance,
    eta_truncation,
    sample_abs_bm_marginal,
    sample_df_functional,
    sample_limit_ratio,
    sample_normal_limit,
    xi_horizon_min,
)
from .models import EmpiricalDistribution, RegimeFlag, StatKind, TarParams, XiConstruction
from .noise import RngStream
from .tar_model import classify_regime, is_explosive, simulate_path

REGIME_EMPTY_POLICIES = ("drop-and-count", "resample")
MAX_RESAMPLE_ATTEMPTS = 100
SUMMARY_PROBABILITIES = (0.01, 0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95, 0.99)

# Flags under which each statistic has the limit law it is compared against
STAT_EXPECTED_FLAGS: Dict[StatKind, Tuple[RegimeFlag, ...]] = {
    StatKind.UNIT_ROOT_ALPHA: (RegimeFlag.UNIT_ROOT_CASE_I,),
    StatKind.UNIT_ROOT_BETA: (RegimeFlag.MIRRORED_UNIT_ROOT,),
    StatKind.DRIFTED_UNIT_ROOT_ALPHA: (RegimeFlag.DRIFTED_UNIT_ROOT,),
    StatKind.EXPLOSIVE_ALPHA: (RegimeFlag.EXPLOSIVE_H1, RegimeFlag.EXPLOSIVE_H2),
    StatKind.CONSTRAINED_ALPHA_ERROR: (RegimeFlag.RECIPROCAL_PRODUCT,),
    StatKind.SCALED_LEVEL: (RegimeFlag.UNIT_ROOT_CASE_I, RegimeFlag.MIRRORED_UNIT_ROOT),
}

# Replication outcomes that are counted and dropped instead of aborting the run
_DROPPABLE = (RegimeEmpty, DegenerateProblem, DivisionGuard, DegenerateIntegral)
_RESAMPLABLE = (RegimeEmpty, DegenerateProblem)


@dataclass(frozen=True)
class LimitLawSpec:
    """Which limit sampler to draw from and with what settings."""

    kind: str
    m: int = 2000
    t: float = 1.0
    horizon: int = 200
    draws: int = 5000
    seed: int = 1
    negate: bool = False
    construction: XiConstruction = XiConstruction.PATH_RATIO

    def __post_init__(self):
        """Validate the limit-law settings after initialization."""
        if self.kind not in LIMIT_SAMPLERS:
            raise ValueError(
                f"Unknown limit law '{self.kind}'. Available: {', '.join(LIMIT_SAMPLERS)}"
            )
        if self.draws < 1:
            raise ValueError(f"draws must be positive, got {self.draws}")
        if self.m < 2:
            raise ValueError(f"m must be >= 2, got {self.m}")
        if not 0 < self.t <= 1:
            raise ValueError(f"t must lie in (0, 1], got {self.t}")
        if self.horizon < 1:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if not isinstance(self.construction, XiConstruction):
            object.__setattr__(self, "construction", XiConstruction(self.construction))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "m": self.m,
            "t": self.t,
            "horizon": self.horizon,
            "draws": self.draws,
            "seed": self.seed,
            "negate": self.negate,
            "construction": self.construction.value,
        }

    def describe(self, params: TarParams) -> Dict[str, Any]:
        """Settings plus the quantities the sampler derives from ``params``."""
        data = self.to_dict()
        sigma = params.noise.sigma
        if self.kind == "limit_ratio":
            data["eta_truncation"] = eta_truncation(params.alpha)
            data["eta_truncated_variance"] = eta_truncated_variance(params.alpha, sigma)
            data["xi_horizon_min"] = xi_horizon_min(params.alpha)
        elif self.kind == "abs_bm_marginal":
            data["sigma"] = sigma
        elif self.kind == "normal":
            data["variance"] = 3.0 * sigma * sigma / (params.gamma * params.gamma)
        return data


def check_limit_law(spec: LimitLawSpec, params: TarParams) -> None:
    """
    Reject settings under which the limit sampler cannot make a single draw.

    Raises:
        ConfigError: Naming the offending key
    """
    if spec.kind == "normal" and params.gamma == 0:
        raise ConfigError("the normal limit needs a drift gamma != 0", "model.gamma")
    if spec.kind != "limit_ratio":
        return
    flags = classify_regime(params)
    if not is_explosive(flags):
        names = ", ".join(sorted(f.value for f in flags))
        raise ConfigError(
            f"limit_ratio needs ExplosiveCaseII parameters, got {{{names}}}", "model"
        )
    minimum = xi_horizon_min(params.alpha)
    if spec.horizon < minimum:
        raise ConfigError(
            f"must be >= {minimum} for alpha={params.alpha:g}, got {spec.horizon}",
            "limit_law.horizon",
        )
    if spec.construction is XiConstruction.SERIES_EQ23 and params.beta == 0:
        raise ConfigError("SeriesEq23 needs beta != 0; use SeriesEq24", "limit_law.construction")
    if spec.construction is XiConstruction.SERIES_EQ24 and params.beta != 0:
        raise ConfigError("SeriesEq24 needs beta == 0; use SeriesEq23", "limit_law.construction")


@dataclass
class ExperimentConfig:
    """A replicated experiment over a grid of path lengths."""

    params: TarParams
    stat: StatKind
    n_grid: List[int]
    replications: int
    master_seed: int
    limit_law: Optional[LimitLawSpec] = None
    regime_empty_policy: str = "drop-and-count"
    workers: int = 1
    qn_convention: str = "proof"
    sign: str = "positive"
    config_hash: Optional[str] = None

    def __post_init__(self):
        """Validate the configuration after initialization."""
        self.stat = StatKind(self.stat)
        self.n_grid = [int(n) for n in self.n_grid]
        if self.replications < 2:
            raise ValueError(f"replications must be >= 2, got {self.replications}")
        if not self.n_grid:
            raise ValueError("n_grid must not be empty")
        if any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise ValueError(f"n_grid must be strictly increasing, got {self.n_grid}")
        if self.n_grid[0] < 2:
            raise ValueError(f"path lengths must be >= 2, got {self.n_grid[0]}")
        if self.regime_empty_policy not in REGIME_EMPTY_POLICIES:
            raise ValueError(
                f"Unknown regime_empty_policy '{self.regime_empty_policy}'. "
                f"Available: {', '.join(REGIME_EMPTY_POLICIES)}"
            )
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")
        if self.qn_convention not in QN_CONVENTIONS:
            raise ValueError(f"Unknown qn_convention '{self.qn_convention}'")
        if self.sign not in SIGNS:
            raise ValueError(f"Unknown sign '{self.sign}'")

    def compatibility_warnings(self) -> List[str]:
        """Mismatches between the statistic and the parameter point (not errors)."""
        flags = classify_regime(self.params)
        warnings = []
        expected = STAT_EXPECTED_FLAGS.get(self.stat)
        if expected and not flags.intersection(expected):
            names = ", ".join(sorted(f.value for f in flags))
            wanted = " or ".join(f.value for f in expected)
            warnings.append(
                f"{self.stat.value} expects {wanted} parameters; classified as {{{names}}}"
            )
        if RegimeFlag.H2_VIOLATED_BY_NOISE in flags:
            warnings.append(
                f"{self.params.noise.family.value} noise is bounded above; "
                "the explosive limit assumption H2 does not hold"
            )
        return warnings

    def to_dict(self) -> Dict[str, Any]:
        return {
            "params": self.params.to_dict(),
            "stat": self.stat.value,
            "n_grid": list(self.n_grid),
            "replications": self.replications,
            "master_seed": self.master_seed,
            "limit_law": self.limit_law.to_dict() if self.limit_law else None,
            "regime_empty_policy": self.regime_empty_policy,
            "qn_convention": self.qn_convention,
            "sign": self.sign,
        }


def replicate(
    config: ExperimentConfig, n: int, index: int
) -> Tuple[int, Optional[float], Optional[str]]:
    """
    Run replication ``index`` at path length ``n``.

    Returns:
        (index, statistic or None, reason it was dropped or None)
    """
    stream_ids = [index]
    if config.regime_empty_policy == "resample":
        stream_ids += [index + a * config.replications for a in range(1, MAX_RESAMPLE_ATTEMPTS + 1)]

    reason = None
    for stream_id in stream_ids:
        path = simulate_path(config.params, n, RngStream(config.master_seed, stream_id))
        try:
            value = scaled_statistic(
                path, config.params, config.stat, config.sign, config.qn_convention
            )
        except _DROPPABLE as e:
            reason = _drop_reason(e)
            if not isinstance(e, _RESAMPLABLE):
                break
            continue
        if math.isfinite(value):
            return index, value, None
        reason = "non_finite"
        break
    return index, None, reason


def _drop_reason(error: Exception) -> str:
    if isinstance(error, RegimeEmpty):
        return f"regime_empty:{error.side}"
    if isinstance(error, DegenerateProblem):
        return "degenerate_problem"
    return type(error).__name__


def _progress(console: Console) -> Progress:
    return Progress(
        SpinnerColumn(),
        TextColumn("[progress.description]{task.description}"),
        BarColumn(),
        TextColumn("{task.completed}/{task.total}"),
        console=console,
    )


def _fan_out(
    func: Callable[[int], Tuple[int, Optional[float], Optional[str]]],
    count: int,
    workers: int,
    description: str,
    console: Console,
) -> List[Tuple[int, Optional[float], Optional[str]]]:
    """Apply ``func`` to 0..count-1, possibly on a process pool; results sorted by index."""
    results = []
    with _progress(console) as progress:
        task = progress.add_task(description, total=count)
        if workers == 1:
            for i in range(count):
                results.append(func(i))
                progress.advance(task)
        else:
            chunksize = max(1, count // (workers * 8))
            with Pool(processes=workers) as pool:
                for result in pool.imap_unordered(func, range(count), chunksize=chunksize):
                    results.append(result)
                    progress.advance(task)
    results.sort(key=lambda item: item[0])
    return results


class ExperimentRunner:
    """Runs an ExperimentConfig and collects one EmpiricalDistribution per n."""

    def __init__(self, config: ExperimentConfig, console: Optional[Console] = None):
        """
        Initialize the runner.

        Args:
            config: Experiment configuration
            console: Rich console for progress output
        """
        self.config = config
        self.console = console or Console()
        self.drop_reasons: Dict[int, Dict[str, int]] = {}
        self.ordered_samples: Dict[int, np.ndarray] = {}

    def run(self) -> Dict[int, EmpiricalDistribution]:
        """
        Replicate the statistic for every n in the grid.

        Raises:
            AllReplicationsDegenerate: If every replication was dropped for some n
        """
        config = self.config
        for warning in config.compatibility_warnings():
            self.console.print(f"[yellow]Warning: {warning}[/yellow]")

        results: Dict[int, EmpiricalDistribution] = {}
        for n in config.n_grid:
            outcomes = _fan_out(
                partial(replicate, config, n),
                config.replications,
                config.workers,
                f"{config.stat.value} at n={n}",
                self.console,
            )
            values = [value for _, value, _ in outcomes if value is not None]
            reasons: Dict[str, int] = {}
            for _, value, reason in outcomes:
                if value is None:
                    reasons[reason or "unknown"] = reasons.get(reason or "unknown", 0) + 1
            n_dropped = sum(reasons.values())
            if not values:
                raise AllReplicationsDegenerate(n, n_dropped)
            if n_dropped:
                detail = ", ".join(f"{k}={v}" for k, v in sorted(reasons.items()))
                self.console.print(
                    f"[yellow]n={n}: dropped {n_dropped}/{config.replications} "
                    f"replications ({detail})[/yellow]"
                )

            self.drop_reasons[n] = reasons
            self.ordered_samples[n] = np.array(values)
            results[n] = EmpiricalDistribution(
                np.array(values),
                n_dropped=n_dropped,
                provenance={
                    "config_hash": config.config_hash,
                    "master_seed": config.master_seed,
                    "n": n,
                    "stat": config.stat.value,
                },
            )
        return results


def run_experiment(
    config: ExperimentConfig, console: Optional[Console] = None
) -> Dict[int, EmpiricalDistribution]:
    """Map each n in ``config.n_grid`` to the empirical law of the scaled statistic."""
    return ExperimentRunner(config, console).run()


def empirical_quantile(dist: EmpiricalDistribution, p: float) -> float:
    """
    Quantile by linear interpolation between order statistics.

    With k sorted samples s_0..s_{k-1}, h = (k - 1) p and the result is
    s_floor(h) + (h - floor(h)) (s_ceil(h) - s_floor(h)). This is numpy's
    "linear" method; p = 0 and p = 1 give the minimum and maximum.

    Raises:
        EmptyDistribution: If ``dist`` has no samples
    """
    if dist.is_empty:
        raise EmptyDistribution("quantile of an empty distribution")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    samples = dist.samples
    h = (len(samples) - 1) * p
    lo = int(math.floor(h))
    hi = int(math.ceil(h))
    return float(samples[lo] + (h - lo) * (samples[hi] - samples[lo]))


def ecdf(dist: EmpiricalDistribution, x: float) -> float:
    """Fraction of samples <= x."""
    if dist.is_empty:
        raise EmptyDistribution("ECDF of an empty distribution")
    return float(np.searchsorted(dist.samples, x, side="right")) / len(dist)


def ks_two_sample(a: EmpiricalDistribution, b: EmpiricalDistribution) -> float:
    """
    sup_x |F_a(x) - F_b(x)| by a single merge scan over both sorted samples.

    Tied values are consumed together on both sides before the gap is measured.

    Raises:
        EmptyDistribution: If either sample is empty
    """
    if a.is_empty or b.is_empty:
        raise EmptyDistribution("KS distance needs two non-empty samples")
    xs, ys = a.samples.tolist(), b.samples.tolist()
    na, nb = len(xs), len(ys)
    i = j = 0
    d = 0.0
    while i < na and j < nb:
        x = xs[i] if xs[i] <= ys[j] else ys[j]
        while i < na and xs[i] == x:
            i += 1
        while j < nb and ys[j] == x:
            j += 1
        d = max(d, abs(i / na - j / nb))
    return d


def ks_critical_value(level: float, n_a: int, n_b: int) -> float:
    """Asymptotic two-sample KS critical value sqrt(-ln(level/2)/2) sqrt((n_a + n_b)/(n_a n_b))."""
    if not 0 < level < 1:
        raise ValueError(f"level must lie in (0, 1), got {level}")
    if n_a < 1 or n_b < 1:
        raise ValueError("sample sizes must be positive")
    c = math.sqrt(-math.log(level / 2.0) / 2.0)
    return c * math.sqrt((n_a + n_b) / (n_a * n_b))


def split_half_ks(values: Sequence[float]) -> float:
    """KS distance between the first and second half of ``values`` taken in draw order."""
    values = np.asarray(values, dtype=float)
    half = len(values) // 2
    if half < 1:
        raise EmptyDistribution("need at least two values to split")
    return ks_two_sample(
        EmpiricalDistribution(values[:half]), EmpiricalDistribution(values[half : 2 * half])
    )


def summarize(dist: EmpiricalDistribution) -> Dict[str, Any]:
    """Quantiles at the standard probabilities plus count, drops, mean and sd."""
    if dist.is_empty:
        raise EmptyDistribution("cannot summarize an empty distribution")
    return {
        "count": len(dist),
        "n_dropped": dist.n_dropped,
        "drop_fraction": dist.n_dropped / (len(dist) + dist.n_dropped),
        "mean": float(np.mean(dist.samples)),
        "sd": float(np.std(dist.samples, ddof=1)) if len(dist) > 1 else 0.0,
        "fraction_non_positive": ecdf(dist, 0.0),
        "quantiles": {repr(p): empirical_quantile(dist, p) for p in SUMMARY_PROBABILITIES},
    }


def _draw_df_functional(spec: LimitLawSpec, params: TarParams, index: int) -> float:
    return sample_df_functional(spec.m, RngStream(spec.seed, index))


def _draw_abs_bm_marginal(spec: LimitLawSpec, params: TarParams, index: int) -> float:
    return sample_abs_bm_marginal(spec.t, params.noise.sigma, spec.m, RngStream(spec.seed, index))


def _draw_normal(spec: LimitLawSpec, params: TarParams, index: int) -> float:
    return sample_normal_limit(params.gamma, params.noise.sigma, RngStream(spec.seed, index))


def _draw_limit_ratio(spec: LimitLawSpec, params: TarParams, index: int) -> float:
    pair = (RngStream(spec.seed, 2 * index), RngStream(spec.seed, 2 * index + 1))
    return sample_limit_ratio(params, spec.horizon, pair, construction=spec.construction)


# Registry of limit samplers keyed by config name
LIMIT_SAMPLERS: Dict[str, Callable[[LimitLawSpec, TarParams, int], float]] = {
    "df_functional": _draw_df_functional,
    "abs_bm_marginal": _draw_abs_bm_marginal,
    "normal": _draw_normal,
    "limit_ratio": _draw_limit_ratio,
}

# Limit law each statistic is compared against by default
DEFAULT_LIMIT_KIND: Dict[StatKind, str] = {
    StatKind.UNIT_ROOT_ALPHA: "df_functional",
    StatKind.UNIT_ROOT_BETA: "df_functional",
    StatKind.DRIFTED_UNIT_ROOT_ALPHA: "normal",
    StatKind.EXPLOSIVE_ALPHA: "limit_ratio",
    StatKind.SCALED_LEVEL: "abs_bm_marginal",
}


def draw_limit(
    spec: LimitLawSpec, params: TarParams, index: int
) -> Tuple[int, Optional[float], Optional[str]]:
    """Draw ``index`` of the limit law; guard failures are returned as drop reasons."""
    try:
        value = LIMIT_SAMPLERS[spec.kind](spec, params, index)
    except (TailGuardFailed, DivisionGuard, DegenerateIntegral) as e:
        return index, None, type(e).__name__
    return index, -value if spec.negate else value, None


def sample_limit_law(
    spec: LimitLawSpec,
    params: TarParams,
    workers: int = 1,
    console: Optional[Console] = None,
) -> EmpiricalDistribution:
    """
    ``spec.draws`` draws of the limit law, draw i on stream (spec.seed, i).

    The limit ratio uses the pair (spec.seed, 2i), (spec.seed, 2i + 1) so that
    eta* and xi* are independent. Draws whose guards fail are counted in
    n_dropped.

    Raises:
        ConfigError: If the settings cannot produce a draw for ``params``
    """
    check_limit_law(spec, params)
    console = console or Console()
    outcomes = _fan_out(
        partial(draw_limit, spec, params),
        spec.draws,
        workers,
        f"Sampling {spec.kind}",
        console,
    )
    values = [value for _, value, _ in outcomes if value is not None]
    n_dropped = spec.draws - len(values)
    if n_dropped:
        console.print(f"[yellow]{spec.kind}: dropped {n_dropped}/{spec.draws} draws[/yellow]")
    return EmpiricalDistribution(
        np.array(values),
        n_dropped=n_dropped,
        provenance={"limit_law": spec.to_dict()},
    )


def ks_against_limit(
    results: Dict[int, EmpiricalDistribution], limit: EmpiricalDistribution
) -> Dict[int, float]:
    """KS distance of every finite-n distribution from the limit sample."""
    return {n: ks_two_sample(dist, limit) for n, dist in results.items()}


CONVERGENCE_STATS = (StatKind.CONSTRAINED_ALPHA_ERROR, StatKind.BETA_ERROR)


def convergence_table(
    config: ExperimentConfig, console: Optional[Console] = None
) -> pd.DataFrame:
    """
    Median absolute error and IQR of the error per n.

    Returns:
        DataFrame with columns n, median_abs_error, iqr, count, n_dropped
    """
    if config.stat not in CONVERGENCE_STATS:
        allowed = ", ".join(s.value for s in CONVERGENCE_STATS)
        raise ValueError(f"convergence tables need stat in {{{allowed}}}, got {config.stat.value}")
    results = run_experiment(config, console)
    rows = []
    for n, dist in results.items():
        abs_errors = EmpiricalDistribution(np.abs(dist.samples))
        rows.append(
            {
                "n": n,
                "median_abs_error": empirical_quantile(abs_errors, 0.5),
                "iqr": empirical_quantile(dist, 0.75) - empirical_quantile(dist, 0.25),
                "count": len(dist),
                "n_dropped": dist.n_dropped,
            }
        )
    return pd.DataFrame(rows, columns=["n", "median_abs_error", "iqr", "count", "n_dropped"])
