"""
tar-limits

Simulation, estimation and limit-law checks for first-order threshold
autoregressive models.
"""

__version__ = "0.1.0"

# Main exports for easy importing
from .config import RunConfig
from .errors import (
    ConfigError,
    DomainError,
    NumericGuardError,
    OverflowGuard,
    RegimeEmpty,
    TarLimitsError,
)
from .estimators import constrained_lse, lse, q_n_eval, scaled_statistic
from .limit_laws import (
    sample_abs_bm_marginal,
    sample_df_functional,
    sample_eta_star,
    sample_limit_ratio,
    sample_xi,
)
from .models import (
    EmpiricalDistribution,
    EstimateResult,
    NoiseFamily,
    NoiseSpec,
    Path,
    RegimeFlag,
    StatKind,
    TarParams,
    XiConstruction,
)
from .monte_carlo import (
    ExperimentConfig,
    LimitLawSpec,
    convergence_table,
    empirical_quantile,
    ks_two_sample,
    run_experiment,
)
from .noise import RngStream, draw
from .tar_model import classify_regime, simulate_path
from .unit_root import DFQuantileTable, unit_root_test
from .main import main

__all__ = [
    "RunConfig",
    "ConfigError",
    "DomainError",
    "NumericGuardError",
    "OverflowGuard",
    "RegimeEmpty",
    "TarLimitsError",
    "constrained_lse",
    "lse",
    "q_n_eval",
    "scaled_statistic",
    "sample_abs_bm_marginal",
    "sample_df_functional",
    "sample_eta_star",
    "sample_limit_ratio",
    "sample_xi",
    "EmpiricalDistribution",
    "EstimateResult",
    "NoiseFamily",
    "NoiseSpec",
    "Path",
    "RegimeFlag",
    "StatKind",
    "TarParams",
    "XiConstruction",
    "ExperimentConfig",
    "LimitLawSpec",
    "convergence_table",
    "empirical_quantile",
    "ks_two_sample",
    "run_experiment",
    "RngStream",
    "draw",
    "classify_regime",
    "simulate_path",
    "DFQuantileTable",
    "unit_root_test",
    "main",
]
