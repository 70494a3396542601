"""
Data models for the TAR(1) toolkit.

This module contains the core data structures shared by the simulator, the
estimators, the limit-law samplers and the Monte Carlo harness.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Optional, Tuple

import numpy as np
import pandas as pd


class NoiseFamily(str, Enum):
    """Innovation laws. Every family has mean 0 and standard deviation sigma."""

    GAUSSIAN = "gaussian"
    LAPLACE = "laplace"
    UNIFORM = "uniform"
    DEGENERATE = "degenerate"


class RegimeFlag(str, Enum):
    """Case taxonomy of the TAR(1) parameter space. Flags may overlap."""

    STATIONARY_ERGODIC = "StationaryErgodic"
    UNIT_ROOT_CASE_I = "UnitRootCaseI"
    MIRRORED_UNIT_ROOT = "MirroredUnitRoot"
    EXPLOSIVE_H1 = "ExplosiveCaseII_H1"
    EXPLOSIVE_H2 = "ExplosiveCaseII_H2"
    RECIPROCAL_PRODUCT = "ReciprocalProduct"
    DRIFTED_UNIT_ROOT = "DriftedUnitRoot"
    CONSISTENCY_REGION = "ConsistencyRegion"
    H2_VIOLATED_BY_NOISE = "H2ViolatedByNoise"
    UNCLASSIFIED = "Unclassified"


class StatKind(str, Enum):
    """Scaled statistics whose finite-n law is compared with a limit law."""

    UNIT_ROOT_ALPHA = "UnitRootAlpha"
    UNIT_ROOT_BETA = "UnitRootBeta"
    DRIFTED_UNIT_ROOT_ALPHA = "DriftedUnitRootAlpha"
    EXPLOSIVE_ALPHA = "ExplosiveAlpha"
    CONSTRAINED_ALPHA_ERROR = "ConstrainedAlphaError"
    BETA_ERROR = "BetaError"
    SCALED_LEVEL = "ScaledLevel"


class XiConstruction(str, Enum):
    """Ways of computing the almost-sure limit of Y_n / alpha^n."""

    SERIES_EQ23 = "SeriesEq23"
    SERIES_EQ24 = "SeriesEq24"
    PATH_RATIO = "PathRatio"


@dataclass(frozen=True)
class NoiseSpec:
    """Innovation law: a family plus its standard deviation."""

    family: NoiseFamily = NoiseFamily.GAUSSIAN
    sigma: float = 1.0

    def __post_init__(self):
        """Validate the noise specification after initialization."""
        if not isinstance(self.family, NoiseFamily):
            object.__setattr__(self, "family", NoiseFamily(self.family))
        if not math.isfinite(self.sigma) or self.sigma < 0:
            raise ValueError(f"sigma must be finite and >= 0, got {self.sigma}")
        if self.family is NoiseFamily.DEGENERATE and self.sigma != 0:
            raise ValueError("degenerate noise must have sigma = 0")
        if self.family is not NoiseFamily.DEGENERATE and self.sigma == 0:
            raise ValueError(f"{self.family.value} noise needs sigma > 0")

    @classmethod
    def degenerate(cls) -> "NoiseSpec":
        """The zero law, for deterministic tests."""
        return cls(NoiseFamily.DEGENERATE, 0.0)

    @property
    def bounded_above(self) -> bool:
        """True when P(eps <= x) = 1 for some finite x."""
        return self.family in (NoiseFamily.UNIFORM, NoiseFamily.DEGENERATE)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "NoiseSpec":
        family = NoiseFamily(str(data.get("family", "gaussian")).lower())
        default_sigma = 0.0 if family is NoiseFamily.DEGENERATE else 1.0
        return cls(family, float(data.get("sigma", default_sigma)))

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for serialization."""
        return {"family": self.family.value, "sigma": self.sigma}


@dataclass(frozen=True)
class TarParams:
    """
    Parameters of the TAR(1) recursion.

    Y_t = gamma + alpha * Y_{t-1} + eps_t  if Y_{t-1} > r
    Y_t = delta + beta  * Y_{t-1} + eps_t  if Y_{t-1} <= r
    """

    gamma: float = 0.0
    delta: float = 0.0
    alpha: float = 1.0
    beta: float = 0.5
    r: float = 0.0
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    y0: float = 0.0
    y0_sd: Optional[float] = None

    def __post_init__(self):
        """Validate the parameters after initialization."""
        for name in ("gamma", "delta", "alpha", "beta", "r", "y0"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value}")
        if not isinstance(self.noise, NoiseSpec):
            raise TypeError("noise must be a NoiseSpec instance")
        if self.y0_sd is not None and (not math.isfinite(self.y0_sd) or self.y0_sd < 0):
            raise ValueError(f"y0_sd must be finite and >= 0, got {self.y0_sd}")

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for serialization."""
        return {
            "gamma": self.gamma,
            "delta": self.delta,
            "alpha": self.alpha,
            "beta": self.beta,
            "r": self.r,
            "y0": self.y0,
            "y0_sd": self.y0_sd,
            "noise": self.noise.to_dict(),
        }


@dataclass(frozen=True, eq=False)
class Path:
    """A realized trajectory Y_0..Y_n with the innovations eps_1..eps_n that built it."""

    values: np.ndarray
    innovations: np.ndarray
    params: TarParams
    provenance: Tuple[int, int] = (0, 0)

    def __post_init__(self):
        """Validate and freeze the arrays."""
        values = np.array(self.values, dtype=float)
        innovations = np.array(self.innovations, dtype=float)
        if values.ndim != 1 or innovations.ndim != 1:
            raise ValueError("values and innovations must be one-dimensional")
        if len(values) != len(innovations) + 1:
            raise ValueError(
                f"length(values) must equal length(innovations) + 1, "
                f"got {len(values)} and {len(innovations)}"
            )
        values.flags.writeable = False
        innovations.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "innovations", innovations)

    @property
    def n(self) -> int:
        """Number of transitions (the path holds n + 1 values)."""
        return len(self.innovations)

    def scaled(self, c: float) -> "Path":
        """Multiply every value and innovation by c; params are carried unchanged."""
        return Path(self.values * c, self.innovations * c, self.params, self.provenance)

    def to_frame(self) -> pd.DataFrame:
        """Tabular form with columns t, Y_t, eps_t (eps_0 is empty)."""
        eps = np.concatenate([[np.nan], self.innovations])
        return pd.DataFrame(
            {"t": np.arange(len(self.values)), "Y_t": self.values, "eps_t": eps}
        )

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for serialization."""
        return {
            "params": self.params.to_dict(),
            "seed": {"master_seed": self.provenance[0], "stream_id": self.provenance[1]},
            "n": self.n,
            "values": self.values.tolist(),
            "innovations": self.innovations.tolist(),
        }


@dataclass(frozen=True)
class EstimateResult:
    """Least-squares estimates of (alpha, beta) with per-regime diagnostics."""

    alpha_hat: Optional[float]
    beta_hat: Optional[float]
    n_upper: int
    n_lower: int
    residual_orthogonality_upper: float = 0.0
    residual_orthogonality_lower: float = 0.0

    def __post_init__(self):
        """Validate the counts after initialization."""
        if self.n_upper < 0 or self.n_lower < 0:
            raise ValueError("regime counts must be non-negative")

    @property
    def n_transitions(self) -> int:
        return self.n_upper + self.n_lower

    @property
    def upper_empty(self) -> bool:
        return self.alpha_hat is None

    @property
    def lower_empty(self) -> bool:
        return self.beta_hat is None

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary; empty regimes become null plus a reason."""
        return {
            "alpha_hat": self.alpha_hat,
            "alpha_hat_reason": "regime_empty:upper" if self.upper_empty else None,
            "beta_hat": self.beta_hat,
            "beta_hat_reason": "regime_empty:lower" if self.lower_empty else None,
            "n_upper": self.n_upper,
            "n_lower": self.n_lower,
            "residual_orthogonality_upper": self.residual_orthogonality_upper,
            "residual_orthogonality_lower": self.residual_orthogonality_lower,
        }


@dataclass(frozen=True)
class ConstrainedEstimate:
    """Minimizer of Q_n(x) under alpha * beta = 1."""

    value: float
    single_regime: Optional[str] = None
    candidates: Tuple[float, ...] = ()

    def to_dict(self) -> Dict[str, Any]:
        return {
            "value": self.value,
            "single_regime": self.single_regime,
            "candidates": list(self.candidates),
        }


@dataclass(frozen=True, eq=False)
class BrownianGrid:
    """B(0), B(1/m), ..., B(1) on a uniform grid."""

    m: int
    values: np.ndarray

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("grid resolution m must be positive")
        if len(self.values) != self.m + 1:
            raise ValueError(f"expected {self.m + 1} grid values, got {len(self.values)}")
        if self.values[0] != 0.0:
            raise ValueError("B(0) must be 0")

    def at(self, t: float) -> float:
        """Value at the grid point nearest to t."""
        return float(self.values[int(round(t * self.m))])


@dataclass(frozen=True)
class XiSample:
    """One draw of the almost-sure limit xi of Y_n / alpha^n."""

    value: float
    construction: XiConstruction
    horizon: int
    tail_guard_ok: bool

    def to_dict(self) -> Dict[str, Any]:
        return {
            "value": self.value,
            "construction": self.construction.value,
            "horizon": self.horizon,
            "tail_guard_ok": self.tail_guard_ok,
        }


@dataclass(frozen=True, eq=False)
class EmpiricalDistribution:
    """Sorted Monte Carlo sample plus the count of dropped replications."""

    samples: np.ndarray
    n_dropped: int = 0
    provenance: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        """Sort and freeze the sample."""
        samples = np.sort(np.asarray(self.samples, dtype=float))
        if samples.ndim != 1:
            raise ValueError("samples must be one-dimensional")
        if np.isnan(samples).any():
            raise ValueError("samples must not contain NaN")
        if self.n_dropped < 0:
            raise ValueError("n_dropped must be non-negative")
        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def is_empty(self) -> bool:
        return len(self.samples) == 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "count": len(self.samples),
            "n_dropped": self.n_dropped,
            "provenance": self.provenance,
        }


@dataclass
class RunManifest:
    """Everything needed to reproduce a CLI run bit-exactly."""

    tool_version: str
    command: str
    config_hash: str
    master_seed: Optional[int]
    started_at: str
    finished_at: Optional[str] = None
    outputs: Dict[str, str] = field(default_factory=dict)
    config: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for serialization."""
        return {
            "tool_version": self.tool_version,
            "command": self.command,
            "config_hash": self.config_hash,
            "master_seed": self.master_seed,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "outputs": dict(self.outputs),
            "config": self.config,
        }
