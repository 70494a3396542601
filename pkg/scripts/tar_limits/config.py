"""
Configuration module for tar-limits.

This module parses and validates the declarative YAML (or JSON) run
configuration and turns its sections into the typed objects the simulator and
the Monte Carlo harness consume.
"""

import hashlib
import json
import os
from pathlib import Path as FilePath
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

import yaml
from rich.console import Console

from .errors import ConfigError
from .models import NoiseSpec, StatKind, TarParams
from .monte_carlo import DEFAULT_LIMIT_KIND, ExperimentConfig, LimitLawSpec, check_limit_law
from .noise import noise_spec_from_config


def _as_float(key: str, value: Any) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"expected a number, got {value!r}", key)
    return float(value)


def _as_optional_float(key: str, value: Any) -> Optional[float]:
    return None if value is None else _as_float(key, value)


def _as_int(key: str, value: Any) -> int:
    if isinstance(value, float) and value.is_integer():
        return int(value)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"expected an integer, got {value!r}", key)
    return value


def _as_str(key: str, value: Any) -> str:
    if not isinstance(value, str):
        raise ConfigError(f"expected a string, got {value!r}", key)
    return value


def _as_bool(key: str, value: Any) -> bool:
    if not isinstance(value, bool):
        raise ConfigError(f"expected true or false, got {value!r}", key)
    return value


def _as_int_list(key: str, value: Any) -> List[int]:
    if not isinstance(value, list) or not value:
        raise ConfigError(f"expected a non-empty list of integers, got {value!r}", key)
    return [_as_int(f"{key}[{i}]", v) for i, v in enumerate(value)]


# section -> key -> coercion
SCHEMA: Dict[str, Dict[str, Callable[[str, Any], Any]]] = {
    "model": {
        "gamma": _as_float,
        "delta": _as_float,
        "alpha": _as_float,
        "beta": _as_float,
        "r": _as_float,
        "y0": _as_float,
        "y0_sd": _as_optional_float,
    },
    "noise": {"family": _as_str, "sigma": _as_float},
    "simulate": {"n": _as_int, "seed": _as_int, "stream": _as_int},
    "experiment": {
        "stat": _as_str,
        "n_grid": _as_int_list,
        "replications": _as_int,
        "seed": _as_int,
        "regime_empty_policy": _as_str,
        "workers": _as_int,
        "qn_convention": _as_str,
        "sign": _as_str,
    },
    "limit_law": {
        "kind": _as_str,
        "m": _as_int,
        "t": _as_float,
        "horizon": _as_int,
        "draws": _as_int,
        "seed": _as_int,
        "negate": _as_bool,
        "construction": _as_str,
    },
}


def workers_from_env(default: int = 1) -> int:
    """Worker count from TAR_LIMITS_WORKERS, or ``default`` when unset."""
    raw = os.getenv("TAR_LIMITS_WORKERS")
    if not raw:
        return default
    try:
        workers = int(raw)
    except ValueError:
        raise ConfigError(f"must be an integer, got '{raw}'", "TAR_LIMITS_WORKERS")
    if workers < 1:
        raise ConfigError(f"must be >= 1, got {workers}", "TAR_LIMITS_WORKERS")
    return workers


class RunConfig:
    """
    A validated run configuration.

    Every section is optional; commands ask for the sections they need and get
    a ConfigError naming the missing key otherwise.
    """

    def __init__(self, data: Optional[Dict[str, Any]] = None, console: Optional[Console] = None):
        """
        Initialize the configuration.

        Args:
            data: Parsed configuration mapping
            console: Rich console for output

        Raises:
            ConfigError: If a section or key is unknown or has the wrong type
        """
        self.console = console or Console()
        self.raw = data or {}
        self.sections = self._validate(self.raw)

    @staticmethod
    def _validate(data: Any) -> Dict[str, Dict[str, Any]]:
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a mapping of sections")
        sections: Dict[str, Dict[str, Any]] = {}
        for section, body in data.items():
            if section not in SCHEMA:
                raise ConfigError(
                    f"unknown section. Available: {', '.join(SCHEMA)}", str(section)
                )
            if body is None:
                body = {}
            if not isinstance(body, dict):
                raise ConfigError("section must be a mapping", section)
            coerced = {}
            for key, value in body.items():
                full_key = f"{section}.{key}"
                if key not in SCHEMA[section]:
                    raise ConfigError(
                        f"unknown key. Available: {', '.join(SCHEMA[section])}", full_key
                    )
                coerced[key] = SCHEMA[section][key](full_key, value)
            sections[section] = coerced
        return sections

    @classmethod
    def from_file(
        cls, path: Union[str, FilePath], console: Optional[Console] = None
    ) -> "RunConfig":
        """
        Load a YAML or JSON configuration file.

        Raises:
            ConfigError: If the file is missing, unparsable or invalid
        """
        path = FilePath(path)
        try:
            text = path.read_text()
        except OSError as e:
            raise ConfigError(f"cannot read config file {path}: {e}")
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as e:
            raise ConfigError(f"cannot parse {path}: {e}")
        return cls(data, console)

    @classmethod
    def from_strings(cls, text: str, console: Optional[Console] = None) -> "RunConfig":
        """Parse configuration text (YAML or JSON)."""
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as e:
            raise ConfigError(f"cannot parse configuration: {e}")
        return cls(data, console)

    def section(self, name: str) -> Dict[str, Any]:
        return self.sections.get(name, {})

    def has_section(self, name: str) -> bool:
        return name in self.sections

    def _require(self, section: str, key: str) -> Any:
        if key not in self.section(section):
            raise ConfigError("required", f"{section}.{key}")
        return self.section(section)[key]

    @property
    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON echo of the validated configuration."""
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def to_dict(self) -> Dict[str, Any]:
        return {name: dict(body) for name, body in self.sections.items()}

    def noise_spec(self) -> NoiseSpec:
        try:
            return noise_spec_from_config(self.section("noise"))
        except ValueError as e:
            raise ConfigError(str(e), "noise")

    def tar_params(self) -> TarParams:
        """Model parameters with the configured innovation law."""
        model = self.section("model")
        noise = self.noise_spec()
        try:
            return TarParams(noise=noise, **model)
        except (TypeError, ValueError) as e:
            raise ConfigError(str(e), "model")

    def simulate_settings(self) -> Tuple[int, int, int]:
        """(n, seed, stream) for the simulate command."""
        n = self._require("simulate", "n")
        if n < 1:
            raise ConfigError(f"must be >= 1, got {n}", "simulate.n")
        seed = self._require("simulate", "seed")
        return n, seed, self.section("simulate").get("stream", 0)

    def limit_law_spec(self, default_seed: Optional[int] = None) -> LimitLawSpec:
        """
        The limit_law section as a LimitLawSpec.

        Args:
            default_seed: Seed to use when the section gives none

        Raises:
            ConfigError: On missing keys, or settings the model parameters cannot
                support (horizon too short, construction or drift mismatch)
        """
        section = dict(self.section("limit_law"))
        if "kind" not in section:
            raise ConfigError("required", "limit_law.kind")
        if "seed" not in section:
            if default_seed is None:
                raise ConfigError("required", "limit_law.seed")
            section["seed"] = default_seed
        try:
            spec = LimitLawSpec(**section)
        except ValueError as e:
            raise ConfigError(str(e), "limit_law")
        check_limit_law(spec, self.tar_params())
        return spec

    def experiment_config(self, require_limit_law: bool = True) -> ExperimentConfig:
        """
        The experiment section as an ExperimentConfig.

        The limit law seed defaults to the experiment seed + 1 so that the
        limit draws never share streams with the replications.

        Args:
            require_limit_law: Whether a statistic with a known limit law needs
                a limit_law section

        Raises:
            ConfigError: On missing or invalid keys
        """
        experiment = self.section("experiment")
        stat_name = self._require("experiment", "stat")
        try:
            stat = StatKind(stat_name)
        except ValueError:
            available = ", ".join(s.value for s in StatKind)
            raise ConfigError(
                f"unknown statistic '{stat_name}'. Available: {available}", "experiment.stat"
            )
        n_grid = self._require("experiment", "n_grid")
        replications = self._require("experiment", "replications")
        seed = self._require("experiment", "seed")

        limit_law = None
        if self.has_section("limit_law"):
            limit_law = self.limit_law_spec(default_seed=seed + 1)
            if limit_law.seed == seed:
                self.console.print(
                    "[yellow]Warning: limit_law.seed equals experiment.seed; "
                    "limit draws share streams with the replications[/yellow]"
                )
        elif require_limit_law and stat in DEFAULT_LIMIT_KIND:
            raise ConfigError(
                f"required for {stat.value} (expected kind {DEFAULT_LIMIT_KIND[stat]})",
                "limit_law",
            )

        workers = experiment.get("workers", workers_from_env())
        params = self.tar_params()
        try:
            return ExperimentConfig(
                params=params,
                stat=stat,
                n_grid=n_grid,
                replications=replications,
                master_seed=seed,
                limit_law=limit_law,
                regime_empty_policy=experiment.get("regime_empty_policy", "drop-and-count"),
                workers=workers,
                qn_convention=experiment.get("qn_convention", "proof"),
                sign=experiment.get("sign", "positive"),
                config_hash=self.config_hash,
            )
        except ValueError as e:
            raise ConfigError(str(e), "experiment")

    def print_configuration(self) -> None:
        """Print the configuration to the console."""
        self.console.print("\n[bold blue]Run Configuration[/bold blue]")
        for name, body in self.sections.items():
            values = ", ".join(f"{k}={v}" for k, v in body.items()) or "(defaults)"
            self.console.print(f"  {name}: [green]{values}[/green]")
        self.console.print(f"  config hash: [green]{self.config_hash[:16]}[/green]")
