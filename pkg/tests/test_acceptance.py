"""
Monte Carlo checks that the finite-n laws approach their limits.

Every test here runs thousands of replications; set TAR_LIMITS_WORKERS to
spread them over processes.
"""

import io
from pathlib import Path

import numpy as np
import pytest
from rich.console import Console

from scripts.tar_limits.config import RunConfig
from scripts.tar_limits.limit_laws import xi_from_path
from scripts.tar_limits.models import TarParams, XiConstruction
from scripts.tar_limits.monte_carlo import (
    ExperimentRunner,
    convergence_table,
    ks_against_limit,
    sample_limit_law,
)
from scripts.tar_limits.noise import RngStream
from scripts.tar_limits.tar_model import simulate_path
from scripts.tar_limits.unit_root import load_df_table, unit_root_test

pytestmark = pytest.mark.slow

CONFIG_DIR = Path(__file__).resolve().parent.parent / "config"


@pytest.fixture
def console():
    return Console(file=io.StringIO(), width=200)


def load_experiment(name, console):
    return RunConfig.from_file(CONFIG_DIR / name, console).experiment_config()


def ks_for(name, console):
    """Run a shipped experiment and return (KS per n, experiment results)."""
    experiment = load_experiment(name, console)
    results = ExperimentRunner(experiment, console).run()
    limit = sample_limit_law(experiment.limit_law, experiment.params, experiment.workers, console)
    return ks_against_limit(results, limit), results


class TestConvergenceInLaw:
    """KS distance between the finite-n law and an independent limit sample."""

    @pytest.mark.parametrize(
        "name",
        [
            "case1-unit-root.yml",
            "case1-beta-minus-one.yml",
            "mirrored-unit-root.yml",
            "drifted-unit-root.yml",
            "case1-marginal.yml",
        ],
    )
    def test_unit_root_cases(self, name, console):
        ks, _ = ks_for(name, console)
        assert ks[2000] <= 0.05

    @pytest.mark.parametrize("name", ["explosive-h1.yml", "explosive-h2.yml"])
    def test_explosive_cases(self, name, console):
        ks, results = ks_for(name, console)
        assert ks[60] <= 0.06
        dist = results[60]
        assert dist.n_dropped / (len(dist) + dist.n_dropped) <= 0.01


class TestXiConstructions:
    """Series and path-ratio forms of xi on shared paths."""

    def test_series_matches_path_ratio(self):
        params = TarParams(alpha=1.5, beta=0.5, r=0.0)
        values = []
        for i in range(1000):
            path = simulate_path(params, 120, RngStream(1234, i))
            ratio = xi_from_path(path, XiConstruction.PATH_RATIO)
            if not ratio.tail_guard_ok:
                continue
            series = xi_from_path(path, XiConstruction.SERIES_EQ23)
            assert series.value == pytest.approx(ratio.value, rel=1e-6, abs=1e-12)
            values.append(ratio.value)
        assert len(values) >= 900
        assert np.mean(np.array(values) <= 0.0) <= 1e-3


class TestConvergenceTables:
    """Constrained estimator convergence and beta-hat inconsistency."""

    def test_constrained_error_shrinks(self, console):
        frame = convergence_table(load_experiment("constrained-convergence.yml", console), console)
        medians = frame["median_abs_error"].tolist()
        assert frame["n"].tolist() == [10, 15, 20, 25, 30]
        assert all(b < a for a, b in zip(medians, medians[1:]))
        assert medians[-1] <= 1e-2

    def test_beta_error_does_not_vanish(self, console):
        frame = convergence_table(load_experiment("beta-inconsistency.yml", console), console)
        iqr = dict(zip(frame["n"], frame["iqr"]))
        assert iqr[400] >= 0.5 * iqr[100]
        assert iqr[400] >= 0.02


class TestUnitRootSize:
    """Rejection rate of the 5% test under the null."""

    def test_size(self, console):
        table = load_df_table()
        params = RunConfig.from_file(CONFIG_DIR / "case1-unit-root.yml", console).tar_params()
        decisions = [
            unit_root_test(
                simulate_path(params, 1000, RngStream(901, i)).values, params.r, 0.05, table
            )
            for i in range(2000)
        ]
        conclusive = [d.reject for d in decisions if d.reject is not None]
        assert len(conclusive) >= 1990
        assert sum(d.calibration == "finite-n" for d in decisions) >= 1990
        assert 0.035 <= np.mean(conclusive) <= 0.065
