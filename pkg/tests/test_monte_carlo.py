import io
import math

import numpy as np
import pytest
from rich.console import Console
from scipy import stats

from scripts.tar_limits.errors import (
    AllReplicationsDegenerate,
    ConfigError,
    DivisionGuard,
    EmptyDistribution,
    OverflowGuard,
    RegimeEmpty,
    TailGuardFailed,
)
from scripts.tar_limits.models import EmpiricalDistribution, NoiseSpec, StatKind, TarParams
from scripts.tar_limits.monte_carlo import (
    LIMIT_SAMPLERS,
    ExperimentConfig,
    ExperimentRunner,
    LimitLawSpec,
    convergence_table,
    draw_limit,
    ecdf,
    empirical_quantile,
    ks_against_limit,
    ks_critical_value,
    ks_two_sample,
    replicate,
    run_experiment,
    sample_limit_law,
    split_half_ks,
    summarize,
)
from scripts.tar_limits.noise import RngStream
from scripts.tar_limits.tar_model import simulate_path

ZERO = NoiseSpec.degenerate()
CASE_ONE = TarParams(alpha=1.0, beta=0.5, r=-0.5)


def dist(values):
    return EmpiricalDistribution(np.asarray(values, dtype=float))


@pytest.fixture
def console():
    """Console writing into a buffer so tests can inspect warnings."""
    return Console(file=io.StringIO(), width=200)


def fake_statistic(path, params, kind, sign, convention):
    """Statistic equal to the stream id; every third stream has an empty upper regime."""
    stream_id = path.provenance[1]
    if stream_id % 3 == 0:
        raise RegimeEmpty("upper")
    return float(stream_id)


class TestExperimentConfig:
    """Test experiment validation."""

    def test_valid(self):
        config = ExperimentConfig(CASE_ONE, "UnitRootAlpha", [10, 20], 5, 1)
        assert config.stat is StatKind.UNIT_ROOT_ALPHA
        assert config.compatibility_warnings() == []

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"replications": 1},
            {"n_grid": []},
            {"n_grid": [20, 10]},
            {"n_grid": [10, 10]},
            {"n_grid": [1, 10]},
            {"regime_empty_policy": "ignore"},
            {"workers": 0},
            {"qn_convention": "textbook"},
            {"sign": "zero"},
        ],
    )
    def test_invalid(self, kwargs):
        settings = {"n_grid": [10, 20], "replications": 5}
        settings.update(kwargs)
        with pytest.raises(ValueError):
            ExperimentConfig(CASE_ONE, StatKind.UNIT_ROOT_ALPHA, master_seed=1, **settings)

    def test_mismatch_is_a_warning(self):
        config = ExperimentConfig(TarParams(alpha=0.5, beta=0.5), "UnitRootAlpha", [10], 2, 1)
        warnings = config.compatibility_warnings()
        assert len(warnings) == 1
        assert "UnitRootCaseI" in warnings[0]

    def test_bounded_noise_warning(self):
        params = TarParams(alpha=1.2, beta=0.5, r=0.7, noise=NoiseSpec("uniform", 1.0))
        config = ExperimentConfig(params, "ExplosiveAlpha", [10], 2, 1)
        assert any("bounded above" in w for w in config.compatibility_warnings())

    def test_to_dict(self):
        spec = LimitLawSpec("df_functional", draws=10)
        data = ExperimentConfig(CASE_ONE, "UnitRootAlpha", [10], 2, 7, limit_law=spec).to_dict()
        assert data["stat"] == "UnitRootAlpha"
        assert data["master_seed"] == 7
        assert data["limit_law"]["kind"] == "df_functional"


class TestReplicate:
    """Test single replications and the regime-empty policies."""

    def test_noiseless_replications_agree(self, console):
        params = TarParams(alpha=1.0, beta=0.5, r=0.0, y0=1.0, noise=ZERO)
        config = ExperimentConfig(params, StatKind.UNIT_ROOT_ALPHA, [10, 20], 3, 1)
        results = run_experiment(config, console)
        for n in (10, 20):
            assert results[n].samples.tolist() == [0.0, 0.0, 0.0]

    def test_uses_replication_stream(self):
        config = ExperimentConfig(CASE_ONE, StatKind.SCALED_LEVEL, [10], 4, 99)
        index, value, reason = replicate(config, 10, 2)
        path = simulate_path(CASE_ONE, 10, RngStream(99, 2))
        assert (index, reason) == (2, None)
        assert value == path.values[-1] / math.sqrt(10)

    def test_drop_and_count(self, mocker, console):
        mocker.patch("scripts.tar_limits.monte_carlo.scaled_statistic", side_effect=fake_statistic)
        config = ExperimentConfig(CASE_ONE, StatKind.UNIT_ROOT_ALPHA, [10], 9, 1)
        runner = ExperimentRunner(config, console)
        result = runner.run()[10]
        assert result.samples.tolist() == [1.0, 2.0, 4.0, 5.0, 7.0, 8.0]
        assert result.n_dropped == 3
        assert runner.drop_reasons[10] == {"regime_empty:upper": 3}
        assert "dropped 3/9" in console.file.getvalue()

    def test_resample(self, mocker, console):
        mocker.patch("scripts.tar_limits.monte_carlo.scaled_statistic", side_effect=fake_statistic)
        config = ExperimentConfig(
            CASE_ONE, StatKind.UNIT_ROOT_ALPHA, [10], 10, 1, regime_empty_policy="resample"
        )
        result = run_experiment(config, console)[10]
        assert result.n_dropped == 0
        assert result.samples.tolist() == [1.0, 2.0, 4.0, 5.0, 7.0, 8.0, 10.0, 13.0, 16.0, 19.0]

    def test_resample_gives_up(self, mocker):
        mocker.patch(
            "scripts.tar_limits.monte_carlo.scaled_statistic", side_effect=RegimeEmpty("lower")
        )
        config = ExperimentConfig(
            CASE_ONE, StatKind.BETA_ERROR, [10], 2, 1, regime_empty_policy="resample"
        )
        assert replicate(config, 10, 0) == (0, None, "regime_empty:lower")

    def test_guard_failures_are_not_resampled(self, mocker):
        statistic = mocker.patch(
            "scripts.tar_limits.monte_carlo.scaled_statistic", side_effect=DivisionGuard("tiny")
        )
        config = ExperimentConfig(
            CASE_ONE, StatKind.UNIT_ROOT_ALPHA, [10], 2, 1, regime_empty_policy="resample"
        )
        assert replicate(config, 10, 1) == (1, None, "DivisionGuard")
        assert statistic.call_count == 1

    def test_non_finite_values_are_dropped(self, mocker):
        mocker.patch("scripts.tar_limits.monte_carlo.scaled_statistic", return_value=math.inf)
        config = ExperimentConfig(CASE_ONE, StatKind.UNIT_ROOT_ALPHA, [10], 2, 1)
        assert replicate(config, 10, 0) == (0, None, "non_finite")

    def test_all_dropped(self, console):
        params = TarParams(alpha=1.0, beta=0.5, r=0.0, y0=-1.0, noise=ZERO)
        config = ExperimentConfig(params, StatKind.UNIT_ROOT_ALPHA, [10], 4, 1)
        with pytest.raises(AllReplicationsDegenerate) as excinfo:
            run_experiment(config, console)
        assert (excinfo.value.n, excinfo.value.n_dropped) == (10, 4)

    def test_overflow_propagates(self, console):
        params = TarParams(alpha=2.0, beta=0.5, r=0.0, y0=1.0, noise=ZERO)
        config = ExperimentConfig(params, StatKind.EXPLOSIVE_ALPHA, [2000], 2, 1)
        with pytest.raises(OverflowGuard):
            run_experiment(config, console)


class TestDeterminism:
    """Test reproducibility across runs and worker counts."""

    def test_rerun_is_bit_identical(self, console):
        config = ExperimentConfig(CASE_ONE, StatKind.UNIT_ROOT_ALPHA, [50, 100], 40, 123)
        first = run_experiment(config, console)
        second = run_experiment(config, console)
        for n in (50, 100):
            assert np.array_equal(first[n].samples, second[n].samples)

    @pytest.mark.integration
    def test_worker_count_does_not_matter(self, console):
        serial = ExperimentConfig(CASE_ONE, StatKind.UNIT_ROOT_ALPHA, [60], 50, 321)
        parallel = ExperimentConfig(CASE_ONE, StatKind.UNIT_ROOT_ALPHA, [60], 50, 321, workers=3)
        a = ExperimentRunner(serial, console)
        b = ExperimentRunner(parallel, console)
        assert np.array_equal(a.run()[60].samples, b.run()[60].samples)
        assert np.array_equal(a.ordered_samples[60], b.ordered_samples[60])

    @pytest.mark.integration
    def test_limit_sampler_worker_count_does_not_matter(self, console):
        spec = LimitLawSpec("df_functional", m=100, draws=60, seed=4)
        serial = sample_limit_law(spec, CASE_ONE, workers=1, console=console)
        parallel = sample_limit_law(spec, CASE_ONE, workers=2, console=console)
        assert np.array_equal(serial.samples, parallel.samples)


class TestQuantilesAndKs:
    """Test the empirical distribution helpers."""

    def test_quantile_examples(self):
        assert empirical_quantile(dist([1, 2, 3]), 0.5) == 2.0
        assert empirical_quantile(dist([3, 1, 2]), 0.0) == 1.0
        assert empirical_quantile(dist([1, 2, 3]), 1.0) == 3.0
        assert empirical_quantile(dist([0, 10]), 0.25) == 2.5

    def test_quantile_matches_numpy_linear(self):
        values = np.random.default_rng(1).standard_normal(101)
        for p in (0.01, 0.33, 0.5, 0.9):
            assert empirical_quantile(dist(values), p) == pytest.approx(np.quantile(values, p))

    def test_quantiles_are_monotone(self):
        sample = dist(np.random.default_rng(2).standard_cauchy(500))
        qs = [empirical_quantile(sample, p) for p in np.linspace(0, 1, 201)]
        assert all(a <= b for a, b in zip(qs, qs[1:]))

    def test_quantile_errors(self):
        with pytest.raises(EmptyDistribution):
            empirical_quantile(dist([]), 0.5)
        with pytest.raises(ValueError):
            empirical_quantile(dist([1.0]), 1.5)

    def test_distribution_rejects_nan(self):
        with pytest.raises(ValueError):
            dist([1.0, math.nan])

    def test_ecdf(self):
        sample = dist([1, 2, 2, 3])
        assert ecdf(sample, 2.0) == 0.75
        assert ecdf(sample, 0.0) == 0.0

    def test_ks_examples(self):
        d = dist([0.3, 1.2, -4.0])
        assert ks_two_sample(d, d) == 0.0
        assert ks_two_sample(dist([0, 0]), dist([1, 1])) == 1.0
        assert ks_two_sample(dist([1, 3]), dist([2, 4])) == 0.5

    def test_ks_ties(self):
        assert ks_two_sample(dist([1, 1, 2]), dist([1, 2, 2])) == pytest.approx(1 / 3)

    def test_ks_matches_scipy(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            a = np.round(rng.standard_normal(int(rng.integers(5, 300))), 1)
            b = np.round(rng.standard_normal(int(rng.integers(5, 300))) + 0.2, 1)
            expected = stats.ks_2samp(a, b).statistic
            assert ks_two_sample(dist(a), dist(b)) == pytest.approx(expected, abs=1e-12)

    def test_ks_symmetry_and_triangle(self):
        rng = np.random.default_rng(4)
        a, b, c = (dist(rng.standard_normal(200) * s) for s in (1.0, 1.5, 2.0))
        assert ks_two_sample(a, b) == ks_two_sample(b, a)
        assert ks_two_sample(a, c) <= ks_two_sample(a, b) + ks_two_sample(b, c) + 1e-12

    def test_ks_needs_samples(self):
        with pytest.raises(EmptyDistribution):
            ks_two_sample(dist([]), dist([1.0]))

    def test_critical_value(self):
        assert ks_critical_value(0.05, 100, 100) == pytest.approx(0.19206, abs=1e-5)
        with pytest.raises(ValueError):
            ks_critical_value(0.0, 10, 10)

    def test_split_half(self):
        assert split_half_ks([1.0, 2.0, 1.0, 2.0]) == 0.0
        assert split_half_ks([0.0, 0.0, 5.0, 5.0]) == 1.0
        with pytest.raises(EmptyDistribution):
            split_half_ks([1.0])

    @pytest.mark.slow
    def test_split_half_self_consistency(self, console):
        """Halves of one experiment's replications pass the 1% KS test in nearly every trial."""
        passes = 0
        for trial in range(40):
            config = ExperimentConfig(CASE_ONE, StatKind.UNIT_ROOT_ALPHA, [100], 400, 7000 + trial)
            runner = ExperimentRunner(config, console)
            runner.run()
            values = runner.ordered_samples[100]
            half = len(values) // 2
            critical = ks_critical_value(0.01, half, len(values) - half)
            passes += split_half_ks(values) <= critical
        assert passes >= 38

    def test_summarize(self):
        summary = summarize(EmpiricalDistribution(np.arange(1.0, 11.0), n_dropped=2))
        assert summary["count"] == 10
        assert summary["drop_fraction"] == pytest.approx(2 / 12)
        assert summary["mean"] == 5.5
        assert summary["quantiles"]["0.5"] == 5.5
        assert summary["fraction_non_positive"] == 0.0
        assert set(summary["quantiles"]) == {
            "0.01", "0.05", "0.1", "0.25", "0.5", "0.75", "0.9", "0.95", "0.99"
        }

    def test_summarize_counts_non_positive_draws(self):
        summary = summarize(dist([-2.0, -1.0, 0.0, 1.0, 2.0]))
        assert summary["fraction_non_positive"] == pytest.approx(0.6)


class TestLimitLawSampling:
    """Test limit-law specs and sampling."""

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            LimitLawSpec("cauchy")
        with pytest.raises(ValueError):
            LimitLawSpec("df_functional", draws=0)
        with pytest.raises(ValueError):
            LimitLawSpec("abs_bm_marginal", t=0.0)
        spec = LimitLawSpec("limit_ratio", construction="SeriesEq23")
        assert spec.to_dict()["construction"] == "SeriesEq23"

    def test_describe_limit_ratio(self):
        params = TarParams(alpha=2.0, beta=0.5, noise=NoiseSpec(sigma=1.5))
        spec = LimitLawSpec("limit_ratio", horizon=60, construction="SeriesEq23")
        described = spec.describe(params)
        assert described["eta_truncation"] == 40
        assert described["xi_horizon_min"] == 34
        assert described["horizon"] == 60
        assert described["construction"] == "SeriesEq23"
        assert described["eta_truncated_variance"] == pytest.approx(1.5**2 / 3.0)

    def test_describe_other_kinds(self):
        drifted = TarParams(gamma=0.5, delta=0.5, noise=NoiseSpec(sigma=2.0))
        assert LimitLawSpec("normal").describe(drifted)["variance"] == pytest.approx(48.0)
        assert LimitLawSpec("abs_bm_marginal").describe(drifted)["sigma"] == 2.0
        assert LimitLawSpec("df_functional").describe(drifted) == LimitLawSpec(
            "df_functional"
        ).to_dict()

    def test_normal_limit_needs_drift(self, console):
        with pytest.raises(ConfigError) as excinfo:
            sample_limit_law(LimitLawSpec("normal", draws=5), CASE_ONE, console=console)
        assert excinfo.value.key == "model.gamma"

    def test_draws_are_counted(self, console):
        params = TarParams(gamma=0.5, delta=0.5, alpha=1.0, beta=0.5, r=-1.0)
        limit = sample_limit_law(LimitLawSpec("normal", draws=50, seed=3), params, console=console)
        assert len(limit) == 50
        assert limit.n_dropped == 0
        assert limit.provenance["limit_law"]["seed"] == 3

    def test_negate(self):
        params = TarParams(gamma=0.5, delta=0.5)
        plain = draw_limit(LimitLawSpec("normal", seed=3), params, 7)
        flipped = draw_limit(LimitLawSpec("normal", seed=3, negate=True), params, 7)
        assert flipped[1] == -plain[1]

    def test_guard_failures_become_drops(self, mocker, console):
        calls = []

        def flaky(spec, params, index):
            calls.append(index)
            if index % 2:
                raise TailGuardFailed("late lower visit")
            return float(index)

        mocker.patch.dict(LIMIT_SAMPLERS, {"limit_ratio": flaky})
        spec = LimitLawSpec("limit_ratio", draws=6)
        limit = sample_limit_law(spec, TarParams(alpha=1.5), console=console)
        assert limit.samples.tolist() == [0.0, 2.0, 4.0]
        assert limit.n_dropped == 3
        assert sorted(calls) == list(range(6))

    def test_limit_ratio_streams(self, mocker):
        sampler = mocker.patch(
            "scripts.tar_limits.monte_carlo.sample_limit_ratio", return_value=1.0
        )
        draw_limit(LimitLawSpec("limit_ratio", seed=5), TarParams(alpha=1.5), 3)
        pair = sampler.call_args[0][2]
        assert [s.key for s in pair] == [(5, 6), (5, 7)]

    def test_ks_against_limit(self):
        results = {10: dist([1, 3]), 20: dist([2, 4])}
        assert ks_against_limit(results, dist([2, 4])) == {10: 0.5, 20: 0.0}


class TestConvergenceTable:
    """Test the robust error summaries."""

    def test_noiseless_reciprocal_product(self, console):
        params = TarParams(alpha=2.0, beta=0.5, r=0.0, y0=1.0, noise=ZERO)
        config = ExperimentConfig(params, StatKind.CONSTRAINED_ALPHA_ERROR, [5, 10], 3, 1)
        table = convergence_table(config, console)
        assert list(table.columns) == ["n", "median_abs_error", "iqr", "count", "n_dropped"]
        assert table["n"].tolist() == [5, 10]
        assert (table["median_abs_error"] == 0.0).all()
        assert (table["iqr"] == 0.0).all()

    def test_beta_error(self, console):
        params = TarParams(alpha=0.5, beta=0.5)
        config = ExperimentConfig(params, StatKind.BETA_ERROR, [50, 200], 50, 8)
        table = convergence_table(config, console)
        assert table["count"].tolist() == [50, 50]

    def test_other_statistics_rejected(self, console):
        config = ExperimentConfig(CASE_ONE, StatKind.UNIT_ROOT_ALPHA, [10], 2, 1)
        with pytest.raises(ValueError):
            convergence_table(config, console)
