"""Harness tests: sampling contracts, metrics arithmetic, paired determinism,
report serialization, and coarse statistical anchors."""

import io
import json
import math

import numpy as np
import pytest

from spikecount import (
    ConfigError,
    EstimatorKind,
    EstimatorSpec,
    ExperimentPlan,
    MonteCarloReport,
    SpikedPopulation,
    metrics,
    plan_from_dict,
    preset_names,
    preset_plan,
    run_monte_carlo,
    sample_spiked_gaussian,
    spectrum_from_data,
    spike_forward,
)
from spikecount.rng import derive_key
from spikecount.simulation import plan_to_dict


class TestSampling:
    def test_deterministic(self):
        pop = SpikedPopulation(p=20, spikes=(3.0, 2.0))
        a = sample_spiked_gaussian(pop, 50, derive_key(1, 2))
        b = sample_spiked_gaussian(pop, 50, derive_key(1, 2))
        assert a.tobytes() == b.tobytes()
        c = sample_spiked_gaussian(pop, 50, derive_key(1, 3))
        assert a.tobytes() != c.tobytes()

    def test_null_column_variances(self):
        n = 4000
        pop = SpikedPopulation(p=8, spikes=())
        y = sample_spiked_gaussian(pop, n, derive_key(9, 0))
        assert np.abs(y.var(axis=0, ddof=1) - 1.0).max() < 5.0 / math.sqrt(n)

    def test_fixed_p_classical_consistency(self):
        # p fixed at 2, large n: top sample eigenvalue approaches the spike
        pop = SpikedPopulation(p=2, spikes=(9.0,))
        tops = []
        for seed in range(3):
            y = sample_spiked_gaussian(pop, 20000, derive_key(17, seed))
            tops.append(spectrum_from_data(y).values[0])
        assert np.mean(tops) == pytest.approx(9.0, abs=0.4)

    def test_rotation_preserves_population_spectrum(self):
        pop = SpikedPopulation(p=6, spikes=(4.0,), rotate=True)
        y = sample_spiked_gaussian(pop, 100000, derive_key(21, 0))
        cov = y.T @ y / (y.shape[0] - 1)
        top = np.linalg.eigvalsh(cov)[-1]
        assert top == pytest.approx(4.0, abs=0.15)
        # and the data is genuinely rotated: off-diagonal structure present
        assert np.abs(cov - np.diag(np.diag(cov))).max() > 0.05

    def test_population_validation(self):
        with pytest.raises(ValueError):
            SpikedPopulation(p=5, spikes=(0.9,))
        with pytest.raises(ValueError):
            SpikedPopulation(p=2, spikes=(3.0, 2.0))
        with pytest.raises(ValueError):
            SpikedPopulation(p=5, spikes=(2.0, 3.0))


class TestMetrics:
    def test_exact_hits(self):
        assert metrics([3, 3, 3], 3) == (0.0, 1.0, 3.0)

    def test_hand_case(self):
        rmse, accuracy, mean = metrics([1, 3], 2)
        assert rmse == pytest.approx(0.25)
        assert accuracy == 0.0
        assert mean == 2.0

    def test_null_convention(self):
        rmse, accuracy, mean = metrics([0, 1], 0)
        assert rmse == pytest.approx(0.5)
        assert accuracy == 0.5
        assert mean == 0.5

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            metrics([], 2)


def small_plan(**overrides):
    base = dict(
        c_target=1.0,
        n_grid=(60,),
        spikes=(6.0, 5.0),
        replications=4,
        estimators=(
            EstimatorSpec(EstimatorKind.AIC),
            EstimatorSpec(EstimatorKind.AIC_STAR, delta=0.4),
            EstimatorSpec(EstimatorKind.PY),
        ),
        base_seed=321,
    )
    base.update(overrides)
    return ExperimentPlan(**base)


class TestRunMonteCarlo:
    def test_single_replication_echo(self):
        plan = small_plan(replications=1, estimators=(EstimatorSpec(EstimatorKind.AIC),))
        report = run_monte_carlo(plan, keep_estimates=True)
        (row,) = report.rows
        (k_hat,) = report.raw_estimates[(60, "AIC")]
        assert row.mean_k_hat == float(k_hat)
        assert row.replications == 1

    def test_reruns_identical(self):
        r1 = run_monte_carlo(small_plan())
        r2 = run_monte_carlo(small_plan())
        assert r1 == r2

    def test_threads_do_not_change_results(self):
        r1 = run_monte_carlo(small_plan(replications=8))
        r2 = run_monte_carlo(small_plan(replications=8), threads=4)
        assert r1 == r2

    def test_estimator_order_is_irrelevant(self):
        plan = small_plan()
        swapped = small_plan(estimators=tuple(reversed(plan.estimators)))
        r1 = run_monte_carlo(plan, keep_estimates=True)
        r2 = run_monte_carlo(swapped, keep_estimates=True)
        for key, vals in r1.raw_estimates.items():
            assert r2.raw_estimates[key] == vals

    def test_paired_spectra(self):
        # with the gap at its threshold value, the starred rule must equal the
        # classical one replication by replication (same spectrum, same alpha)
        from spikecount import thresholds

        gap = thresholds(1.0).gap
        plan = small_plan(
            estimators=(
                EstimatorSpec(EstimatorKind.AIC),
                EstimatorSpec(EstimatorKind.AIC_STAR, delta=gap),
            ),
            replications=6,
        )
        report = run_monte_carlo(plan, keep_estimates=True)
        assert (
            report.raw_estimates[(60, "AIC")]
            == report.raw_estimates[(60, f"AIC*(delta={gap:g})")]
        )

    def test_plan_validation(self):
        with pytest.raises(ConfigError):
            small_plan(replications=0)
        with pytest.raises(ConfigError):
            small_plan(n_grid=())
        with pytest.raises(ConfigError):
            small_plan(estimators=())
        with pytest.raises(ConfigError):
            # n = 3 cannot hit c = 0.7 within 2%
            small_plan(c_target=0.7, n_grid=(3,), spikes=())


class TestReportSerialization:
    def test_json_round_trip(self):
        report = run_monte_carlo(small_plan())
        buf = io.StringIO()
        report.to_json(buf)
        doc = json.loads(buf.getvalue())
        again = MonteCarloReport.from_json_doc(doc)
        assert again.rows == report.rows
        assert again.config == report.config
        assert again.base_seed == report.base_seed

    def test_csv_headers_and_rows(self):
        report = run_monte_carlo(small_plan())
        buf = io.StringIO()
        report.to_csv(buf)
        lines = buf.getvalue().splitlines()
        assert lines[0].startswith("# spikecount ")
        assert lines[1].startswith("# config: ")
        assert lines[2] == "# base_seed: 321"
        assert lines[3].split(",")[:3] == ["n", "p", "estimator"]
        assert len(lines) == 4 + len(report.rows)

    def test_plan_dict_round_trip(self):
        plan = small_plan()
        again = plan_from_dict(plan_to_dict(plan))
        assert plan_to_dict(again) == plan_to_dict(plan)


class TestPresets:
    def test_names(self):
        assert set(preset_names()) == {
            "model-1", "model-2", "model-a", "model-b", "model-c",
            "model-d", "model-e", "table-2",
        }

    def test_unknown_preset(self):
        with pytest.raises(ConfigError):
            preset_plan("model-z")

    def test_model_parameters(self):
        assert preset_plan("model-a").spikes == (3.5, 2.5)
        assert preset_plan("model-b").spikes == (3.0, 2.1)
        assert preset_plan("model-c").spikes == (3.0, 3.0)
        assert preset_plan("model-d").spikes == (3.5, 3.5)
        assert preset_plan("model-e").spikes == (4.0, 4.0, 3.5, 3.5, 3.5)
        assert preset_plan("model-1").spikes == (4.5, 3.0)
        assert preset_plan("model-2").spikes == (3.0, 2.3)
        t2 = preset_plan("table-2")
        assert t2.c_target == 0.5
        assert len(t2.spikes) == 10
        assert t2.spikes[0] == pytest.approx(1.0 + math.sqrt(0.5) + 0.5)
        assert t2.replications == 50

    def test_overrides(self):
        plan = preset_plan("model-a", replications=7, n_grid=(100,), base_seed=5)
        assert plan.replications == 7
        assert plan.n_grid == (100,)
        assert plan.base_seed == 5


@pytest.mark.slow
class TestStatisticalAnchors:
    def test_distant_spike_lands_at_forward_map(self):
        # c = 0.5, spike 3: top eigenvalue near spike_forward(0.5, 3) = 3.75,
        # second near the bulk edge (1+sqrt(0.5))^2
        n, p = 1000, 500
        pop = SpikedPopulation(p=p, spikes=(3.0,))
        l1, l2 = [], []
        for seed in range(20):
            y = sample_spiked_gaussian(pop, n, derive_key(515, seed))
            spec = spectrum_from_data(y)
            l1.append(spec.values[0])
            l2.append(spec.values[1])
        assert abs(np.mean(l1) - spike_forward(0.5, 3.0)) < 0.1
        assert abs(np.mean(l2) - (1.0 + math.sqrt(0.5)) ** 2) < 0.1

    def test_subcritical_spike_is_invisible(self):
        # a spike below the detectability edge leaves the top eigenvalue at the
        # bulk edge, indistinguishable from the null model
        n, p = 1000, 500
        sub = SpikedPopulation(p=p, spikes=(1.0 + math.sqrt(0.5) - 0.2,))
        null = SpikedPopulation(p=p, spikes=())
        top_sub, top_null = [], []
        for seed in range(12):
            y1 = sample_spiked_gaussian(sub, n, derive_key(616, seed))
            y2 = sample_spiked_gaussian(null, n, derive_key(717, seed))
            top_sub.append(spectrum_from_data(y1).values[0])
            top_null.append(spectrum_from_data(y2).values[0])
        assert abs(np.median(top_sub) - np.median(top_null)) < 0.05
