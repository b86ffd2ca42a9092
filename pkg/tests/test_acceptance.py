"""Release acceptance suite.

Each test implements one numbered acceptance criterion at its stated
tolerance and prints a single pass/fail line (straight to the terminal,
bypassing capture). Criteria 5-9 are Monte-Carlo statements run at fixed
seeds; their tolerances include the allowance for sampling noise.
"""

import math
import sys
import time
from contextlib import contextmanager

import numpy as np
import pytest

from spikecount import (
    Divisor,
    EigenSpectrum,
    EstimatorKind,
    EstimatorSpec,
    ExperimentPlan,
    SpikedPopulation,
    calibrate_delta,
    criterion_profile,
    eigenvalues_descending,
    estimate_spikes,
    full_aic_value,
    invert_monotone,
    penalty_alpha,
    preset_plan,
    run_monte_carlo,
    sample_covariance,
    sample_spiked_gaussian,
    signal_strength,
    signal_strength_large_c,
    spectrum_from_data,
    spectrum_via_gram,
    spike_forward,
    stein_loss,
    thresholds,
)
from spikecount.cli import main as cli_main
from spikecount.rng import derive_key, haar_orthogonal, normals

BASE_SEED = 20260810

C_SMALL = [round(0.05 * i, 10) for i in range(1, 21)]  # 0.05 .. 1.0 step 0.05
C_LARGE = [round(1.0 + 0.1 * i, 10) for i in range(1, 91)]  # 1.1 .. 10.0 step 0.1


@contextmanager
def criterion(num: int, description: str, budget_s: float):
    start = time.perf_counter()
    try:
        yield
    except BaseException:
        print(f"ACCEPTANCE {num:2d} FAIL  {description}", file=sys.__stdout__, flush=True)
        raise
    elapsed = time.perf_counter() - start
    print(
        f"ACCEPTANCE {num:2d} PASS  {description} ({elapsed:.1f}s)",
        file=sys.__stdout__,
        flush=True,
    )
    assert elapsed < budget_s, f"criterion {num} exceeded its {budget_s}s budget: {elapsed:.1f}s"


@pytest.mark.acceptance
def test_criterion_01_analytic_suite():
    with criterion(1, "analytic identities, monotonicity, inversion round-trip", 1.0):
        # monotonicity grids
        for c in (0.1, 0.5, 1.0, 2.0, 5.0):
            xs = np.linspace(1.0 + math.sqrt(c), 200.0, 1000)
            assert np.all(np.diff(spike_forward(c, xs)) > 0)
            assert np.all(np.diff(signal_strength(c, xs)) > 0)
            if c > 1.0:
                assert np.all(np.diff(signal_strength_large_c(c, xs)) > 0)
        assert np.all(stein_loss(np.logspace(-4, 4, 1000)) >= 0.0)

        # inverse round-trip at 1e-9
        for c in (0.25, 1.0):
            edge = 1.0 + math.sqrt(c)
            f = lambda t, c=c: signal_strength(c, t)
            for y in np.linspace(f(edge + 1e-6) + 1e-9, f(100.0) - 1e-9, 20):
                x = invert_monotone(f, y, (edge + 1e-9, 120.0))
                assert abs(f(x) - y) <= 1e-9

        # headroom of the classical level over the edge level
        for c in C_SMALL:
            assert 2.0 * c - signal_strength(c, 1.0 + math.sqrt(c)) > 0.0
        for c in C_LARGE:
            assert 2.0 - signal_strength_large_c(c, 1.0 + math.sqrt(c)) > 0.0


@pytest.mark.acceptance
def test_criterion_02_threshold_gaps():
    with criterion(2, "threshold gaps dominate c**0.9 (c<=1) and c**0.1 (c>1)", 1.0):
        for c in C_SMALL:
            assert thresholds(c).gap > c**0.9
        for c in C_LARGE:
            assert thresholds(c).gap > c**0.1


@pytest.mark.acceptance
def test_criterion_03_eigensolver_oracles():
    with criterion(3, "eigensolver vs conjugation oracles and Gram route", 10.0):
        rng = np.random.default_rng(BASE_SEED)
        for trial in range(100):
            p = int(rng.integers(2, 51))
            diag = np.sort(rng.uniform(0.0, 10.0, size=p))[::-1]
            q = haar_orthogonal(derive_key(BASE_SEED, 3, trial), p)
            s = q @ np.diag(diag) @ q.T
            s = 0.5 * (s + s.T)
            got = eigenvalues_descending(s, n=p + 2).values
            tol = 1e-9 * (1.0 + np.linalg.norm(s))
            assert np.abs(got - diag).max() <= tol

        for trial in range(30):
            n = int(rng.integers(3, 40))
            p = int(rng.integers(2, 50))
            y = rng.normal(size=(n, p))
            gram = spectrum_via_gram(y).values
            direct = eigenvalues_descending(sample_covariance(y), n=n).values
            assert np.abs(gram - direct).max() <= 1e-8


@pytest.mark.acceptance
def test_criterion_04_criterion_oracles():
    def naive_small(values, n, p, q):
        out = []
        for j in range(q):
            lbar = sum(values[j:p]) / (p - j)
            logsum = sum(math.log(v) for v in values[j:p])
            out.append((p - j) * math.log(lbar) - logsum - (p - j - 1) * (p - j + 2) / n)
        return np.array(out)

    def naive_large(values, n, p, q):
        out = []
        for j in range(q):
            block = values[j : n - 1]
            lbar = sum(block) / (n - 1 - j)
            logsum = sum(math.log(v) for v in block)
            out.append((n - 1 - j) * math.log(lbar) - logsum - (n - j - 2) * (n - j + 1) / p)
        return np.array(out)

    with criterion(4, "criterion profile vs from-scratch formulas at alpha=2", 30.0):
        rng = np.random.default_rng(BASE_SEED + 4)
        for _ in range(50):
            p = int(rng.integers(4, 50))
            n = p + int(rng.integers(1, 40))
            vals = np.sort(rng.uniform(0.2, 8.0, size=p))[::-1]
            spec = EigenSpectrum(values=vals, n=n)
            q = min(12, p - 1)
            prof = criterion_profile(spec, alpha=2.0, candidates=q)
            assert np.abs(prof.values - naive_small(list(vals), n, p, q)).max() <= 1e-10
            absolute = np.array([full_aic_value(spec, j) for j in range(q)])
            assert int(np.argmin(absolute)) == int(np.argmin(prof.values))
        for _ in range(50):
            n = int(rng.integers(5, 30))
            p = n + int(rng.integers(1, 40))
            vals = np.sort(rng.uniform(0.2, 8.0, size=p))[::-1]
            spec = EigenSpectrum(values=vals, n=n)
            q = n - 2
            prof = criterion_profile(spec, alpha=2.0, candidates=q)
            assert np.abs(prof.values - naive_large(list(vals), n, p, q)).max() <= 1e-10


@pytest.mark.acceptance
def test_criterion_05_distant_spike_limits():
    with criterion(5, "distant-spike and bulk-edge limits at c=0.5, n=1000", 120.0):
        n, p = 1000, 500
        pop = SpikedPopulation(p=p, spikes=(3.0,))
        l1, l2 = [], []
        for seed in range(20):
            y = sample_spiked_gaussian(pop, n, derive_key(BASE_SEED, 5, seed))
            spec = spectrum_from_data(y)
            l1.append(spec.values[0])
            l2.append(spec.values[1])
        assert abs(float(np.mean(l1)) - 3.75) < 0.1
        assert abs(float(np.mean(l2)) - 2.9142135623730951) < 0.1


@pytest.mark.acceptance
def test_criterion_06_zero_gap_estimator_trend():
    with criterion(6, "zero-gap estimator accuracy trend (reduced table)", 1200.0):
        plan = preset_plan(
            "table-2", replications=50, n_grid=(100, 400, 1200, 2000), base_seed=BASE_SEED
        )
        report = run_monte_carlo(plan)
        by_n = {row.n: row for row in report.rows}
        assert by_n[2000].accuracy >= 0.80
        assert 9.5 <= by_n[2000].mean_k_hat <= 10.6
        assert 4.0 <= by_n[100].mean_k_hat <= 7.0
        accs = [by_n[n].accuracy for n in (100, 400, 1200, 2000)]
        for lo, hi in zip(accs, accs[1:]):
            assert hi >= lo - 0.12  # nondecreasing up to Monte-Carlo noise


@pytest.mark.acceptance
def test_criterion_07_calibration_reference_values():
    with criterion(7, "null calibration lands at the published scale", 600.0):
        d_square = calibrate_delta(200, 200, replications=200, base_seed=BASE_SEED).delta_n
        assert 0.42 <= d_square <= 0.62
        d_half = calibrate_delta(200, 400, replications=200, base_seed=BASE_SEED).delta_n
        assert 0.20 <= d_half <= 0.36


@pytest.mark.acceptance
def test_criterion_08_comparison_directionality():
    with criterion(8, "paired orderings: AIC* beats AIC (model B) and PY (model C)", 900.0):
        for n in (400, 600):
            cal = calibrate_delta(n, n, replications=500, base_seed=BASE_SEED)
            star = EstimatorSpec(EstimatorKind.AIC_STAR, delta=cal.delta_n, label="AIC*")
            # model B: second spike below lambda_c(1) ~ 3.007, classical rule inconsistent
            plan_b = ExperimentPlan(
                c_target=1.0, n_grid=(n,), spikes=(3.0, 2.1), replications=100,
                estimators=(star, EstimatorSpec(EstimatorKind.AIC)), base_seed=BASE_SEED + 8,
            )
            rows_b = {r.estimator: r for r in run_monte_carlo(plan_b).rows}
            assert rows_b["AIC*"].rmse < rows_b["AIC"].rmse
            # model C: equal spikes, gap rule struggles
            plan_c = ExperimentPlan(
                c_target=1.0, n_grid=(n,), spikes=(3.0, 3.0), replications=100,
                estimators=(star, EstimatorSpec(EstimatorKind.PY)), base_seed=BASE_SEED + 8,
            )
            rows_c = {r.estimator: r for r in run_monte_carlo(plan_c).rows}
            assert rows_c["AIC*"].rmse <= rows_c["PY"].rmse


@pytest.mark.acceptance
def test_criterion_09_null_false_positive_budget():
    with criterion(9, "calibrated rule keeps null mean(k^2) within 0.02", 600.0):
        cal = calibrate_delta(400, 400, replications=500, base_seed=BASE_SEED)
        fresh = ExperimentPlan(
            c_target=1.0, n_grid=(400,), spikes=(), replications=500,
            estimators=(EstimatorSpec(EstimatorKind.AIC_STAR, delta=cal.delta_n),),
            base_seed=77702,  # fresh stream, disjoint from the calibration's
        )
        row = run_monte_carlo(fresh).rows[0]
        assert row.rmse <= 0.02


@pytest.mark.acceptance
def test_criterion_10_byte_for_byte_determinism(tmp_path):
    with criterion(10, "simulate and calibrate reruns are byte-identical", 300.0):
        sim_args = ["simulate", "--preset", "model-a", "--reps", "3", "--n-grid", "100",
                    "--calibration-reps", "40", "--seed", str(BASE_SEED)]
        a, b = tmp_path / "sim_a.csv", tmp_path / "sim_b.csv"
        assert cli_main(sim_args + ["--out", str(a)]) == 0
        assert cli_main(sim_args + ["--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

        cal_args = ["calibrate", "--p", "80", "--n", "80", "--reps", "50",
                    "--seed", str(BASE_SEED)]
        c, d = tmp_path / "cal_a.csv", tmp_path / "cal_b.csv"
        assert cli_main(cal_args + ["--out", str(c)]) == 0
        assert cli_main(cal_args + ["--out", str(d)]) == 0
        assert c.read_bytes() == d.read_bytes()

        json_args = sim_args + ["--format", "json"]
        e, f = tmp_path / "sim_a.json", tmp_path / "sim_b.json"
        assert cli_main(json_args + ["--out", str(e)]) == 0
        assert cli_main(json_args + ["--out", str(f)]) == 0
        assert e.read_bytes() == f.read_bytes()
