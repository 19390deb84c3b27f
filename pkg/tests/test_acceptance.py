"""End-to-end acceptance checks at desk scale.

One test per criterion; each line of ``pytest -v`` output is one
criterion's pass/fail verdict.  Runtime budgets are asserted on the
measured wall clock of the work itself.
"""

import math
import time

import numpy as np

from driftlab.classifier import (
    Verdict,
    bd_series_criterion,
    classify_mv_critical,
    classify_theorem1,
    discretize_to_bd,
    ratio_test,
)
from driftlab.experiments import (
    RecurrenceExperiment,
    balance_residual,
    estimate_occupancy,
    experiment_csv,
    run_recurrence_experiment,
    solve_balance_window,
)
from driftlab.fields import (
    Constant1,
    CriticalLamperti,
    ExponentialMean1,
    GammaMean1,
    MeanReverting,
    RateField,
    Zero,
)
from driftlab.seeding import path_seed
from driftlab.simulator import (
    compensator_report,
    simulate_compound_poisson,
    simulate_walk,
    wald_second_moment_check,
)

SEED = 20240817


def _band_return_ensemble(c: float) -> "tuple[object, float]":
    exp = RecurrenceExperiment(
        rate_field=RateField(CriticalLamperti(c=c)),
        up_law=Constant1(),
        down_law=Constant1(),
        n_paths=400,
        horizon=2e4,
        level=50.0,
        band=1.0,
        seed=SEED,
    )
    t0 = time.perf_counter()
    report = run_recurrence_experiment(exp)
    return report, time.perf_counter() - t0


def test_criterion_1_recurrent_side_concordance():
    cls = classify_theorem1(CriticalLamperti(c=0.5))
    report, elapsed = _band_return_ensemble(0.5)
    assert cls.verdict is Verdict.RECURRENT
    assert elapsed < 30.0
    returned = report.returned_fraction
    lo, hi = report.returned_ci
    assert returned >= 0.7, (
        f"returned_fraction={returned:.3f} (ci=[{lo:.3f},{hi:.3f}], "
        f"reached={report.reached_fraction:.3f}) fell short of 0.7"
    )


def test_criterion_2_transient_side_concordance():
    cls = classify_theorem1(CriticalLamperti(c=3.0))
    report, elapsed = _band_return_ensemble(3.0)
    assert cls.verdict is Verdict.TRANSIENT
    assert elapsed < 30.0
    returned = report.returned_fraction
    assert returned <= 0.2, f"returned_fraction={returned:.3f} exceeded 0.2"


def test_criterion_3_critical_window_closed_form():
    t0 = time.perf_counter()
    for rho in (0.05, 0.1, 0.5, 1.0):
        for beta in (0.25, 0.75):
            res = classify_mv_critical(rho, beta)
            if 4.0 * rho < 1.0:
                assert res.verdict is Verdict.RECURRENT, (rho, beta)
            else:
                assert 4.0 * rho > 1.0
                assert res.verdict is Verdict.TRANSIENT, (rho, beta)
            assert res.evidence["delegated_verdict"] == res.verdict.value, (rho, beta)
    assert time.perf_counter() - t0 < 1.0


def test_criterion_4_classifier_concordance_across_methods():
    t0 = time.perf_counter()
    for c in (0.25, 0.5, 2.0, 3.0):
        expected = classify_theorem1(CriticalLamperti(c=c)).verdict
        chain = discretize_to_bd(RateField(CriticalLamperti(c=c)), 2, 10**4)
        assert ratio_test(chain, 2).verdict is expected, c
        series = bd_series_criterion(chain, 2, tail_extension=10**6 - 10**4)
        assert series.verdict is expected, c
    assert time.perf_counter() - t0 < 5.0


def test_criterion_5_compensator_residuals_centered():
    n_paths, tau, horizon = 10**4, 10.0, 14.0
    rate = lambda s: 1.0  # noqa: E731 - constant intensity fixture
    t0 = time.perf_counter()
    lit = np.empty(n_paths)
    ens = np.empty(n_paths)
    for i in range(n_paths):
        times, marks = simulate_compound_poisson(
            rate, 1.0, ExponentialMean1(), horizon, path_seed(SEED, i)
        )
        rep = compensator_report(times, marks, rate, tau)
        lit[i] = rep.residual_literal
        ens[i] = rep.residual_ensemble
    elapsed = time.perf_counter() - t0
    for name, res in (("literal", lit), ("ensemble", ens)):
        se = res.std(ddof=1) / math.sqrt(n_paths)
        assert abs(res.mean()) <= 3.0 * se, (name, res.mean(), se)
    assert elapsed < 10.0


def test_criterion_6_second_moment_bound():
    t0 = time.perf_counter()
    chk = wald_second_moment_check(
        RateField(Zero()), GammaMean1(k=2.0), GammaMean1(k=2.0), 1.0, 10**4, SEED
    )
    elapsed = time.perf_counter() - t0
    assert chk.bound == 3.0
    assert chk.empirical_second_moment <= 3.0 * 1.05
    assert chk.empirical_second_moment >= 0.5
    assert elapsed < 10.0


def test_criterion_7_symmetric_null_moments():
    n_paths, horizon = 10**4, 1e3
    rf = RateField(Zero())
    t0 = time.perf_counter()
    final = np.empty(n_paths)
    for i in range(n_paths):
        final[i] = simulate_walk(rf, Constant1(), Constant1(), horizon, path_seed(SEED, i)).final_z
    elapsed = time.perf_counter() - t0
    mean = float(final.mean())
    var = float(final.var(ddof=1))
    assert abs(mean) <= 3.0 * math.sqrt(horizon / n_paths), mean
    assert horizon * 0.9 <= var <= horizon * 1.1, var
    assert elapsed < 20.0


def test_criterion_8_stationary_balance():
    rf = RateField(MeanReverting(kappa=0.2))
    t0 = time.perf_counter()
    chain = discretize_to_bd(rf, -11, 11)
    exact = solve_balance_window(chain, -10, 10)
    assert balance_residual(exact, chain).l1 < 1e-10
    occ_short = estimate_occupancy(
        rf, ExponentialMean1(), ExponentialMean1(), 1e5, (-10, 10), seed=SEED
    )
    occ_long = estimate_occupancy(
        rf, ExponentialMean1(), ExponentialMean1(), 1e6, (-10, 10), seed=SEED
    )
    l1_short = balance_residual(occ_short, chain).l1
    l1_long = balance_residual(occ_long, chain).l1
    assert l1_long < l1_short, (l1_short, l1_long)
    assert time.perf_counter() - t0 < 60.0


def test_criterion_9_byte_identical_reruns():
    exp = RecurrenceExperiment(
        rate_field=RateField(Zero()),
        up_law=ExponentialMean1(),
        down_law=ExponentialMean1(),
        n_paths=60,
        horizon=200.0,
        level=5.0,
        band=1.0,
        seed=SEED,
    )
    first = experiment_csv(run_recurrence_experiment(exp)).encode()
    second = experiment_csv(run_recurrence_experiment(exp)).encode()
    assert first == second
