from dataclasses import replace

import pytest

from conftest import desk_model, long_range_term, small_hull
from gevrey_hull.certifier import (
    ConvergenceFit,
    VerificationOptions,
    check_hypotheses,
    condition_numbers,
    convergence_fit,
    post_step_diagnostics,
    smallness_report,
    step_exponent,
    verify_solution,
)
from gevrey_hull.errors import InsufficientHistory
from gevrey_hull.fourier_core import FourierSeries
from gevrey_hull.kam_solver import StepSchedule, solve


def test_condition_numbers_of_flat_hull():
    model = desk_model(epsilon=1e-3, cutoff=8, twist=2.0)
    report = condition_numbers(model, FourierSeries.zeros(2, 8), model.gevrey)
    assert report.nplus == pytest.approx(1.0)
    assert report.nminus == pytest.approx(1.0)
    assert report.c == pytest.approx(1.0)
    assert report.T == pytest.approx(0.5)
    assert report.U == pytest.approx(2.0)
    assert report.delta == 0.0
    assert report.h5a == 0.0
    assert report.nu == model.freq.nu
    assert report.all_passed
    assert set(report.passes) == {'H1', 'H2', 'H3', 'H4', 'H5'}
    assert 'K=8' in report.label
    assert report.to_dict()['passes']['H5'] is True


def test_c_floor_rejects_small_average():
    model = desk_model(epsilon=1e-3, cutoff=8)
    report = condition_numbers(model, FourierSeries.zeros(2, 8), model.gevrey, c_floor=2.0)
    assert not report.passes['H2']
    assert report.passes['H1']
    checks = {check.name: check for check in check_hypotheses(report)}
    assert checks['H2'].margin == pytest.approx(-1.0)


def test_strong_long_range_coupling_fails_H5():
    model = desk_model(epsilon=1e-3, cutoff=8, extra=[long_range_term(1e-3, bound=1.0)])
    report = condition_numbers(model, FourierSeries.zeros(2, 8), model.gevrey)
    assert report.delta == pytest.approx(6.0)
    assert not report.passes['H5']
    assert report.passes['H4']
    names = [check.name for check in report.hypotheses if not check.passed]
    assert names == ['H5a', 'H5b']


def assert_no_fail_turns_into_pass(reports):
    for before, after in zip(reports, reports[1:]):
        for name, passed in before.passes.items():
            assert passed or not after.passes[name], name


def test_hypotheses_are_monotone_in_delta():
    reports = []
    for bound in (1e-6, 1e-3, 1e-2, 1e-1, 1.0, 10.0):
        model = desk_model(epsilon=1e-3, cutoff=8, extra=[long_range_term(1e-3, bound=bound)])
        reports.append(condition_numbers(model, FourierSeries.zeros(2, 8), model.gevrey))
    deltas = [report.delta for report in reports]
    assert deltas == sorted(deltas)
    assert reports[0].passes['H5']
    assert not reports[-1].passes['H5']
    assert_no_fail_turns_into_pass(reports)


def test_hypotheses_are_monotone_in_eps0():
    extra = [long_range_term(1e-3, bound=1.0)]
    reports = [
        condition_numbers(model, FourierSeries.zeros(2, 8), model.gevrey)
        for model in (desk_model(epsilon=e, cutoff=8, extra=extra) for e in (1e-4, 1e-2, 0.1))
    ]
    assert [r.eps0 for r in reports] == sorted(r.eps0 for r in reports)
    assert_no_fail_turns_into_pass(reports)
    base = reports[0]
    for eps0 in (base.eps0, 10.0 * base.eps0, 1e3):
        louder = replace(base, eps0=eps0)
        assert [c.passed for c in check_hypotheses(louder)] == [c.passed for c in base.hypotheses]


def test_post_step_diagnostics_respects_predictions(rng):
    model = desk_model(epsilon=1e-3, cutoff=8)
    h = FourierSeries.zeros(2, 8)
    report = condition_numbers(model, h, model.gevrey)
    delta_hat = small_hull(rng, 8, size=1e-3)
    after = post_step_diagnostics(model, h, report, delta_hat, model.gevrey)
    assert after.chi > 0.0
    assert after.nplus <= after.predicted['nplus'] * (1 + 1e-9)
    assert after.nminus <= after.predicted['nminus'] * (1 + 1e-9)
    assert abs(after.c - report.c) <= after.predicted['c_change'] + 1e-12


def test_post_step_diagnostics_flags_unavailable_bound():
    model = desk_model(epsilon=0.0, cutoff=8)
    h = FourierSeries.zeros(2, 8)
    report = condition_numbers(model, h, model.gevrey)
    delta_hat = FourierSeries.from_modes(2, 8, {(5, 0): 0.025, (-5, 0): 0.025})
    after = post_step_diagnostics(model, h, report, delta_hat, model.gevrey)
    assert after.chi_prime * report.nminus >= 1.0
    assert after.predicted['nminus'] is None
    assert after.predicted['c_change'] is None


def test_convergence_fit_of_quadratic_history():
    fit = convergence_fit([1e-2, 1e-4, 1e-8, 1e-16], floor=1e-12)
    assert fit.points == 3
    assert fit.slope == pytest.approx(2.0)
    assert fit.a_fit == pytest.approx(1.0)
    assert fit.quadratic


def test_convergence_fit_of_linear_history():
    fit = convergence_fit([1e-1, 1e-2, 1e-3, 1e-4])
    assert fit.slope == pytest.approx(1.0)
    assert not fit.quadratic


def test_convergence_fit_needs_three_points():
    with pytest.raises(InsufficientHistory):
        convergence_fit([1e-2, 1e-4, 1e-14], floor=1e-12)


def test_step_exponent():
    assert step_exponent(2.0, 2.0, 2) == pytest.approx(42.0)
    assert step_exponent(1.0, 1.0, 1) == pytest.approx(9.0)


def test_smallness_report_ledger():
    model = desk_model(epsilon=1e-3, cutoff=8)
    report = condition_numbers(model, FourierSeries.zeros(2, 8), model.gevrey)
    report = replace(report, eps0=0.1)
    fit = ConvergenceFit(slope=2.0, a_fit=1.0, quadratic=True, points=3)
    ledger = smallness_report(report, StepSchedule(r0=0.4), fit=fit, accumulated_delta_norm=0.01)
    entries = {entry.name: entry for entry in ledger.entries}
    assert entries['a_eps0'].value == pytest.approx(0.1)
    assert entries['a_eps0'].satisfied
    assert not entries['c3_a_eps0'].satisfied
    assert entries['iota_budget'].satisfied
    assert not ledger.all_satisfied
    assert ledger.c3 == pytest.approx(42.0)
    assert ledger.limit_radius == pytest.approx(0.3)
    assert ledger.label.startswith('heuristic')
    assert ledger.to_dict()['all_satisfied'] is False


def test_smallness_report_without_fit():
    model = desk_model(epsilon=1e-3, cutoff=8)
    report = condition_numbers(model, FourierSeries.zeros(2, 8), model.gevrey)
    ledger = smallness_report(report, StepSchedule(r0=0.4))
    entries = {entry.name: entry for entry in ledger.entries}
    assert entries['a_eps0'].value is None
    assert not entries['a_eps0'].satisfied


def test_verify_exact_solution():
    model = desk_model(epsilon=0.0, cutoff=8)
    options = VerificationOptions(reseed_trials=2)
    verified = verify_solution(model, FourierSeries.zeros(2, 8), options)
    assert verified.residual_norm == 0.0
    assert all(t.passed for t in verified.translations)
    assert verified.identity_passed
    assert len(verified.uniqueness) == 2
    assert verified.all_passed
    assert verified.to_dict()['all_passed'] is True


@pytest.mark.slow
def test_verify_converged_desk_hull(desk):
    schedule = StepSchedule(r0=0.4)
    result = solve(desk, FourierSeries.zeros(2, 32), schedule)
    assert result.converged
    options = VerificationOptions(phis=(0.1, 0.3, 0.7), reseed_trials=5)
    verified = verify_solution(desk, result.state.h, options, schedule)
    for check in verified.translations:
        assert check.residual_norm <= 10.0 * verified.residual_norm + 1e-13
    assert verified.identity_passed
    assert all(trial.passed for trial in verified.uniqueness)
    assert all(trial.distance <= 1e-8 for trial in verified.uniqueness)
