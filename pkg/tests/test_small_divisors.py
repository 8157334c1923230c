import cmath
import itertools
import math

import numpy as np
import pytest

from conftest import DESK_ALPHA
from gevrey_hull.errors import DegenerateFrequency, NonzeroAverage, ResonantMode
from gevrey_hull.fourier_core import (
    FourierSeries,
    GevreyParams,
    average,
    gevrey_norm,
    random_hermitian,
    shift,
)
from gevrey_hull.small_divisors import (
    Frequency,
    apply_L,
    apply_R,
    apply_S,
    cohomology_bound,
    cohomology_constant,
    estimate_alpha_constants,
    estimate_dio_constants,
    solve_cohomology,
    telescope,
)


@pytest.fixture(scope='module')
def freq():
    return Frequency(alpha=DESK_ALPHA, omega=1.0, tau=2.0, kmax=64).with_estimated_constants()


def brute_force_nu(alpha, omega, tau, kmax):
    best = math.inf
    for k in itertools.product(range(-kmax, kmax + 1), repeat=len(alpha)):
        if not any(k):
            continue
        x = omega * sum(a * b for a, b in zip(alpha, k))
        dist = abs(x - 2.0 * math.pi * round(x / (2.0 * math.pi)))
        best = min(best, dist * sum(abs(v) for v in k) ** tau)
    return best


def test_nu_matches_lattice_scan():
    nu, k = estimate_dio_constants(DESK_ALPHA, 1.0, 2.0, 64)
    assert nu > 0.0
    assert nu == pytest.approx(brute_force_nu(DESK_ALPHA, 1.0, 2.0, 64), rel=1e-10)
    assert max(abs(x) for x in k) <= 64


def test_nu_is_monotone_in_kmax():
    coarse, _ = estimate_dio_constants(DESK_ALPHA, 1.0, 2.0, 16)
    fine, _ = estimate_dio_constants(DESK_ALPHA, 1.0, 2.0, 64)
    assert fine <= coarse


def test_resonant_frequency_is_rejected():
    with pytest.raises(DegenerateFrequency):
        estimate_dio_constants((1.0, 0.5), 2.0 * math.pi, 2.0, 8)


def test_alpha_constants_of_golden_mean():
    nu0, k = estimate_alpha_constants(DESK_ALPHA, 2.0, 16)
    assert nu0 > 0.0
    assert nu0 == pytest.approx(abs(np.dot(k, DESK_ALPHA)) * sum(abs(x) for x in k) ** 2)
    assert nu0 <= estimate_alpha_constants(DESK_ALPHA, 2.0, 8)[0]


def test_rationally_dependent_alpha_is_rejected():
    with pytest.raises(DegenerateFrequency, match='rationally dependent'):
        estimate_alpha_constants((1.0, 0.5), 2.0, 8)


def test_frequency_validation():
    with pytest.raises(ValueError):
        Frequency(alpha=(1.5, 0.2))
    with pytest.raises(ValueError):
        Frequency(alpha=(1.0, 0.2), tau=0.0)


def test_apply_S_has_zero_average(rng, freq):
    eta = random_hermitian(2, 8, rng)
    for n in (-2, 1, 3):
        assert average(apply_S(eta, n, freq)) == 0


def test_single_mode_solution(freq):
    eta = FourierSeries.from_modes(2, 4, {(1, 0): 1.0, (-1, 0): 1.0})
    phi = solve_cohomology(eta, 1, freq)
    assert phi[(1, 0)] == pytest.approx(1.0 / (cmath.exp(1j * DESK_ALPHA[0]) - 1.0), rel=1e-14)
    assert phi[(-1, 0)] == pytest.approx(1.0 / (cmath.exp(-1j * DESK_ALPHA[0]) - 1.0), rel=1e-14)
    assert average(phi) == 0


@pytest.mark.parametrize('n', [1, -1, 3, -3])
def test_cohomology_round_trip_and_bound(rng, freq, n):
    g = GevreyParams(beta=2.0, radius=0.4)
    loss = 0.1
    for _ in range(200):
        eta = random_hermitian(2, 16, rng, zero_mean=True)
        phi = solve_cohomology(eta, n, freq)
        defect = apply_S(phi, n, freq) - eta
        assert defect.l1() <= 1e-12 * eta.l1()
        if abs(n) == 1:
            bound = cohomology_bound(gevrey_norm(eta, g), freq.nu, freq.tau, g.beta, loss)
            assert gevrey_norm(phi, g.with_radius(g.radius - loss)) <= bound


def test_cohomology_constant_value():
    assert cohomology_constant(2.0, 2.0) == pytest.approx(0.5 * math.pi * math.exp(-4.0) * 16.0)


def test_nonzero_average_is_rejected(freq):
    eta = FourierSeries.constant(2, 4, 1e-3)
    with pytest.raises(NonzeroAverage):
        solve_cohomology(eta, 1, freq)
    with pytest.raises(NonzeroAverage):
        apply_R(eta, 2, 1, freq)


def test_resonant_mode_below_floor(freq):
    eta = FourierSeries.from_modes(2, 4, {(1, 0): 1.0, (-1, 0): 1.0})
    with pytest.raises(ResonantMode) as err:
        solve_cohomology(eta, 1, freq, floor=10.0)
    assert len(err.value.k) == 2
    assert err.value.divisor < 10.0


@pytest.mark.parametrize('sign', [1, -1])
def test_L_and_R_match_divided_differences(rng, freq, sign):
    for n in (-3, -1, 2, 4):
        eta = random_hermitian(2, 10, rng, zero_mean=True)
        expected_L = solve_cohomology(apply_S(eta, n, freq), sign, freq)
        expected_R = apply_S(solve_cohomology(eta, sign, freq), n, freq)
        np.testing.assert_allclose(apply_L(eta, n, sign, freq).coeffs, expected_L.coeffs, atol=1e-12)
        np.testing.assert_allclose(apply_R(eta, n, sign, freq).coeffs, expected_R.coeffs, atol=1e-12)


@pytest.mark.parametrize('sign', [1, -1])
def test_L_and_R_commute_with_shifts(rng, freq, sign):
    t = rng.uniform(0.0, 2.0 * math.pi, size=2)
    for n in (-2, 1, 3):
        eta = random_hermitian(2, 10, rng, zero_mean=True)
        np.testing.assert_allclose(
            apply_L(shift(eta + 0.3, t), n, sign, freq).coeffs,
            shift(apply_L(eta + 0.3, n, sign, freq), t).coeffs,
            atol=1e-13,
        )
        np.testing.assert_allclose(
            apply_R(shift(eta, t), n, sign, freq).coeffs,
            shift(apply_R(eta, n, sign, freq), t).coeffs,
            atol=1e-13,
        )


def test_apply_L_accepts_constants(freq):
    one = FourierSeries.constant(2, 4, 1.0)
    assert telescope(one, 3, 1, freq)[(0, 0)] == pytest.approx(3.0)
    assert telescope(one, -2, 1, freq)[(0, 0)] == pytest.approx(-2.0)
    assert apply_L(one, 3, 1, freq).l1() == 0.0


def test_operator_norms_bounded_by_n(rng, freq):
    g = GevreyParams(beta=2.0, radius=0.4)
    for _ in range(200):
        eta = random_hermitian(2, 8, rng, zero_mean=True)
        for n in range(1, 6):
            for sign in (1, -1):
                ratio_L = gevrey_norm(apply_L(eta, n, sign, freq), g) / gevrey_norm(eta, g)
                ratio_R = gevrey_norm(apply_R(eta, n, sign, freq), g) / gevrey_norm(eta, g)
                assert ratio_L <= n * (1 + 1e-12)
                assert ratio_R <= n * (1 + 1e-12)


def test_operator_norm_is_nearly_attained(freq):
    g = GevreyParams(beta=2.0, radius=0.4)
    theta = freq.phases(2, 8)
    distance = np.abs(np.angle(np.exp(1j * theta)))
    distance[8, 8] = np.inf
    k = tuple(int(i) - 8 for i in np.unravel_index(np.argmin(distance), distance.shape))
    eta = FourierSeries.from_modes(2, 8, {k: 1.0, tuple(-x for x in k): 1.0})
    for n in range(1, 6):
        ratio = gevrey_norm(apply_L(eta, n, 1, freq), g) / gevrey_norm(eta, g)
        assert ratio >= 0.9 * n
