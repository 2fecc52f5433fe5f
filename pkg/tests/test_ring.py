import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qtcrystal.numerics import GridSpec, PeriodicFunction, Trajectory, gaussian_packet
from qtcrystal.ring import (
    LocalizedMomentum,
    PeriodicObservable,
    RhoThetaMap,
    RingGridPropagator,
    ThetaSector,
    U,
    V,
    Word,
    central_element,
    observable_matrix,
    phase_diagnostics,
    random_sector_state,
    sector_expectation,
    sector_u_trajectory,
    shift_coefficients,
    theta_spectrum,
    v_beta_trajectory,
    zassenhaus_check,
    zero_flux_sector,
)
from qtcrystal.ssb import order_parameter_deficit

TWO_PI = 2 * math.pi
THETAS = (0.0, 1.0, math.pi, 5.0)


def test_sector_spectrum_closed_form():
    sec = ThetaSector(1.0, 4, 0.3)
    n = np.arange(-4, 5)
    ref = np.sort(0.5 * (n + 1.0 / TWO_PI - 0.3) ** 2)
    assert np.allclose(theta_spectrum(sec), ref, atol=1e-14)


def test_small_truncation_example():
    # M = 2 in the untwisted sector: {0, 1/2, 1/2, 2, 2}
    assert np.allclose(theta_spectrum(ThetaSector(0.0, 2, 0.0)), [0, 0.5, 0.5, 2, 2])


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 3), st.floats(0, TWO_PI, exclude_max=True), st.integers(1, 10))
def test_spectrum_shift_property(alpha, theta, m):
    count = 2 * m + 1
    a = theta_spectrum(ThetaSector(theta, m, alpha), count)
    b = theta_spectrum(ThetaSector.wrapped(theta - TWO_PI * alpha, m, 0.0), count)
    assert np.max(np.abs(a - b)) < 1e-10 * max(1.0, b.max())


@pytest.mark.parametrize("theta", THETAS)
def test_central_element_is_scalar(theta):
    sec = ThetaSector.wrapped(theta, 8)
    assert np.allclose(central_element(sec), np.exp(1j * sec.theta) * np.eye(sec.dim), atol=1e-13)
    C = central_element(sec)
    for obs in (U(1), U(-2), V(0.7), V(3.0)):
        M = observable_matrix(obs, sec)
        assert np.max(np.abs(C @ M - M @ C)) < 1e-12


@settings(max_examples=30, deadline=None)
@given(st.floats(0, TWO_PI, exclude_max=True), st.integers(0, 2**32 - 1))
def test_sector_label_for_any_state(theta, seed):
    sec = ThetaSector(theta, 6)
    psi = random_sector_state(sec, np.random.default_rng(seed))
    assert abs(sector_expectation(V(TWO_PI), sec, psi) - np.exp(1j * theta)) < 1e-12


def test_weyl_relation():
    # V(b) U(n) V(b)^* = e^{i b n} U(n) away from the truncation edges
    sec = ThetaSector(1.0, 10)
    Vb, Un = observable_matrix(V(0.4), sec), observable_matrix(U(1), sec)
    lhs = Vb @ Un @ Vb.conj().T
    assert np.allclose(lhs, np.exp(0.4j) * Un, atol=1e-13)


def test_non_integer_u_rejected():
    with pytest.raises(ValueError):
        U(0.5)


class TestRhoTheta:
    def test_generators(self):
        rho = RhoThetaMap(math.pi)
        assert rho(U(3)) == U(3)
        img = rho(V(2.0))
        assert isinstance(img, Word) and abs(img.coeff - np.exp(1j * 2.0 * 0.5)) < 1e-15
        w = PeriodicFunction(1.0, {}, {1: 1.0})
        assert rho(LocalizedMomentum(w)).shift == pytest.approx(0.5)
        assert rho(PeriodicObservable(w)) == PeriodicObservable(w)

    def test_word_images_act_like_sector_change(self):
        # omega_theta(rho^t(A)) = omega_{theta+t}(A) for a state with the same coefficients
        rho = RhoThetaMap(1.3)
        word = Word((V(0.5), U(1), V(1.1)))
        a = ThetaSector(0.4, 8)
        b = ThetaSector(1.7, 8)
        psi = random_sector_state(a, np.random.default_rng(1), support=4)
        lhs = sector_expectation(rho(word), a, psi)
        rhs = sector_expectation(word, b, psi)
        assert abs(lhs - rhs) < 1e-12

    @pytest.mark.parametrize("theta", THETAS)
    def test_deficit_on_central_element(self, theta):
        sec = ThetaSector.wrapped(theta, 6)
        psi = random_sector_state(sec, np.random.default_rng(0))
        omega = lambda obs: sector_expectation(obs, sec, psi)
        assert abs(order_parameter_deficit(omega, RhoThetaMap(math.pi), V(TWO_PI)) - 2) < 1e-12

    def test_undefined_argument(self):
        with pytest.raises(ValueError):
            order_parameter_deficit(lambda o: 0, RhoThetaMap(1.0), "not an observable")


def test_shift_coefficients():
    c = np.array([0, 1, 2, 0], dtype=complex)
    assert np.array_equal(shift_coefficients(c, 1), [0, 0, 1, 2])
    assert np.array_equal(shift_coefficients(c, -1), [1, 2, 0, 0])
    with pytest.raises(ValueError):
        shift_coefficients(c, 2)


@pytest.mark.parametrize("alpha,theta", [(0.3, 1.0), (0.7, 5.0), (1.25, 0.5), (0.5, math.pi)])
def test_flux_equals_sector_shift_dynamics(alpha, theta):
    pot = PeriodicFunction(0.0, {1: 1.0}, {2: 0.3})
    sec = ThetaSector(theta, 20, alpha)
    psi = random_sector_state(sec, np.random.default_rng(2), support=5)
    times = np.linspace(0, 5, 11)
    a = sector_u_trajectory(sec, psi, times, 1, pot).values
    sec0, k = zero_flux_sector(sec)
    b = sector_u_trajectory(sec0, shift_coefficients(psi, k), times, 1, pot).values
    assert np.max(np.abs(a - b)) < 1e-10


def test_basis_and_grid_propagators_agree():
    # h = 0, periodic V: exact momentum-basis evolution against the circle split-step
    pot = PeriodicFunction(0.0, {1: 1.0}, {2: 0.3})
    sec = ThetaSector(1.0, 24, 0.3)
    psi = random_sector_state(sec, np.random.default_rng(0), support=3)
    times = np.linspace(0, 10, 6)
    exact = sector_u_trajectory(sec, psi, times, 1, pot).values
    grid = RingGridPropagator(1.0, 0.3, pot, points=128)
    u0 = grid.from_coefficients(psi, sec.indices)
    split = [grid.expectation_u(grid.propagate(u0, t), 1) for t in times]
    assert np.max(np.abs(np.array(split) - exact)) < 1e-5


def test_phase_diagnostics_on_synthetic_phase():
    t = np.linspace(0, 2, 41)
    traj = Trajectory(t, 0.6 * np.exp(-1.7j * t), "x")
    d = phase_diagnostics(traj)
    assert d.slope == pytest.approx(-1.7, abs=1e-12)
    assert d.modulus_drift < 1e-14 and d.fit_residual < 1e-12


def test_v_beta_phase_is_linear():
    spec = GridSpec()
    psi = gaussian_packet(spec, 0.5, 1.0, 0.3)
    times = np.linspace(0, 2, 9)
    d = phase_diagnostics(v_beta_trajectory(spec, 0.2, 0.5, 1.0, psi, times))
    assert abs(abs(d.slope) - 0.5) < 1e-6 * 0.5
    assert d.modulus_drift < 1e-6 and d.fit_residual < 1e-6


def test_zassenhaus_preconditions():
    spec = GridSpec()
    with pytest.raises(ValueError):
        zassenhaus_check(spec, 0.3, 0.5, 1, 2.0)
    with pytest.raises(ValueError):
        zassenhaus_check(spec, 0.3, 0.5, 1, 0.5, states=[gaussian_packet(spec)])


def test_zassenhaus_short_time():
    assert zassenhaus_check(GridSpec(), 0.1, 1.0, 2, 0.3) < 1e-5


def test_half_flux_degenerate_ground_pair():
    low = theta_spectrum(ThetaSector(0.0, 2, 0.5))[:2]
    assert np.allclose(low, [0.125, 0.125], atol=1e-15)


def test_full_period_rho_is_identity_on_central_element():
    img = RhoThetaMap(TWO_PI)(V(TWO_PI))
    assert img.factors == (V(TWO_PI),) and abs(img.coeff - 1) < 1e-14
    sec = ThetaSector(2.0, 6)
    psi = random_sector_state(sec, np.random.default_rng(4))
    half = sector_expectation(RhoThetaMap(math.pi)(V(TWO_PI)), sec, psi)
    assert abs(half + np.exp(2j)) < 1e-12
