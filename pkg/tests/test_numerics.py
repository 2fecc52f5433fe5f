import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qtcrystal.numerics import (
    EdgeMassError,
    ExactPropagator,
    GridSpec,
    NumericalGuardError,
    PeriodicFunction,
    QuadratureSpec,
    SplitStepPropagator,
    Trajectory,
    check_hermitian,
    evolve_exact,
    finite_difference_derivative,
    gaussian_packet,
    periodic_quadrature,
    quadrature_doubling_change,
    split_step_propagate,
    stencil_times,
)


def random_hermitian(n, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return (a + a.conj().T) / 2


def test_exact_propagation_matches_matrix_exponential():
    from scipy.linalg import expm

    H = random_hermitian(6, 1)
    psi = np.ones(6, dtype=complex) / math.sqrt(6)
    out = evolve_exact(H, psi, 0.7)
    assert np.allclose(out, expm(-0.7j * H) @ psi, atol=1e-12)


def test_exact_propagation_two_level_rabi():
    # H = sigma_x: |0> -> cos t |0> - i sin t |1>
    H = np.array([[0, 1], [1, 0]], dtype=complex)
    out = evolve_exact(H, np.array([1, 0], dtype=complex), 0.3)
    assert np.allclose(out, [math.cos(0.3), -1j * math.sin(0.3)], atol=1e-14)


def test_exact_propagator_conserves_norm_and_energy():
    H = random_hermitian(10, 2)
    prop = ExactPropagator(H)
    psi = np.random.default_rng(3).normal(size=10) + 0j
    psi /= np.linalg.norm(psi)
    e0 = np.vdot(psi, H @ psi).real
    for t in (0.1, 1.0, 7.5):
        s = prop.evolve(psi, t)
        assert abs(np.linalg.norm(s) - 1) < 1e-10
        assert abs(np.vdot(s, H @ s).real - e0) < 1e-8


def test_non_hermitian_rejected():
    with pytest.raises(ValueError):
        check_hermitian(np.array([[0, 1], [0, 0]], dtype=complex))


def test_dimension_cap_refused():
    with pytest.raises(NumericalGuardError):
        ExactPropagator(np.zeros((4097, 4097)))


def test_trajectory_is_immutable():
    traj = Trajectory([0.0, 1.0], [1.0, 2.0], "x")
    with pytest.raises(Exception):
        traj.times = None
    assert traj.values.dtype == complex


class TestPeriodicFunction:
    def test_evaluation_and_derivative(self):
        f = PeriodicFunction(1.0, {2: 0.5}, {1: 3.0})
        x = np.linspace(0, 2 * math.pi, 11)
        assert np.allclose(f(x), 1 + 0.5 * np.cos(2 * x) + 3 * np.sin(x))
        assert np.allclose(f.derivative()(x), -np.sin(2 * x) + 3 * np.cos(x))
        assert np.allclose(f.derivative(2)(x), -2 * np.cos(2 * x) - 3 * np.sin(x))

    def test_dict_round_trip(self):
        f = PeriodicFunction(0.5, {1: 1.0}, {3: -2.0})
        assert PeriodicFunction.from_dict(f.to_dict()).to_dict() == f.to_dict()

    def test_toeplitz_matches_multiplication(self):
        f = PeriodicFunction(0.0, {1: 1.0}, {2: 0.25})
        idx = np.arange(-6, 7)
        T = f.toeplitz(idx)
        x = np.linspace(0, 2 * math.pi, 400, endpoint=False)
        basis = np.exp(1j * np.outer(x, idx))
        # <e_m| f |e_n> = mean(f e^{i(n-m)x})
        ref = basis.conj().T @ (f(x)[:, None] * basis) / len(x)
        assert np.allclose(T, ref, atol=1e-13)


class TestQuadrature:
    def test_trigonometric_exactness(self):
        assert abs(periodic_quadrature(lambda x: np.sin(x) ** 2) - 0.5) < 1e-15

    def test_doubling_change_small(self):
        assert quadrature_doubling_change(lambda x: np.exp(np.cos(x))) < 1e-14

    def test_minimum_nodes(self):
        with pytest.raises(ValueError):
            QuadratureSpec(points=512)

    def test_bessel_oracle(self):
        from scipy.special import i0

        assert abs(periodic_quadrature(lambda x: np.exp(np.cos(x))) - i0(1.0)) < 1e-14


class TestFiniteDifferences:
    def test_sine_derivatives(self):
        t = stencil_times(0.3, 1e-2)
        traj = Trajectory(t, np.sin(t), "sin")
        d1 = finite_difference_derivative(traj, 1, at=0.3)
        d2 = finite_difference_derivative(traj, 2, at=0.3)
        assert abs(d1.value - math.cos(0.3)) < 1e-9
        assert abs(d2.value + math.sin(0.3)) < 1e-7
        # the reported error bounds the true one
        assert abs(d1.value - math.cos(0.3)) <= d1.error

    def test_missing_centre_rejected(self):
        traj = Trajectory([0.0, 0.1, 0.2], [0, 0, 0], "x")
        with pytest.raises(ValueError):
            finite_difference_derivative(traj, 1, at=0.05)


class TestGrid:
    def test_points_must_be_power_of_two(self):
        with pytest.raises(ValueError):
            GridSpec(points=1000)

    def test_packet_normalized(self):
        spec = GridSpec()
        psi = gaussian_packet(spec, 1.0, 1.2, 0.4)
        assert abs(spec.norm(psi) - 1) < 1e-12
        assert abs(spec.position_expectation(psi, lambda x: x).real - 1.0) < 1e-10
        assert abs(spec.momentum_expectation(psi, lambda k: k).real - 0.4) < 1e-10

    def test_free_packet_matches_analytic_spreading(self):
        spec = GridSpec()
        sigma, t = 1.0, 2.0
        psi = gaussian_packet(spec, 0.0, sigma, 0.5)
        out = split_step_propagate(spec, 0.0, 0.0, None, psi, t)
        mean = spec.position_expectation(out, lambda x: x).real
        var = spec.position_expectation(out, lambda x: (x - mean) ** 2).real
        var0 = spec.position_expectation(psi, lambda x: x**2).real
        assert abs(mean - 0.5 * t) < 1e-9
        # free spreading: var(t) = var0 + t^2 <dp^2> with <dp^2> = 1/(4 var0)
        assert abs(var - (var0 + t**2 / (4 * var0))) < 1e-9

    def test_unitarity_and_energy(self):
        spec = GridSpec()
        V = PeriodicFunction(0.0, {1: 1.0})
        prop = SplitStepPropagator(spec, 0.3, 0.0, V)
        psi = gaussian_packet(spec, 0.0, 1.0, 0.2)
        e0 = prop.energy(psi)
        states = prop.run(psi, [0.0, 0.5, 1.0])
        for s in states:
            assert abs(spec.norm(s) - 1) < 1e-10
            assert abs(prop.energy(s) - e0) < 1e-6

    def test_energy_with_linear_term(self):
        spec = GridSpec()
        prop = SplitStepPropagator(spec, 0.0, 0.5)
        psi = gaussian_packet(spec, 0.0, 1.0, 0.0)
        e0 = prop.energy(psi)
        s = prop.propagate(psi, 1.0)
        assert abs(prop.energy(s) - e0) < 1e-8

    def test_dt_halving_converges(self):
        spec = GridSpec()
        V = PeriodicFunction(0.0, {1: 1.0})
        psi = gaussian_packet(spec, 0.0, 1.0, 0.2)
        a = SplitStepPropagator(spec, 0.0, 0.0, V).propagate(psi, 1.0)
        fine = GridSpec(dt=spec.dt / 2)
        b = SplitStepPropagator(fine, 0.0, 0.0, V).propagate(psi, 1.0)
        obs = lambda s: spec.position_expectation(s, np.cos).real
        assert abs(obs(a) - obs(b)) < 1e-6

    def test_edge_guard(self):
        spec = GridSpec(half_length=8 * math.pi, points=256)
        psi = gaussian_packet(spec, 0.0, 0.5, 0.0)
        with pytest.raises(EdgeMassError):
            SplitStepPropagator(spec, 0.0, 0.0).propagate(psi, 10.0)
        assert issubclass(EdgeMassError, NumericalGuardError)

    def test_t_max_enforced(self):
        spec = GridSpec()
        psi = gaussian_packet(spec)
        with pytest.raises(ValueError):
            SplitStepPropagator(spec, 0.0, 0.0).propagate(psi, 11.0)

    def test_unnormalized_input_rejected(self):
        spec = GridSpec()
        with pytest.raises(ValueError):
            split_step_propagate(spec, 0.0, 0.0, None, 2 * gaussian_packet(spec), 0.1)


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=2, max_value=12), st.integers(min_value=0, max_value=10**6))
def test_exact_evolution_is_unitary(n, seed):
    H = random_hermitian(n, seed)
    psi = np.random.default_rng(seed).normal(size=n) + 0j
    psi /= np.linalg.norm(psi)
    assert abs(np.linalg.norm(evolve_exact(H, psi, 3.0)) - 1) < 1e-10
