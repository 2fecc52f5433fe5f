import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qtcrystal.numerics import Trajectory
from qtcrystal.spin import SIGMA_X, SIGMA_Y, SIGMA_Z
from qtcrystal.ssb import (
    AveragedObservable,
    ProductState,
    SymmetryVerdict,
    bell_pair,
    cluster_deficit,
    detect_residual_period,
    local_variance,
    order_parameter_deficit,
    time_translation_deficit,
    variance_scaling,
)


def unit_vector(draw_angles):
    a, b = draw_angles
    return np.array([math.cos(a), math.sin(a) * np.exp(1j * b)])


angles = st.tuples(st.floats(0, math.pi), st.floats(0, 2 * math.pi))


class TestPeriodDetector:
    @settings(max_examples=40, deadline=None)
    @given(st.floats(0.1, 10), st.floats(0.2, 3), st.floats(-1, 1), st.floats(0, 2 * math.pi))
    def test_recovers_cosine_period(self, omega, amp, offset, phase):
        period = 2 * math.pi / omega
        t = np.linspace(0, 3.5 * period, 700)
        traj = Trajectory(t, amp * np.cos(omega * t + phase) + offset, "c")
        v = detect_residual_period(traj)
        assert v.verdict == "broken: residual period"
        assert abs(v.residual_period - period) / period < 1e-6

    def test_complex_phase_trajectory(self):
        t = np.linspace(0, 4, 401)
        v = detect_residual_period(Trajectory(t, np.exp(-2j * math.pi * t), "V"))
        assert v.residual_period == pytest.approx(1.0, rel=1e-8)

    def test_two_harmonics(self):
        t = np.linspace(0, 12, 1200)
        y = np.cos(2 * t) + 0.4 * np.sin(6 * t)
        v = detect_residual_period(Trajectory(t, y, "y"))
        assert v.residual_period == pytest.approx(math.pi, rel=1e-7)

    def test_constant_is_unbroken(self):
        t = np.linspace(0, 1, 50)
        v = detect_residual_period(Trajectory(t, np.full(50, 0.3), "c"))
        assert v.verdict == "unbroken" and v.residual_period is None

    def test_no_period_in_window(self):
        t = np.linspace(0, 5, 200)
        v = detect_residual_period(Trajectory(t, t**2, "drift"))
        assert v.verdict == "broken: no residual period in window"

    def test_short_window(self):
        t = np.linspace(0, 3, 300)
        v = detect_residual_period(Trajectory(t, np.cos(t), "c"))
        assert v.residual_period is None

    def test_non_uniform_sampling_rejected(self):
        t = np.array([0, 0.1, 0.3, 0.35, 1.0])
        with pytest.raises(ValueError):
            detect_residual_period(Trajectory(t, np.cos(t), "c"))


def test_verdict_validation():
    with pytest.raises(ValueError):
        SymmetryVerdict("unbroken", -1.0)
    with pytest.raises(ValueError):
        SymmetryVerdict("broken: residual period", 1.0, residual_period=0.0)
    assert SymmetryVerdict("unbroken", 0.0).to_dict()["verdict"] == "unbroken"


def test_time_translation_deficit_of_cosine():
    t = np.linspace(0, 2 * math.pi, 129)
    assert abs(time_translation_deficit(Trajectory(t, np.cos(t), "c"), math.pi) - 2) < 1e-12
    with pytest.raises(ValueError):
        time_translation_deficit(Trajectory(t, np.cos(t), "c"), 0.1234)


def test_deficit_dichotomy_on_rotated_spins():
    # rotation by pi about z sends sigma_x to -sigma_x at every site
    state = ProductState.uniform([1 / math.sqrt(2), 1 / math.sqrt(2)], 6)
    beta = lambda A: SIGMA_Z @ A @ SIGMA_Z
    per_site = [state.local_expectation(beta(SIGMA_X), i) for i in range(6)]
    assert np.allclose(per_site, per_site[0])
    omega = lambda A: AveragedObservable(A).mean(state)
    assert order_parameter_deficit(omega, beta, SIGMA_X) == pytest.approx(2.0, abs=1e-14)


class TestAveragedObservables:
    @settings(max_examples=30, deadline=None)
    @given(angles, st.integers(1, 200))
    def test_variance_law(self, ang, n):
        vec = unit_vector(ang)
        state = ProductState.uniform(vec, n)
        for A in (SIGMA_X, SIGMA_Y, SIGMA_Z):
            avg = AveragedObservable(A)
            assert abs(avg.variance(state) - local_variance(A, vec) / n) < 1e-12
            assert abs(avg.mean(state) - state.local_expectation(A, 0).real) < 1e-12

    def test_dense_variance_oracle(self):
        vec = unit_vector((0.7, 1.1))
        state = ProductState.uniform(vec, 5)
        avg = AveragedObservable(SIGMA_X)
        D = avg.dense(5)
        psi = state.to_vector()
        m = np.vdot(psi, D @ psi).real
        var = np.vdot(psi, D @ D @ psi).real - m * m
        assert abs(var - avg.variance(state)) < 1e-13
        assert abs(m - avg.mean(state)) < 1e-13

    def test_slope_and_exact_zero(self):
        vec = unit_vector((0.4, 0.0))
        sc = variance_scaling(SIGMA_X, vec)
        assert abs(sc.slope + 1) < 0.02 and not sc.exact_zero
        eig = np.array([1, 1]) / math.sqrt(2)
        assert variance_scaling(SIGMA_X, eig).exact_zero

    def test_non_normalized_local_state(self):
        with pytest.raises(ValueError):
            ProductState.uniform([1.0, 1.0], 3)


class TestCluster:
    @settings(max_examples=30, deadline=None)
    @given(angles, st.integers(1, 5))
    def test_product_states_cluster(self, ang, sep):
        state = ProductState.uniform(unit_vector(ang), 6)
        assert cluster_deficit(state, SIGMA_X, SIGMA_Z, sep) < 1e-14

    def test_dense_product_agrees(self):
        state = ProductState.uniform(unit_vector((0.3, 0.8)), 4)
        d = cluster_deficit(state.to_vector(), SIGMA_Y, SIGMA_X, 2, sites=4, local_dim=2)
        assert d < 1e-14

    def test_bell_pair_counterexample(self):
        d = cluster_deficit(bell_pair(), SIGMA_Z, SIGMA_Z, 1, sites=2, local_dim=2)
        assert abs(d - 1) < 1e-12

    def test_overlap_rejected(self):
        with pytest.raises(ValueError):
            cluster_deficit(ProductState.uniform([1, 0], 4), SIGMA_X, SIGMA_X, 4)
        with pytest.raises(ValueError):
            cluster_deficit(bell_pair(), SIGMA_Z, SIGMA_Z, 1)


def test_spin_variance_examples():
    all_x = np.array([1, 1]) / math.sqrt(2)
    assert variance_scaling(SIGMA_X, all_x).exact_zero
    sc = variance_scaling(SIGMA_Z, all_x)
    assert np.allclose(sc.variances, [1 / n for n in sc.sizes], atol=1e-15)
    assert abs(sc.slope + 1) < 1e-12
