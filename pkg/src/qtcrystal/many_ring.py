"""N coaxial flux rings with a periodic one-ring potential.

The Hamiltonian is ``sum_i [(p_i - alpha)^2/2 + V(phi_i)]`` plus an optional
pair term ``sum_{i<j} v(phi_i - phi_j)``. The reference state is the
product of kinetic ground states ``exp(i alpha phi_i)/sqrt(2 pi)``, which has
uniform density on every ring.

Closed-form t = 0 derivatives are evaluated by periodic quadrature and
checked three ways: exact commutators in the plane-wave basis, finite
differences of exactly evolved circle trajectories, and finite differences
of split-step trajectories on the line grid started from a windowed copy
of the plane wave. Pair terms are checked on a two-ring tensor grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .numerics import (
    ZERO,
    DerivativeEstimate,
    ExactPropagator,
    GridSpec,
    NumericalGuardError,
    PeriodicFunction,
    QuadratureSpec,
    SplitStepPropagator,
    Trajectory,
    finite_difference_derivative,
    periodic_quadrature,
    stencil_times,
    windowed_plane_wave,
)
from .ring import LocalizedMomentum, PeriodicObservable, ThetaSector, observable_matrix

TWO_PI = 2 * math.pi
MAX_TENSOR_POINTS = 2**20

CANONICAL_WINDOW = PeriodicFunction(1.0, {}, {1: 1.0})
CANONICAL_POTENTIAL = PeriodicFunction(0.0, {1: 1.0}, {})


@dataclass(frozen=True)
class ManyRingSpec:
    """Ring count, flux, potentials and the squared window ``w = f**2``."""

    rings: int = 1
    alpha: float = 0.0
    potential: PeriodicFunction = ZERO
    window: PeriodicFunction = CANONICAL_WINDOW
    pair_potential: PeriodicFunction | None = None

    def __post_init__(self):
        if self.rings < 1:
            raise ValueError("need at least one ring")
        w = self.window(QuadratureSpec().nodes)
        if np.min(w) < -1e-12:
            raise ValueError("window w = f^2 must be non-negative so that f is real")

    @property
    def window_vanishes_somewhere(self) -> bool:
        """True when ``f`` has a zero, i.e. a cut point for a compact window exists."""
        return bool(np.min(self.window(QuadratureSpec(4096).nodes)) < 1e-12)

    @property
    def window_vanishes_at_endpoints(self) -> bool:
        return abs(float(self.window(0.0))) < 1e-12

    @property
    def max_mode(self) -> int:
        funcs = [self.potential, self.window] + ([self.pair_potential] if self.pair_potential else [])
        return max(f.max_mode for f in funcs)


def canonical_spec(rings: int = 1, alpha: float = 0.25, **kwargs) -> ManyRingSpec:
    """Window ``f^2 = 1 + sin`` and potential ``V = cos``."""
    return ManyRingSpec(rings, alpha, CANONICAL_POTENTIAL, CANONICAL_WINDOW, **kwargs)


# ---------------------------------------------------------------------------
# reference state


def default_ring_state(spec: ManyRingSpec, truncation: int = 16) -> tuple:
    """Sector and basis vector of ``exp(i alpha phi)/sqrt(2pi)``.

    The plane wave has momentum ``alpha``, so it sits in the sector with
    ``theta/2pi = alpha mod 1`` at index ``floor(alpha)``.
    """
    sector = ThetaSector.wrapped(TWO_PI * spec.alpha, truncation, spec.alpha)
    n0 = int(round(spec.alpha - sector.theta_fraction))
    if abs(n0) + 2 * spec.max_mode + 2 > truncation:
        raise ValueError("truncation too small for the state and its harmonics")
    return sector, sector.basis_vector(n0)


# ---------------------------------------------------------------------------
# closed forms by quadrature


def localized_momentum_expectation(spec: ManyRingSpec, quad: QuadratureSpec = QuadratureSpec()) -> float:
    """``alpha * mean(w)``; the same on every ring."""
    return spec.alpha * periodic_quadrature(spec.window, quad)


def localized_momentum_variance(spec: ManyRingSpec, quad: QuadratureSpec = QuadratureSpec()) -> float:
    # p^f psi = (alpha w - i w'/2) psi on the plane wave
    w, dw = spec.window, spec.window.derivative()
    second = periodic_quadrature(lambda x: spec.alpha**2 * w(x) ** 2 + 0.25 * dw(x) ** 2, quad)
    return second - localized_momentum_expectation(spec, quad) ** 2


def ehrenfest_d1(spec: ManyRingSpec, quad: QuadratureSpec = QuadratureSpec()) -> float:
    """``d/dt <p^f>`` at t = 0, equal to ``-mean(w V')``.

    The sign follows ``[phi, p] = i``; under the opposite convention the
    value flips sign, the magnitude does not.
    """
    dV = spec.potential.derivative()
    return -periodic_quadrature(lambda x: spec.window(x) * dV(x), quad)


def ehrenfest_d2(spec: ManyRingSpec, F: PeriodicFunction, quad: QuadratureSpec = QuadratureSpec()) -> float:
    """``(d/dt)^2 <F(phi)>`` at t = 0, equal to ``-mean(V' F')``."""
    dV, dF = spec.potential.derivative(), F.derivative()
    return -periodic_quadrature(lambda x: dV(x) * dF(x), quad)


def first_derivative_vanishes_for_F(spec: ManyRingSpec, F: PeriodicFunction,
                                    quad: QuadratureSpec = QuadratureSpec()) -> float:
    """``d/dt <F>`` at t = 0, i.e. ``Re <psi| F' (p - alpha) |psi>``.

    ``(p - alpha) psi`` is ``-i exp(i alpha phi) u'`` for the periodic part
    ``u`` of the state, differentiated spectrally on the quadrature nodes.
    """
    nodes = quad.nodes
    u = np.full(nodes.shape, 1 / math.sqrt(TWO_PI), dtype=complex)
    k = np.fft.fftfreq(len(nodes), d=1.0 / len(nodes))
    du = np.fft.ifft(1j * k * np.fft.fft(u))
    dF = F.derivative()
    return periodic_quadrature(
        lambda x: TWO_PI * np.real(np.conj(u) * dF(x) * (-1j) * du), quad
    )


def p_av_time_nontriviality(spec: ManyRingSpec, quad: QuadratureSpec = QuadratureSpec()) -> float:
    """``d/dt <P_N>`` at t = 0 for the ring average of ``p^f``.

    Each ring contributes the same one-ring value, so the average does not
    depend on N.
    """
    per_ring = [ehrenfest_d1(spec, quad)] * spec.rings
    return math.fsum(per_ring) / spec.rings


# ---------------------------------------------------------------------------
# plane-wave basis route


def _obs(spec: ManyRingSpec, observable):
    if observable == "p_f":
        return LocalizedMomentum(spec.window)
    if isinstance(observable, PeriodicFunction):
        return PeriodicObservable(observable)
    return observable


def circle_derivatives(spec: ManyRingSpec, observable="p_f", truncation: int = 16) -> tuple:
    """``(<i[H,A]>, -<[H,[H,A]]>)`` in the truncated plane-wave basis."""
    sector, psi = default_ring_state(spec, truncation)
    H = sector.hamiltonian(spec.potential)
    A = observable_matrix(_obs(spec, observable), sector)
    c1 = 1j * (H @ A - A @ H)
    c2 = 1j * (H @ c1 - c1 @ H)
    return float(np.vdot(psi, c1 @ psi).real), float(np.vdot(psi, c2 @ psi).real)


def circle_trajectory(spec: ManyRingSpec, observable, times, truncation: int = 16) -> Trajectory:
    """Exact one-ring expectation trajectory in the plane-wave basis."""
    sector, psi = default_ring_state(spec, truncation)
    prop = ExactPropagator(sector.hamiltonian(spec.potential))
    A = observable_matrix(_obs(spec, observable), sector)
    return Trajectory(times, prop.trajectory(psi, times, A), _name(observable), {"route": "circle"})


def _name(observable) -> str:
    return observable if isinstance(observable, str) else "F"


# ---------------------------------------------------------------------------
# line grid route


@dataclass(frozen=True)
class LineWindow:
    """Flat-top window for the truncated plane wave on the line."""

    half_width: float = 60.0
    ramp: float = 10.0

    def widened(self, extra: float = 10.0) -> "LineWindow":
        return LineWindow(self.half_width + extra, self.ramp)


def line_trajectory(spec: ManyRingSpec, observable, times, grid: GridSpec = GridSpec(),
                    window: LineWindow = LineWindow()) -> Trajectory:
    """One-ring trajectory by split-step on the line with ``V`` extended periodically."""
    psi0 = windowed_plane_wave(grid, spec.alpha, window.half_width, window.ramp)
    prop = SplitStepPropagator(grid, spec.alpha, 0.0, spec.potential)
    states = prop.run(psi0, times)
    if observable == "p_f":
        values = [grid.localized_momentum_expectation(psi, spec.window) for psi in states]
    else:
        values = [grid.position_expectation(psi, observable).real for psi in states]
    meta = {"route": "line", "half_width": window.half_width, "ramp": window.ramp}
    return Trajectory(times, values, _name(observable), meta)


def propagated_derivative(spec: ManyRingSpec, observable, order: int, route: str = "line",
                          spacing: float = 1e-2, points: int = 7,
                          grid: GridSpec = GridSpec(), window: LineWindow = LineWindow()) -> DerivativeEstimate:
    """Finite-difference derivative at t = 0 of a propagated one-ring trajectory."""
    times = stencil_times(0.0, spacing, points)
    if route == "line":
        traj = line_trajectory(spec, observable, times, grid, window)
    elif route == "circle":
        traj = circle_trajectory(spec, observable, times)
    else:
        raise ValueError(f"unknown route {route!r}")
    return finite_difference_derivative(traj, order)


# ---------------------------------------------------------------------------
# two-ring tensor grid


class TwoRingGrid:
    """Split-step for two rings on a ``points x points`` periodic tensor grid.

    Both rings start in the plane wave ``exp(i alpha phi)``; the state is
    stored as its periodic part in the sector ``theta/2pi = alpha mod 1``.
    """

    def __init__(self, spec: ManyRingSpec, points: int = 128, dt: float = 1e-3, with_pair: bool = True):
        needed = 4 * (spec.max_mode + 1)
        if points * points > MAX_TENSOR_POINTS:
            raise NumericalGuardError(
                f"tensor grid {points}x{points} exceeds {MAX_TENSOR_POINTS} points; "
                f"the harmonics present need only {needed} points per ring"
            )
        if points < needed:
            raise NumericalGuardError(f"{points} points per ring is too coarse; need at least {needed}")
        self.spec = spec
        self.points = points
        self.dt = dt
        phi = TWO_PI * np.arange(points) / points
        self.phi = phi
        self.area = (TWO_PI / points) ** 2
        frac = spec.alpha - math.floor(spec.alpha)
        self.n0 = int(math.floor(spec.alpha))
        k = np.fft.fftfreq(points, d=1.0 / points) + frac
        self.momenta = k
        k1, k2 = np.meshgrid(k, k, indexing="ij")
        self._kin = 0.5 * (k1 - spec.alpha) ** 2 + 0.5 * (k2 - spec.alpha) ** 2
        p1, p2 = np.meshgrid(phi, phi, indexing="ij")
        pot = spec.potential(p1) + spec.potential(p2)
        if with_pair and spec.pair_potential is not None:
            pot = pot + spec.pair_potential(p1 - p2)
        self._pot = pot
        self._phi1 = p1

    def initial_state(self) -> np.ndarray:
        p1 = self._phi1
        p2 = p1.T
        return np.exp(1j * self.n0 * (p1 + p2)) / TWO_PI

    def propagate(self, u, t: float) -> np.ndarray:
        nsteps = int(math.ceil(abs(t) / self.dt - 1e-9))
        if nsteps == 0:
            return u
        dt = t / nsteps
        half_kick = np.exp(-0.5j * dt * self._pot)
        kinetic = np.exp(-1j * dt * self._kin)
        for _ in range(nsteps):
            u = half_kick * np.fft.ifft2(kinetic * np.fft.fft2(half_kick * u))
        return u

    def expectation(self, u, observable) -> float:
        if observable == "p_f":
            pu = np.fft.ifft(self.momenta[:, None] * np.fft.fft(u, axis=0), axis=0)
            return float(self.area * np.vdot(u, self.spec.window(self._phi1) * pu).real)
        return float(self.area * np.sum(observable(self._phi1) * np.abs(u) ** 2))

    def trajectory(self, observable, times) -> Trajectory:
        values = []
        u0 = self.initial_state()
        for t in times:
            values.append(self.expectation(self.propagate(u0, t), observable))
        return Trajectory(times, values, _name(observable), {"route": "tensor"})


class PairDeficits(NamedTuple):
    d1_deficit: float
    d2_deficit: float
    d1_with: float
    d1_without: float
    d2_with: float
    d2_without: float


def pair_potential_no_contribution(spec: ManyRingSpec, F: PeriodicFunction, points: int = 128,
                                   dt: float = 1e-3, spacing: float = 1e-2) -> PairDeficits:
    """Change in the t = 0 derivatives of ring 1 caused by the pair term.

    ``d1`` is the first derivative of ``<p^f_1>``, ``d2`` the second
    derivative of ``<F(phi_1)>``; both come from finite differences of
    two-ring tensor-grid runs with and without ``v``.
    """
    times = stencil_times(0.0, spacing, 7)
    out = {}
    for with_pair in (True, False):
        grid = TwoRingGrid(spec, points, dt, with_pair)
        d1 = finite_difference_derivative(grid.trajectory("p_f", times), 1).value
        d2 = finite_difference_derivative(grid.trajectory(F, times), 2).value
        out[with_pair] = (d1, d2)
    (a1, a2), (b1, b2) = out[True], out[False]
    return PairDeficits(abs(a1 - b1), abs(a2 - b2), a1, b1, a2, b2)
