"""Charged particle on a unit ring threaded by flux ``2 pi alpha`` (charge 1).

Two representations are used. A theta-sector is the truncated plane-wave
basis ``exp(i (n + theta/2pi) phi)``, ``|n| <= M``, in which the momentum is
diagonal with eigenvalues ``n + theta/2pi`` and the central element
``V(2pi) = exp(2 pi i p)`` is the scalar ``exp(i theta)``. Anything involving
the linear coupling ``h phi`` lives on the decompactified line grid of
:mod:`qtcrystal.numerics` instead, since ``phi`` itself is not periodic.

Observables are built from ``U(n) = exp(i n phi)`` and ``V(beta) = exp(i beta p)``
plus two derived kinds, periodic functions ``F(phi)`` and the localized
momentum ``(w p + p w)/2`` with ``w = f**2``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .numerics import (
    ExactPropagator,
    GridSpec,
    NumericalGuardError,
    PeriodicFunction,
    SplitStepPropagator,
    Trajectory,
    gaussian_packet,
    normalize,
)

TWO_PI = 2 * math.pi


# ---------------------------------------------------------------------------
# theta sectors


@dataclass(frozen=True)
class ThetaSector:
    theta: float = 0.0
    truncation: int = 16
    alpha: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.theta < TWO_PI:
            raise ValueError(f"theta must lie in [0, 2pi), got {self.theta}")
        if self.truncation < 1:
            raise ValueError("truncation must be at least 1")

    @classmethod
    def wrapped(cls, theta: float, truncation: int = 16, alpha: float = 0.0) -> "ThetaSector":
        th = math.fmod(theta, TWO_PI)
        if th < 0:
            th += TWO_PI
        if th >= TWO_PI:
            th = 0.0
        return cls(th, truncation, alpha)

    @property
    def theta_fraction(self) -> float:
        return self.theta / TWO_PI

    @property
    def indices(self) -> np.ndarray:
        return np.arange(-self.truncation, self.truncation + 1)

    @property
    def dim(self) -> int:
        return 2 * self.truncation + 1

    @property
    def momenta(self) -> np.ndarray:
        return self.indices + self.theta_fraction

    def momentum_operator(self) -> np.ndarray:
        return np.diag(self.momenta).astype(complex)

    def kinetic_hamiltonian(self) -> np.ndarray:
        return np.diag(0.5 * (self.momenta - self.alpha) ** 2).astype(complex)

    def hamiltonian(self, potential: PeriodicFunction | None = None) -> np.ndarray:
        """``(p - alpha)^2/2 + V(phi)`` with ``V`` as a Toeplitz matrix of its Fourier modes."""
        H = self.kinetic_hamiltonian()
        if potential is not None:
            H = H + potential.toeplitz(self.indices)
        return H

    def basis_vector(self, n: int) -> np.ndarray:
        if abs(n) > self.truncation:
            raise ValueError(f"index {n} outside the truncation {self.truncation}")
        e = np.zeros(self.dim, dtype=complex)
        e[n + self.truncation] = 1.0
        return e

    def with_truncation(self, truncation: int) -> "ThetaSector":
        return ThetaSector(self.theta, truncation, self.alpha)


def theta_spectrum(sector: ThetaSector, count: int | None = None) -> np.ndarray:
    """Sorted eigenvalues of ``(p - alpha)^2 / 2`` in the sector.

    With ``count=None`` all ``2M+1`` eigenvalues of the truncated basis are
    returned. With ``count`` given, the basis is padded so that the lowest
    ``count`` eigenvalues are those of the untruncated operator.
    """
    if count is not None:
        shift = abs(sector.theta_fraction - sector.alpha)
        pad = max(sector.truncation, count) + int(math.ceil(shift)) + 1
        sector = sector.with_truncation(pad)
    energies = np.linalg.eigvalsh(sector.kinetic_hamiltonian())
    return energies if count is None else energies[:count]


def zero_flux_sector(sector: ThetaSector) -> tuple:
    """The flux-free sector with the same spectrum, and the index offset.

    ``(p - alpha)`` in sector ``theta`` has eigenvalue ``n + theta/2pi - alpha``,
    which is ``(n + k) + theta'/2pi`` in sector ``theta' = theta - 2 pi alpha``
    (mod 2pi) for a fixed integer ``k``.
    """
    target = ThetaSector.wrapped(sector.theta - TWO_PI * sector.alpha, sector.truncation, 0.0)
    k = round(sector.theta_fraction - sector.alpha - target.theta_fraction)
    return target, int(k)


def shift_coefficients(coeffs, k: int, tol: float = 1e-14) -> np.ndarray:
    """Move coefficient ``c_n`` to index ``n + k`` within the same truncation."""
    coeffs = np.asarray(coeffs, dtype=complex)
    out = np.zeros_like(coeffs)
    if k >= 0:
        dropped = coeffs[len(coeffs) - k:] if k else coeffs[:0]
        out[k:] = coeffs[: len(coeffs) - k]
    else:
        dropped = coeffs[:-k]
        out[:k] = coeffs[-k:]
    if np.any(np.abs(dropped) > tol):
        raise ValueError("shift would drop non-zero coefficients; enlarge the truncation")
    return out


def random_sector_state(sector: ThetaSector, rng: np.random.Generator, support: int | None = None) -> np.ndarray:
    """Normalized random complex vector, optionally supported on ``|n| <= support``."""
    c = rng.normal(size=sector.dim) + 1j * rng.normal(size=sector.dim)
    if support is not None:
        c[np.abs(sector.indices) > support] = 0
    return normalize(c)


# ---------------------------------------------------------------------------
# observables


@dataclass(frozen=True)
class U:
    """``exp(i n phi)``."""

    n: int

    def __post_init__(self):
        if int(self.n) != self.n:
            raise ValueError("U(n) is only an observable for integer n")
        object.__setattr__(self, "n", int(self.n))


@dataclass(frozen=True)
class V:
    """``exp(i beta p)``."""

    beta: float


@dataclass(frozen=True)
class PeriodicObservable:
    func: PeriodicFunction


@dataclass(frozen=True)
class LocalizedMomentum:
    """``(w (p + shift) + (p + shift) w) / 2`` with window ``w = f**2``."""

    window: PeriodicFunction
    shift: float = 0.0


@dataclass(frozen=True)
class Word:
    """``coeff`` times an ordered product of generators."""

    factors: tuple
    coeff: complex = 1.0

    def __mul__(self, other):
        other = as_word(other)
        return Word(self.factors + other.factors, self.coeff * other.coeff)


Generator = Union[U, V, PeriodicObservable, LocalizedMomentum]
RingObservable = Union[Generator, Word]


def as_word(obs) -> Word:
    if isinstance(obs, Word):
        return obs
    if isinstance(obs, (U, V, PeriodicObservable, LocalizedMomentum)):
        return Word((obs,))
    raise TypeError(f"not a ring observable: {obs!r}")


def observable_matrix(obs, sector: ThetaSector) -> np.ndarray:
    """Matrix of ``obs`` in the truncated sector basis.

    ``U(n)`` maps index ``m`` to ``m + n``; components pushed past the
    truncation are lost, so states should be supported away from the edges.
    """
    if isinstance(obs, Word):
        out = obs.coeff * np.eye(sector.dim, dtype=complex)
        for f in obs.factors:
            out = out @ observable_matrix(f, sector)
        return out
    if isinstance(obs, U):
        return np.eye(sector.dim, k=-obs.n, dtype=complex)
    if isinstance(obs, V):
        return np.diag(np.exp(1j * obs.beta * sector.momenta))
    if isinstance(obs, PeriodicObservable):
        return obs.func.toeplitz(sector.indices)
    if isinstance(obs, LocalizedMomentum):
        W = obs.window.toeplitz(sector.indices)
        P = np.diag(sector.momenta + obs.shift).astype(complex)
        return 0.5 * (W @ P + P @ W)
    raise TypeError(f"not a ring observable: {obs!r}")


def sector_expectation(obs, sector: ThetaSector, state) -> complex:
    state = np.asarray(state, dtype=complex)
    return complex(np.vdot(state, observable_matrix(obs, sector) @ state))


def central_element(sector: ThetaSector) -> np.ndarray:
    return observable_matrix(V(TWO_PI), sector)


@dataclass(frozen=True)
class RhoThetaMap:
    """Automorphism fixing ``U(n)`` and sending ``p`` to ``p + theta_shift/2pi``."""

    theta_shift: float

    @property
    def fraction(self) -> float:
        return self.theta_shift / TWO_PI

    def __call__(self, obs):
        return apply_rho_theta(self, obs)


def apply_rho_theta(rho: RhoThetaMap, obs):
    """Image of a generator or word under ``rho``; words map factor by factor."""
    if isinstance(obs, Word):
        factors, coeff = [], obs.coeff
        for f in obs.factors:
            image = as_word(apply_rho_theta(rho, f))
            factors.extend(image.factors)
            coeff *= image.coeff
        return Word(tuple(factors), coeff)
    if isinstance(obs, (U, PeriodicObservable)):
        return obs
    if isinstance(obs, V):
        return Word((obs,), cmath.exp(1j * rho.fraction * obs.beta))
    if isinstance(obs, LocalizedMomentum):
        return LocalizedMomentum(obs.window, obs.shift + rho.fraction)
    raise TypeError(f"not a ring observable: {obs!r}")


# ---------------------------------------------------------------------------
# dynamics with the linear coupling h*phi on the line


def v_beta_trajectory(spec: GridSpec, alpha: float, h: float, beta: float, psi0, times) -> Trajectory:
    """``<V(beta)>(t)`` under ``(p - alpha)^2/2 + h phi`` on the line grid."""
    prop = SplitStepPropagator(spec, alpha, h)
    states = prop.run(psi0, times)
    values = [spec.momentum_expectation(psi, lambda k: np.exp(1j * beta * k)) for psi in states]
    meta = {"alpha": alpha, "h": h, "beta": beta, "grid_points": spec.points, "dt": spec.dt}
    return Trajectory(times, values, f"V({beta:.17g})", meta)


@dataclass(frozen=True)
class PhaseDiagnostics:
    slope: float
    fit_residual: float
    modulus_drift: float


def phase_diagnostics(traj: Trajectory) -> PhaseDiagnostics:
    """Linear fit of ``arg(<A>(t)/<A>(0))`` and the drift of ``|<A>(t)|``."""
    ratio = traj.values / traj.values[0]
    phase = np.unwrap(np.angle(ratio))
    coef = np.polyfit(traj.times, phase, 1)
    resid = float(np.max(np.abs(np.polyval(coef, traj.times) - phase)))
    mod = np.abs(traj.values)
    return PhaseDiagnostics(float(coef[0]), resid, float(np.max(np.abs(mod - mod[0]))))


def random_packets(spec: GridSpec, count: int = 8, seed: int = 0) -> list:
    """Gaussians with seeded random centre, width and mean momentum."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        out.append(
            gaussian_packet(
                spec,
                center=rng.uniform(-4.0, 4.0),
                width=rng.uniform(0.8, 1.5),
                momentum=rng.uniform(-1.5, 1.5),
            )
        )
    return out


def zassenhaus_sides(spec: GridSpec, alpha: float, h: float, n: int, t: float, psi0) -> tuple:
    """Both sides of the conjugation identity for ``U(n)`` as expectations in ``psi0``.

    Left: evolve with ``(p-alpha)^2/2 + h phi`` by split-step, then take
    ``<U(n)>``. Right: apply ``exp(i s (p-alpha))`` with ``s = t^2 h / 2``,
    evolve exactly with the flux-only Hamiltonian in Fourier space, then
    take ``<U(n)>``; this is ``<exp(-is(p-a)) U_t exp(is(p-a))>``.
    """
    u_n = np.exp(1j * n * spec.x)
    left_psi = SplitStepPropagator(spec, alpha, h).propagate(psi0, t)
    left = complex(spec.dx * np.vdot(left_psi, u_n * left_psi))

    s = 0.5 * t * t * h
    k = spec.k
    phi = np.fft.fft(psi0) * np.exp(1j * s * (k - alpha)) * np.exp(-0.5j * t * (k - alpha) ** 2)
    right_psi = np.fft.ifft(phi)
    if spec.edge_mass(right_psi) >= 1e-8:
        raise NumericalGuardError("edge mass too large on the conjugated side")
    right = complex(spec.dx * np.vdot(right_psi, u_n * right_psi))
    return left, right


def zassenhaus_check(spec: GridSpec, alpha: float, h: float, n: int, t: float,
                     states=None, seed: int = 0, count: int = 8) -> float:
    """Max discrepancy between the two sides over the test states."""
    if t > 1.0:
        raise ValueError("zassenhaus_check is only validated for t <= 1")
    if states is None:
        states = random_packets(spec, count, seed)
    if len(states) < 8:
        raise ValueError("at least 8 test states are required")
    resid = 0.0
    for psi in states:
        left, right = zassenhaus_sides(spec, alpha, h, n, t, psi)
        resid = max(resid, abs(left - right))
    return resid


# ---------------------------------------------------------------------------
# sector dynamics on the periodic grid


class RingGridPropagator:
    """Strang split-step on the circle grid in a theta sector.

    States are stored as their periodic part ``u = exp(-i theta phi/2pi) psi``
    on ``points`` equispaced angles, normalized to ``sum |u|^2 dphi = 1``;
    the kinetic factor uses the momenta ``k + theta/2pi``.
    """

    def __init__(self, theta: float, alpha: float, potential: PeriodicFunction | None = None,
                 points: int = 256, dt: float = 1e-3):
        if points < 4 * ((potential.max_mode if potential else 0) + 1):
            raise ValueError("too few grid points for the potential's harmonics")
        self.theta = theta
        self.alpha = alpha
        self.points = points
        self.dt = dt
        self.phi = TWO_PI * np.arange(points) / points
        self.dphi = TWO_PI / points
        self.k = np.fft.fftfreq(points, d=1.0 / points)
        self._momenta = self.k + theta / TWO_PI
        self._kin = 0.5 * (self._momenta - alpha) ** 2
        self._pot = potential(self.phi) if potential is not None else np.zeros(points)

    def from_coefficients(self, coeffs, indices) -> np.ndarray:
        u = np.zeros(self.points, dtype=complex)
        for c, n in zip(coeffs, indices):
            u += c * np.exp(1j * n * self.phi)
        return u / math.sqrt(TWO_PI)

    def propagate(self, u, t: float) -> np.ndarray:
        nsteps = int(math.ceil(abs(t) / self.dt - 1e-9))
        if nsteps == 0:
            return np.asarray(u, dtype=complex)
        dt = t / nsteps
        half_kick = np.exp(-0.5j * dt * self._pot)
        kinetic = np.exp(-1j * dt * self._kin)
        for _ in range(nsteps):
            u = half_kick * np.fft.ifft(kinetic * np.fft.fft(half_kick * u))
        return u

    def expectation_u(self, u, n: int) -> complex:
        return complex(self.dphi * np.vdot(u, np.exp(1j * n * self.phi) * u))


def sector_u_trajectory(sector: ThetaSector, coeffs, times, n: int = 1,
                        potential: PeriodicFunction | None = None) -> Trajectory:
    """``<U(n)>(t)`` by exact diagonalization in the truncated sector."""
    prop = ExactPropagator(sector.hamiltonian(potential))
    values = prop.trajectory(coeffs, times, observable_matrix(U(n), sector))
    return Trajectory(times, values, f"U({n})", {"theta": sector.theta, "alpha": sector.alpha})
