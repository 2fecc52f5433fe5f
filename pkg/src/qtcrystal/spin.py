"""Heisenberg ferromagnet in a uniform z field, started from the all-x state.

The exchange part ``H_J = -J sum_i s_i . s_{i+1}`` (Pauli matrices) commutes
with the field part ``H_1 = (h/2) sum_i sigma_z^i``. The all-x product state
is an ``H_J`` eigenstate, so the average x magnetization precesses as
``cos(h t)`` for every chain length and every coupling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import ExactPropagator, NumericalGuardError, Trajectory

MAX_SITES = 12

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = {"x": SIGMA_X, "y": SIGMA_Y, "z": SIGMA_Z}


@dataclass(frozen=True)
class SpinChainSpec:
    sites: int = 8
    J: float = 1.0
    h: float = 1.0
    boundary: str = "periodic"

    def __post_init__(self):
        if self.sites < 2:
            raise ValueError("need at least two sites")
        if self.J < 0:
            raise ValueError("J must be non-negative (ferromagnetic sign is built in)")
        if self.h < 0:
            raise ValueError("field magnitude h must be non-negative")
        if self.boundary not in ("periodic", "open"):
            raise ValueError("boundary must be 'periodic' or 'open'")

    @property
    def dim(self) -> int:
        return 2**self.sites

    @property
    def bonds(self) -> list:
        n = self.sites
        if self.boundary == "periodic":
            # for n = 2 the wrap-around bond repeats (0, 1) on purpose
            return [(i, (i + 1) % n) for i in range(n)]
        return [(i, i + 1) for i in range(n - 1)]


def _check_size(spec: SpinChainSpec):
    if spec.sites > MAX_SITES:
        raise NumericalGuardError(
            f"{spec.sites} sites needs dimension {spec.dim}; exact diagonalization "
            f"is limited to {MAX_SITES} sites"
        )


def site_operator(op, site: int, sites: int) -> np.ndarray:
    """Dense ``op`` acting on ``site`` (site 0 is the most significant factor)."""
    out = np.eye(1, dtype=complex)
    for i in range(sites):
        out = np.kron(out, op if i == site else np.eye(2))
    return out


def _bit(site: int, sites: int) -> int:
    return 1 << (sites - 1 - site)


def exchange_hamiltonian(spec: SpinChainSpec) -> np.ndarray:
    # s_i . s_j is +1 on aligned pairs; anti-aligned pairs get -1 plus a
    # flip-flop term of amplitude 2
    _check_size(spec)
    n = spec.sites
    idx = np.arange(spec.dim)
    H = np.zeros((spec.dim, spec.dim))
    for i, j in spec.bonds:
        mask = _bit(i, n) | _bit(j, n)
        differ = ((idx & _bit(i, n)) > 0) != ((idx & _bit(j, n)) > 0)
        H[idx, idx] -= spec.J * np.where(differ, -1.0, 1.0)
        H[idx[differ] ^ mask, idx[differ]] -= 2 * spec.J
    return H


def field_hamiltonian(spec: SpinChainSpec) -> np.ndarray:
    _check_size(spec)
    idx = np.arange(spec.dim)
    # a set bit is spin down (sigma_z = -1)
    downs = (idx[:, None] >> np.arange(spec.sites)[None, :]) & 1
    sz_total = spec.sites - 2 * downs.sum(axis=1)
    return np.diag(0.5 * spec.h * sz_total)


def build_spin_hamiltonian(spec: SpinChainSpec) -> np.ndarray:
    """Dense ``H_J + H_1`` on the ``2**N`` tensor basis (N <= 12)."""
    return exchange_hamiltonian(spec) + field_hamiltonian(spec)


def exchange_field_commutator_norm(spec: SpinChainSpec) -> float:
    HJ, H1 = exchange_hamiltonian(spec), field_hamiltonian(spec)
    return float(np.max(np.abs(HJ @ H1 - H1 @ HJ)))


@dataclass(frozen=True)
class SpinProductState:
    """Tensor product of single-site pure states given by Bloch unit vectors."""

    bloch: tuple

    def __post_init__(self):
        vecs = tuple(tuple(float(c) for c in v) for v in self.bloch)
        for v in vecs:
            if len(v) != 3 or abs(np.linalg.norm(v) - 1) > 1e-12:
                raise ValueError(f"Bloch vector {v} is not a unit 3-vector")
        object.__setattr__(self, "bloch", vecs)

    @classmethod
    def all_x(cls, sites: int) -> "SpinProductState":
        return cls(((1.0, 0.0, 0.0),) * sites)

    @property
    def sites(self) -> int:
        return len(self.bloch)

    def local_vectors(self) -> list:
        out = []
        for x, y, z in self.bloch:
            theta = np.arccos(np.clip(z, -1, 1))
            phi = np.arctan2(y, x)
            out.append(np.array([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)]))
        return out

    def to_vector(self) -> np.ndarray:
        psi = np.ones(1, dtype=complex)
        for v in self.local_vectors():
            psi = np.kron(psi, v)
        return psi


def sigma_x_average(psi, sites: int) -> float:
    """``<(1/N) sum_i sigma_x^i>`` by flipping one bit per site."""
    psi = np.asarray(psi)
    idx = np.arange(len(psi))
    total = 0.0
    for i in range(sites):
        total += np.vdot(psi, psi[idx ^ (1 << i)]).real
    return total / sites


def sigma_x_trajectory_analytic(h: float, times) -> Trajectory:
    if h < 0:
        raise ValueError("h must be non-negative")
    times = np.asarray(times, dtype=float)
    return Trajectory(times, np.cos(h * times), "sigma_x_av", {"method": "analytic", "h": h})


def sigma_x_trajectory_ed(spec: SpinChainSpec, times) -> Trajectory:
    """Average x magnetization of the evolved all-x state, by exact diagonalization."""
    _check_size(spec)
    times = np.asarray(times, dtype=float)
    prop = ExactPropagator(build_spin_hamiltonian(spec))
    psi0 = SpinProductState.all_x(spec.sites).to_vector()
    values = [sigma_x_average(prop.evolve(psi0, t), spec.sites) for t in times]
    meta = {"method": "ed", "sites": spec.sites, "J": spec.J, "h": spec.h, "boundary": spec.boundary}
    return Trajectory(times, values, "sigma_x_av", meta)
