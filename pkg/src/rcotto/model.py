"""Spin-boson model pieces: TLS Hamiltonian, Ohmic-Lorentzian reservoirs, RC mapping.

Units: hbar = k_B = 1, energies in units of the cold-point bias (or tunnelling
for tunnelling sweeps).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .linops import IDENTITY_2, SIGMA_X, SIGMA_Z, annihilation, kron, number_operator


class EnergyShift(enum.Enum):
    # (mu/2) I added so the TLS eigenvalues are exactly {0, mu}.
    GROUND_AT_ZERO = "ground-at-zero"


@dataclass(frozen=True)
class TlsParams:
    epsilon: float
    delta: float
    shift: EnergyShift = EnergyShift.GROUND_AT_ZERO


@dataclass(frozen=True)
class ReservoirSpec:
    """Bosonic reservoir: inverse temperature plus spectral density ``alpha w wc / (w^2 + wc^2)``."""

    beta: float
    alpha: float
    omega_c: float

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"beta must be > 0, got {self.beta}")
        if not self.alpha >= 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if not self.omega_c > 0:
            raise ValueError(f"omega_c must be > 0, got {self.omega_c}")


@dataclass(frozen=True)
class RcMapping:
    gamma: float
    omega_rc: float
    lam: float
    n: int


def splitting(p: TlsParams) -> float:
    return math.hypot(p.epsilon, p.delta)


def tls_hamiltonian(p: TlsParams) -> np.ndarray:
    mu = splitting(p)
    return 0.5 * mu * IDENTITY_2 + 0.5 * p.epsilon * SIGMA_Z + 0.5 * p.delta * SIGMA_X


def spectral_density(spec: ReservoirSpec, omega: float) -> float:
    if omega < 0:
        raise ValueError(f"spectral density is defined for omega >= 0, got {omega}")
    return spec.alpha * omega * spec.omega_c / (omega**2 + spec.omega_c**2)


def rc_mapping(spec: ReservoirSpec, p: TlsParams, n: int) -> RcMapping:
    """Reaction-coordinate parameters, with the free parameter tied to the TLS splitting.

    The choice ``gamma = mu / (2 pi omega_c)`` makes the RC frequency equal to the
    splitting of the TLS Hamiltonian held fixed on this isochore.
    """
    if n < 1:
        raise ValueError(f"invalid Fock truncation n={n}; need n >= 1")
    mu = splitting(p)
    if mu == 0:
        raise ValueError("degenerate TLS (epsilon = delta = 0) gives a vanishing RC frequency")
    gamma = mu / (2.0 * math.pi * spec.omega_c)
    omega_rc = 2.0 * math.pi * gamma * spec.omega_c
    lam = math.sqrt(math.pi * spec.alpha * omega_rc / 2.0)
    return RcMapping(gamma=gamma, omega_rc=omega_rc, lam=lam, n=n)


def rc_position(n: int) -> np.ndarray:
    a = annihilation(n)
    return a + a.conj().T


def interaction_operator(m: RcMapping) -> np.ndarray:
    """``-lambda sigma_z (a^dagger + a)`` on the product space."""
    return -m.lam * kron(SIGMA_Z, rc_position(m.n))


def rc_self_energy(m: RcMapping) -> np.ndarray:
    """``Omega a^dagger a`` on the product space."""
    return m.omega_rc * kron(IDENTITY_2, number_operator(m.n))


def mapped_hamiltonian(p: TlsParams, m: RcMapping) -> np.ndarray:
    h = (
        kron(tls_hamiltonian(p), np.eye(m.n))
        + interaction_operator(m)
        + rc_self_energy(m)
    )
    return 0.5 * (h + h.conj().T)
