"""Equilibrium states on finite operators: Gibbs states, partition functions, entropy."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .linops import (
    NumericalError,
    ProductSpace,
    EigenSystem,
    as_operator,
    expectation,
    hermitian_eig,
    matrix_function,
    number_operator,
    partial_trace_rc,
    partial_trace_tls,
)

PSD_TOL = 1e-12


def _fingerprint(h: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(h).tobytes()).hexdigest()[:16]


@dataclass(frozen=True)
class ThermalState:
    rho: np.ndarray
    beta: float
    ln_z: float
    source_hash: str

    def generated_by(self, h) -> bool:
        return _fingerprint(as_operator(h)) == self.source_hash


def _log_sum_exp(eigenvalues: np.ndarray, beta: float) -> tuple[float, np.ndarray]:
    # Shift by the ground energy so the largest Boltzmann weight is exactly 1.
    e0 = float(eigenvalues[0])
    weights = np.exp(-beta * (eigenvalues - e0))
    return float(np.log(weights.sum())) - beta * e0, weights


def _check_beta(beta: float) -> None:
    if not beta > 0:
        raise ValueError(f"inverse temperature must be > 0, got {beta}")


def gibbs_state(h, beta: float, eig: EigenSystem | None = None) -> ThermalState:
    """``exp(-beta h) / Z`` via the eigendecomposition, overflow-safe for large ``beta * ||h||``."""
    h = as_operator(h)
    _check_beta(beta)
    if eig is None:
        eig = hermitian_eig(h)
    ln_z, weights = _log_sum_exp(eig.eigenvalues, beta)
    probs = weights / weights.sum()
    rho = matrix_function(h, lambda _: probs, eig=eig)
    return ThermalState(rho=rho, beta=beta, ln_z=ln_z, source_hash=_fingerprint(h))


def ln_partition(h, beta: float) -> float:
    h = as_operator(h)
    _check_beta(beta)
    if np.count_nonzero(h - np.diag(np.diag(h))) == 0:
        vals = np.sort(np.diag(h).real)
    else:
        vals = hermitian_eig(h).eigenvalues
    return _log_sum_exp(vals, beta)[0]


def von_neumann_entropy(rho) -> float:
    rho = as_operator(rho)
    p = hermitian_eig(rho).eigenvalues
    if p[0] < -PSD_TOL:
        raise NumericalError(f"density matrix has negative eigenvalue {p[0]:.3e}")
    p = np.clip(p, 0.0, None)
    nz = p[p > 0]
    return float(-np.sum(nz * np.log(nz)))


def free_energy(state: ThermalState, h) -> float:
    """``<H> - S / beta`` evaluated on the given state."""
    return expectation(h, state.rho) - von_neumann_entropy(state.rho) / state.beta


def reduced_tls_state(state: ThermalState, space: ProductSpace) -> np.ndarray:
    return partial_trace_rc(state.rho, space)


def reduced_rc_state(state: ThermalState, space: ProductSpace) -> np.ndarray:
    return partial_trace_tls(state.rho, space)


def rc_occupation(state: ThermalState, space: ProductSpace) -> float:
    return expectation(number_operator(space.dim_rc), reduced_rc_state(state, space))


def thermal_rc_occupation(omega: float, beta: float, n: int) -> float:
    """Mean occupation of an oscillator truncated to ``n`` levels, in thermal equilibrium."""
    state = gibbs_state(omega * number_operator(n), beta)
    return expectation(number_operator(n), state.rho)


def gibbs_invariant_defects(state: ThermalState, h) -> dict[str, float]:
    """Trace, positivity and commutation defects of a Gibbs state (all should be ~0)."""
    h = as_operator(h)
    rho = state.rho
    min_eig = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0])
    return {
        "trace": abs(float(np.trace(rho).real) - 1.0),
        "negativity": max(0.0, -min_eig),
        "commutator": float(np.max(np.abs(rho @ h - h @ rho))),
    }

