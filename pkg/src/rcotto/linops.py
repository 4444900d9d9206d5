"""Dense Hermitian operator algebra on the TLS x RC product space.

Operators are plain complex ``numpy`` arrays. The product space orders the
two-level factor first, so the tensor index ``(s, k)`` lives at flat index
``s * n + k``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

HERMITIAN_TOL = 1e-12
RECONSTRUCTION_TOL = 1e-10
IMAG_TOL = 1e-10

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)


class NumericalError(RuntimeError):
    """A numerical step produced a result that cannot be trusted."""


class HermiticityError(ValueError):
    pass


class EigenSolverError(NumericalError):
    pass


@dataclass(frozen=True)
class ProductSpace:
    """Two-level system (first factor) times an ``n``-level truncated oscillator."""

    dim_rc: int
    dim_tls: int = 2

    def __post_init__(self):
        if self.dim_rc < 1:
            raise ValueError(f"RC truncation must be >= 1, got {self.dim_rc}")
        if self.dim_tls != 2:
            raise ValueError("the system factor is a two-level system")

    @property
    def dim(self) -> int:
        return self.dim_tls * self.dim_rc

    def flat_index(self, s: int, k: int) -> int:
        return s * self.dim_rc + k

    def tensor_index(self, i: int) -> tuple[int, int]:
        return divmod(i, self.dim_rc)


@dataclass(frozen=True)
class EigenSystem:
    """Ascending eigenvalues; column ``j`` of ``eigenvectors`` pairs with ``eigenvalues[j]``."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def as_operator(a) -> np.ndarray:
    op = np.asarray(a, dtype=complex)
    if op.ndim != 2 or op.shape[0] != op.shape[1] or op.shape[0] < 1:
        raise ValueError(f"operator must be a non-empty square matrix, got shape {op.shape}")
    return op


def hermiticity_defect(h: np.ndarray) -> float:
    return float(np.max(np.abs(h - h.conj().T)))


def is_hermitian(h, tol: float = HERMITIAN_TOL) -> bool:
    h = as_operator(h)
    scale = float(np.max(np.abs(h)))
    return hermiticity_defect(h) <= tol * scale


def _require_hermitian(h: np.ndarray) -> None:
    if not is_hermitian(h):
        scale = float(np.max(np.abs(h)))
        raise HermiticityError(
            f"operator is not Hermitian: defect {hermiticity_defect(h):.3e} "
            f"exceeds {HERMITIAN_TOL:g} * max|H| = {HERMITIAN_TOL * scale:.3e}"
        )


def kron(a, b) -> np.ndarray:
    return np.kron(as_operator(a), as_operator(b))


def annihilation(n: int) -> np.ndarray:
    """Truncated bosonic lowering operator with ``a[k-1, k] = sqrt(k)``."""
    if n < 1:
        raise ValueError(f"invalid Fock truncation n={n}; need n >= 1")
    return np.diag(np.sqrt(np.arange(1, n, dtype=float)), k=1).astype(complex)


def number_operator(n: int) -> np.ndarray:
    return np.diag(np.arange(n, dtype=float)).astype(complex)


def _fix_phases(vecs: np.ndarray) -> np.ndarray:
    # Largest-magnitude component of each column made real and positive.
    idx = np.argmax(np.abs(vecs), axis=0)
    pivots = vecs[idx, np.arange(vecs.shape[1])]
    return vecs * (np.abs(pivots) / pivots)


def hermitian_eig(h) -> EigenSystem:
    """Eigendecomposition of a Hermitian matrix with deterministic eigenvector phases.

    Raises ``HermiticityError`` for non-Hermitian input and ``EigenSolverError``
    when LAPACK fails or the reconstruction residual exceeds tolerance.
    """
    h = as_operator(h)
    _require_hermitian(h)
    # Symmetrize so LAPACK sees the exact Hermitian part.
    hs = 0.5 * (h + h.conj().T)
    try:
        vals, vecs = np.linalg.eigh(hs)
    except np.linalg.LinAlgError as exc:
        raise EigenSolverError(f"Hermitian eigensolver did not converge: {exc}") from exc
    vecs = _fix_phases(vecs)
    residual = float(np.max(np.abs((vecs * vals) @ vecs.conj().T - h)))
    bound = RECONSTRUCTION_TOL * max(1.0, float(np.max(np.abs(h))))
    if residual > bound:
        raise EigenSolverError(f"eigendecomposition residual {residual:.3e} exceeds {bound:.3e}")
    return EigenSystem(eigenvalues=vals, eigenvectors=vecs)


def matrix_function(h, f: Callable[[np.ndarray], np.ndarray], eig: EigenSystem | None = None) -> np.ndarray:
    """Return ``V diag(f(lambda)) V^dagger`` for Hermitian ``h``.

    ``f`` receives the whole eigenvalue array and must return real finite values;
    anything else (e.g. ``log`` of a non-positive eigenvalue) raises ``ValueError``.
    """
    if eig is None:
        eig = hermitian_eig(h)
    with np.errstate(all="ignore"):
        fv = np.asarray(f(eig.eigenvalues))
    if fv.shape != eig.eigenvalues.shape:
        fv = np.broadcast_to(fv, eig.eigenvalues.shape)
    if np.iscomplexobj(fv):
        if np.any(np.abs(fv.imag) > 0):
            raise ValueError("matrix function must be real-valued on the spectrum")
        fv = fv.real
    bad = ~np.isfinite(fv)
    if np.any(bad):
        raise ValueError(f"function undefined at eigenvalue(s) {eig.eigenvalues[bad]}")
    v = eig.eigenvectors
    out = (v * fv) @ v.conj().T
    return 0.5 * (out + out.conj().T)


def expectation(obs, rho) -> float:
    """Real part of ``tr(obs rho)``; a sizeable imaginary part signals a bug upstream."""
    obs = as_operator(obs)
    rho = as_operator(rho)
    if obs.shape != rho.shape:
        raise ValueError(f"dimension mismatch: {obs.shape} vs {rho.shape}")
    val = np.einsum("ij,ji->", obs, rho)
    if abs(val.imag) > IMAG_TOL:
        raise NumericalError(f"expectation has imaginary part {val.imag:.3e}; operator pipeline is not Hermitian")
    return float(val.real)


def _check_product(rho: np.ndarray, space: ProductSpace) -> np.ndarray:
    rho = as_operator(rho)
    if rho.shape[0] != space.dim:
        raise ValueError(f"state of dimension {rho.shape[0]} does not live on a space of dimension {space.dim}")
    return rho.reshape(space.dim_tls, space.dim_rc, space.dim_tls, space.dim_rc)


def partial_trace_rc(rho, space: ProductSpace) -> np.ndarray:
    return np.einsum("skuk->su", _check_product(rho, space))


def partial_trace_tls(rho, space: ProductSpace) -> np.ndarray:
    return np.einsum("skst->kt", _check_product(rho, space))
