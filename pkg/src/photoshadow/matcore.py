"""Dense complex-matrix helpers shared by every other module.

Matrices are plain ``numpy`` arrays of dtype ``complex128``.  The ``as_*``
validators check the structural invariants of a role (density matrix,
Hermitian estimate, unitary) and return a clean copy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = 1e-12
UNITARY_TOL = 1e-10
SOLVER_HERMITIAN_TOL = 1e-8


class DimensionError(ValueError):
    """Raised when matrix or vector shapes do not agree."""


def as_matrix(a) -> np.ndarray:
    """Coerce to a finite square complex matrix."""
    m = np.array(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
        raise DimensionError(f"expected a non-empty square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def hermiticity_error(a: np.ndarray) -> float:
    return float(np.max(np.abs(a - a.conj().T)))


def as_hermitian_estimate(a, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Validate a reconstruction output: Hermitian with unit trace, PSD not required."""
    m = as_matrix(a)
    if hermiticity_error(m) > tol:
        raise ValueError(f"matrix is not Hermitian (max |A - A^H| = {hermiticity_error(m):.3g})")
    tr = np.trace(m)
    if abs(tr - 1.0) > max(tol, TRACE_TOL):
        raise ValueError(f"trace must be 1, got {tr.real:.12g}")
    return m


def as_density_matrix(a, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Validate a physical state: Hermitian, unit trace, positive semi-definite."""
    m = as_hermitian_estimate(a, tol)
    lo = np.linalg.eigvalsh((m + m.conj().T) / 2)[0]
    if lo < -PSD_TOL:
        raise ValueError(f"density matrix has negative eigenvalue {lo:.3g}")
    return m


def as_unitary(a, tol: float = UNITARY_TOL) -> np.ndarray:
    m = as_matrix(a)
    if not validate_unitary(m, tol):
        raise ValueError("matrix is not unitary within tolerance")
    return m


def validate_unitary(m, tol: float = UNITARY_TOL) -> bool:
    """True iff ``||m m^H - I||_F <= tol``."""
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {m.shape}")
    return bool(np.linalg.norm(m @ m.conj().T - np.eye(m.shape[0])) <= tol)


def frobenius_distance(a, b) -> float:
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != b.shape:
        raise DimensionError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(np.sqrt(np.sum(np.abs(a - b) ** 2)))


def purity(rho) -> float:
    """Tr(rho^2), computed as the sum of squared entry magnitudes (rho Hermitian)."""
    rho = np.asarray(rho, dtype=complex)
    return float(np.sum(np.abs(rho) ** 2))


def pure_state(psi) -> np.ndarray:
    """Projector |psi><psi| for a (not necessarily normalized) vector."""
    v = np.asarray(psi, dtype=complex).ravel()
    v = v / np.linalg.norm(v)
    return np.outer(v, v.conj())


def basis_projector(d: int, k: int = 0) -> np.ndarray:
    rho = np.zeros((d, d), dtype=complex)
    rho[k, k] = 1.0
    return rho


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues in descending order with the matching eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        w = self.eigenvectors
        return (w * self.eigenvalues) @ w.conj().T

    @property
    def leading(self) -> float:
        return float(self.eigenvalues[0])


def _fix_phase(v: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    # first component above tol made real positive
    idx = np.argmax(np.abs(v) > tol)
    z = v[idx]
    return v * (abs(z) / z) if z != 0 else v


def spectral_decompose(m) -> Spectrum:
    """Eigendecomposition of a Hermitian matrix.

    The input is symmetrized as (A + A^H)/2 before solving.  Eigenvalues come
    back in descending order and are never clipped, so slightly negative values
    of a noisy estimate are preserved.  Each eigenvector is rephased so that its
    first non-negligible component is real and positive; exact ties are ordered
    by the position of that component.

    Raises:
        ValueError: if the input deviates from Hermitian by more than 1e-8.
    """
    a = as_matrix(m)
    if hermiticity_error(a) > SOLVER_HERMITIAN_TOL:
        raise ValueError("spectral_decompose needs a Hermitian matrix")
    a = (a + a.conj().T) / 2
    vals, vecs = np.linalg.eigh(a)
    vecs = np.column_stack([_fix_phase(vecs[:, k]) for k in range(vecs.shape[1])])
    lead = [int(np.argmax(np.abs(vecs[:, k]) > 1e-12)) for k in range(vecs.shape[1])]
    order = sorted(range(len(vals)), key=lambda k: (-round(float(vals[k]), 12), lead[k]))
    return Spectrum(eigenvalues=vals[order].copy(), eigenvectors=vecs[:, order].copy())
