"""Dense complex linear algebra for small dimensions (N = 2 primary, N <= 8).

Hermitian eigendecompositions here are deterministic: eigenvalues are sorted
descending, degenerate clusters are re-based reproducibly, and every
eigenvector's phase is fixed so its largest-magnitude component is real
positive.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NonHermitianInput

MAX_DIM = 8

HERMITICITY_TOL = 1e-9
PSD_TOL = 1e-9
DEGENERACY_GAP = 1e-8

ID2 = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (PAULI_X, PAULI_Y, PAULI_Z)


def require_hermitian(m: np.ndarray, tol: float = HERMITICITY_TOL, what: str = "matrix") -> None:
    dev = np.max(np.abs(m - m.conj().T))
    if dev > tol:
        raise NonHermitianInput(f"{what} deviates from Hermiticity by {dev:.3e} (tol {tol:.1e})")


def require_square(m: np.ndarray, dim: int | None = None) -> int:
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {m.shape}")
    if dim is not None and m.shape[0] != dim:
        raise DimensionMismatch(f"expected dimension {dim}, got {m.shape[0]}")
    return m.shape[0]


def dag(m: np.ndarray) -> np.ndarray:
    return m.conj().T


def projector(psi: np.ndarray) -> np.ndarray:
    return np.outer(psi, psi.conj())


def normalize(psi: np.ndarray) -> np.ndarray:
    return psi / np.linalg.norm(psi)


def _fix_phase(v: np.ndarray) -> np.ndarray:
    """Rotate the global phase so the largest-magnitude component is real
    positive; ties resolved by lowest index (np.argmax takes the first max)."""
    k = int(np.argmax(np.abs(v)))
    a = v[k]
    if np.abs(a) == 0.0:
        return v
    return v * (a.conjugate() / np.abs(a))


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenvalues sorted descending; eigenvectors as matrix columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


def hermitian_eig(
    m: np.ndarray,
    tol: float = HERMITICITY_TOL,
    gap: float = DEGENERACY_GAP,
    preferred: np.ndarray | None = None,
) -> SpectralDecomposition:
    """Deterministic spectral decomposition of a Hermitian matrix.

    Within a degenerate cluster (eigenvalue gap < ``gap``) the eigenbasis
    is rebuilt reproducibly: either from ``preferred`` column vectors that
    lie inside the cluster subspace, or by orthonormalizing the projections
    of the standard basis in index order.
    """
    n = require_square(m)
    require_hermitian(m, tol)
    w, v = np.linalg.eigh(m)
    # descending order
    w = w[::-1].copy()
    v = v[:, ::-1].copy()

    i = 0
    while i < n:
        j = i + 1
        while j < n and abs(w[j - 1] - w[j]) < gap:
            j += 1
        if j - i > 1:
            v[:, i:j] = _rebase_cluster(v[:, i:j], preferred)
        i = j

    for k in range(n):
        v[:, k] = _fix_phase(v[:, k])
    return SpectralDecomposition(eigenvalues=w, eigenvectors=v)


def _rebase_cluster(basis: np.ndarray, preferred: np.ndarray | None) -> np.ndarray:
    """Deterministic orthonormal basis of span(basis) of the same rank."""
    n, r = basis.shape
    proj = basis @ basis.conj().T

    if preferred is not None:
        cand = []
        for k in range(preferred.shape[1]):
            u = preferred[:, k]
            pu = proj @ u
            if np.linalg.norm(pu) > 1.0 - 1e-6:  # u lies in the cluster subspace
                cand.append(normalize(pu))
        if len(cand) == r:
            return np.stack(cand, axis=1)

    out = []
    for k in range(n):
        u = proj @ np.eye(n)[:, k]
        for q in out:
            u = u - q * (q.conj() @ u)
        nu = np.linalg.norm(u)
        if nu > 1e-6:
            out.append(u / nu)
        if len(out) == r:
            break
    return np.stack(out, axis=1)


def is_psd(m: np.ndarray, tol: float = PSD_TOL) -> bool:
    """True iff the Hermitian matrix has min eigenvalue >= -tol."""
    require_square(m)
    require_hermitian(m)
    return bool(np.linalg.eigvalsh(m)[0] >= -tol)


def min_eigenvalue(m: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(m)[0])


def choi_matrix(phi, n: int) -> np.ndarray:
    """C_Phi = sum_ij |i><j| (x) Phi(|i><j|)."""
    c = np.zeros((n * n, n * n), dtype=complex)
    for i in range(n):
        for j in range(n):
            unit = np.zeros((n, n), dtype=complex)
            unit[i, j] = 1.0
            c += np.kron(unit, np.asarray(phi(unit), dtype=complex))
    return c


def partial_transpose(m: np.ndarray, n: int) -> np.ndarray:
    """Transpose the second tensor factor of an (n*n) x (n*n) matrix."""
    if m.shape != (n * n, n * n):
        raise DimensionMismatch(f"expected shape {(n * n, n * n)}, got {m.shape}")
    return m.reshape(n, n, n, n).transpose(0, 3, 2, 1).reshape(n * n, n * n)


# -- random sampling helpers (used by the property checks and tests) --------

def random_hermitian(rng: np.random.Generator, n: int, scale: float = 1.0) -> np.ndarray:
    g = rng.normal(size=(n, n), scale=scale) + 1j * rng.normal(size=(n, n), scale=scale)
    return (g + g.conj().T) / 2


def random_ginibre(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))


def haar_state(rng: np.random.Generator, n: int) -> np.ndarray:
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    return normalize(v)


def haar_unitary(rng: np.random.Generator, n: int) -> np.ndarray:
    q, r = np.linalg.qr(random_ginibre(rng, n))
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def haar_unitaries(rng: np.random.Generator, n: int, count: int) -> np.ndarray:
    g = rng.normal(size=(count, n, n)) + 1j * rng.normal(size=(count, n, n))
    q, r = np.linalg.qr(g)
    d = np.diagonal(r, axis1=-2, axis2=-1)
    return q * (d / np.abs(d))[:, None, :]


def weyl_unitaries(n: int) -> np.ndarray:
    """The n^2 generalized Pauli (shift/clock) unitaries X^a Z^b, a unitary
    1-design for dimension n."""
    omega = np.exp(2j * np.pi / n)
    shift = np.zeros((n, n), dtype=complex)
    for i in range(n):
        shift[(i + 1) % n, i] = 1.0
    clock = np.diag(omega ** np.arange(n))
    out = np.empty((n * n, n, n), dtype=complex)
    xa = np.eye(n, dtype=complex)
    k = 0
    for _ in range(n):
        zb = np.eye(n, dtype=complex)
        for _ in range(n):
            out[k] = xa @ zb
            zb = zb @ clock
            k += 1
        xa = xa @ shift
    return out
