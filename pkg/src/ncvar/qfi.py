"""Quantum Fisher information for quadrature displacements.

The QFI of ``rho`` for a generator ``A`` is
``I_F = 2 sum_ij (l_i - l_j)^2 / (l_i + l_j) |<i|A|j>|^2``. Only the support
of ``rho`` (eigenvalues above ``tol_eig``) is diagonalized explicitly; pairs
with one index in the kernel are summed in closed form through
``||A|i>||^2``, so the result is exact without diagonalizing the kernel.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .fock import DensityMatrix, FockState, State, StateSpec, build_state, quadratures_sparse

EIG_FLOOR = 1e-12
CONVERGENCE_TOL = 1e-5


@dataclass(frozen=True, eq=False)
class QuadratureDirection:
    vector: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vector, dtype=float).reshape(-1)
        if abs(np.linalg.norm(v) - 1) > 1e-12:
            raise ValueError("quadrature direction must be a unit vector")
        object.__setattr__(self, "vector", v)

    @classmethod
    def normalized(cls, v) -> "QuadratureDirection":
        v = np.asarray(v, dtype=float)
        return cls(v / np.linalg.norm(v))

    def coefficients(self) -> np.ndarray:
        """Complex ``c_n = mu_x + i mu_p`` with ``X_mu = sum (c^* a + c a^dag)/sqrt 2``."""
        return self.vector[0::2] + 1j * self.vector[1::2]


@dataclass(frozen=True, eq=False)
class QfiMatrix:
    matrix: np.ndarray

    def __post_init__(self):
        F = np.asarray(self.matrix, dtype=float)
        if F.ndim != 2 or F.shape[0] != F.shape[1] or F.shape[0] % 2:
            raise ValueError("QFI matrix must be square with even dimension")
        if np.max(np.abs(F - F.T), initial=0.0) > 1e-9 * max(1.0, np.abs(F).max()):
            raise ValueError("QFI matrix is not symmetric")
        object.__setattr__(self, "matrix", 0.5 * (F + F.T))

    @property
    def num_modes(self) -> int:
        return self.matrix.shape[0] // 2

    @cached_property
    def spectrum(self) -> tuple[np.ndarray, np.ndarray]:
        """Eigenvalues in descending order and matching eigenvectors (columns)."""
        w, v = np.linalg.eigh(self.matrix)
        order = np.argsort(-w, kind="stable")
        return w[order], v[:, order]

    @property
    def lambda_max(self) -> float:
        return float(self.spectrum[0][0])

    def quadratic(self, mu) -> float:
        mu = np.asarray(getattr(mu, "vector", mu), dtype=float)
        return float(mu @ self.matrix @ mu)


# ---------------------------------------------------------------- spectral core


def support(state: State, tol_eig: float = EIG_FLOOR) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues above ``tol_eig`` and their eigenvectors (columns)."""
    if isinstance(state, FockState):
        return np.ones(1), state.amplitudes[:, None]
    lam, vecs = np.linalg.eigh(state.matrix)
    keep = lam > tol_eig
    return lam[keep], vecs[:, keep]


def _apply(op, E: np.ndarray) -> np.ndarray:
    if callable(op) and not isinstance(op, (np.ndarray, sp.spmatrix)):
        return op(E)
    return np.asarray(op @ E)


def qfi_from_support(lam: np.ndarray, E: np.ndarray, ops: Sequence) -> np.ndarray:
    """QFI matrix ``F_kl`` for generators ``ops`` given the support of ``rho``.

    ``ops`` entries are Hermitian matrices (dense or sparse) or callables
    mapping a ``D x r`` block of vectors to the generator applied to it.
    """
    lam = np.asarray(lam, dtype=float)
    B = [_apply(op, E) for op in ops]
    A = [E.conj().T @ b for b in B]
    s = lam[:, None] + lam[None, :]
    W = (lam[:, None] - lam[None, :]) ** 2 / s
    K = len(ops)
    F = np.zeros((K, K))
    for k in range(K):
        for l in range(k, K):
            inner = np.einsum("ij,ji->", W * A[k], A[l])
            # support-to-kernel pairs: sum_i l_i (<B_k,i|B_l,i> - sum_j A_k,ij A_l,ji)
            full = np.einsum("ai,ai->i", B[k].conj(), B[l])
            proj = np.einsum("ij,ji->i", A[k], A[l])
            kernel = np.sum(lam * (full - proj))
            F[k, l] = F[l, k] = 2 * inner.real + 4 * kernel.real
    return F


def spectral_qfi(rho: State, A, tol_eig: float = EIG_FLOOR) -> float:
    """QFI of ``rho`` for the Hermitian generator ``A``."""
    if isinstance(A, np.ndarray) and np.max(np.abs(A - A.conj().T), initial=0.0) > 1e-9:
        raise ValueError("generator is not Hermitian")
    if sp.issparse(A) and abs(A - A.conj().T).max() > 1e-9:
        raise ValueError("generator is not Hermitian")
    lam, E = support(rho, tol_eig)
    return max(0.0, float(qfi_from_support(lam, E, [A])[0, 0]))


def quadrature_operator(basis, mu) -> sp.csr_matrix:
    """``X_mu = R^T mu`` as a sparse matrix."""
    mu = np.asarray(getattr(mu, "vector", mu), dtype=float)
    R = quadratures_sparse(basis)
    if mu.size != len(R):
        raise ValueError("direction has wrong length for this basis")
    return sum((m * r for m, r in zip(mu, R) if m != 0), sp.csr_matrix((basis.total_dim, basis.total_dim), dtype=complex))


def qfi_matrix(rho: State, tol_eig: float = EIG_FLOOR) -> QfiMatrix:
    """Quadrature QFI matrix from a single eigendecomposition of ``rho``."""
    lam, E = support(rho, tol_eig)
    return QfiMatrix(qfi_from_support(lam, E, quadratures_sparse(rho.basis)))


def i_opt(F: QfiMatrix) -> float:
    return F.lambda_max / 2


def i_mean(F: QfiMatrix) -> float:
    return float(np.trace(F.matrix)) / (4 * F.num_modes)


def optimal_direction(F: QfiMatrix, degeneracy_tol: float = 1e-9) -> QuadratureDirection:
    """Unit eigenvector of the largest eigenvalue.

    Degenerate top eigenspaces resolve to the normalized projection of the
    lowest-index coordinate axis with nonzero overlap; the sign makes the
    first significant component positive.
    """
    w, v = F.spectrum
    top = w[0]
    mask = w >= top - degeneracy_tol * max(1.0, abs(top))
    P = v[:, mask]
    if P.shape[1] == 1:
        vec = P[:, 0].copy()
    else:
        proj = P @ P.T
        vec = None
        for k in range(proj.shape[0]):
            col = proj[:, k]
            if np.linalg.norm(col) > 1e-6:
                vec = col / np.linalg.norm(col)
                break
        assert vec is not None
    lead = np.flatnonzero(np.abs(vec) > 1e-9)[0]
    if vec[lead] < 0:
        vec = -vec
    return QuadratureDirection(vec / np.linalg.norm(vec))


@dataclass
class MetrologicalPower:
    value: float
    lambda_max: float
    direction: QuadratureDirection
    F: QfiMatrix
    truncation_delta: float | None = None
    converged: bool | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def i_opt(self) -> float:
        return self.lambda_max / 2

    @property
    def i_mean(self) -> float:
        return i_mean(self.F)

    @property
    def min_variance(self) -> float:
        """Single-shot Cramer-Rao bound ``1/lambda_max`` in the optimal direction."""
        return 1.0 / self.lambda_max if self.lambda_max > 0 else np.inf


def metrological_power_from_F(F: QfiMatrix) -> MetrologicalPower:
    lm = F.lambda_max
    return MetrologicalPower(value=max(lm / 2 - 1, 0.0), lambda_max=lm, direction=optimal_direction(F), F=F)


def metrological_power(rho: State) -> MetrologicalPower:
    """``M = max(lambda_max(F)/2 - 1, 0)`` with the optimal direction as certificate."""
    return metrological_power_from_F(qfi_matrix(rho))


def metrological_power_checked(spec: StateSpec, delta: int = 8, tol: float = CONVERGENCE_TOL) -> MetrologicalPower:
    """M at the spec cutoffs, compared with the value at cutoffs + ``delta``."""
    res = metrological_power(build_state(spec))
    bigger = spec.with_cutoffs(c + delta for c in spec.cutoffs)
    res_big = metrological_power(build_state(bigger, check=False))
    res.truncation_delta = abs(res.value - res_big.value)
    res.converged = res.truncation_delta <= tol
    if not res.converged:
        res.notes.append(f"unconverged: |M(d) - M(d+{delta})| = {res.truncation_delta:.2e}")
    return res
