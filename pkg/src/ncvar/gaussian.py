"""Gaussian states in the covariance picture.

``V_kl = <{R_k - d_k, R_l - d_l}>`` (anticommutator without a factor 1/2),
so the vacuum has ``V = identity`` and a thermal mode has ``V = (2 nbar + 1) I``.
``Omega`` is the direct sum of ``[[0, 1], [-1, 0]]`` blocks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .fock import State, quadratures_sparse
from .qfi import QfiMatrix

PHYS_TOL = 1e-8


def omega(num_modes: int) -> np.ndarray:
    return np.kron(np.eye(num_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def is_symplectic(S: np.ndarray, tol: float = 1e-8) -> bool:
    Om = omega(S.shape[0] // 2)
    return bool(np.max(np.abs(S @ Om @ S.T - Om)) <= tol)


@dataclass(frozen=True, eq=False)
class GaussianState:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        V = np.asarray(self.cov, dtype=float)
        d = np.asarray(self.mean, dtype=float).reshape(-1)
        if V.shape != (d.size, d.size) or d.size % 2:
            raise ValueError("covariance must be 2N x 2N and match the mean vector")
        if np.max(np.abs(V - V.T)) > 1e-10:
            raise ValueError("covariance is not symmetric")
        V = 0.5 * (V + V.T)
        check_physical(V)
        object.__setattr__(self, "cov", V)
        object.__setattr__(self, "mean", d)

    @property
    def num_modes(self) -> int:
        return self.mean.size // 2

    @classmethod
    def vacuum(cls, num_modes: int = 1) -> "GaussianState":
        return cls(np.zeros(2 * num_modes), np.eye(2 * num_modes))

    @classmethod
    def single_mode(cls, xi: complex = 0.0, nbar: float = 0.0, alpha: complex = 0.0) -> "GaussianState":
        """``D(alpha) S(xi) tau(nbar) S(xi)^dag D(alpha)^dag``."""
        S = squeeze_symplectic(xi)
        V = (2 * nbar + 1) * S @ S.T
        return cls(displacement_mean(alpha), V)

    @classmethod
    def from_fock(cls, state: State) -> "GaussianState":
        """First and second moments of a Fock-space state."""
        R = quadratures_sparse(state.basis)
        d = np.array([state.expect(r).real for r in R])
        n = len(R)
        V = np.empty((n, n))
        for k in range(n):
            for l in range(k, n):
                v = state.expect(R[k] @ R[l] + R[l] @ R[k]).real - 2 * d[k] * d[l]
                V[k, l] = V[l, k] = v
        return cls(d, V)


def check_physical(V: np.ndarray, tol: float = PHYS_TOL) -> None:
    N = V.shape[0] // 2
    herm = V + 1j * omega(N)
    if np.linalg.eigvalsh(herm).min() < -tol:
        raise ValueError("covariance violates the uncertainty relation V + i Omega >= 0")


def displacement_mean(alpha: complex) -> np.ndarray:
    return np.sqrt(2) * np.array([np.real(alpha), np.imag(alpha)])


def squeeze_symplectic(xi: complex) -> np.ndarray:
    """Symplectic matrix of ``S(xi) = exp((xi a^dag^2 - xi^* a^2)/2)``.

    ``S^dag a S = a cosh r + a^dag e^{i theta} sinh r``; for real ``xi > 0`` the
    x quadrature is stretched by ``e^r`` and p compressed by ``e^{-r}``.
    """
    r, th = abs(xi), np.angle(xi)
    u, v = np.cosh(r), np.exp(1j * th) * np.sinh(r)
    return np.array([[np.real(u + v), -np.imag(u - v)], [np.imag(u + v), np.real(u - v)]])


def passive_symplectic(U: np.ndarray) -> np.ndarray:
    from .linopt import symplectic_embedding

    return symplectic_embedding(U)


@dataclass(frozen=True, eq=False)
class WilliamsonData:
    S: np.ndarray
    nus: np.ndarray

    @property
    def D(self) -> np.ndarray:
        return np.diag(np.repeat(self.nus, 2))


def williamson(V: np.ndarray, tol: float = PHYS_TOL) -> WilliamsonData:
    """``V = S diag(nu_1, nu_1, ...) S^T`` with ``S`` symplectic, nus descending.

    Built from the real Schur form of ``V^{-1/2} Omega V^{-1/2}``: each 2x2
    block is ``[[0, 1/nu], [-1/nu, 0]]`` after orienting the block so its
    upper entry is positive; then ``S = V^{1/2} K D^{-1/2}``.
    """
    V = 0.5 * (np.asarray(V, dtype=float) + np.asarray(V, dtype=float).T)
    n2 = V.shape[0]
    if n2 % 2 or V.shape != (n2, n2):
        raise ValueError("covariance must be 2N x 2N")
    N = n2 // 2
    w, Q = np.linalg.eigh(V)
    if w.min() <= 0:
        raise ValueError("covariance is not positive definite")
    Vh = (Q * np.sqrt(w)) @ Q.T
    Vmh = (Q / np.sqrt(w)) @ Q.T
    A = Vmh @ omega(N) @ Vmh
    T, K = sla.schur(A, output="real")
    nus = np.empty(N)
    for k in range(N):
        i, j = 2 * k, 2 * k + 1
        if T[i, j] < 0:
            K[:, [i, j]] = K[:, [j, i]]
            T[[i, j], :] = T[[j, i], :]
            T[:, [i, j]] = T[:, [j, i]]
        nus[k] = 1.0 / T[i, j]
    order = np.argsort(-nus, kind="stable")
    cols = np.concatenate([[2 * k, 2 * k + 1] for k in order])
    K = K[:, cols]
    nus = nus[order]
    if nus.min() < 1 - tol:
        raise ValueError(f"unphysical covariance: symplectic eigenvalue {nus.min():.6g} < 1")
    S = Vh @ K @ np.diag(np.repeat(1 / np.sqrt(nus), 2))
    return WilliamsonData(S, nus)


def symplectic_eigenvalues(V: np.ndarray) -> np.ndarray:
    N = V.shape[0] // 2
    ev = np.abs(np.linalg.eigvals(1j * omega(N) @ V))
    return np.sort(ev)[::-1][::2]


def gaussian_qfi_matrix(V: np.ndarray) -> QfiMatrix:
    """Displacement QFI matrix ``F = 2 Omega^T V^{-1} Omega``.

    With a Williamson decomposition this equals ``2 S D^{-1} S^T``; it is
    independent of the symplectic representative.
    """
    V = np.asarray(V, dtype=float)
    williamson(V)  # physicality check
    Om = omega(V.shape[0] // 2)
    return QfiMatrix(2 * Om.T @ np.linalg.solve(V, Om))


def gaussian_qfi_matrix_representative(V: np.ndarray, S: np.ndarray | None = None) -> QfiMatrix:
    """``2 S^{-1} S^T V^{-1} S S^{-T}`` for a Williamson representative ``S``.

    Kept for comparison: it coincides in spectrum with
    :func:`gaussian_qfi_matrix` for one mode and for equal symplectic
    eigenvalues, but not for general multimode states.
    """
    V = np.asarray(V, dtype=float)
    if S is None:
        S = williamson(V).S
    Si = np.linalg.inv(S)
    return QfiMatrix(2 * Si @ S.T @ np.linalg.solve(V, S) @ Si.T)


def gaussian_metrological_power(V: np.ndarray) -> float:
    lm = gaussian_qfi_matrix(V).lambda_max
    return max(lm / 2 - 1, 0.0)


def single_mode_squeezing_G(V: np.ndarray) -> float:
    """``G = log s_max(S) - log(nu)/2`` from the Williamson form of a 2x2 V.

    Equals ``-log(lambda_min(V))/2``; ``M = max(e^{2G} - 1, 0)``.
    """
    V = np.asarray(V, dtype=float)
    if V.shape != (2, 2):
        raise ValueError("single_mode_squeezing_G accepts single-mode covariances only")
    wd = williamson(V)
    smax = np.linalg.svd(wd.S, compute_uv=False)[0]
    return float(np.log(smax) - 0.5 * np.log(wd.nus[0]))


def critical_squeezing(nbar: float) -> float:
    """Squeezing ``r_c = log(2 nbar + 1)/2`` at the classical boundary."""
    return 0.5 * np.log(2 * nbar + 1)


@dataclass(frozen=True)
class ClassicalityResult:
    classical: bool
    margin: float
    criterion: str


def gaussian_classicality(V: np.ndarray, tol: float = 1e-12) -> ClassicalityResult:
    """Classical iff ``lambda_min(V) >= 1``; ``margin = lambda_min(V) - 1``.

    For one mode this is the squeezing-versus-thermal-noise boundary. For
    several modes the same rule (``V - I >= 0``) is the standard-literature
    extension and is labeled as such.
    """
    V = np.asarray(V, dtype=float)
    check_physical(V)
    margin = float(np.linalg.eigvalsh(V).min() - 1)
    label = "single-mode" if V.shape[0] == 2 else "multimode V >= I (standard-literature extension)"
    return ClassicalityResult(margin >= -tol, margin, label)


def apply_symplectic(g: GaussianState, S_op: np.ndarray, shift: np.ndarray | None = None) -> GaussianState:
    S_op = np.asarray(S_op, dtype=float)
    if S_op.shape != g.cov.shape or not is_symplectic(S_op):
        raise ValueError("transformation is not symplectic")
    d = S_op @ g.mean + (0 if shift is None else np.asarray(shift, dtype=float))
    return GaussianState(d, S_op @ g.cov @ S_op.T)
