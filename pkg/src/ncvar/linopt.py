"""Linear optical unitaries in Fock space and the classical-ancilla channel.

Mixing-matrix convention: a passive unitary ``W`` with mixing matrix ``U``
satisfies ``W^dag a_n W = sum_m U[n, m] a_m``. Equivalently ``U`` is the
single-photon block of ``W`` and a product of coherent states with
amplitudes ``alpha`` is mapped to amplitudes ``U @ alpha``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
import scipy.linalg as sla
from scipy.stats import unitary_group

from .fock import (
    DensityMatrix,
    FockBasis,
    FockState,
    State,
    StateSpec,
    _ladder_1mode,
    build_state,
    check_dim,
    occupation_table,
)

UNITARY_TOL = 1e-10


# ---------------------------------------------------------------- data types


@dataclass(frozen=True, eq=False)
class PassiveUnitary:
    mixing_matrix: np.ndarray

    def __post_init__(self):
        U = np.atleast_2d(np.asarray(self.mixing_matrix, dtype=complex))
        if U.shape[0] != U.shape[1]:
            raise ValueError("mixing matrix must be square")
        err = np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0])))
        if err > UNITARY_TOL:
            raise ValueError(f"mixing matrix is not unitary (max deviation {err:.2e})")
        object.__setattr__(self, "mixing_matrix", U)

    @property
    def num_modes(self) -> int:
        return self.mixing_matrix.shape[0]

    @classmethod
    def identity(cls, num_modes: int) -> "PassiveUnitary":
        return cls(np.eye(num_modes, dtype=complex))

    @classmethod
    def random(cls, num_modes: int, rng: np.random.Generator) -> "PassiveUnitary":
        if num_modes == 1:
            return cls(np.array([[np.exp(1j * rng.uniform(0, 2 * np.pi))]]))
        return cls(unitary_group.rvs(num_modes, random_state=rng))

    def symplectic(self) -> np.ndarray:
        return symplectic_embedding(self.mixing_matrix)

    def mesh(self) -> "ClementsMesh":
        return clements_decompose(self.mixing_matrix)


@dataclass(frozen=True, eq=False)
class LinOpticalUnitary:
    """``[prod_n D_n(alpha_n)] W`` with ``W`` passive."""

    passive: PassiveUnitary
    displacements: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        n = self.passive.num_modes
        disp = np.zeros(n, dtype=complex) if self.displacements is None else np.asarray(self.displacements, dtype=complex).reshape(-1)
        if disp.size != n:
            raise ValueError(f"need {n} displacement amplitudes, got {disp.size}")
        object.__setattr__(self, "displacements", disp)

    @property
    def num_modes(self) -> int:
        return self.passive.num_modes

    @property
    def budget(self) -> float:
        """Invested displacement energy ``sum |alpha_n|^2``."""
        return float(np.sum(np.abs(self.displacements) ** 2))

    @classmethod
    def random(cls, num_modes: int, rng: np.random.Generator, max_displacement: float = 0.0) -> "LinOpticalUnitary":
        radii = rng.uniform(0, max_displacement, num_modes)
        phases = rng.uniform(0, 2 * np.pi, num_modes)
        return cls(PassiveUnitary.random(num_modes, rng), radii * np.exp(1j * phases))

    def apply(self, state: State) -> State:
        return apply_linear_optics(state, self)

    def to_fock(self, basis: FockBasis) -> np.ndarray:
        W = passive_unitary_to_fock(basis, self.passive)
        for mode, beta in enumerate(self.displacements):
            if beta != 0:
                W = displacement_unitary(basis, mode, beta) @ W
        return W


# ---------------------------------------------------------------- elementary gates


def _embed_single(basis: FockBasis, mode: int, op: np.ndarray) -> np.ndarray:
    basis.check_mode(mode)
    check_dim(basis.total_dim**2, "operator")
    left = int(np.prod(basis.cutoffs[:mode]))
    right = int(np.prod(basis.cutoffs[mode + 1 :]))
    return np.kron(np.kron(np.eye(left), op), np.eye(right))


@lru_cache(maxsize=32)
def _ladder_dense(d: int):
    a = _ladder_1mode(d).toarray()
    return a


def displacement_matrix(d: int, beta: complex) -> np.ndarray:
    """Single-mode ``exp(beta a^dag - beta^* a)`` of the truncated generator."""
    a = _ladder_dense(d)
    return sla.expm(beta * a.conj().T - np.conj(beta) * a)


def displacement_unitary(basis: FockBasis, mode: int, beta: complex) -> np.ndarray:
    return _embed_single(basis, mode, displacement_matrix(basis.cutoffs[mode], complex(beta)))


def phase_rotation(basis: FockBasis, mode: int, theta: float) -> np.ndarray:
    """``exp(i theta n_mode)``."""
    basis.check_mode(mode)
    check_dim(basis.total_dim**2, "operator")
    return np.diag(np.exp(1j * theta * occupation_table(basis)[:, mode]))


def _two_mode_generator(basis: FockBasis, m: int, n: int, phi: float) -> np.ndarray:
    """``e^{i phi} a_m a_n^dag - e^{-i phi} a_m^dag a_n`` as a dense matrix."""
    from .fock import annihilation_sparse

    am = annihilation_sparse(basis, m)
    an = annihilation_sparse(basis, n)
    g = np.exp(1j * phi) * (an.conj().T @ am) - np.exp(-1j * phi) * (am.conj().T @ an)
    return g.toarray()


def beam_splitter(basis: FockBasis, mode_pair: Sequence[int], theta: float, phi: float = 0.0) -> np.ndarray:
    """``exp(theta (e^{i phi} a_m a_n^dag - e^{-i phi} a_m^dag a_n))``.

    Mixing matrix on (m, n): ``[[cos, -e^{-i phi} sin], [e^{i phi} sin, cos]]``.
    ``theta = pi/4`` is a 50:50 splitter; with ``theta = -pi/4`` it sends
    ``|alpha>|alpha>`` to ``|sqrt(2) alpha>|0>``.
    """
    m, n = (int(k) for k in mode_pair)
    if m == n:
        raise ValueError("beam splitter needs two distinct modes")
    basis.check_mode(m)
    basis.check_mode(n)
    check_dim(basis.total_dim**2, "operator")
    return sla.expm(theta * _two_mode_generator(basis, m, n, phi))


def beam_splitter_mixing(theta: float, phi: float = 0.0) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -np.exp(-1j * phi) * s], [np.exp(1j * phi) * s, c]])


def symplectic_embedding(U: np.ndarray) -> np.ndarray:
    """Orthogonal symplectic ``O`` with ``W^dag R W = O R`` in (x1,p1,...) order."""
    U = np.atleast_2d(np.asarray(U, dtype=complex))
    N = U.shape[0]
    X, Y = U.real, U.imag
    O = np.zeros((2 * N, 2 * N))
    O[0::2, 0::2] = X
    O[0::2, 1::2] = -Y
    O[1::2, 0::2] = Y
    O[1::2, 1::2] = X
    return O


# ---------------------------------------------------------------- rectangular mesh


def _mesh_T(N: int, m: int, theta: float, phi: float) -> np.ndarray:
    T = np.eye(N, dtype=complex)
    c, s = np.cos(theta), np.sin(theta)
    T[m, m] = np.exp(1j * phi) * c
    T[m, m + 1] = -s
    T[m + 1, m] = np.exp(1j * phi) * s
    T[m + 1, m + 1] = c
    return T


@dataclass(frozen=True, eq=False)
class ClementsMesh:
    """Rectangular mesh of two-mode cells plus output phases.

    ``cells`` lists ``(m, theta, phi)`` in application order; cell acts on
    modes (m, m+1) with matrix ``[[e^{i phi} c, -s], [e^{i phi} s, c]]``.
    The represented unitary is ``diag(exp(i phases)) @ T_last @ ... @ T_first``.
    """

    num_modes: int
    cells: tuple[tuple[int, float, float], ...]
    phases: np.ndarray

    def matrix(self) -> np.ndarray:
        U = np.eye(self.num_modes, dtype=complex)
        for m, theta, phi in self.cells:
            U = _mesh_T(self.num_modes, m, theta, phi) @ U
        return np.exp(1j * self.phases)[:, None] * U

    def params(self) -> np.ndarray:
        flat = [v for _, theta, phi in self.cells for v in (theta, phi)]
        return np.concatenate([np.asarray(flat, dtype=float), self.phases])


def mesh_layout(N: int) -> list[int]:
    """Mode index of each cell, in application order, for an N-mode mesh."""
    return [m for m, _, _ in clements_decompose(np.eye(N)).cells]


def mesh_from_params(N: int, x: np.ndarray) -> ClementsMesh:
    """Inverse of :meth:`ClementsMesh.params`; ``x`` has length ``N**2``."""
    x = np.asarray(x, dtype=float)
    if x.size != N * N:
        raise ValueError(f"need {N * N} parameters for an {N}-mode mesh")
    layout = _layout_cached(N)
    cells = tuple((m, float(x[2 * k]), float(x[2 * k + 1])) for k, m in enumerate(layout))
    return ClementsMesh(N, cells, x[2 * len(layout) :].copy())


@lru_cache(maxsize=16)
def _layout_cached(N: int) -> tuple[int, ...]:
    return tuple(mesh_layout(N))


def _null_angles(num: complex, den: complex) -> tuple[float, float]:
    if num == 0:
        return 0.0, 0.0
    if den == 0:
        return float(np.pi / 2), 0.0
    r = num / den
    return float(np.arctan(abs(r))), float(np.angle(r))


def clements_decompose(U: np.ndarray) -> ClementsMesh:
    """Rectangular decomposition of a unitary into a :class:`ClementsMesh`."""
    V = np.array(np.atleast_2d(U), dtype=complex)
    N = V.shape[0]
    if np.max(np.abs(V.conj().T @ V - np.eye(N))) > 1e-8:
        raise ValueError("matrix is not unitary")
    right: list[tuple[int, float, float]] = []
    left: list[tuple[int, float, float]] = []
    for k, i in enumerate(range(N - 2, -1, -1)):
        if k % 2 == 0:
            for j in reversed(range(N - 1 - i)):
                m, n = i + j + 1, j
                theta, phi = _null_angles(V[m, n], V[m, n + 1])
                right.append((n, theta, phi))
                V = V @ _mesh_T(N, n, theta, phi).conj().T
        else:
            for j in range(N - 1 - i):
                n, m = i + j + 1, j
                theta, phi = _null_angles(-V[n, m], V[n - 1, m])
                left.append((n - 1, theta, phi))
                V = _mesh_T(N, n - 1, theta, phi) @ V
    diag = np.angle(np.diag(V)).astype(float)
    pushed: list[tuple[int, float, float]] = []
    for m, theta, phi in reversed(left):
        alpha, beta = diag[m], diag[m + 1]
        new_phi = float(np.fmod(alpha - beta + np.pi, 2 * np.pi))
        diag[m] = beta - phi + np.pi
        diag[m + 1] = beta
        pushed.append((m, theta, float(new_phi)))
    # the first pushed cell sits next to the right-hand cells, so it acts first
    cells = tuple(right + pushed)
    return ClementsMesh(N, cells, np.mod(diag + np.pi, 2 * np.pi) - np.pi)


# ---------------------------------------------------------------- fast application


@lru_cache(maxsize=32)
def _rotation_eig(d1: int, d2: int):
    """Eigendecomposition of ``i (a_2^dag a_1 - a_1^dag a_2)`` on a d1 x d2 block."""
    b = FockBasis((d1, d2))
    K = _two_mode_generator(b, 0, 1, 0.0)  # a_1^dag a_0 - a_0^dag a_1 (modes 0, 1 of block)
    w, W = np.linalg.eigh(1j * K)
    return w, W, np.ascontiguousarray(W.conj().T)


def rotation_block(d1: int, d2: int, theta: float) -> np.ndarray:
    """Fock matrix of the real two-mode rotation with mixing ``[[c, -s], [s, c]]``."""
    w, W, Wh = _rotation_eig(d1, d2)
    return (W * np.exp(-1j * theta * w)) @ Wh


def _apply_two_mode(psi: np.ndarray, m: int, block: np.ndarray) -> np.ndarray:
    # psi has shape cutoffs + (batch,)
    shape = psi.shape
    moved = np.moveaxis(psi, (m, m + 1), (0, 1))
    mshape = moved.shape
    out = block @ moved.reshape(mshape[0] * mshape[1], -1)
    return np.moveaxis(out.reshape(mshape), (0, 1), (m, m + 1)).reshape(shape)


@lru_cache(maxsize=32)
def _rotation_sectors(d1: int, d2: int):
    """The rotation generator restricted to each total-photon sector of a d1 x d2 block.

    The generator conserves ``n_1 + n_2`` (also after truncation), so its
    exponential is block diagonal. Sectors are padded to a common size ``s``
    and stacked: ``idx`` (K, s) holds flat indices (padding points at the
    extra slot ``d1 d2``), ``W``/``Wh`` (K, s, s) the eigenvectors and ``w``
    (K, s) the eigenvalues (padding: identity, eigenvalue 0).
    """
    K = d1 + d2 - 1
    s = min(d1, d2)
    idx = np.full((K, s), d1 * d2, dtype=np.intp)
    Wp = np.zeros((K, s, s), dtype=complex)
    wp = np.zeros((K, s))
    for k in range(K):
        js = np.arange(max(0, k - d2 + 1), min(k, d1 - 1) + 1)
        n = js.size
        idx[k, :n] = js * d2 + (k - js)
        # i (a_1^dag a_0 - a_0^dag a_1) on |j, k-j>: a_0 lowers j, a_1^dag raises k-j
        G = np.zeros((n, n), dtype=complex)
        for a, j in enumerate(js):
            if a + 1 < n:  # |j, k-j> <-> |j+1, k-j-1>
                amp = np.sqrt((j + 1) * (k - j))
                G[a, a + 1] = 1j * amp
                G[a + 1, a] = -1j * amp
        w, W = np.linalg.eigh(G)
        wp[k, :n] = w
        Wp[k, :n, :n] = W
        Wp[k, n:, n:] = np.eye(s - n)
    return idx, wp, Wp, np.ascontiguousarray(np.conj(np.swapaxes(Wp, 1, 2)))


def _apply_rotation(psi: np.ndarray, m: int, d1: int, d2: int, theta: float) -> np.ndarray:
    # sector-by-sector W diag(e^{-i theta w}) W^dag, batched over all sectors
    idx, w, W, Wh = _rotation_sectors(d1, d2)
    shape = psi.shape
    moved = np.moveaxis(psi, (m, m + 1), (0, 1))
    mshape = moved.shape
    flat = moved.reshape(d1 * d2, -1)
    ext = np.concatenate([flat, np.zeros((1, flat.shape[1]), dtype=flat.dtype)])
    g = ext[idx]  # (K, s, batch)
    res = W @ (np.exp(-1j * theta * w)[:, :, None] * (Wh @ g))
    out = np.empty_like(ext)
    out[idx] = res
    out = out[:-1]
    return np.moveaxis(out.reshape(mshape), (0, 1), (m, m + 1)).reshape(shape)


def _phase_factor(basis: FockBasis, mode: int, phi: float) -> np.ndarray:
    d = basis.cutoffs[mode]
    shape = [1] * basis.num_modes + [1]
    shape[mode] = d
    return np.exp(1j * phi * np.arange(d)).reshape(shape)


def apply_mesh(vectors: np.ndarray, basis: FockBasis, mesh: ClementsMesh) -> np.ndarray:
    """Apply the Fock realization of ``mesh`` to columns of ``vectors`` (D x k)."""
    vectors = np.asarray(vectors, dtype=complex)
    single = vectors.ndim == 1
    batch = vectors.reshape(basis.total_dim, -1)
    psi = batch.reshape(basis.cutoffs + (batch.shape[1],))
    for m, theta, phi in mesh.cells:
        if phi != 0:
            psi = psi * _phase_factor(basis, m, phi)
        if theta != 0:
            psi = _apply_rotation(psi, m, basis.cutoffs[m], basis.cutoffs[m + 1], theta)
    for mode, ph in enumerate(mesh.phases):
        if ph != 0:
            psi = psi * _phase_factor(basis, mode, ph)
    out = psi.reshape(basis.total_dim, -1)
    return out[:, 0] if single else out


def apply_displacements(vectors: np.ndarray, basis: FockBasis, displacements: Sequence[complex]) -> np.ndarray:
    vectors = np.asarray(vectors, dtype=complex)
    single = vectors.ndim == 1
    psi = vectors.reshape(basis.cutoffs + (-1,))
    for mode, beta in enumerate(displacements):
        if beta != 0:
            Dm = displacement_matrix(basis.cutoffs[mode], complex(beta))
            psi = np.moveaxis(np.tensordot(Dm, psi, axes=([1], [mode])), 0, mode)
    out = psi.reshape(basis.total_dim, -1)
    return out[:, 0] if single else out


def apply_unitary_vectors(vectors: np.ndarray, basis: FockBasis, U: LinOpticalUnitary, mesh: ClementsMesh | None = None) -> np.ndarray:
    if U.num_modes != basis.num_modes:
        raise ValueError("unitary and basis have different numbers of modes")
    mesh = U.passive.mesh() if mesh is None else mesh
    return apply_displacements(apply_mesh(vectors, basis, mesh), basis, U.displacements)


def passive_unitary_to_fock(basis: FockBasis, passive: PassiveUnitary) -> np.ndarray:
    """Fock-space unitary of a passive network, composed from its rectangular mesh."""
    if passive.num_modes != basis.num_modes:
        raise ValueError("unitary and basis have different numbers of modes")
    check_dim(basis.total_dim**2, "operator")
    return apply_mesh(np.eye(basis.total_dim, dtype=complex), basis, passive.mesh())


def apply_linear_optics(state: State, U: LinOpticalUnitary) -> State:
    basis = state.basis
    mesh = U.passive.mesh()
    if isinstance(state, FockState):
        vec = apply_unitary_vectors(state.amplitudes, basis, U, mesh)
        return FockState(basis, vec / np.linalg.norm(vec), tol_norm=1e-6)
    half = apply_unitary_vectors(state.matrix, basis, U, mesh)
    full = apply_unitary_vectors(half.conj().T, basis, U, mesh)
    full = 0.5 * (full + full.conj().T)
    return DensityMatrix(basis, full / np.trace(full).real, validate=False)


# ---------------------------------------------------------------- channel


def pure_decomposition(state: State, floor: float = 1e-13) -> tuple[np.ndarray, np.ndarray]:
    """Weights and column vectors of an eigendecomposition (pure input: itself)."""
    if isinstance(state, FockState):
        return np.ones(1), state.amplitudes[:, None]
    lam, vecs = np.linalg.eigh(state.matrix)
    keep = lam > floor
    return lam[keep], vecs[:, keep]


@dataclass(frozen=True, eq=False)
class LinearOpticalChannel:
    """``rho -> Tr_E[U (rho (x) sigma_E) U^dag]`` with a classical ancilla ``sigma_E``.

    System modes come first in the joint ordering, ancilla modes after.
    """

    ancilla: StateSpec
    unitary: LinOpticalUnitary

    def __post_init__(self):
        if not self.ancilla.is_classical():
            raise ValueError("ancilla must be a classical state (coherent, thermal, or mixtures thereof)")

    @property
    def ancilla_modes(self) -> int:
        return self.ancilla.num_modes

    def _joint(self, basis: FockBasis):
        if self.unitary.num_modes != basis.num_modes + self.ancilla_modes:
            raise ValueError("unitary must act on system plus ancilla modes")
        joint = basis.tensor(self.ancilla.basis)
        check_dim(joint.total_dim * basis.total_dim, "channel workspace")
        return joint

    def _ancilla_components(self):
        sig = build_state(self.ancilla)
        return pure_decomposition(sig)

    def transform_components(self, basis: FockBasis, weights: np.ndarray, vectors: np.ndarray):
        """Image of each pure input component paired with each ancilla component.

        Returns joint weights ``w`` (K,) and joint output vectors reshaped to
        (D_A, D_E, K).
        """
        joint = self._joint(basis)
        ew, evecs = self._ancilla_components()
        K = len(weights) * len(ew)
        inputs = np.einsum("ai,ej->aeij", vectors, evecs).reshape(joint.total_dim, K)
        w = np.outer(weights, ew).reshape(K)
        out = apply_unitary_vectors(inputs, joint, self.unitary)
        return w, out.reshape(basis.total_dim, self.ancilla.basis.total_dim, K)

    def apply(self, state: State) -> DensityMatrix:
        weights, vectors = pure_decomposition(state)
        w, out = self.transform_components(state.basis, weights, vectors)
        rho = np.einsum("aek,bek,k->ab", out, out.conj(), w)
        rho = 0.5 * (rho + rho.conj().T)
        return DensityMatrix(state.basis, rho / np.trace(rho).real, validate=False)

    def pushforward(self, weights: np.ndarray, vectors: np.ndarray, basis: FockBasis, floor: float = 1e-14):
        """Push a pure-state decomposition through the channel.

        Each (input component, ancilla component) pair yields a pure joint
        state whose Schmidt decomposition gives pure system components; the
        union is a valid decomposition of the output state.
        """
        w, out = self.transform_components(basis, weights, vectors)
        ws, vs = [], []
        for k in range(out.shape[2]):
            u, s, _ = np.linalg.svd(out[:, :, k], full_matrices=False)
            p = s**2
            keep = p > floor
            ws.append(w[k] * p[keep])
            vs.append(u[:, keep])
        weights_out = np.concatenate(ws)
        return weights_out / weights_out.sum(), np.concatenate(vs, axis=1)


def apply_channel_phiL(rho: State, ancilla_spec: StateSpec, U: LinOpticalUnitary) -> DensityMatrix:
    return LinearOpticalChannel(ancilla_spec, U).apply(rho)
