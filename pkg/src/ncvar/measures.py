"""Mean quadrature variance, its convex roof, and the photon-number bound."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .fock import DensityMatrix, FockBasis, FockState, State, mean_photon, quadratures_sparse
from .qfi import metrological_power, support

PURITY_TOL = 1e-8
DEFAULT_PARAM_CAP = 20000


def _pure_vector(state: State) -> np.ndarray:
    if isinstance(state, FockState):
        return state.amplitudes
    lam, E = support(state)
    if lam.size != 1 and lam.max() < 1 - PURITY_TOL:
        raise ValueError("state is not pure")
    top = int(np.argmax(lam))
    if lam[top] < 1 - PURITY_TOL:
        raise ValueError("state is not pure")
    return E[:, top]


def _moments(basis: FockBasis, vectors: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-column first moments <R_k> and second moments <R_k^2>, shape (2N, m)."""
    R = quadratures_sparse(basis)
    first = np.empty((len(R), vectors.shape[1]))
    second = np.empty_like(first)
    for k, op in enumerate(R):
        rv = op @ vectors
        first[k] = np.einsum("am,am->m", vectors.conj(), rv).real
        second[k] = np.einsum("am,am->m", rv.conj(), rv).real
    return first, second


def mean_quadrature_variance(psi: State) -> float:
    """``(1/N) sum_k Var(psi, R_k)`` for a pure state."""
    v = _pure_vector(psi)[:, None]
    first, second = _moments(psi.basis, v)
    return float(np.sum(second - first**2)) / psi.basis.num_modes


def q_pure(psi: State) -> float:
    return mean_quadrature_variance(psi) - 1.0


def is_centered(psi: State, tol: float = 1e-6) -> bool:
    """True when every quadrature mean vanishes (the bound 2 nbar/N is then saturated)."""
    v = _pure_vector(psi)[:, None]
    first, _ = _moments(psi.basis, v)
    return bool(np.max(np.abs(first)) <= tol)


def q_bound(rho: State) -> float:
    return 2 * mean_photon(rho) / rho.basis.num_modes


@dataclass
class Decomposition:
    """Pure-state ensemble ``{p_j, psi_j}``; ``vectors`` holds psi_j as columns."""

    basis: FockBasis
    weights: np.ndarray
    vectors: np.ndarray
    isometry: np.ndarray | None = None

    def reconstruct(self) -> np.ndarray:
        return (self.vectors * self.weights) @ self.vectors.conj().T

    def trace_distance(self, rho: State) -> float:
        diff = self.reconstruct() - rho.dm().matrix
        return 0.5 * float(np.abs(np.linalg.eigvalsh(diff)).sum())


def q_of_decomposition(basis: FockBasis, weights: np.ndarray, vectors: np.ndarray) -> float:
    """Ensemble average ``sum_j p_j Vbar(psi_j) - 1`` (columns need not be normalized)."""
    norms = np.linalg.norm(vectors, axis=0)
    keep = (weights > 0) & (norms > 0)
    v = vectors[:, keep] / norms[keep]
    w = np.asarray(weights)[keep]
    w = w / w.sum()
    first, second = _moments(basis, v)
    vbar = np.sum(second - first**2, axis=0) / basis.num_modes
    return float(w @ vbar) - 1.0


@dataclass
class ConvexRoofResult:
    value: float
    decomposition: Decomposition
    eig_value: float
    num_extra: int
    restarts: int
    seed: int
    label: str = "upper bound"
    history: list[float] = field(default_factory=list)


class _RoofObjective:
    """Objective over m x r isometries W in the eigenbasis of rho."""

    def __init__(self, lam: np.ndarray, E: np.ndarray, basis: FockBasis):
        self.lam = lam
        self.sqrt_lam = np.sqrt(lam)
        self.N = basis.num_modes
        R = quadratures_sparse(basis)
        B = [op @ E for op in R]
        self.A = np.array([E.conj().T @ b for b in B])  # (2N, r, r)
        self.total_second = float(sum(np.einsum("i,ai,ai->", lam, b.conj(), b).real for b in B))

    def value_grad(self, W: np.ndarray, need_grad: bool = True):
        C = W * self.sqrt_lam  # rows are unnormalized components in the eigenbasis
        q = np.einsum("ji,ji->j", C.conj(), C).real
        AC = np.einsum("kil,jl->kji", self.A, C)  # A_k c_j
        s = np.einsum("ji,kji->kj", C.conj(), AC).real
        good = q > 1e-300
        qs = np.where(good, q, 1.0)
        gain = np.sum(np.where(good, s**2 / qs, 0.0))
        f = (self.total_second - gain) / self.N - 1.0
        if not need_grad:
            return f, None
        dC = -(2 * np.einsum("kj,kji->ji", s, AC) / qs[:, None] - (np.sum(s**2, axis=0) / qs**2)[:, None] * C) / self.N
        dC[~good] = 0
        G = 2 * dC * self.sqrt_lam  # Euclidean gradient w.r.t. W (real inner product Re tr(X^dag Y))
        return f, G


def _qf(X: np.ndarray) -> np.ndarray:
    Q, R = np.linalg.qr(X)
    d = np.diagonal(R)
    ph = np.where(np.abs(d) > 0, d / np.abs(d), 1.0)
    return Q * ph


def _stiefel_descent(obj: _RoofObjective, W: np.ndarray, max_iters: int, tol: float = 1e-12):
    f, G = obj.value_grad(W)
    step = 1.0
    for _ in range(max_iters):
        WG = W.conj().T @ G
        grad = G - W @ (0.5 * (WG + WG.conj().T))
        gnorm2 = float(np.vdot(grad, grad).real)
        if gnorm2 < 1e-20:
            break
        improved = False
        while step > 1e-12:
            Wn = _qf(W - step * grad)
            fn, _ = obj.value_grad(Wn, need_grad=False)
            if fn <= f - 1e-4 * step * gnorm2:
                improved = True
                break
            step *= 0.5
        if not improved:
            break
        if f - fn < tol:
            W, f = Wn, fn
            break
        W = Wn
        f, G = obj.value_grad(W)
        step *= 2.0
    return f, W


def q_convex_roof_upper(
    rho: State,
    num_extra: int = 0,
    restarts: int = 8,
    max_iters: int = 300,
    seed: int = 0,
    candidates: Sequence[tuple[np.ndarray, np.ndarray]] = (),
    param_cap: int = DEFAULT_PARAM_CAP,
) -> ConvexRoofResult:
    """Upper bound on the convex roof of ``Vbar - 1`` and the achieving ensemble.

    The search runs over m x r isometries (m = rank + ``num_extra``) mixing the
    scaled eigenvectors, starting from the eigendecomposition and from
    ``restarts`` random isometries, each refined by projected gradient descent
    on the Stiefel manifold with QR retraction. ``candidates`` are extra
    (weights, column-vectors) decompositions of ``rho`` that are evaluated
    directly; the minimum over everything found is reported.
    """
    if not 0 <= num_extra <= 3:
        raise ValueError("num_extra must be between 0 and 3")
    basis = rho.basis
    lam, E = support(rho)
    r = lam.size
    if r == 1:
        v = E[:, 0]
        val = q_pure(FockState.normalized(basis, v))
        dec = Decomposition(basis, np.ones(1), E.copy(), np.ones((1, 1)))
        return ConvexRoofResult(val, dec, val, 0, 0, seed)
    m = r + num_extra
    if 2 * m * r > param_cap:
        raise ValueError(f"convex-roof search needs {2 * m * r} parameters, cap is {param_cap}")
    lam = lam / lam.sum()
    obj = _RoofObjective(lam, E, basis)
    rng = np.random.Generator(np.random.Philox(key=seed))

    W0 = np.zeros((m, r), dtype=complex)
    W0[:r, :r] = np.eye(r)
    eig_val, _ = obj.value_grad(W0, need_grad=False)
    best_f, best_W = _stiefel_descent(obj, W0, max_iters)
    if eig_val < best_f:
        best_f, best_W = eig_val, W0
    history = [best_f]
    for _ in range(restarts):
        Z = rng.standard_normal((m, r)) + 1j * rng.standard_normal((m, r))
        f, W = _stiefel_descent(obj, _qf(Z), max_iters)
        history.append(f)
        if f < best_f:
            best_f, best_W = f, W
    C = best_W * obj.sqrt_lam
    p = np.einsum("ji,ji->j", C.conj(), C).real
    keep = p > 1e-300
    vecs = E @ (C[keep].T / np.sqrt(p[keep]))
    dec = Decomposition(basis, p[keep] / p[keep].sum(), vecs, best_W)

    for w, V in candidates:
        val = q_of_decomposition(basis, np.asarray(w), np.asarray(V))
        if val < best_f:
            best_f = val
            norms = np.linalg.norm(V, axis=0)
            dec = Decomposition(basis, np.asarray(w) / np.sum(w), V / norms, None)
    return ConvexRoofResult(float(best_f), dec, float(eig_val), num_extra, restarts, seed, history=history)


# ---------------------------------------------------------------- monotonicity audit


@dataclass
class AuditEntry:
    index: int
    m_before: float
    m_after: float
    q_before: float
    q_after: float
    m_violation: bool
    q_violation: bool


@dataclass
class AuditReport:
    entries: list[AuditEntry]
    m_tol: float
    q_tol: float

    @property
    def violations(self) -> list[AuditEntry]:
        return [e for e in self.entries if e.m_violation or e.q_violation]

    @property
    def max_m_increase(self) -> float:
        return max((e.m_after - e.m_before for e in self.entries), default=0.0)

    @property
    def max_q_increase(self) -> float:
        return max((e.q_after - e.q_before for e in self.entries), default=0.0)


def monotonicity_audit(
    rho: State,
    channels: Sequence,
    seed: int = 0,
    restarts: int = 2,
    max_iters: int = 100,
    m_tol: float = 1e-5,
    q_tol: float = 5e-3,
    check_q: bool = True,
) -> AuditReport:
    """M and Q_ub before and after each linear optical channel.

    The output Q_ub is the better of a fresh convex-roof search and the
    decomposition obtained by pushing the input's best ensemble through the
    channel (a feasible decomposition of the output state).
    """
    m_before = metrological_power(rho).value
    q_res = q_convex_roof_upper(rho, restarts=restarts, max_iters=max_iters, seed=seed) if check_q else None
    entries = []
    for idx, ch in enumerate(channels):
        out = ch.apply(rho)
        m_after = metrological_power(out).value
        if q_res is not None:
            dec = q_res.decomposition
            cand = ch.pushforward(dec.weights, dec.vectors, rho.basis)
            q_after = q_convex_roof_upper(out, restarts=restarts, max_iters=max_iters, seed=seed + idx + 1, candidates=[cand]).value
            q_before = q_res.value
        else:
            q_after = q_before = float("nan")
        entries.append(
            AuditEntry(
                idx,
                m_before,
                m_after,
                q_before,
                q_after,
                m_after > m_before + m_tol,
                bool(q_res is not None and q_after > q_before + q_tol),
            )
        )
    return AuditReport(entries, m_tol, q_tol)
