"""Phase-estimation metrology with invested displacement.

For ``sigma = D_1(a) tau D_1(a)^dag`` with ``tau = W (rho (x) |0><0|) W^dag``
and ``a = |a| e^{i phi}``,

    I_F(sigma, n_1) = I_F(tau, n_1 + |a| (e^{-i phi} a_1 + e^{i phi} a_1^dag)),
    <n_1>_sigma     = <n_1>_tau + 2 |a| Re(e^{-i phi} <a_1>_tau) + |a|^2,

so the displacement never has to be represented in Fock space and large
budgets cost nothing extra in truncation. ``tau`` is exact on a basis with
every mode cut at ``n_max + 2`` because passive networks conserve the total
photon number (``n_max`` bounds the input's total photon number up to a
population tail below 1e-12).

A budget ``b`` (amplitude ``|alpha|``) is used as ``|a| = b sin^2 t`` on mode
0; the remainder ``b^2 - |a|^2`` sits on another mode, where it commutes with
the phase generator and changes neither term of the objective.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize

from .fock import FockBasis, State, StateSpec, annihilation_sparse, build_state, check_dim, mean_photon, occupation_table, total_number_distribution
from .linopt import apply_mesh, clements_decompose, mesh_from_params
from .qfi import metrological_power, qfi_from_support, qfi_matrix, spectral_qfi, support

TAIL_TOL = 1e-12
OBJECTIVES = ("mphase", "qfi")


# ---------------------------------------------------------------- single-state quantities


def number_qfi(rho: State, mode: int = 0) -> float:
    """``I_F(rho, n_mode)``."""
    rho.basis.check_mode(mode)
    n = occupation_table(rho.basis)[:, mode].astype(float)
    return spectral_qfi(rho, lambda V: n[:, None] * V)


def sql_witness(rho: State, mode: int = 0) -> float:
    """``I_F(rho, n)/4 - <n>``; positive values certify nonclassicality."""
    n = occupation_table(rho.basis)[:, mode].astype(float)
    if hasattr(rho, "amplitudes"):
        mean_n = float(np.dot(n, np.abs(rho.amplitudes) ** 2))
    else:
        mean_n = float(np.dot(n, rho.matrix.diagonal().real))
    return number_qfi(rho, mode) / 4 - mean_n


# ---------------------------------------------------------------- optimizer problem


def total_number_cutoff(rho: State, tail: float = TAIL_TOL) -> int:
    """Smallest n with total-photon population above n below ``tail``."""
    dist = total_number_distribution(rho)
    tails = np.cumsum(dist[::-1])[::-1]  # tails[n] = P(N >= n)
    above = np.append(tails[1:], 0.0)  # P(N > n)
    return int(np.flatnonzero(above < tail)[0])


class PhaseProblem:
    """``rho (x) |0>`` embedded on N+1 modes with per-mode cutoff ``n_max + 2``."""

    def __init__(self, rho: State, tail: float = TAIL_TOL):
        self.rho = rho
        self.N_in = rho.basis.num_modes
        self.M = self.N_in + 1
        self.n_max = total_number_cutoff(rho, tail)
        c = self.n_max + 2
        self.basis = FockBasis((c,) * self.M)
        check_dim(self.basis.total_dim * 4, "phase workspace")
        lam, E = support(rho)
        occ_in = occupation_table(rho.basis)
        keep = occ_in.sum(axis=1) <= self.n_max
        idx = np.ravel_multi_index(tuple(np.append(occ_in[keep], np.zeros((keep.sum(), 1), dtype=int), axis=1).T), self.basis.cutoffs)
        X = np.zeros((self.basis.total_dim, lam.size), dtype=complex)
        X[idx] = E[keep] * np.sqrt(lam)
        U, s, _ = np.linalg.svd(X, full_matrices=False)
        w = s**2
        good = w > 1e-14
        self.lam = w[good] / w[good].sum()
        self.E = U[:, good]
        self.a1 = annihilation_sparse(self.basis, 0)
        self.a1d = self.a1.conj().T.tocsr()
        self.n1 = occupation_table(self.basis)[:, 0].astype(float)
        self.nbar = mean_photon(rho)
        self.num_params = self.M**2 + 2
        F0 = qfi_matrix(rho)
        self.i_opt_in = F0.lambda_max / 2
        self.i_opt = max(self.i_opt_in, 1.0)  # ancilla vacuum adds F = 2 I
        w0, v0 = F0.spectrum
        mu = v0[:, 0]
        self.best_mu = np.append(mu, [0.0, 0.0]) if self.i_opt_in >= 1 else np.append(np.zeros(2 * self.N_in), [1.0, 0.0])

    def split(self, x: np.ndarray, budget: float):
        P = self.M**2
        amp = budget * math.sin(x[P]) ** 2
        return mesh_from_params(self.M, x[:P]), amp, float(x[P + 1])

    def evaluate(self, x: np.ndarray, budget: float) -> dict:
        mesh, amp, phi = self.split(x, budget)
        F = apply_mesh(self.E, self.basis, mesh)
        lam = self.lam
        e = np.exp(-1j * phi)

        def gen(V):
            out = self.n1[:, None] * V
            if amp:
                out = out + amp * (e * (self.a1 @ V) + np.conj(e) * (self.a1d @ V))
            return out

        I = max(0.0, float(qfi_from_support(lam, F, [gen])[0, 0]))
        pops = np.einsum("i,ai,ai->a", lam, F.conj(), F).real
        n1_tau = float(self.n1 @ pops)
        a1_tau = complex(np.einsum("i,ai,ai->", lam, F.conj(), self.a1 @ F))
        n1_sigma = n1_tau + 2 * amp * (e * a1_tau).real + amp**2
        return {"I": I, "n1": n1_sigma, "mphase": I / 4 - n1_sigma, "amp": amp, "phi": phi, "mesh": mesh}

    def objective(self, kind: str, budget: float) -> Callable[[np.ndarray], float]:
        key = "mphase" if kind == "mphase" else "I"
        return lambda x: -self.evaluate(x, budget)[key]

    # -- starting points

    def identity_start(self, t: float = 0.0, phi: float = 0.0) -> np.ndarray:
        return np.concatenate([clements_decompose(np.eye(self.M)).params(), [t, phi]])

    def swap_start(self) -> np.ndarray:
        U = np.eye(self.M, dtype=complex)
        U[[0, self.N_in]] = U[[self.N_in, 0]]
        return np.concatenate([clements_decompose(U).params(), [0.0, 0.0]])

    def aligned_starts(self) -> list[np.ndarray]:
        """Mode 0 picks up the optimal quadrature; full displacement at four phases."""
        c = self.best_mu[0::2] + 1j * self.best_mu[1::2]
        c = c / np.linalg.norm(c)
        Z = np.eye(self.M, dtype=complex)
        Z[:, 0] = c
        Q, _ = np.linalg.qr(Z)
        Q = Q * (np.vdot(Q[:, 0], c) / abs(np.vdot(Q[:, 0], c)))
        U = Q.conj().T  # first row is conj(c)
        p = clements_decompose(U).params()
        return [np.concatenate([p, [math.pi / 2, ph]]) for ph in (0.0, math.pi / 2, math.pi, 3 * math.pi / 2)]

    def grid_starts(self, budget: float, kind: str, keep: int = 3) -> list[np.ndarray]:
        """Coarse scan over the single two-mode cell when the input has one mode."""
        if self.M != 2:
            return []
        f = self.objective(kind, budget)
        pts = []
        for theta in np.linspace(0, math.pi / 2, 13):
            for t in (0.0, math.pi / 4, math.pi / 2):
                for ph in (0.0, math.pi / 2, math.pi, 3 * math.pi / 2):
                    x = np.array([theta, 0.0, 0.0, 0.0, t, ph])
                    pts.append((f(x), x))
        pts.sort(key=lambda item: item[0])
        return [x for _, x in pts[:keep]]

    def random_start(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(0, 2 * math.pi, self.num_params)


# ---------------------------------------------------------------- reports


@dataclass
class PhaseReport:
    budget: float
    objective: str
    value: float  # objective value: M_phase lower bound or I_F
    i_phase: float
    n1: float
    sql_witness: float
    m_phase_alpha: float
    x: np.ndarray
    mixing_matrix: np.ndarray
    displacement: complex
    restarts: int
    seed: int
    start_values: list[float] = field(default_factory=list)
    final_values: list[float] = field(default_factory=list)
    n_max: int = 0
    label: str = "lower bound"

    def to_dict(self) -> dict:
        return {
            "budget": self.budget,
            "objective": self.objective,
            "m_phase_alpha": self.m_phase_alpha,
            "i_phase": self.i_phase,
            "n1": self.n1,
            "sql_witness": self.sql_witness,
            "displacement_mode0": [self.displacement.real, self.displacement.imag],
            "restarts": self.restarts,
            "seed": self.seed,
            "label": self.label,
            "restart_values": self.final_values,
            "n_max": self.n_max,
        }


def _optimize(problem: PhaseProblem, budget: float, kind: str, restarts: int, seed: int, max_iters: int, warm: Sequence[np.ndarray] = ()) -> PhaseReport:
    if budget < 0:
        raise ValueError("budget must be nonnegative")
    if kind not in OBJECTIVES:
        raise ValueError(f"objective must be one of {OBJECTIVES}")
    rng = np.random.Generator(np.random.Philox(key=seed))
    f = problem.objective(kind, budget)
    starts = [problem.identity_start(), problem.swap_start()]
    starts += problem.aligned_starts() if budget > 0 else []
    starts += problem.grid_starts(budget, kind)
    starts += [np.asarray(w, dtype=float) for w in warm]
    starts += [problem.random_start(rng) for _ in range(restarts)]
    best_x, best_f = None, np.inf
    start_vals, final_vals = [], []
    for x0 in starts:
        f0 = f(x0)
        start_vals.append(-f0)
        if f0 < best_f:
            best_x, best_f = x0.copy(), f0
        res = minimize(f, x0, method="Nelder-Mead", options={"maxiter": max_iters, "xatol": 1e-9, "fatol": 1e-12, "adaptive": True})
        final_vals.append(-float(res.fun))
        if res.fun < best_f:
            best_x, best_f = np.asarray(res.x), float(res.fun)
    ev = problem.evaluate(best_x, budget)
    mesh = ev["mesh"]
    disp = ev["amp"] * np.exp(1j * ev["phi"])
    return PhaseReport(
        budget=budget,
        objective=kind,
        value=-best_f,
        i_phase=ev["I"],
        n1=ev["n1"],
        sql_witness=ev["mphase"],
        m_phase_alpha=max(ev["mphase"], 0.0),
        x=best_x,
        mixing_matrix=mesh.matrix(),
        displacement=complex(disp),
        restarts=restarts,
        seed=seed,
        start_values=start_vals,
        final_values=final_vals,
        n_max=problem.n_max,
    )


def m_phase_alpha(rho: State, budget: float, restarts: int = 4, seed: int = 0, max_iters: int = 2000, objective: str = "mphase", problem: PhaseProblem | None = None, warm: Sequence[np.ndarray] = ()) -> PhaseReport:
    """Certified lower bound on the alpha-invested phase metrological power.

    Every evaluated point is a feasible linear optical unitary, so the
    best value found lower-bounds the maximum. With ``objective="qfi"`` the
    search maximizes ``I_F(sigma, n_1)`` instead.
    """
    problem = PhaseProblem(rho) if problem is None else problem
    return _optimize(problem, float(budget), objective, restarts, seed, max_iters, warm)


def m_phase_series(rho: State, budgets: Sequence[float], restarts: int = 4, seed: int = 0, max_iters: int = 2000, objective: str = "mphase") -> list[PhaseReport]:
    """Reports over ascending budgets, each warm-started from the previous optimum.

    The previous optimum is rescaled so that its mode-0 displacement is
    unchanged, so it stays feasible and the series is nondecreasing.
    """
    if list(budgets) != sorted(budgets):
        raise ValueError("budgets must be ascending")
    problem = PhaseProblem(rho)
    P = problem.M**2
    out: list[PhaseReport] = []
    for b in budgets:
        warm = []
        if out and b > 0:
            prev = out[-1]
            x = prev.x.copy()
            amp = prev.budget * math.sin(x[P]) ** 2
            x[P] = math.asin(math.sqrt(min(1.0, amp / b)))
            warm.append(x)
        out.append(_optimize(problem, float(b), objective, restarts, seed, max_iters, warm))
    return out


# ---------------------------------------------------------------- bounds and budgets


@dataclass
class Prop2Bounds:
    budget: float
    lower: float
    upper: float
    i_phase0: float
    i_opt: float
    i_phase: float

    @property
    def contains(self) -> bool:
        tol = 1e-4 * max(self.upper, 1.0)
        return self.lower - tol <= self.i_phase <= self.upper + tol


def prop2_bounds(rho: State, budget: float, restarts: int = 4, seed: int = 0, max_iters: int = 2000) -> Prop2Bounds:
    """Bracket ``[(sqrt I0 - b sqrt Iopt)^2, (sqrt I0 + b sqrt Iopt)^2]`` and the optimizer's value.

    All quantities refer to ``rho (x) |0><0|`` and are normalized as
    ``I_F/4``; ``i_phase`` comes from maximizing ``I_F(sigma, n_1)`` at the
    given budget, ``i_phase0`` from the same search at zero budget.
    """
    problem = PhaseProblem(rho)
    i0 = m_phase_alpha(rho, 0.0, restarts, seed, max_iters, "qfi", problem).i_phase / 4
    ia = m_phase_alpha(rho, budget, restarts, seed, max_iters, "qfi", problem).i_phase / 4
    io = problem.i_opt
    lo = (math.sqrt(i0) - budget * math.sqrt(io)) ** 2
    hi = (math.sqrt(i0) + budget * math.sqrt(io)) ** 2
    return Prop2Bounds(budget, lo, hi, i0, io, ia)


class NoGuaranteeError(ValueError):
    pass


@dataclass
class SufficientAlpha:
    alpha: float
    alpha_conservative: float
    K: float
    M: float
    i_phase0: float
    i_opt: float
    nbar: float
    num_modes: int


def alpha_threshold(M: float, nbar: float, i_phase0: float, i_opt: float, num_modes: int) -> tuple[float, float]:
    """``(K + sqrt(K^2 + M^2 nbar))/M`` with ``K = sqrt(I0 Iopt) + sqrt(nbar + (N+1)/2)``."""
    if M <= 0:
        raise NoGuaranteeError("metrological power is zero: no budget guarantees a phase advantage")
    K = math.sqrt(i_phase0 * i_opt) + math.sqrt(nbar + (num_modes + 1) / 2)
    return (K + math.sqrt(K**2 + M**2 * nbar)) / M, K


def sufficient_alpha(rho: State, i_phase0: float | None = None, restarts: int = 4, seed: int = 0) -> SufficientAlpha:
    """Displacement amplitude beyond which a phase advantage is guaranteed.

    ``i_phase0`` (normalized ``I_F/4`` at zero budget on ``rho (x) |0>``)
    defaults to the zero-budget optimizer value. ``alpha_conservative`` uses
    the rigorous upper bound ``I0 <= <N_total^2>`` instead, so it does not
    rely on the optimizer having found the zero-budget maximum.
    """
    problem = PhaseProblem(rho)
    M = metrological_power(rho).value
    if M <= 1e-12:
        raise NoGuaranteeError("metrological power is zero: no budget guarantees a phase advantage")
    if i_phase0 is None:
        i_phase0 = m_phase_alpha(rho, 0.0, restarts, seed, objective="qfi", problem=problem).i_phase / 4
    dist = total_number_distribution(rho)
    n2 = float(np.dot(np.arange(dist.size) ** 2, dist))
    nbar = problem.nbar
    N = rho.basis.num_modes
    a, K = alpha_threshold(M, nbar, i_phase0, problem.i_opt, N)
    a_cons, _ = alpha_threshold(M, nbar, max(n2, i_phase0), problem.i_opt, N)
    return SufficientAlpha(a, a_cons, K, M, i_phase0, problem.i_opt, nbar, N)


def asymptotic_ratio(rho: State, budgets: Sequence[float], restarts: int = 4, seed: int = 0) -> list[float]:
    """``M_phase^alpha / |alpha|^2`` along ascending budgets."""
    reports = m_phase_series(rho, budgets, restarts, seed)
    return [r.m_phase_alpha / r.budget**2 for r in reports]


# ---------------------------------------------------------------- Heisenberg sweep


@dataclass
class HeisenbergSweep:
    nbar: np.ndarray
    nbar_sigma: np.ndarray
    i_phase: np.ndarray
    slope: float
    intercept: float
    kappa: float


def heisenberg_sweep(family: Sequence[StateSpec], kappa: float = 4.0, restarts: int = 2, seed: int = 0, max_iters: int = 2000) -> HeisenbergSweep:
    """Fit ``log I_F(sigma, n_1)`` against ``log(nbar + kappa nbar)``.

    Each member gets budget ``sqrt(kappa nbar)``; the search maximizes the
    phase QFI of mode 0.
    """
    if len(family) < 4:
        raise ValueError("need at least four grid points")
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    nbars, nsig, Is = [], [], []
    for spec in family:
        rho = build_state(spec)
        nb = mean_photon(rho)
        rep = m_phase_alpha(rho, math.sqrt(kappa * nb), restarts, seed, max_iters, "qfi")
        nbars.append(nb)
        nsig.append(nb + kappa * nb)
        Is.append(rep.i_phase)
    slope, intercept = np.polyfit(np.log(nsig), np.log(Is), 1)
    return HeisenbergSweep(np.array(nbars), np.array(nsig), np.array(Is), float(slope), float(intercept), kappa)
