"""Truncated Fock-space states and operators.

Conventions used throughout the package: hbar = 1, ``x = (a + a^dag)/sqrt(2)``,
``p = (a - a^dag)/(sqrt(2) i)`` so the vacuum has Var(x) = Var(p) = 1/2.
Modes are indexed from 0 and mode 0 is the slowest-varying index of the
flattened basis (C order over the occupation tuple).
"""

from __future__ import annotations

import math
import os
from dataclasses import InitVar, dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Any, Iterable, Sequence, Union

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

DEFAULT_DIM_CAP = 2**22
LEAKAGE_TOL = 1e-8


class CutoffTooSmallError(ValueError):
    """Raised when a truncated state loses more than the allowed population."""

    def __init__(self, leakage: float, tol: float, kind: str = "", cutoff: int | None = None):
        self.leakage = float(leakage)
        self.tol = float(tol)
        what = f" for {kind}" if kind else ""
        at = f" at cutoff {cutoff}" if cutoff is not None else ""
        super().__init__(f"cutoff too small{what}: leakage {leakage:.3e}{at} exceeds {tol:.1e}")


class DimensionCapError(ValueError):
    pass


def dim_cap() -> int:
    """Maximum number of complex entries a dense object may hold.

    Overridden by the ``NCVAR_DIM_CAP`` environment variable.
    """
    env = os.environ.get("NCVAR_DIM_CAP")
    return int(env) if env else DEFAULT_DIM_CAP


def check_dim(entries: int, what: str = "object") -> None:
    cap = dim_cap()
    if entries > cap:
        raise DimensionCapError(f"{what} needs {entries} complex entries, cap is {cap} (NCVAR_DIM_CAP)")


@dataclass(frozen=True)
class FockBasis:
    cutoffs: tuple[int, ...]

    def __post_init__(self):
        cuts = tuple(int(c) for c in self.cutoffs)
        if not cuts or any(c < 1 for c in cuts):
            raise ValueError(f"cutoffs must be positive integers, got {self.cutoffs!r}")
        object.__setattr__(self, "cutoffs", cuts)

    @classmethod
    def uniform(cls, num_modes: int, cutoff: int) -> "FockBasis":
        return cls((cutoff,) * num_modes)

    @property
    def num_modes(self) -> int:
        return len(self.cutoffs)

    @property
    def total_dim(self) -> int:
        return math.prod(self.cutoffs)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.cutoffs

    def index(self, occupation: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(occupation), self.cutoffs))

    def occupation(self, index: int) -> tuple[int, ...]:
        return tuple(int(i) for i in np.unravel_index(index, self.cutoffs))

    def tensor(self, other: "FockBasis") -> "FockBasis":
        return FockBasis(self.cutoffs + other.cutoffs)

    def check_mode(self, mode: int) -> None:
        if not 0 <= mode < self.num_modes:
            raise IndexError(f"mode {mode} out of range for {self.num_modes}-mode basis")


@dataclass(frozen=True, eq=False)
class FockState:
    """Pure state vector on a truncated basis."""

    basis: FockBasis
    amplitudes: np.ndarray
    tol_norm: float = 1e-10

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size != self.basis.total_dim:
            raise ValueError(f"amplitude vector has length {amps.size}, basis needs {self.basis.total_dim}")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > self.tol_norm:
            raise ValueError(f"state norm {norm:.12f} deviates from 1 by more than {self.tol_norm}")
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def normalized(cls, basis: FockBasis, vector: np.ndarray) -> "FockState":
        vec = np.asarray(vector, dtype=complex).reshape(-1)
        return cls(basis, vec / np.linalg.norm(vec))

    def dm(self) -> "DensityMatrix":
        check_dim(self.basis.total_dim**2, "density matrix")
        return DensityMatrix(self.basis, np.outer(self.amplitudes, self.amplitudes.conj()))

    def expect(self, op) -> complex:
        v = self.amplitudes
        return complex(np.vdot(v, op @ v))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    basis: FockBasis
    matrix: np.ndarray
    tol_trace: float = 1e-8
    validate: InitVar[bool] = True

    def __post_init__(self, validate: bool):
        mat = np.asarray(self.matrix, dtype=complex)
        dim = self.basis.total_dim
        if mat.shape != (dim, dim):
            raise ValueError(f"matrix shape {mat.shape} does not match basis dimension {dim}")
        object.__setattr__(self, "matrix", mat)
        if not validate:
            return
        if np.max(np.abs(mat - mat.conj().T), initial=0.0) > 1e-10:
            raise ValueError("density matrix is not Hermitian")
        tr = np.trace(mat).real
        if abs(tr - 1.0) > self.tol_trace:
            raise ValueError(f"density matrix trace {tr:.12f} deviates from 1")
        if np.linalg.eigvalsh(mat).min() < -1e-10:
            raise ValueError("density matrix has negative eigenvalues")

    def dm(self) -> "DensityMatrix":
        return self

    def expect(self, op) -> complex:
        return complex(np.sum(np.asarray(op @ self.matrix).diagonal()))

    def purity(self) -> float:
        return float(np.real(np.vdot(self.matrix.conj().T, self.matrix)))


State = Union[FockState, DensityMatrix]


def as_dm(state: State) -> DensityMatrix:
    return state.dm()


# ---------------------------------------------------------------- operators


def _ladder_1mode(d: int) -> sp.csr_matrix:
    return sp.diags(np.sqrt(np.arange(1, d, dtype=float)), 1, shape=(d, d), format="csr", dtype=complex)


def _embed(basis: FockBasis, mode: int, op: sp.spmatrix) -> sp.csr_matrix:
    left = math.prod(basis.cutoffs[:mode])
    right = math.prod(basis.cutoffs[mode + 1 :])
    out = op
    if left > 1:
        out = sp.kron(sp.identity(left, dtype=complex, format="csr"), out, format="csr")
    if right > 1:
        out = sp.kron(out, sp.identity(right, dtype=complex, format="csr"), format="csr")
    return sp.csr_matrix(out)


@lru_cache(maxsize=128)
def annihilation_sparse(basis: FockBasis, mode: int) -> sp.csr_matrix:
    basis.check_mode(mode)
    return _embed(basis, mode, _ladder_1mode(basis.cutoffs[mode]))


@lru_cache(maxsize=64)
def quadratures_sparse(basis: FockBasis) -> tuple[sp.csr_matrix, ...]:
    ops = []
    for mode in range(basis.num_modes):
        a = annihilation_sparse(basis, mode)
        ad = a.conj().T.tocsr()
        ops.append(((a + ad) / math.sqrt(2)).tocsr())
        ops.append(((a - ad) / (math.sqrt(2) * 1j)).tocsr())
    return tuple(ops)


def annihilation_op(basis: FockBasis, mode: int) -> np.ndarray:
    """Dense truncated annihilation operator on ``mode``.

    The matrix is the exact truncation: ``a|0> = 0`` and the top level of
    the mode has no image above it, so ``[a, a^dag]`` fails only on the top
    level. Truncation effects are measured with :func:`leakage_report`.
    """
    check_dim(basis.total_dim**2, "operator")
    return annihilation_sparse(basis, mode).toarray()


def creation_op(basis: FockBasis, mode: int) -> np.ndarray:
    return annihilation_op(basis, mode).conj().T


def number_op(basis: FockBasis, mode: int) -> np.ndarray:
    return np.diag(occupation_table(basis)[:, mode].astype(complex))


def quadrature_ops(basis: FockBasis) -> list[np.ndarray]:
    """Dense quadratures ordered (x_0, p_0, x_1, p_1, ...)."""
    check_dim(basis.total_dim**2, "operator")
    return [op.toarray() for op in quadratures_sparse(basis)]


@lru_cache(maxsize=64)
def occupation_table(basis: FockBasis) -> np.ndarray:
    grids = np.indices(basis.cutoffs).reshape(basis.num_modes, -1)
    return grids.T.copy()


def total_number_diag(basis: FockBasis) -> np.ndarray:
    return occupation_table(basis).sum(axis=1).astype(float)


# ---------------------------------------------------------------- state kinds


class StateKind(str, Enum):
    VACUUM = "vacuum"
    COHERENT = "coherent"
    FOCK = "fock"
    CAT = "cat"
    DECOHERED_CAT = "decohered_cat"
    NOON = "noon"
    ENTANGLED_COHERENT = "entangled_coherent"
    SQUEEZED_VACUUM = "squeezed_vacuum"
    THERMAL = "thermal"
    SQUEEZED_THERMAL = "squeezed_thermal"
    SQUEEZED_COHERENT = "squeezed_coherent"
    PHOTON_ADDED_COHERENT = "photon_added_coherent"
    FOCK_PLUS_COHERENT = "fock_plus_coherent"
    MIXTURE = "mixture"


# required and optional parameters per kind
_PARAMS: dict[StateKind, tuple[set[str], set[str]]] = {
    StateKind.VACUUM: (set(), set()),
    StateKind.COHERENT: ({"alpha"}, set()),
    StateKind.FOCK: ({"n"}, set()),
    StateKind.CAT: ({"alpha"}, {"parity"}),
    StateKind.DECOHERED_CAT: ({"alpha", "gamma"}, set()),
    StateKind.NOON: ({"n"}, set()),
    StateKind.ENTANGLED_COHERENT: ({"alpha"}, {"parity"}),
    StateKind.SQUEEZED_VACUUM: ({"xi"}, set()),
    StateKind.THERMAL: ({"nbar"}, set()),
    StateKind.SQUEEZED_THERMAL: ({"xi", "nbar"}, set()),
    StateKind.SQUEEZED_COHERENT: ({"xi", "alpha"}, set()),
    StateKind.PHOTON_ADDED_COHERENT: ({"alpha"}, set()),
    StateKind.FOCK_PLUS_COHERENT: ({"n", "alpha"}, set()),
    StateKind.MIXTURE: ({"weights", "components"}, set()),
}

_SINGLE_MODE = {
    StateKind.CAT,
    StateKind.DECOHERED_CAT,
    StateKind.SQUEEZED_VACUUM,
    StateKind.SQUEEZED_THERMAL,
    StateKind.SQUEEZED_COHERENT,
    StateKind.PHOTON_ADDED_COHERENT,
    StateKind.FOCK_PLUS_COHERENT,
}

PURE_KINDS = frozenset(set(StateKind) - {StateKind.DECOHERED_CAT, StateKind.THERMAL, StateKind.SQUEEZED_THERMAL, StateKind.MIXTURE})
CLASSICAL_KINDS = frozenset({StateKind.VACUUM, StateKind.COHERENT, StateKind.THERMAL})


def _per_mode(value, num_modes: int, cast=complex) -> list:
    if np.isscalar(value):
        return [cast(value)] * num_modes if num_modes == 1 else [cast(value)] + [cast(0)] * (num_modes - 1)
    vals = [cast(v) for v in value]
    if len(vals) != num_modes:
        raise ValueError(f"expected {num_modes} per-mode values, got {len(vals)}")
    return vals


@dataclass(frozen=True, eq=False)
class StateSpec:
    """Declarative description of a state family member.

    ``params`` keys by kind: coherent ``alpha`` (complex or per-mode list);
    fock ``n`` (int or per-mode list); cat ``alpha`` and ``parity`` (+1 even,
    -1 odd); decohered_cat ``alpha``, ``gamma``; noon ``n``;
    entangled_coherent per-mode ``alpha`` and ``parity``; squeezed kinds
    ``xi`` (complex) plus ``nbar`` or ``alpha``; thermal ``nbar``;
    mixture ``weights`` and ``components`` (StateSpecs on the same cutoffs).
    """

    kind: StateKind
    params: dict = field(default_factory=dict)
    cutoffs: tuple[int, ...] = (30,)

    def __post_init__(self):
        object.__setattr__(self, "kind", StateKind(self.kind))
        object.__setattr__(self, "cutoffs", tuple(int(c) for c in np.atleast_1d(self.cutoffs)))
        self.validate()

    @property
    def num_modes(self) -> int:
        return len(self.cutoffs)

    @property
    def basis(self) -> FockBasis:
        return FockBasis(self.cutoffs)

    def validate(self) -> None:
        required, optional = _PARAMS[self.kind]
        keys = set(self.params)
        missing = required - keys
        if missing:
            raise ValueError(f"{self.kind.value}: missing parameters {sorted(missing)}")
        unknown = keys - required - optional
        if unknown:
            raise ValueError(f"{self.kind.value}: unknown parameters {sorted(unknown)}")
        if self.kind in _SINGLE_MODE and self.num_modes != 1:
            raise ValueError(f"{self.kind.value} is a single-mode kind")
        if self.kind == StateKind.NOON and self.num_modes != 2:
            raise ValueError("noon needs exactly two modes")
        if self.kind == StateKind.DECOHERED_CAT and abs(float(self.params["gamma"])) > 1:
            raise ValueError("decohered_cat needs |gamma| <= 1")
        if "nbar" in self.params and np.any(np.asarray(self.params["nbar"], dtype=float) < 0):
            raise ValueError("thermal occupation must be nonnegative")
        if "parity" in self.params and int(self.params["parity"]) not in (1, -1):
            raise ValueError("parity must be +1 or -1")
        if self.kind == StateKind.MIXTURE:
            w = np.asarray(self.params["weights"], dtype=float)
            comps = self.params["components"]
            if len(w) != len(comps) or len(w) == 0:
                raise ValueError("mixture needs one weight per component")
            if np.any(w < 0) or abs(w.sum() - 1) > 1e-12:
                raise ValueError("mixture weights must be nonnegative and sum to 1")
            for c in comps:
                if not isinstance(c, StateSpec):
                    raise TypeError("mixture components must be StateSpec instances")
                if c.cutoffs != self.cutoffs:
                    raise ValueError("mixture components must share the mixture cutoffs")

    def with_cutoffs(self, cutoffs: Iterable[int]) -> "StateSpec":
        cutoffs = tuple(cutoffs)
        params = dict(self.params)
        if self.kind == StateKind.MIXTURE:
            params["components"] = [c.with_cutoffs(cutoffs) for c in params["components"]]
        return StateSpec(self.kind, params, cutoffs)

    def is_classical(self) -> bool:
        if self.kind == StateKind.MIXTURE:
            return all(c.is_classical() for c in self.params["components"])
        return self.kind in CLASSICAL_KINDS


# ---------------------------------------------------------------- factory helpers


def coherent_amplitudes(alpha: complex, cutoff: int) -> np.ndarray:
    """Exact Fock amplitudes of |alpha> on levels 0..cutoff-1 (not renormalized)."""
    out = np.empty(cutoff, dtype=complex)
    out[0] = math.exp(-abs(alpha) ** 2 / 2)
    for n in range(1, cutoff):
        out[n] = out[n - 1] * alpha / math.sqrt(n)
    return out


def _kron_all(vectors: Sequence[np.ndarray]) -> np.ndarray:
    out = np.ones(1, dtype=complex)
    for v in vectors:
        out = np.kron(out, v)
    return out


def squeeze_matrix(cutoff: int, xi: complex, pad: int | None = None) -> np.ndarray:
    """``exp((xi a^dag^2 - xi^* a^2)/2)`` on levels below ``cutoff``.

    The exponential is taken on a padded space and cropped, so low-level
    matrix elements are accurate; the cropped block is not exactly unitary.
    """
    pad = max(40, cutoff) if pad is None else pad
    big = cutoff + pad
    a = _ladder_1mode(big).toarray()
    ad = a.conj().T
    gen = 0.5 * (xi * ad @ ad - np.conj(xi) * a @ a)
    return sla.expm(gen)[:cutoff, :cutoff]


def _thermal_diag(nbar: float, cutoff: int) -> np.ndarray:
    if nbar == 0:
        out = np.zeros(cutoff)
        out[0] = 1.0
        return out
    q = nbar / (1 + nbar)
    return (1 - q) * q ** np.arange(cutoff)


def _finish_pure(basis: FockBasis, vec: np.ndarray, ideal_norm2: float, kind: StateKind, check: bool, tol: float) -> FockState:
    leak = max(0.0, 1.0 - float(np.vdot(vec, vec).real) / ideal_norm2)
    if check and leak > tol:
        raise CutoffTooSmallError(leak, tol, kind.value)
    return FockState.normalized(basis, vec)


def _finish_mixed(basis: FockBasis, mat: np.ndarray, ideal_trace: float, kind: StateKind, check: bool, tol: float) -> DensityMatrix:
    tr = float(np.trace(mat).real)
    leak = max(0.0, 1.0 - tr / ideal_trace)
    if check and leak > tol:
        raise CutoffTooSmallError(leak, tol, kind.value)
    mat = 0.5 * (mat + mat.conj().T)
    return DensityMatrix(basis, mat / tr)


def build_state(spec: StateSpec, *, check: bool = True, tol: float = LEAKAGE_TOL) -> State:
    """Construct the normalized state described by ``spec``.

    Pure kinds return a :class:`FockState`, mixed kinds a
    :class:`DensityMatrix`. The population lost to truncation is measured
    against the exact infinite-dimensional norm and must stay below ``tol``
    unless ``check`` is False.
    """
    kind = spec.kind
    p = spec.params
    basis = spec.basis
    N = basis.num_modes
    check_dim(basis.total_dim if kind in PURE_KINDS else basis.total_dim**2, "state")
    d = basis.cutoffs

    if kind == StateKind.VACUUM:
        vec = np.zeros(basis.total_dim, dtype=complex)
        vec[0] = 1.0
        return FockState(basis, vec)

    if kind == StateKind.COHERENT:
        alphas = _per_mode(p["alpha"], N)
        vec = _kron_all([coherent_amplitudes(a, c) for a, c in zip(alphas, d)])
        return _finish_pure(basis, vec, 1.0, kind, check, tol)

    if kind == StateKind.FOCK:
        ns = _per_mode(p["n"], N, int)
        if any(n >= c or n < 0 for n, c in zip(ns, d)):
            raise CutoffTooSmallError(1.0, tol, kind.value)
        vec = np.zeros(basis.total_dim, dtype=complex)
        vec[basis.index(ns)] = 1.0
        return FockState(basis, vec)

    if kind == StateKind.CAT:
        alpha = complex(p["alpha"])
        sign = int(p.get("parity", 1))
        c = coherent_amplitudes(alpha, d[0])
        vec = c + sign * coherent_amplitudes(-alpha, d[0])
        norm2 = 2 + 2 * sign * math.exp(-2 * abs(alpha) ** 2)
        return _finish_pure(basis, vec, norm2, kind, check, tol)

    if kind == StateKind.DECOHERED_CAT:
        alpha = complex(p["alpha"])
        gamma = float(p["gamma"])
        cp = coherent_amplitudes(alpha, d[0])
        cm = coherent_amplitudes(-alpha, d[0])
        mat = (
            np.outer(cp, cp.conj())
            + np.outer(cm, cm.conj())
            + gamma * (np.outer(cp, cm.conj()) + np.outer(cm, cp.conj()))
        )
        n_gamma = 2 + 2 * gamma * math.exp(-2 * abs(alpha) ** 2)
        return _finish_mixed(basis, mat, n_gamma, kind, check, tol)

    if kind == StateKind.NOON:
        n = int(p["n"])
        if n >= min(d):
            raise CutoffTooSmallError(1.0, tol, kind.value)
        vec = np.zeros(basis.total_dim, dtype=complex)
        vec[basis.index((n, 0))] += 1.0
        vec[basis.index((0, n))] += 1.0
        return FockState.normalized(basis, vec)

    if kind == StateKind.ENTANGLED_COHERENT:
        alphas = _per_mode(p["alpha"], N)
        sign = int(p.get("parity", 1))
        plus = _kron_all([coherent_amplitudes(a, c) for a, c in zip(alphas, d)])
        minus = _kron_all([coherent_amplitudes(-a, c) for a, c in zip(alphas, d)])
        total = sum(abs(a) ** 2 for a in alphas)
        norm2 = 2 + 2 * sign * math.exp(-2 * total)
        return _finish_pure(basis, plus + sign * minus, norm2, kind, check, tol)

    if kind == StateKind.SQUEEZED_VACUUM:
        S = squeeze_matrix(d[0], complex(p["xi"]))
        return _finish_pure(basis, S[:, 0].copy(), 1.0, kind, check, tol)

    if kind == StateKind.SQUEEZED_COHERENT:
        # S(xi)|alpha>, the ordering used for the squeezed-coherent family
        pad = max(40, d[0])
        S = squeeze_matrix(d[0] + pad, complex(p["xi"]), pad=pad)
        vec = S @ coherent_amplitudes(complex(p["alpha"]), d[0] + pad)
        return _finish_pure(basis, vec[: d[0]], 1.0, kind, check, tol)

    if kind == StateKind.THERMAL:
        nbars = _per_mode(p["nbar"], N, float) if not np.isscalar(p["nbar"]) or N == 1 else [float(p["nbar"])] * N
        diag = np.ones(1)
        for nb, c in zip(nbars, d):
            diag = np.kron(diag, _thermal_diag(nb, c))
        return _finish_mixed(basis, np.diag(diag).astype(complex), 1.0, kind, check, tol)

    if kind == StateKind.SQUEEZED_THERMAL:
        pad = max(40, d[0])
        big = d[0] + pad
        S = squeeze_matrix(big, complex(p["xi"]), pad=pad)
        tau = np.diag(_thermal_diag(float(p["nbar"]), big))
        mat = (S @ tau @ S.conj().T)[: d[0], : d[0]]
        return _finish_mixed(basis, mat, 1.0, kind, check, tol)

    if kind == StateKind.PHOTON_ADDED_COHERENT:
        alpha = complex(p["alpha"])
        c = coherent_amplitudes(alpha, d[0])
        vec = np.zeros(d[0], dtype=complex)
        vec[1:] = np.sqrt(np.arange(1, d[0])) * c[:-1]
        return _finish_pure(basis, vec, 1 + abs(alpha) ** 2, kind, check, tol)

    if kind == StateKind.FOCK_PLUS_COHERENT:
        n = int(p["n"])
        alpha = complex(p["alpha"])
        if n >= d[0]:
            raise CutoffTooSmallError(1.0, tol, kind.value)
        c = coherent_amplitudes(alpha, d[0])
        overlap = coherent_amplitudes(alpha, n + 1)[n]
        vec = c.copy()
        vec[n] += 1.0
        return _finish_pure(basis, vec, 2 + 2 * overlap.real, kind, check, tol)

    if kind == StateKind.MIXTURE:
        mat = np.zeros((basis.total_dim, basis.total_dim), dtype=complex)
        for w, comp in zip(p["weights"], p["components"]):
            mat += float(w) * build_state(comp, check=check, tol=tol).dm().matrix
        return DensityMatrix(basis, 0.5 * (mat + mat.conj().T))

    raise ValueError(f"unsupported kind {kind}")  # pragma: no cover


# ---------------------------------------------------------------- composition


def tensor(a: State, b: State) -> State:
    basis = a.basis.tensor(b.basis)
    if isinstance(a, FockState) and isinstance(b, FockState):
        check_dim(basis.total_dim, "state vector")
        return FockState(basis, np.kron(a.amplitudes, b.amplitudes), tol_norm=1e-8)
    check_dim(basis.total_dim**2, "density matrix")
    return DensityMatrix(basis, np.kron(a.dm().matrix, b.dm().matrix), validate=False)


def partial_trace(state: State, keep_modes: Sequence[int]) -> DensityMatrix:
    """Reduced state on ``keep_modes`` (returned in ascending mode order)."""
    basis = state.basis
    keep = sorted(set(int(m) for m in keep_modes))
    if not keep:
        raise ValueError("keep_modes must be nonempty")
    for m in keep:
        basis.check_mode(m)
    drop = [m for m in range(basis.num_modes) if m not in keep]
    kept_basis = FockBasis(tuple(basis.cutoffs[m] for m in keep))
    dk = kept_basis.total_dim
    if isinstance(state, FockState):
        psi = state.amplitudes.reshape(basis.cutoffs)
        psi = np.transpose(psi, keep + drop).reshape(dk, -1)
        mat = psi @ psi.conj().T
    else:
        n = basis.num_modes
        rho = state.matrix.reshape(basis.cutoffs + basis.cutoffs)
        perm = keep + drop + [n + m for m in keep] + [n + m for m in drop]
        de = math.prod(basis.cutoffs[m] for m in drop)
        rho = np.transpose(rho, perm).reshape(dk, de, dk, de)
        mat = np.einsum("ajbj->ab", rho)
    mat = 0.5 * (mat + mat.conj().T)
    return DensityMatrix(kept_basis, mat, validate=False)


def mean_photon(state: State) -> float:
    """Total mean photon number summed over all modes."""
    nt = total_number_diag(state.basis)
    if isinstance(state, FockState):
        return float(np.dot(nt, np.abs(state.amplitudes) ** 2))
    return float(np.dot(nt, state.matrix.diagonal().real))


def number_distribution(state: State) -> np.ndarray:
    """Probability of each occupation tuple, shaped like the basis."""
    if isinstance(state, FockState):
        pops = np.abs(state.amplitudes) ** 2
    else:
        pops = state.matrix.diagonal().real
    return pops.reshape(state.basis.cutoffs)


def total_number_distribution(state: State) -> np.ndarray:
    nt = total_number_diag(state.basis).astype(int)
    pops = number_distribution(state).reshape(-1)
    return np.bincount(nt, weights=pops, minlength=int(nt.max()) + 1)


# ---------------------------------------------------------------- truncation diagnostics


@dataclass
class LeakageReport:
    top_population: list[float]
    threshold: float
    insufficient: bool
    delta: int | None = None
    mean_photon_delta: float | None = None
    metrological_power_delta: float | None = None
    details: dict[str, Any] = field(default_factory=dict)


def leakage_report(state: State, spec: StateSpec | None = None, *, delta: int = 8, threshold: float = LEAKAGE_TOL) -> LeakageReport:
    """Population on the top two Fock levels of every mode.

    When ``spec`` is given the state is rebuilt with every cutoff raised by
    ``delta`` and the shifts of the mean photon number and of the
    metrological power are recorded.
    """
    pops = number_distribution(state)
    tops = []
    for m in range(state.basis.num_modes):
        other = tuple(i for i in range(pops.ndim) if i != m)
        marginal = pops.sum(axis=other) if other else pops
        tops.append(float(marginal[-2:].sum()))
    report = LeakageReport(top_population=tops, threshold=threshold, insufficient=max(tops) > threshold)
    if spec is not None:
        from .qfi import metrological_power  # local import: qfi depends on this module

        bigger = build_state(spec.with_cutoffs(c + delta for c in spec.cutoffs), check=False)
        report.delta = delta
        report.mean_photon_delta = abs(mean_photon(bigger) - mean_photon(state))
        report.metrological_power_delta = abs(metrological_power(bigger).value - metrological_power(state).value)
    return report


def auto_cutoff(spec: StateSpec, tol: float = LEAKAGE_TOL, start: int | None = None, step: int = 4, max_cutoff: int = 400) -> StateSpec:
    """Smallest uniform cutoff (searched upward in ``step``) whose leakage is below ``tol``."""
    d = max(spec.cutoffs) if start is None else start
    last = CutoffTooSmallError(float("nan"), tol, spec.kind.value)
    while d <= max_cutoff:
        candidate = spec.with_cutoffs((d,) * spec.num_modes)
        try:
            check_dim(candidate.basis.total_dim**2 if spec.kind not in PURE_KINDS else candidate.basis.total_dim, "state")
            build_state(candidate, tol=tol)
            return candidate
        except CutoffTooSmallError as exc:
            last = CutoffTooSmallError(exc.leakage, tol, spec.kind.value, d)
            d += step
    raise last
