"""Module check suites run by ``ncvar verify``.

Each check compares an observed number with an expected one under an
absolute tolerance. ``inject`` perturbs selected computations so the suite
can be shown to fail (mutation testing); keys: ``qfi_prefactor``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

SUITES = ("fock", "linopt", "qfi", "gaussian", "measures", "phase", "estimation")


@dataclass
class Check:
    suite: str
    name: str
    observed: float
    expected: float
    tol: float
    passed: bool

    @property
    def delta(self) -> float:
        return abs(self.observed - self.expected)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["delta"] = self.delta
        return d


class _Collector:
    def __init__(self, suite: str):
        self.suite = suite
        self.checks: list[Check] = []

    def close(self, name: str, observed: float, expected: float, tol: float) -> None:
        observed, expected = float(observed), float(expected)
        ok = math.isfinite(observed) and abs(observed - expected) <= tol
        self.checks.append(Check(self.suite, name, observed, expected, tol, ok))

    def at_most(self, name: str, observed: float, limit: float) -> None:
        observed = float(observed)
        self.checks.append(Check(self.suite, name, observed, float(limit), 0.0, observed <= limit))


def _fock(c: _Collector, inject: dict) -> None:
    from .fock import StateKind, StateSpec, build_state, mean_photon, partial_trace

    psi = build_state(StateSpec(StateKind.COHERENT, {"alpha": 1.2}, (40,)))
    c.close("coherent mean photon |alpha|^2", mean_photon(psi), 1.44, 1e-9)
    noon = build_state(StateSpec(StateKind.NOON, {"n": 3}, (6, 6)))
    red = partial_trace(noon, [0])
    c.close("NOON reduced state diagonal", red.matrix[3, 3].real, 0.5, 1e-12)
    th = build_state(StateSpec(StateKind.THERMAL, {"nbar": 0.5}, (60,)))
    c.close("thermal mean photon", mean_photon(th), 0.5, 1e-8)


def _linopt(c: _Collector, inject: dict) -> None:
    from .fock import FockState, StateKind, StateSpec, build_state, mean_photon
    from .linopt import LinOpticalUnitary, PassiveUnitary, apply_linear_optics, beam_splitter_mixing, clements_decompose

    rng = np.random.Generator(np.random.Philox(key=11))
    U = PassiveUnitary.random(4, rng).mixing_matrix
    c.close("Clements mesh reconstruction", np.max(np.abs(clements_decompose(U).matrix() - U)), 0.0, 1e-10)
    a = 0.8
    spec = StateSpec(StateKind.COHERENT, {"alpha": [a, a]}, (20, 20))
    out = apply_linear_optics(build_state(spec), LinOpticalUnitary(PassiveUnitary(beam_splitter_mixing(-np.pi / 4)), np.zeros(2)))
    target = build_state(StateSpec(StateKind.COHERENT, {"alpha": [math.sqrt(2) * a, 0.0]}, (20, 20)))
    c.close("50:50 splitter |a,a> -> |sqrt2 a,0>", abs(np.vdot(target.amplitudes, out.amplitudes)), 1.0, 1e-8)
    f = build_state(StateSpec(StateKind.FOCK, {"n": [2, 1, 0]}, (5, 5, 5)))
    g = apply_linear_optics(f, LinOpticalUnitary.random(3, rng))
    c.close("photon number conserved", mean_photon(g), 3.0, 1e-8)


def _qfi(c: _Collector, inject: dict) -> None:
    from .fock import StateKind, StateSpec, build_state
    from .qfi import metrological_power_from_F, QfiMatrix, qfi_matrix

    k = float(inject.get("qfi_prefactor", 1.0))

    def F(spec):
        return QfiMatrix(k * qfi_matrix(build_state(spec)).matrix)

    vac = F(StateSpec(StateKind.VACUUM, {}, (10,)))
    c.close("vacuum F = 2 I (xx)", vac.matrix[0, 0], 2.0, 1e-8)
    c.close("vacuum F = 2 I (pp)", vac.matrix[1, 1], 2.0, 1e-8)
    th = F(StateSpec(StateKind.THERMAL, {"nbar": 1.0}, (60,)))
    c.close("thermal nbar=1 QFI(x) = 2/3", th.matrix[0, 0], 2 / 3, 1e-5)
    for n in (1, 2, 3):
        m = metrological_power_from_F(F(StateSpec(StateKind.FOCK, {"n": n}, (n + 20,)))).value
        c.close(f"Fock n={n} M = 2n", m, 2 * n, 1e-6)
    a, g = 1.0, 0.5
    e = math.exp(-2 * a * a)
    m = metrological_power_from_F(F(StateSpec(StateKind.DECOHERED_CAT, {"alpha": a, "gamma": g}, (30,)))).value
    c.close("decohered cat alpha=1 Gamma=0.5", m, 16 * a * a * g * (g + e) / (2 + 2 * g * e) ** 2, 1e-5)


def _gaussian(c: _Collector, inject: dict) -> None:
    from .fock import StateKind, StateSpec, build_state
    from .gaussian import GaussianState, critical_squeezing, gaussian_metrological_power, gaussian_qfi_matrix, williamson
    from .qfi import metrological_power

    V = GaussianState.single_mode(0.5, 0.0).cov
    F = gaussian_qfi_matrix(V).matrix
    # real xi > 0 stretches x, so the x-generator (which moves p) gains 2e
    c.close("squeezed vacuum r=0.5 F_xx = 2e", F[0, 0], 2 * math.e, 1e-9)
    c.close("squeezed vacuum r=0.5 F_pp = 2/e", F[1, 1], 2 / math.e, 1e-9)
    for nb in (0.1, 0.5, 1.0):
        rc = critical_squeezing(nb)
        c.close(f"M = 0 at r_c (nbar={nb})", gaussian_metrological_power(GaussianState.single_mode(rc, nb).cov), 0.0, 1e-9)
    for r, nb in ((0.3, 0.1), (0.8, 0.5)):
        mg = gaussian_metrological_power(GaussianState.single_mode(r, nb).cov)
        mf = metrological_power(build_state(StateSpec(StateKind.SQUEEZED_THERMAL, {"xi": r, "nbar": nb}, (60,)), check=False)).value
        c.close(f"Gaussian vs Fock M (r={r}, nbar={nb})", mf, mg, 1e-4)
    nus = williamson(np.diag([3.0, 3.0, 1.2, 1.2])).nus
    c.close("Williamson nu_1 of diag(3,3,1.2,1.2)", nus[0], 3.0, 1e-10)


def _measures(c: _Collector, inject: dict) -> None:
    from .fock import DensityMatrix, StateKind, StateSpec, build_state
    from .measures import q_convex_roof_upper, q_pure

    c.close("Q_pure(|3>) = 6", q_pure(build_state(StateSpec(StateKind.FOCK, {"n": 3}, (12,)))), 6.0, 1e-9)
    c.close("Q_pure(coherent) = 0", q_pure(build_state(StateSpec(StateKind.COHERENT, {"alpha": 0.7}, (30,)))), 0.0, 1e-9)
    comps = [StateSpec(StateKind.COHERENT, {"alpha": z}, (25,)) for z in (0.8, -0.5j)]
    mix = build_state(StateSpec(StateKind.MIXTURE, {"weights": [0.6, 0.4], "components": comps}, (25,)))
    c.at_most("Q_ub of a coherent mixture", q_convex_roof_upper(mix, restarts=8, seed=0).value, 1e-3)


def _phase(c: _Collector, inject: dict) -> None:
    from .fock import StateKind, StateSpec, build_state
    from .phase import m_phase_alpha, number_qfi, sql_witness

    coh = build_state(StateSpec(StateKind.COHERENT, {"alpha": 1.1}, (30,)))
    c.close("sql_witness(coherent) = 0", sql_witness(coh), 0.0, 1e-8)
    c.close("I_F(|2>, n) = 0", number_qfi(build_state(StateSpec(StateKind.FOCK, {"n": 2}, (8,)))), 0.0, 1e-12)
    c.close("M_phase(coherent, budget 0) = 0", m_phase_alpha(build_state(StateSpec(StateKind.COHERENT, {"alpha": 0.5}, (20,))), 0.0, restarts=1).m_phase_alpha, 0.0, 1e-8)
    one = build_state(StateSpec(StateKind.FOCK, {"n": 1}, (6,)))
    c.close("M_phase(|1>, budget 2) = 2b^2 - 1", m_phase_alpha(one, 2.0, restarts=2).m_phase_alpha, 7.0, 1e-4)


def _estimation(c: _Collector, inject: dict) -> None:
    from .estimation import HomodyneExperiment, simulate_and_estimate
    from .gaussian import GaussianState

    mu = np.array([1.0, 0.0])
    res = simulate_and_estimate(HomodyneExperiment(GaussianState.vacuum(), mu, shots=10_000, trials=50, seed=0))
    c.close("vacuum CRB ratio (10^4 shots x 50 trials)", res.ratio, 1.0, 4 * math.sqrt(2 / 49))
    th = simulate_and_estimate(HomodyneExperiment(GaussianState.single_mode(0, 1.0), mu, shots=1000, trials=10, seed=0))
    c.close("thermal homodyne FI = QFI", th.homodyne_fi, th.qfi, 1e-12)


_RUNNERS: dict[str, Callable[[_Collector, dict], None]] = {
    "fock": _fock,
    "linopt": _linopt,
    "qfi": _qfi,
    "gaussian": _gaussian,
    "measures": _measures,
    "phase": _phase,
    "estimation": _estimation,
}


def run_suite(name: str, inject: dict | None = None) -> list[Check]:
    """Run one suite (or ``"all"``); errors inside a suite become failed checks."""
    names = SUITES if name == "all" else (name,)
    for n in names:
        if n not in _RUNNERS:
            raise KeyError(f"unknown suite {name!r}; choose from {', '.join(SUITES)} or all")
    out: list[Check] = []
    for n in names:
        c = _Collector(n)
        try:
            _RUNNERS[n](c, inject or {})
        except Exception as exc:  # a crashing suite is a failing suite
            c.checks.append(Check(n, f"suite raised {type(exc).__name__}: {exc}", float("nan"), 0.0, 0.0, False))
        out.extend(c.checks)
    return out
