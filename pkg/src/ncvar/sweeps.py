"""Parameter sweeps behind the two panels of the nonclassicality figure.

Panel 2a: the pure-state measure Q against nbar for saturating (centered)
families and for displaced families that stay strictly below ``2 nbar / N``.
Panel 2b: the metrological power M of decohered cats and squeezed thermal
states against nbar, with each row carrying its closed form.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .fock import CutoffTooSmallError, StateKind, StateSpec, auto_cutoff, build_state, mean_photon
from .measures import is_centered, q_bound, q_pure
from .qfi import metrological_power

SWEEP_LEAKAGE_TOL = 1e-11
SATURATION_TOL = 1e-8
CONVERGENCE_TOL = 1e-6
CONVERGENCE_DELTA = 8

COLUMNS = (
    "figure",
    "family",
    "parameter_name",
    "parameter",
    "fixed",
    "nbar",
    "quantity",
    "value",
    "bound",
    "closed_form",
    "abs_delta",
    "centered",
    "saturated",
    "converged",
    "cutoff",
)


@dataclass(frozen=True)
class Family:
    name: str
    kind: StateKind
    parameter_name: str
    integer: bool
    fixed: tuple = ()
    centered: bool = False

    def spec(self, value: float, cutoff: int) -> StateSpec:
        params = dict(self.fixed)
        if self.kind == StateKind.FOCK_PLUS_COHERENT:
            params.update(n=int(value), alpha=math.sqrt(value))
        elif self.integer:
            params[self.parameter_name] = int(value)
        else:
            params[self.parameter_name] = float(value)
        modes = 2 if self.kind in (StateKind.NOON, StateKind.ENTANGLED_COHERENT) else 1
        return StateSpec(self.kind, params, (cutoff,) * modes)


FIG2A_FAMILIES = (
    Family("fock", StateKind.FOCK, "n", True, centered=True),
    Family("noon", StateKind.NOON, "n", True, centered=True),
    Family("even_cat", StateKind.CAT, "alpha", False, (("parity", 1),), centered=True),
    Family("squeezed_vacuum", StateKind.SQUEEZED_VACUUM, "xi", False, centered=True),
    Family("fock_plus_coherent", StateKind.FOCK_PLUS_COHERENT, "n", True),
    Family("squeezed_coherent", StateKind.SQUEEZED_COHERENT, "alpha", False, (("xi", 1.0),)),
    Family("photon_added_coherent", StateKind.PHOTON_ADDED_COHERENT, "alpha", False),
)

FIG2A_GRIDS = {
    "fock": (1, 2, 3, 4, 5),
    "noon": (1, 2, 3, 4, 5),
    "even_cat": (0.5, 1.0, 1.5, 2.0),
    "squeezed_vacuum": (0.25, 0.5, 0.75, 1.0),
    "fock_plus_coherent": (1, 2, 3, 4),
    "squeezed_coherent": (0.5, 1.0, 1.5),
    "photon_added_coherent": (0.5, 1.0, 1.5, 2.0),
}

GAMMAS = (0.01, 0.3, 0.7)
THERMAL_NBARS = (0.01, 0.1, 0.5, 1.0)

FIG2B_FAMILIES = tuple(
    Family(f"decohered_cat_gamma={g}", StateKind.DECOHERED_CAT, "alpha", False, (("gamma", g),)) for g in GAMMAS
) + tuple(Family(f"squeezed_thermal_nbar={n}", StateKind.SQUEEZED_THERMAL, "xi", False, (("nbar", n),)) for n in THERMAL_NBARS)

FIG2B_GRIDS = {f.name: ((0.5, 1.0, 1.5, 2.0) if f.kind == StateKind.DECOHERED_CAT else (0.2, 0.4, 0.6, 0.8)) for f in FIG2B_FAMILIES}


class GridError(ValueError):
    pass


def decohered_cat_m(alpha: float, gamma: float) -> float:
    """Closed-form M of the decohered cat ``(|a><a| + |-a><-a| + G(|a><-a| + h.c.))/N_G``."""
    a2 = abs(alpha) ** 2
    e = math.exp(-2 * a2)
    n_g = 2 + 2 * gamma * e
    return max(16 * a2 * gamma * (gamma + e) / n_g**2, 0.0)


def squeezed_thermal_m(r: float, nbar: float) -> float:
    return max(math.exp(2 * abs(r)) / (2 * nbar + 1) - 1, 0.0)


def closed_form(family: Family, value: float) -> float:
    fixed = dict(family.fixed)
    if family.kind == StateKind.DECOHERED_CAT:
        return decohered_cat_m(value, fixed["gamma"])
    if family.kind == StateKind.SQUEEZED_THERMAL:
        return squeezed_thermal_m(value, fixed["nbar"])
    raise ValueError(f"no closed form for {family.name}")


def _start_cutoff(family: Family, value: float) -> int:
    if family.kind in (StateKind.FOCK, StateKind.NOON, StateKind.FOCK_PLUS_COHERENT):
        return int(value) + 8
    return 10


def _resolved_spec(family: Family, value: float) -> StateSpec:
    spec = family.spec(value, _start_cutoff(family, value))
    return auto_cutoff(spec, tol=SWEEP_LEAKAGE_TOL, step=6, max_cutoff=400)


def _fixed_text(family: Family) -> str:
    return ";".join(f"{k}={v}" for k, v in family.fixed)


def row_2a(family: Family, value: float) -> dict:
    spec = _resolved_spec(family, value)
    psi = build_state(spec, tol=SWEEP_LEAKAGE_TOL)
    q = q_pure(psi)
    bound = q_bound(psi)
    bigger = build_state(spec.with_cutoffs([c + CONVERGENCE_DELTA for c in spec.cutoffs]), tol=SWEEP_LEAKAGE_TOL)
    centered = is_centered(psi)
    return {
        "figure": "2a",
        "family": family.name,
        "parameter_name": family.parameter_name,
        "parameter": float(value),
        "fixed": _fixed_text(family),
        "nbar": mean_photon(psi),
        "quantity": "Q",
        "value": q,
        "bound": bound,
        "closed_form": None,
        "abs_delta": None,
        "centered": centered,
        "saturated": abs(q - bound) <= SATURATION_TOL * max(1.0, bound),
        "converged": abs(q_pure(bigger) - q) < CONVERGENCE_TOL,
        "cutoff": spec.cutoffs[0],
    }


def row_2b(family: Family, value: float) -> dict:
    spec = _resolved_spec(family, value)
    rho = build_state(spec, tol=SWEEP_LEAKAGE_TOL)
    m = metrological_power(rho).value
    bigger = build_state(spec.with_cutoffs([c + CONVERGENCE_DELTA for c in spec.cutoffs]), tol=SWEEP_LEAKAGE_TOL)
    m_big = metrological_power(bigger).value
    cf = closed_form(family, value)
    return {
        "figure": "2b",
        "family": family.name,
        "parameter_name": family.parameter_name,
        "parameter": float(value),
        "fixed": _fixed_text(family),
        "nbar": mean_photon(rho),
        "quantity": "M",
        "value": m,
        "bound": None,
        "closed_form": cf,
        "abs_delta": abs(m - cf),
        "centered": None,
        "saturated": None,
        "converged": abs(m_big - m) < CONVERGENCE_TOL,
        "cutoff": spec.cutoffs[0],
    }


def _family_points(families: Sequence[Family], defaults: dict, grid: Sequence[float] | None) -> list[tuple[Family, float]]:
    if grid is not None:
        grid = [float(g) for g in grid]
        if not grid:
            raise GridError("grid is empty")
        if any(not math.isfinite(g) or g < 0 for g in grid):
            raise GridError("grid values must be finite and nonnegative")
    points = []
    for fam in families:
        values = defaults[fam.name] if grid is None else grid
        if fam.integer:
            values = [v for v in values if float(v).is_integer() and v >= 1]
        for v in values:
            points.append((fam, v))
    if not points:
        raise GridError("grid yields no admissible points")
    return points


def _run_point(job: tuple[str, Family, float]) -> dict:
    figure, fam, value = job
    return row_2a(fam, value) if figure == "2a" else row_2b(fam, value)


def sweep(figure: str, grid: Sequence[float] | None = None, jobs: int = 1) -> list[dict]:
    """Rows for one panel, in deterministic (family, grid) order.

    ``grid`` replaces every family's parameter values; integer-valued
    families keep only the integer entries.
    """
    if figure == "2a":
        points = _family_points(FIG2A_FAMILIES, FIG2A_GRIDS, grid)
    elif figure == "2b":
        points = _family_points(FIG2B_FAMILIES, FIG2B_GRIDS, grid)
    else:
        raise GridError(f"unknown figure {figure!r}")
    work = [(figure, f, v) for f, v in points]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(_run_point, work))
    return [_run_point(w) for w in work]


def custom_sweep(spec: StateSpec, parameter: str, grid: Sequence[float]) -> list[dict]:
    """M, Q and nbar of ``spec`` with one real parameter replaced by each grid value."""
    from .measures import q_convex_roof_upper

    if not grid:
        raise GridError("grid is empty")
    if parameter not in spec.params:
        raise GridError(f"spec has no parameter {parameter!r}")
    rows = []
    for v in grid:
        params = dict(spec.params)
        params[parameter] = type(spec.params[parameter])(v) if isinstance(spec.params[parameter], int) else float(v)
        s = StateSpec(spec.kind, params, spec.cutoffs)
        try:
            rho = build_state(s)
        except CutoffTooSmallError:
            s = auto_cutoff(s)
            rho = build_state(s)
        mp = metrological_power(rho)
        if spec.kind.value in {k.value for k in _pure_kinds()}:
            q, label = q_pure(rho), "Q_pure"
        else:
            q, label = q_convex_roof_upper(rho, restarts=4).value, "Q_ub"
        rows.append(
            {
                "figure": "custom",
                "family": spec.kind.value,
                "parameter_name": parameter,
                "parameter": float(v),
                "fixed": "",
                "nbar": mean_photon(rho),
                "quantity": f"M;{label}",
                "value": mp.value,
                "bound": q_bound(rho),
                "closed_form": q,
                "abs_delta": None,
                "centered": None,
                "saturated": None,
                "converged": True,
                "cutoff": s.cutoffs[0],
            }
        )
    return rows


def _pure_kinds():
    from .fock import PURE_KINDS

    return PURE_KINDS
