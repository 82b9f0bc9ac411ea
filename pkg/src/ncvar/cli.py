"""Command-line interface: ``ncvar {state,measure,gaussian,phase,sweep,crb,verify}``.

Exit codes: 0 success, 1 verification failure, 2 input error, 3 unconverged numerics.
Reports are JSON on stdout (``--json``, the default) or a CSV file (``--csv PATH``);
every report carries a ``meta`` block with the tool version, seed, restarts,
spec hash, cutoffs and truncation deltas. Sweeps also write ``PATH.png``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .fock import PURE_KINDS, CutoffTooSmallError, DimensionCapError, StateKind, StateSpec, build_state, leakage_report, mean_photon

EXIT_OK, EXIT_VERIFY, EXIT_INPUT, EXIT_UNCONVERGED = 0, 1, 2, 3
CONVERGENCE_TOL = 1e-5
GAUSSIAN_KINDS = {
    StateKind.VACUUM,
    StateKind.COHERENT,
    StateKind.THERMAL,
    StateKind.SQUEEZED_VACUUM,
    StateKind.SQUEEZED_THERMAL,
    StateKind.SQUEEZED_COHERENT,
}
DEFAULTS = {"delta": 8, "seed": 0, "restarts": 8, "shots": 100_000, "trials": 200, "theta": 0.3}


class InputError(ValueError):
    pass


# ---------------------------------------------------------------- serialization


def _jsonable(x: Any) -> Any:
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (complex, np.complexfloating)):
        return [float(x.real), float(x.imag)]
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    return x


def format_cell(v: Any) -> str:
    """CSV cell: floats with 17 significant digits, booleans lower-case, None empty."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_csv(rows: Sequence[dict], columns: Sequence[str], path: str | None) -> str:
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([format_cell(r.get(c)) for c in columns])
    text = buf.getvalue()
    if path:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(text)
    return text


def _flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        elif isinstance(v, (list, tuple)):
            out[key] = json.dumps(_jsonable(v))
        else:
            out[key] = v
    return out


def emit(report: dict, args: argparse.Namespace) -> None:
    if getattr(args, "csv", None):
        flat = _flatten(_jsonable(report))
        write_csv([flat], list(flat), args.csv)
    else:
        sys.stdout.write(json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------- helpers


def _load(args: argparse.Namespace, required: bool = True) -> StateSpec | None:
    from .specio import SpecError, load_spec

    if not args.spec:
        if required:
            raise InputError("--spec PATH is required")
        return None
    if args.cutoff is not None and args.cutoff < 1:
        raise InputError("--cutoff must be positive")
    try:
        return load_spec(args.spec, args.cutoff)
    except SpecError as exc:
        raise InputError(str(exc)) from exc


def _meta(args: argparse.Namespace, spec: StateSpec | None = None, **extra) -> dict:
    from .specio import spec_hash, spec_to_json

    config = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    meta = {"tool": "ncvar", "version": __version__, "command": args.command, "config": config}
    meta["seed"] = getattr(args, "seed", None)
    meta["restarts"] = getattr(args, "restarts", None)
    if spec is not None:
        meta["spec_hash"] = spec_hash(spec)
        meta["spec"] = spec_to_json(spec)
        meta["cutoff"] = list(spec.cutoffs)
    meta.update(extra)
    return meta


def _notes(spec: StateSpec, m: float) -> list[str]:
    notes = []
    if spec.kind == StateKind.NOON and spec.params["n"] >= 2:
        n = spec.params["n"]
        notes.append(
            f"NOON n={n}: spectral value M={m:.6g} (= n) differs from the 2*nbar={2 * n} figure quoted for "
            "this family; the computed value is reported (discrepancy flag)"
        )
    return notes


# ---------------------------------------------------------------- commands


def cmd_state(args: argparse.Namespace) -> int:
    spec = _load(args)
    rho = build_state(spec)
    leak = leakage_report(rho, spec, delta=args.delta)
    purity = 1.0 if spec.kind in PURE_KINDS else rho.purity()
    report = {
        "kind": spec.kind.value,
        "num_modes": spec.num_modes,
        "dimension": rho.basis.total_dim,
        "pure": spec.kind in PURE_KINDS,
        "purity": purity,
        "nbar": mean_photon(rho),
        "classical_by_construction": spec.is_classical(),
        "leakage": {"top_population": leak.top_population, "threshold": leak.threshold, "insufficient": leak.insufficient},
        "truncation_deltas": {"delta": leak.delta, "nbar": leak.mean_photon_delta, "M": leak.metrological_power_delta},
        "meta": _meta(args, spec),
    }
    emit(report, args)
    return EXIT_OK


def cmd_measure(args: argparse.Namespace) -> int:
    from .measures import is_centered, q_bound, q_convex_roof_upper, q_pure
    from .qfi import metrological_power

    spec = _load(args)
    rho = build_state(spec)
    mp = metrological_power(rho)
    leak = leakage_report(rho, spec, delta=args.delta)
    report: dict[str, Any] = {
        "M": mp.value,
        "lambda_max": mp.lambda_max,
        "i_opt": mp.i_opt,
        "i_mean": mp.i_mean,
        "optimal_mu": mp.direction.vector,
        "min_variance": mp.min_variance,
        "F": mp.F.matrix,
        "nbar": mean_photon(rho),
        "q_bound": q_bound(rho),
    }
    if spec.kind in PURE_KINDS:
        report["Q"] = q_pure(rho)
        report["Q_label"] = "Q_pure (exact)"
        report["centered"] = is_centered(rho)
    else:
        roof = q_convex_roof_upper(rho, restarts=args.restarts, seed=args.seed)
        report["Q"] = roof.value
        report["Q_label"] = "Q_ub (upper bound on the convex roof)"
        report["Q_eigendecomposition"] = roof.eig_value
    converged = leak.metrological_power_delta <= CONVERGENCE_TOL and not leak.insufficient
    report["converged"] = converged
    report["notes"] = _notes(spec, mp.value) + ([] if converged else [f"unconverged: |M(d) - M(d+{args.delta})| = {leak.metrological_power_delta:.3e}"])
    report["truncation_deltas"] = {"delta": leak.delta, "nbar": leak.mean_photon_delta, "M": leak.metrological_power_delta, "top_population": leak.top_population}
    report["meta"] = _meta(args, spec)
    emit(report, args)
    return EXIT_OK if converged else EXIT_UNCONVERGED


def gaussian_from_spec(spec: StateSpec):
    """Exact moments of a Gaussian-kind spec (product over modes)."""
    import scipy.linalg as sla

    from .gaussian import GaussianState

    p = spec.params
    N = spec.num_modes

    def per_mode(key, default):
        v = p.get(key, default)
        return list(v) if isinstance(v, (list, tuple)) else [v] * N

    if spec.kind == StateKind.VACUUM:
        return GaussianState.vacuum(N)
    if spec.kind in (StateKind.COHERENT, StateKind.THERMAL):
        alphas = per_mode("alpha", 0.0)
        nbars = per_mode("nbar", 0.0)
        singles = [GaussianState.single_mode(0.0, nb, a) for a, nb in zip(alphas, nbars)]
        return GaussianState(np.concatenate([g.mean for g in singles]), sla.block_diag(*[g.cov for g in singles]))
    if spec.kind == StateKind.SQUEEZED_VACUUM:
        return GaussianState.single_mode(p["xi"])
    if spec.kind == StateKind.SQUEEZED_THERMAL:
        return GaussianState.single_mode(p["xi"], p["nbar"])
    if spec.kind == StateKind.SQUEEZED_COHERENT:
        # S(xi)|alpha>: mean S d_alpha, covariance S S^T
        from .gaussian import displacement_mean, squeeze_symplectic

        S = squeeze_symplectic(p["xi"])
        return GaussianState(S @ displacement_mean(p["alpha"]), S @ S.T)
    raise InputError(f"{spec.kind.value} is not a Gaussian kind")


def cmd_gaussian(args: argparse.Namespace) -> int:
    from .gaussian import gaussian_classicality, gaussian_metrological_power, gaussian_qfi_matrix, single_mode_squeezing_G, williamson
    from .qfi import metrological_power

    spec = _load(args)
    if spec.kind not in GAUSSIAN_KINDS:
        raise InputError(f"gaussian command needs a Gaussian kind, got {spec.kind.value}")
    g = gaussian_from_spec(spec)
    wd = williamson(g.cov)
    F = gaussian_qfi_matrix(g.cov)
    cls = gaussian_classicality(g.cov)
    m_g = gaussian_metrological_power(g.cov)
    report: dict[str, Any] = {
        "mean": g.mean,
        "cov": g.cov,
        "symplectic_eigenvalues": wd.nus,
        "F": F.matrix,
        "M": m_g,
        "classical": cls.classical,
        "classicality_margin": cls.margin,
        "classicality_criterion": cls.criterion,
    }
    if spec.num_modes == 1:
        report["G"] = single_mode_squeezing_G(g.cov)
    converged = True
    try:
        rho = build_state(spec, check=False)
        leak = leakage_report(rho, spec, delta=args.delta)
        m_f = metrological_power(rho).value
        report["M_fock"] = m_f
        report["abs_delta_fock"] = abs(m_f - m_g)
        report["truncation_deltas"] = {"delta": leak.delta, "M": leak.metrological_power_delta, "top_population": leak.top_population}
        converged = leak.metrological_power_delta <= CONVERGENCE_TOL
    except DimensionCapError as exc:
        report["M_fock"] = None
        report["notes"] = [f"Fock cross-check skipped: {exc}"]
    report["converged"] = converged
    report["meta"] = _meta(args, spec)
    emit(report, args)
    return EXIT_OK if converged else EXIT_UNCONVERGED


def cmd_phase(args: argparse.Namespace) -> int:
    from .phase import NoGuaranteeError, m_phase_alpha, sufficient_alpha

    spec = _load(args)
    rho = build_state(spec)
    restarts = args.restarts
    extra: dict[str, Any] = {}
    if args.budget == "auto":
        try:
            sa = sufficient_alpha(rho, restarts=restarts, seed=args.seed)
        except NoGuaranteeError as exc:
            raise InputError(f"--budget auto: {exc}") from exc
        budget = sa.alpha
        extra["sufficient_alpha"] = {"alpha": sa.alpha, "alpha_conservative": sa.alpha_conservative, "K": sa.K, "M": sa.M, "i_phase0": sa.i_phase0, "i_opt": sa.i_opt, "nbar": sa.nbar}
    else:
        try:
            budget = float(args.budget)
        except ValueError as exc:
            raise InputError(f"--budget must be a number or 'auto', got {args.budget!r}") from exc
        if not math.isfinite(budget) or budget < 0:
            raise InputError("--budget must be finite and nonnegative")
    rep = m_phase_alpha(rho, budget, restarts=restarts, seed=args.seed)
    report = rep.to_dict()
    report.update(extra)
    report["meta"] = _meta(args, spec, budget=budget)
    emit(report, args)
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    from .plotting import plot_rows
    from .sweeps import COLUMNS, GridError, custom_sweep, sweep

    grid = None
    if args.grid is not None:
        try:
            grid = [float(v) for v in args.grid.split(",") if v.strip()]
        except ValueError as exc:
            raise InputError(f"bad --grid: {exc}") from exc
        if not grid:
            raise InputError("grid is empty")
    try:
        if args.figure == "custom":
            spec = _load(args)
            if not args.param or grid is None:
                raise InputError("--figure custom needs --spec, --param and --grid")
            rows = custom_sweep(spec, args.param, grid)
        else:
            rows = sweep(args.figure, grid, jobs=args.jobs)
    except GridError as exc:
        raise InputError(str(exc)) from exc
    text = write_csv(rows, COLUMNS, args.csv)
    if args.csv:
        png = plot_rows(args.figure, rows, Path(args.csv).with_suffix(".png"))
        summary = {
            "figure": args.figure,
            "rows": len(rows),
            "csv": args.csv,
            "png": str(png),
            "max_abs_delta": max((r["abs_delta"] for r in rows if r["abs_delta"] is not None), default=None),
            "all_converged": all(r["converged"] for r in rows),
            "meta": _meta(args),
        }
        sys.stdout.write(json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n")
    else:
        sys.stdout.write(text)
    return EXIT_OK if all(r["converged"] for r in rows) else EXIT_UNCONVERGED


def cmd_crb(args: argparse.Namespace) -> int:
    from .estimation import HomodyneExperiment, simulate_and_estimate
    from .gaussian import gaussian_qfi_matrix
    from .qfi import optimal_direction

    spec = _load(args, required=False)
    if spec is None:
        spec = StateSpec(StateKind.SQUEEZED_VACUUM, {"xi": 0.8}, (60,))
    if spec.kind not in GAUSSIAN_KINDS:
        raise InputError(f"crb needs a Gaussian kind, got {spec.kind.value}")
    g = gaussian_from_spec(spec)
    if args.mu:
        try:
            mu = np.array([float(v) for v in args.mu.split(",")])
        except ValueError as exc:
            raise InputError(f"bad --mu: {exc}") from exc
        if mu.size != 2 * g.num_modes or np.linalg.norm(mu) == 0:
            raise InputError("--mu needs 2N nonzero components")
        mu = mu / np.linalg.norm(mu)
    else:
        mu = optimal_direction(gaussian_qfi_matrix(g.cov)).vector
    try:
        exp = HomodyneExperiment(g, mu, theta=args.theta, shots=args.shots, trials=args.trials, seed=args.seed)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    res = simulate_and_estimate(exp)
    report = res.to_dict()
    report["mu"] = mu
    report["rng"] = "Philox(key=seed, counter=[0, trial, 0, 0])"
    report["meta"] = _meta(args, spec)
    emit(report, args)
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    from .verify import run_suite

    try:
        checks = run_suite(args.suite)
    except KeyError as exc:
        raise InputError(str(exc.args[0])) from exc
    failed = [c for c in checks if not c.passed]
    report = {
        "suite": args.suite,
        "passed": not failed,
        "num_checks": len(checks),
        "num_failed": len(failed),
        "checks": [c.to_dict() for c in checks],
        "failures": [f"{c.suite}: {c.name}: observed {c.observed!r} expected {c.expected!r} (delta {c.delta:.3e} > tol {c.tol:g})" for c in failed],
        "meta": _meta(args),
    }
    if args.csv:

        write_csv([c.to_dict() for c in checks], ["suite", "name", "observed", "expected", "delta", "tol", "passed"], args.csv)
    sys.stdout.write(json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n")
    return EXIT_OK if not failed else EXIT_VERIFY


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ncvar", description=__doc__.splitlines()[0], allow_abbrev=False)
    parser.add_argument("--version", action="version", version=f"ncvar {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, spec=True, seed=True):
        if spec:
            p.add_argument("--spec", metavar="PATH", help="JSON state specification")
            p.add_argument("--cutoff", type=int, help="override the spec cutoff (uniform)")
        p.add_argument("--delta", type=int, default=DEFAULTS["delta"], help="cutoff increment for truncation deltas (default 8)")
        if seed:
            p.add_argument("--seed", type=int, default=DEFAULTS["seed"], help="random seed (default 0)")
            p.add_argument("--restarts", type=int, default=DEFAULTS["restarts"], help="optimizer restarts (default 8)")
        p.add_argument("--json", action="store_true", help="JSON report on stdout (default)")
        p.add_argument("--csv", metavar="PATH", help="write a CSV file instead")

    p = sub.add_parser("state", help="build a state and report its truncation diagnostics", allow_abbrev=False)
    common(p, seed=False)
    p.set_defaults(func=cmd_state)

    p = sub.add_parser("measure", help="M, I_opt, I_mean, Q and the photon-number bound", allow_abbrev=False)
    common(p)
    p.set_defaults(func=cmd_measure)

    p = sub.add_parser("gaussian", help="covariance-picture analysis of a Gaussian spec", allow_abbrev=False)
    common(p, seed=False)
    p.set_defaults(func=cmd_gaussian)

    p = sub.add_parser("phase", help="alpha-invested phase advantage", allow_abbrev=False)
    common(p)
    p.add_argument("--budget", default="auto", help="displacement amplitude |alpha|, or 'auto' (default)")
    p.set_defaults(func=cmd_phase)

    p = sub.add_parser("sweep", help="reference sweeps 2a/2b (or custom) to CSV, with a PNG next to it", allow_abbrev=False)
    common(p)
    p.add_argument("--figure", choices=("2a", "2b", "custom"), required=True)
    p.add_argument("--grid", help="comma-separated parameter values replacing the default grid")
    p.add_argument("--param", help="parameter swept by --figure custom")
    p.add_argument("--jobs", type=int, default=1, help="worker processes (output order is fixed)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("crb", help="homodyne Monte Carlo against the Cramer-Rao bound", allow_abbrev=False)
    common(p)
    p.add_argument("--mu", help="comma-separated direction (default: optimal eigenvector of F)")
    p.add_argument("--theta", type=float, default=DEFAULTS["theta"])
    p.add_argument("--shots", type=int, default=DEFAULTS["shots"])
    p.add_argument("--trials", type=int, default=DEFAULTS["trials"])
    p.set_defaults(func=cmd_crb)

    p = sub.add_parser("verify", help="run module check suites", allow_abbrev=False)
    p.add_argument("--suite", default="all", help="fock, linopt, qfi, gaussian, measures, phase, estimation or all")
    p.add_argument("--json", action="store_true")
    p.add_argument("--csv", metavar="PATH")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code not in (0, None) else EXIT_OK
    if getattr(args, "restarts", 1) is not None and getattr(args, "restarts", 1) < 0:
        sys.stderr.write("ncvar: --restarts must be nonnegative\n")
        return EXIT_INPUT
    try:
        return args.func(args)
    except (InputError, CutoffTooSmallError, DimensionCapError) as exc:
        sys.stderr.write(f"ncvar: error: {exc}\n")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
