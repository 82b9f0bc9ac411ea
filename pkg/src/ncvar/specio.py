"""JSON state specifications.

Schema::

    {"modes": int, "cutoff": int | [int, ...],
     "state": {"kind": str, ...kind-specific fields...}}

Complex numbers are written as ``[re, im]`` (a bare number is real).
Multi-mode per-mode fields (``alpha`` of coherent and entangled_coherent,
``n`` of fock, ``nbar`` of thermal) are lists with one entry per mode.
A mixture lists ``"components": [{"weight": w, "state": {...}}, ...]``.
Unknown keys anywhere are errors.
"""

from __future__ import annotations

import hashlib
import json
from typing import Any

from .fock import StateKind, StateSpec

_FIELDS: dict[str, dict[str, str]] = {
    "vacuum": {},
    "coherent": {"alpha": "complex_modes"},
    "fock": {"n": "int_modes"},
    "cat": {"alpha": "complex", "parity": "parity"},
    "decohered_cat": {"alpha": "complex", "gamma": "real"},
    "noon": {"n": "int"},
    "entangled_coherent": {"alpha": "complex_modes", "parity": "parity"},
    "squeezed_vacuum": {"xi": "complex"},
    "thermal": {"nbar": "real_modes"},
    "squeezed_thermal": {"xi": "complex", "nbar": "real"},
    "squeezed_coherent": {"xi": "complex", "alpha": "complex"},
    "photon_added_coherent": {"alpha": "complex"},
    "fock_plus_coherent": {"n": "int", "alpha": "complex"},
    "mixture": {"components": "components"},
}
_OPTIONAL = {"parity"}


class SpecError(ValueError):
    pass


def _complex(v: Any, where: str) -> complex:
    if isinstance(v, bool):
        raise SpecError(f"{where}: expected a number or [re, im]")
    if isinstance(v, (int, float)):
        return complex(v)
    if isinstance(v, list) and len(v) == 2 and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
        return complex(v[0], v[1])
    raise SpecError(f"{where}: expected a number or [re, im], got {v!r}")


def _real(v: Any, where: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise SpecError(f"{where}: expected a real number, got {v!r}")
    return float(v)


def _int(v: Any, where: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int) or v < 0:
        raise SpecError(f"{where}: expected a nonnegative integer, got {v!r}")
    return v


def _per_mode(v: Any, modes: int, conv, where: str) -> list:
    if modes == 1 and not (isinstance(v, list) and len(v) == 1 and conv is not _complex) and not (conv is _complex and isinstance(v, list) and len(v) == 1):
        return [conv(v, where)]
    if not isinstance(v, list) or len(v) != modes:
        raise SpecError(f"{where}: expected a list with one entry per mode ({modes})")
    return [conv(x, f"{where}[{i}]") for i, x in enumerate(v)]


def _parse_state(obj: Any, modes: int, cutoffs: tuple[int, ...], where: str) -> StateSpec:
    if not isinstance(obj, dict) or "kind" not in obj:
        raise SpecError(f"{where}: state must be an object with a 'kind'")
    kind = obj["kind"]
    if kind not in _FIELDS:
        raise SpecError(f"{where}: unknown kind {kind!r}")
    fields = _FIELDS[kind]
    unknown = set(obj) - set(fields) - {"kind"}
    if unknown:
        raise SpecError(f"{where}: unknown keys {sorted(unknown)}")
    missing = set(fields) - set(obj) - _OPTIONAL
    if missing:
        raise SpecError(f"{where}: missing keys {sorted(missing)}")
    params: dict[str, Any] = {}
    for key, typ in fields.items():
        if key not in obj:
            continue
        v = obj[key]
        w = f"{where}.{key}"
        if typ == "complex":
            params[key] = _complex(v, w)
        elif typ == "real":
            params[key] = _real(v, w)
        elif typ == "int":
            params[key] = _int(v, w)
        elif typ == "parity":
            if v not in (1, -1) or isinstance(v, bool):
                raise SpecError(f"{w}: parity must be 1 or -1")
            params[key] = v
        elif typ == "complex_modes":
            vals = _per_mode(v, modes, _complex, w)
            params[key] = vals[0] if modes == 1 else vals
        elif typ == "int_modes":
            vals = _per_mode(v, modes, _int, w)
            params[key] = vals[0] if modes == 1 else vals
        elif typ == "real_modes":
            vals = _per_mode(v, modes, _real, w)
            params[key] = vals[0] if modes == 1 else vals
        elif typ == "components":
            if not isinstance(v, list) or not v:
                raise SpecError(f"{w}: expected a nonempty list")
            weights, comps = [], []
            for i, c in enumerate(v):
                cw = f"{w}[{i}]"
                if not isinstance(c, dict) or set(c) != {"weight", "state"}:
                    raise SpecError(f"{cw}: component needs exactly 'weight' and 'state'")
                weights.append(_real(c["weight"], cw + ".weight"))
                comps.append(_parse_state(c["state"], modes, cutoffs, cw + ".state"))
            params["weights"] = weights
            params["components"] = comps
    try:
        return StateSpec(StateKind(kind), params, cutoffs)
    except (ValueError, TypeError) as exc:
        raise SpecError(f"{where}: {exc}") from exc


def parse_spec(obj: Any, cutoff_override: int | None = None) -> StateSpec:
    if not isinstance(obj, dict):
        raise SpecError("spec must be a JSON object")
    unknown = set(obj) - {"modes", "cutoff", "state"}
    if unknown:
        raise SpecError(f"unknown top-level keys {sorted(unknown)}")
    for key in ("modes", "cutoff", "state"):
        if key not in obj:
            raise SpecError(f"missing top-level key {key!r}")
    modes = obj["modes"]
    if isinstance(modes, bool) or not isinstance(modes, int) or modes < 1:
        raise SpecError("modes must be a positive integer")
    cut = obj["cutoff"] if cutoff_override is None else cutoff_override
    if isinstance(cut, list):
        if len(cut) != modes:
            raise SpecError("cutoff list must have one entry per mode")
        cutoffs = tuple(_int(c, "cutoff") for c in cut)
    else:
        cutoffs = (_int(cut, "cutoff"),) * modes
    if min(cutoffs) < 1:
        raise SpecError("cutoffs must be positive")
    return _parse_state(obj["state"], modes, cutoffs, "state")


def load_spec(path: str, cutoff_override: int | None = None) -> StateSpec:
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise SpecError(f"cannot read spec {path}: {exc}") from exc
    return parse_spec(obj, cutoff_override)


def _enc_complex(z: complex) -> list[float]:
    z = complex(z)
    return [z.real, z.imag]


def state_to_json(spec: StateSpec) -> dict:
    out: dict[str, Any] = {"kind": spec.kind.value}
    fields = _FIELDS[spec.kind.value]
    for key, typ in fields.items():
        if key not in spec.params and key != "components":
            continue
        v = spec.params.get(key)
        if typ == "complex":
            out[key] = _enc_complex(v)
        elif typ == "complex_modes":
            out[key] = [_enc_complex(x) for x in v] if isinstance(v, (list, tuple)) else _enc_complex(v)
        elif typ == "components":
            out[key] = [{"weight": float(w), "state": state_to_json(c)} for w, c in zip(spec.params["weights"], spec.params["components"])]
        elif typ in ("real",):
            out[key] = float(v)
        elif typ == "real_modes":
            out[key] = [float(x) for x in v] if isinstance(v, (list, tuple)) else float(v)
        else:
            out[key] = v if not isinstance(v, tuple) else list(v)
    return out


def spec_to_json(spec: StateSpec) -> dict:
    return {"modes": spec.num_modes, "cutoff": list(spec.cutoffs), "state": state_to_json(spec)}


def spec_hash(spec: StateSpec) -> str:
    canon = json.dumps(spec_to_json(spec), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()
