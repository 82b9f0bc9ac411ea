"""PNG figures for sweep results (non-interactive backend, deterministic output)."""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

STYLE = {
    "figure.figsize": (5.0, 3.6),
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "legend.fontsize": 7,
    "legend.frameon": False,
    "savefig.dpi": 150,
    "svg.hashsalt": "ncvar",
}

_LABELS = {
    "fock": r"Fock $|n\rangle$",
    "noon": "NOON",
    "even_cat": "even cat",
    "squeezed_vacuum": "squeezed vacuum",
    "fock_plus_coherent": r"$|n\rangle+|\alpha\rangle$, $n=|\alpha|^2$",
    "squeezed_coherent": r"$S(1)|\alpha\rangle$",
    "photon_added_coherent": r"$a^\dagger|\alpha\rangle$",
}
_DISPLACED_STYLE = {"fock_plus_coherent": ":", "squeezed_coherent": "-.", "photon_added_coherent": "--"}


def _group(rows: Sequence[dict]) -> dict[str, list[dict]]:
    groups: dict[str, list[dict]] = defaultdict(list)
    for r in rows:
        groups[r["family"]].append(r)
    for g in groups.values():
        g.sort(key=lambda r: r["nbar"])
    return groups


def _save(fig, path: Path) -> Path:
    path = Path(path)
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_2a(rows: Sequence[dict], path: str | Path) -> Path:
    """Q against nbar; single-mode families against 2 nbar, NOON against nbar."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        groups = _group(rows)
        top = max((r["nbar"] for r in rows), default=1.0)
        xs = [0.0, top]
        ax.plot(xs, [2 * x for x in xs], color="k", lw=1.2, label=r"$2\bar n$ (N=1)")
        if "noon" in groups:
            ax.plot(xs, xs, color="0.5", lw=1.0, label=r"$\bar n$ (N=2)")
        for fam, g in groups.items():
            ls = _DISPLACED_STYLE.get(fam, "none")
            marker = "o" if fam not in _DISPLACED_STYLE else "."
            ax.plot([r["nbar"] for r in g], [r["value"] for r in g], ls=ls, marker=marker, ms=4, label=_LABELS.get(fam, fam))
        ax.set_xlabel(r"$\bar n$")
        ax.set_ylabel(r"$\mathcal{Q}$")
        ax.legend(loc="upper left")
        fig.tight_layout()
        return _save(fig, path)


def plot_2b(rows: Sequence[dict], path: str | Path) -> Path:
    """M against nbar: decohered cats solid, squeezed thermal dashed; markers are numerics."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for fam, g in _group(rows).items():
            ls = "-" if fam.startswith("decohered_cat") else "--"
            label = fam.replace("decohered_cat_gamma=", r"cat $\Gamma$=").replace("squeezed_thermal_nbar=", r"sq. thermal $\bar n_{th}$=")
            (line,) = ax.plot([r["nbar"] for r in g], [r["closed_form"] for r in g], ls=ls, lw=1.2, label=label)
            ax.plot([r["nbar"] for r in g], [r["value"] for r in g], ls="none", marker="o", ms=3, color=line.get_color())
        ax.set_xlabel(r"$\bar n$")
        ax.set_ylabel(r"$\mathcal{M}$")
        ax.legend(loc="upper left", ncol=2)
        fig.tight_layout()
        return _save(fig, path)


def plot_custom(rows: Sequence[dict], path: str | Path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        xs = [r["parameter"] for r in rows]
        ax.plot(xs, [r["value"] for r in rows], marker="o", label=r"$\mathcal{M}$")
        ax.plot(xs, [r["closed_form"] for r in rows], marker="s", label=r"$\mathcal{Q}$")
        ax.plot(xs, [r["bound"] for r in rows], color="k", lw=1, label=r"$2\bar n/N$")
        ax.set_xlabel(rows[0]["parameter_name"] if rows else "parameter")
        ax.legend()
        fig.tight_layout()
        return _save(fig, path)


def plot_rows(figure: str, rows: Sequence[dict], path: str | Path) -> Path:
    return {"2a": plot_2a, "2b": plot_2b}.get(figure, plot_custom)(rows, path)
