"""Rendering of run artifacts to figure files.

The report path reads the delimited outputs (solution.csv, stages.csv,
verify.json) back from a run directory and renders matplotlib figures next
to them.  Everything is written to files through the Agg backend; nothing is
shown interactively.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["render_solution_figures", "render_verify_figure", "render_run_dir"]

_FIELD_PANELS = [
    ("u", "graph height u"),
    ("nu_up", "vertical normal component"),
    ("kappa_min", "smallest principal curvature"),
    ("S1", "curvature trace S1"),
]


def _read_csv(path: Path) -> dict[str, np.ndarray]:
    with path.open() as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [row for row in reader]
    data = np.array([[_maybe_float(x) for x in row] for row in rows], dtype=object)
    out = {}
    for k, name in enumerate(header):
        col = data[:, k]
        try:
            out[name] = col.astype(float)
        except (TypeError, ValueError):
            out[name] = col
    return out


def _maybe_float(x: str):
    try:
        return float(x)
    except ValueError:
        return x


def render_solution_figures(run_dir, dpi: int = 140) -> list[str]:
    """Field panels and stage trends for one solve run; returns written paths."""
    run = Path(run_dir)
    written = []
    sol_path = run / "solution.csv"
    fig_dir = run / "figures"

    if sol_path.exists():
        table = _read_csv(sol_path)
        if "x3" not in table:          # field heatmaps only for planar bases
            fig_dir.mkdir(exist_ok=True)
            fig, axes = plt.subplots(2, 2, figsize=(9.6, 8.0))
            for ax, (key, label) in zip(axes.ravel(), _FIELD_PANELS):
                sc = ax.scatter(table["x1"], table["x2"], c=table[key],
                                s=4.0, cmap="viridis", marker="s")
                ax.set_aspect("equal")
                ax.set_title(label, fontsize=10)
                fig.colorbar(sc, ax=ax, shrink=0.85)
            fig.tight_layout()
            path = fig_dir / "fields.png"
            fig.savefig(path, dpi=dpi)
            plt.close(fig)
            written.append(str(path))

    stages_path = run / "stages.csv"
    if stages_path.exists():
        table = _read_csv(stages_path)
        fig_dir.mkdir(exist_ok=True)
        eps = table["eps"]
        fig, axes = plt.subplots(1, 3, figsize=(12.0, 3.6))
        axes[0].semilogx(eps, table["min_nu_up"], "o-", label="min nu_up")
        axes[0].axhline(table["sigma"][0], ls=":", color="k", label="sigma")
        axes[0].set_xlabel("boundary eps")
        axes[0].legend(fontsize=8)
        axes[0].set_title("gradient bound witness", fontsize=10)
        axes[1].semilogx(eps, table["min_kappa"], "s-")
        axes[1].set_xlabel("boundary eps")
        axes[1].set_title("smallest principal curvature", fontsize=10)
        axes[2].semilogx(eps, table["ratio"], "d-")
        axes[2].set_xlabel("boundary eps")
        axes[2].set_title("interior/boundary S1 ratio", fontsize=10)
        for ax in axes:
            ax.invert_xaxis()
            ax.grid(alpha=0.3)
        fig.tight_layout()
        path = fig_dir / "stage_trends.png"
        fig.savefig(path, dpi=dpi)
        plt.close(fig)
        written.append(str(path))
    return written


def render_verify_figure(run_dir, dpi: int = 140) -> list[str]:
    """Margin chart of the verification certificates, one bar per record."""
    run = Path(run_dir)
    path = run / "verify.json"
    if not path.exists():
        return []
    doc = json.loads(path.read_text())
    recs = doc.get("certificates", [])
    if not recs:
        return []
    fig_dir = run / "figures"
    fig_dir.mkdir(exist_ok=True)

    labels = [f"{r['name']}" + (f" n={r['n']}" if r.get("n") else "") for r in recs]
    margins = np.array([r["min_margin"] for r in recs], dtype=float)
    colors = ["#2c7fb8" if r["pass"] else "#d7301f" for r in recs]
    floor = 1e-17
    mag = np.maximum(np.abs(margins), floor)

    fig, ax = plt.subplots(figsize=(10.0, 0.28 * len(recs) + 1.6))
    y = np.arange(len(recs))
    ax.barh(y, np.sign(margins) * np.log10(mag / floor), color=colors)
    ax.set_yticks(y)
    ax.set_yticklabels(labels, fontsize=7)
    ax.invert_yaxis()
    ax.axvline(0.0, color="k", lw=0.8)
    ax.set_xlabel("signed log10 margin magnitude (red = failed certificate)")
    ax.set_title("verification margins", fontsize=10)
    fig.tight_layout()
    out = fig_dir / "verify_margins.png"
    fig.savefig(out, dpi=dpi)
    plt.close(fig)
    return [str(out)]


def render_run_dir(run_dir) -> list[str]:
    """Render every figure the run directory's artifacts support."""
    return render_solution_figures(run_dir) + render_verify_figure(run_dir)
