"""Figures written next to the CSV reports.

Uses the object-oriented matplotlib API with an Agg canvas, so nothing here
touches global pyplot state.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .implied import SkewPoint

STYLE = {
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
}

_STABLE_METADATA = {
    ".png": {"Software": None},
    ".svg": {"Date": None},
    ".pdf": {"CreationDate": None},
}


def _new_figure(ncols: int = 1, width: float = 6.0, height: float = 3.6) -> tuple[Figure, list]:
    fig = Figure(figsize=(width * ncols, height), layout="constrained")
    FigureCanvasAgg(fig)
    axes = fig.subplots(1, ncols, squeeze=False)[0]
    for ax in axes:
        ax.tick_params(labelsize=STYLE["font.size"])
        ax.grid(STYLE["axes.grid"], alpha=STYLE["grid.alpha"])
    return fig, list(axes)


def save(fig: Figure, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # Dropping volatile metadata keeps the bytes reproducible.
    fig.savefig(path, dpi=120, metadata=_STABLE_METADATA.get(path.suffix.lower()))
    return path


def plot_skew(points: Sequence[SkewPoint], path: str | Path, *, atm: float | None = None,
              reference_rho: float | None = None, title: str = "") -> Path:
    """Implied correlation and implied normal vol by strike."""
    strikes = np.array([p.strike for p in points]) * 100
    corr = np.array([p.implied_correlation for p in points])
    vols = np.array([p.implied_normal_vol for p in points]) * 1e4
    fig, (ax_corr, ax_vol) = _new_figure(ncols=2, width=4.2)

    ax_corr.plot(strikes, corr, marker="o", ms=3, lw=1.2, color="C0")
    flagged = [i for i, p in enumerate(points) if p.flag]
    if flagged:
        ax_corr.scatter(strikes[flagged], corr[flagged], marker="x", color="C3", zorder=3,
                        label="bound hit")
        ax_corr.legend(fontsize=8)
    if reference_rho is not None:
        ax_corr.axhline(reference_rho, ls="--", lw=0.8, color="0.4")
    ax_corr.set_xlabel("strike (%)")
    ax_corr.set_ylabel("implied correlation")

    ax_vol.plot(strikes, vols, marker="o", ms=3, lw=1.2, color="C1")
    ax_vol.set_xlabel("strike (%)")
    ax_vol.set_ylabel("implied normal vol (bp/yr)")
    for ax in (ax_corr, ax_vol):
        if atm is not None:
            ax.axvline(atm * 100, ls=":", lw=0.8, color="0.5")
    if title:
        fig.suptitle(title, fontsize=10)
    return save(fig, path)


def plot_marginals(legs: dict[str, dict[str, np.ndarray]], path: str | Path,
                   title: str = "") -> Path:
    """Natural and tilted densities per leg; ``legs[name]`` holds x, pdf_natural, pdf_tilted."""
    fig, axes = _new_figure(ncols=len(legs), width=4.2)
    for ax, (name, cols) in zip(axes, legs.items()):
        x = cols["x"] * 100
        ax.plot(x, cols["pdf_natural"], lw=1.2, label="own annuity measure")
        ax.plot(x, cols["pdf_tilted"], lw=1.2, ls="--", label="underlying annuity measure")
        ax.set_xlabel(f"{name} rate (%)")
        ax.set_ylabel("density")
        ax.legend(fontsize=7)
    if title:
        fig.suptitle(title, fontsize=10)
    return save(fig, path)
