"""PNG figures rendered with the Agg backend (no display needed)."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .metrics import BeampatternMap, MetricSeries

__all__ = ["plot_bars", "plot_beampattern", "plot_map", "plot_series"]

# no software/date tags, so identical data gives identical files
_META = {"Software": None}


def _save(fig: Figure, path) -> None:
    FigureCanvasAgg(fig)
    fig.savefig(Path(path), dpi=100, metadata=_META)


def plot_series(path, series: list[MetricSeries], title: str = "", ylabel: str | None = None) -> None:
    fig = Figure(figsize=(6.0, 3.5))
    ax = fig.add_subplot()
    for s in series:
        ax.plot(s.freqs, s.values, label=s.label)
    ax.set_xlabel("frequency / Hz")
    ax.set_ylabel(ylabel or (f"{series[0].label} / {series[0].unit}" if series else ""))
    ax.grid(True, alpha=0.4)
    if len(series) > 1:
        ax.legend()
    ax.set_title(title)
    fig.tight_layout()
    _save(fig, path)


def plot_beampattern(path, bp: BeampatternMap, floor_db: float = -40.0, title: str | None = None) -> None:
    """Magnitude on the azimuth/elevation plane, poles drawn as full rows."""
    grid = bp.grid
    azs = np.unique(grid.az)
    els = np.unique(grid.el)
    img = np.full((els.size, azs.size), np.nan)
    mag = np.maximum(bp.magnitude_db, floor_db)
    ia = np.searchsorted(azs, grid.az)
    ie = np.searchsorted(els, grid.el)
    for a, e, m in zip(ia, ie, mag):
        img[e, a] = m
    for e in range(els.size):  # poles hold a single value
        row = img[e]
        if np.isnan(row).any() and not np.isnan(row).all():
            row[np.isnan(row)] = np.nanmax(row)
    fig = Figure(figsize=(6.5, 3.5))
    ax = fig.add_subplot()
    mesh = ax.imshow(img, origin="lower", aspect="auto", vmin=floor_db, vmax=max(0.0, np.nanmax(img)),
                     extent=(azs[0], azs[-1], els[0], els[-1]), cmap="viridis")
    fig.colorbar(mesh, ax=ax, label="|B| / dB")
    ax.set_xlabel("azimuth / deg")
    ax.set_ylabel("elevation / deg")
    ax.set_title(title if title is not None else f"{bp.freq:g} Hz")
    fig.tight_layout()
    _save(fig, path)


def plot_map(path, az, el, values, label: str, title: str = "") -> None:
    """Scalar values on a regular look-direction grid."""
    az = np.asarray(az, dtype=float)
    el = np.asarray(el, dtype=float)
    ua, ue = np.unique(az), np.unique(el)
    img = np.full((ue.size, ua.size), np.nan)
    img[np.searchsorted(ue, el), np.searchsorted(ua, az)] = values
    fig = Figure(figsize=(5.0, 4.0))
    ax = fig.add_subplot()
    mesh = ax.pcolormesh(_edges(ua), _edges(ue), img, cmap="magma")
    fig.colorbar(mesh, ax=ax, label=label)
    ax.set_xlabel("azimuth / deg")
    ax.set_ylabel("elevation / deg")
    ax.set_title(title)
    fig.tight_layout()
    _save(fig, path)


def _edges(c):
    if c.size == 1:
        return np.array([c[0] - 0.5, c[0] + 0.5])
    mid = (c[1:] + c[:-1]) / 2
    return np.concatenate([[2 * c[0] - mid[0]], mid, [2 * c[-1] - mid[-1]]])


def plot_bars(path, labels, values, ylabel: str, title: str = "") -> None:
    fig = Figure(figsize=(4.5, 3.5))
    ax = fig.add_subplot()
    ax.bar(list(labels), list(values), color=["0.6", "tab:blue", "tab:green", "tab:orange"][:len(values)])
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(True, axis="y", alpha=0.4)
    fig.tight_layout()
    _save(fig, path)
