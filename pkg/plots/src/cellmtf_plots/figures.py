"""The three figure builders.

All rendering goes through matplotlib's object API with the Agg canvas, so
figures can be built concurrently and regenerate byte-identically for a
fixed matplotlib version. Nothing here opens a window or mutates the input
files.
"""

from dataclasses import dataclass
from pathlib import Path

import matplotlib
import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .io import read_northpole, read_snapshot, read_study_table

DPI = 150
AXES_KINDS = ("log-linear", "log-log")


@dataclass
class FigureResult:
    path: Path
    metric: str | None = None
    slope_text: str | None = None
    cells: list[int] | None = None


def _save(fig: Figure, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    FigureCanvasAgg(fig)
    if path.suffix == ".svg":
        # strip the timestamp and pin the id salt so bytes are reproducible
        with matplotlib.rc_context({"svg.hashsalt": "cellmtf-plots"}):
            fig.savefig(path, dpi=DPI, metadata={"Date": None})
    else:
        fig.savefig(path, dpi=DPI)
    return path


def _new_axes(width=4.8, height=3.6):
    fig = Figure(figsize=(width, height), constrained_layout=True)
    return fig, fig.add_subplot()


def plot_convergence(table_path, out_dir, axes_kind="log-log", stem=None,
                     fmt="png") -> list[FigureResult]:
    """One image per error column of a study table.

    log-linear puts the sweep parameter on a linear axis (degree sweeps);
    log-log fits and annotates the slope (step-size sweeps). Columns without
    positive finite entries are skipped.
    """
    if axes_kind not in AXES_KINDS:
        raise ValueError(f"axes_kind must be one of {AXES_KINDS}")
    table = read_study_table(table_path)
    stem = stem if stem is not None else Path(table_path).stem
    out_dir = Path(out_dir)

    results = []
    for metric in table.columns:
        y = table.column(metric)
        keep = np.isfinite(y) & (y > 0.0) & np.isfinite(table.values)
        if not keep.any():
            continue
        x, y = table.values[keep], y[keep]

        fig, ax = _new_axes()
        ax.plot(x, y, "o-")
        ax.set_yscale("log")
        slope_text = None
        if axes_kind == "log-log":
            ax.set_xscale("log")
            if x.size >= 2:
                slope_text = _fit_annotation(np.log10(x), np.log10(y))
                ax.text(0.05, 0.05, slope_text, transform=ax.transAxes)
        ax.set_xlabel(table.param)
        ax.set_ylabel(metric)
        ax.set_title(f"{table.scenario}: {metric} vs {table.param}")
        ax.grid(True, which="both", alpha=0.3)
        path = _save(fig, out_dir / f"{stem}_{metric}.{fmt}")
        results.append(FigureResult(path, metric=metric, slope_text=slope_text))
    if not results:
        raise ValueError(f"{table_path}: no plottable error columns")
    return results


def _fit_annotation(log_x, log_y) -> str:
    if log_x.size == 2:
        slope = (log_y[1] - log_y[0]) / (log_x[1] - log_x[0])
        return f"slope = {slope:.2f}"
    coef, cov = np.polyfit(log_x, log_y, 1, cov=True)
    return f"slope = {coef[0]:.2f} ± {np.sqrt(cov[0, 0]):.2f}"


def plot_timeseries(northpole_path, out_path, cells=None, field="v",
                    zoom=None, overlay=None) -> FigureResult:
    """Overlaid per-cell north-pole histories with an optional zoom inset.

    cells selects a subset by id (default: all, in file order). zoom is a
    (t_lo, t_hi) window rendered as an inset. overlay names a two-column
    CSV (header row, then t,value) drawn dashed on the same axes, e.g. an
    error-bound curve.
    """
    table = read_northpole(northpole_path)
    if cells is None:
        cells = table.cell_ids
    else:
        cells = [int(c) for c in cells]
        unknown = [c for c in cells if c not in table.cell_ids]
        if unknown:
            raise ValueError(
                f"unknown cell id(s) {unknown}; file has {table.cell_ids}"
            )
    if field not in ("v", "Z"):
        raise ValueError("field must be 'v' or 'Z'")
    series = table.v if field == "v" else table.z

    fig, ax = _new_axes(width=6.0, height=3.8)
    for c in cells:
        ax.plot(table.times[c], series[c], label=f"cell {c}", linewidth=1.2)
    if overlay is not None:
        t_o, y_o, label = _read_overlay(overlay)
        ax.plot(t_o, y_o, "k--", label=label, linewidth=1.0)
    ax.set_xlabel("t")
    ax.set_ylabel(field)
    # the zoom inset occupies the lower right, so keep the legend clear
    ax.legend(loc="center left" if zoom is not None else "best", fontsize=8)
    ax.grid(True, alpha=0.3)

    if zoom is not None:
        lo, hi = float(zoom[0]), float(zoom[1])
        inset = ax.inset_axes([0.55, 0.08, 0.42, 0.42])
        for c in cells:
            t = table.times[c]
            win = (t >= lo) & (t <= hi)
            inset.plot(t[win], series[c][win], linewidth=1.0)
        inset.set_xlim(lo, hi)
        ax.indicate_inset_zoom(inset, edgecolor="gray")

    path = _save(fig, out_path)
    return FigureResult(path, metric=field, cells=list(cells))


def _read_overlay(path):
    rows = Path(path).read_text().splitlines()
    if len(rows) < 2:
        raise ValueError(f"{path}: overlay needs a header and data rows")
    label = rows[0].split(",")[1].strip()
    data = np.array([[float(f) for f in r.split(",")] for r in rows[1:]])
    return data[:, 0], data[:, 1], label


def plot_raster(snapshot_path, out_path, cmap="viridis") -> FigureResult:
    """Pseudocolor plane slice; the shell band arrives masked (nan).

    Color limits clip to the 2nd..98th percentile so that a point
    source inside the extent does not flatten the rest of the field.
    """
    snap = read_snapshot(snapshot_path)
    values = np.ma.masked_invalid(snap.values)

    clim = {}
    finite = values.compressed()
    if finite.size:
        lo, hi = np.percentile(finite, [2.0, 98.0])
        if hi > lo:
            clim = {"vmin": lo, "vmax": hi}

    fig, ax = _new_axes(width=5.0, height=4.2)
    mesh = ax.pcolormesh(
        snap.u, snap.v, values.T, cmap=cmap, shading="nearest", **clim
    )
    ax.set_aspect("equal")
    ax.set_xlabel(snap.axes[0])
    ax.set_ylabel(snap.axes[1])
    ax.set_title(f"plane {snap.normal_axis} = {snap.offset:g}, t = {snap.t:g}")
    fig.colorbar(mesh, ax=ax, shrink=0.85)
    path = _save(fig, out_path)
    return FigureResult(path)
