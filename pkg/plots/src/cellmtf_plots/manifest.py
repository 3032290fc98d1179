"""Manifest-driven batch rendering.

A manifest is a JSON file::

    {
      "out_dir": "figures",
      "figures": [
        {"kind": "convergence", "table": "a1_static_L.csv",
         "axes": "log-linear", "name": "ex1"},
        {"kind": "timeseries", "northpole": "northpole.csv",
         "cells": [1, 2], "zoom": [6.0, 8.0]},
        {"kind": "raster", "snapshot": "snapshot_0.csv"}
      ]
    }

Input paths are resolved against the manifest's directory; out_dir too,
unless overridden. Independent figures render concurrently.
"""

import json
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .figures import plot_convergence, plot_raster, plot_timeseries


def render_manifest(manifest_path, out_dir=None, workers=None) -> list[Path]:
    manifest_path = Path(manifest_path)
    config = json.loads(manifest_path.read_text())
    base = manifest_path.parent
    target = Path(out_dir) if out_dir is not None else (
        base / config.get("out_dir", "figures")
    )
    entries = config.get("figures", [])
    if not entries:
        raise ValueError(f"{manifest_path}: manifest lists no figures")

    jobs = [_job(entry, base, target) for entry in entries]
    n = workers if workers is not None else min(4, len(jobs))
    if n <= 1:
        rendered = [job() for job in jobs]
    else:
        with ThreadPoolExecutor(max_workers=n) as pool:
            rendered = list(pool.map(lambda job: job(), jobs))
    return [path for group in rendered for path in group]


def _job(entry, base, target):
    kind = entry.get("kind")
    fmt = entry.get("format", "png")
    if kind == "convergence":
        table = base / entry["table"]
        axes = entry.get("axes", "log-log")
        stem = entry.get("name", Path(entry["table"]).stem)
        return lambda: [
            r.path for r in plot_convergence(table, target, axes_kind=axes,
                                             stem=stem, fmt=fmt)
        ]
    if kind == "timeseries":
        source = base / entry["northpole"]
        name = entry.get("name", Path(entry["northpole"]).stem)
        overlay = entry.get("overlay")
        return lambda: [
            plot_timeseries(
                source, target / f"{name}.{fmt}",
                cells=entry.get("cells"),
                field=entry.get("field", "v"),
                zoom=entry.get("zoom"),
                overlay=None if overlay is None else base / overlay,
            ).path
        ]
    if kind == "raster":
        source = base / entry["snapshot"]
        name = entry.get("name", Path(entry["snapshot"]).stem)
        return lambda: [
            plot_raster(source, target / f"{name}.{fmt}",
                        cmap=entry.get("cmap", "viridis")).path
        ]
    raise ValueError(f"unknown figure kind {kind!r}")
