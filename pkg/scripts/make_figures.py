#!/usr/bin/env python3
"""Render figures from whatever study and run CSVs exist in out/.

Collects the artifacts written by reproduce_convergence.py and
reproduce_cells.py into a figure manifest, then hands it to the
cellmtf-plots package.  Missing CSVs are skipped with a note, so the
script is useful after any subset of the experiments.
"""

import argparse
import json
import sys
from pathlib import Path

WINDOW_START = 98320 / 16384

CONVERGENCE = [
    ("static_degree_sweep.csv", "log-linear", "static_degrees"),
    ("linear_step_sweep_constant.csv", "log-log", "linear_steps_constant"),
    ("linear_step_sweep_exp.csv", "log-log", "linear_steps_exp"),
    ("nonlinear_step_sweep.csv", "log-log", "nonlinear_steps"),
    ("nonlinear_degree_sweep.csv", "log-log", "nonlinear_degrees"),
]

TIMESERIES = [
    ("near_pair_tail/northpole.csv", "near_pair", [1, 2],
     [WINDOW_START, WINDOW_START + 1.0]),
    ("far_cells/northpole.csv", "far_cells", None, None),
    ("cube/northpole.csv", "cube", None, None),
]

RASTERS = [
    ("three_spheres/snapshot_0.csv", "three_spheres_y"),
    ("three_spheres/snapshot_1.csv", "three_spheres_z"),
]


def collect(out):
    figures = []
    for rel, axes, name in CONVERGENCE:
        if (out / rel).exists():
            figures.append({"kind": "convergence", "table": rel,
                            "axes": axes, "name": name})
        else:
            print(f"skip {rel} (not found)")
    for rel, name, cells, zoom in TIMESERIES:
        if (out / rel).exists():
            entry = {"kind": "timeseries", "northpole": rel, "name": name}
            if cells:
                entry["cells"] = cells
            if zoom:
                entry["zoom"] = zoom
            figures.append(entry)
        else:
            print(f"skip {rel} (not found)")
    for rel, name in RASTERS:
        if (out / rel).exists():
            figures.append({"kind": "raster", "snapshot": rel, "name": name})
        else:
            print(f"skip {rel} (not found)")
    return figures


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, default=Path("out"))
    parser.add_argument("--fig-dir", type=Path, default=None,
                        help="figure directory (default OUT/figures)")
    args = parser.parse_args(argv)

    try:
        from cellmtf_plots import render_manifest
    except ImportError:
        print("cellmtf-plots is not installed; see plots/README.md",
              file=sys.stderr)
        return 1

    figures = collect(args.out)
    if not figures:
        print("nothing to render; run the reproduce_* scripts first",
              file=sys.stderr)
        return 1
    manifest = args.out / "figures_manifest.json"
    manifest.write_text(json.dumps(
        {"out_dir": "figures", "figures": figures}, indent=2
    ) + "\n")
    print(f"wrote {manifest}")
    for path in sorted(render_manifest(manifest, out_dir=args.fig_dir)):
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
