"""Writers that produce miniature CSVs in the solver's exact formats."""

from pathlib import Path

import numpy as np


def fmt(x) -> str:
    return repr(float(x) + 0.0)


def write_study(path, rows, kind="linear_tau", scenario="demo", param="tau",
                columns=("re_inf2_v", "re_22_v"), rates=()):
    """rows are (param, *errors) tuples; None leaves the cell empty."""
    lines = [f"# study {kind}, scenario {scenario}, param {param}",
             ",".join([param, *columns])]
    for row in rows:
        cells = []
        for value in row:
            if value is None:
                cells.append("")
            elif isinstance(value, int):
                cells.append(str(value))
            else:
                cells.append(fmt(value))
        lines.append(",".join(cells))
    for col, rate in rates:
        lines.append(f"# rate {col} {fmt(rate)}")
    Path(path).write_text("\n".join(lines) + "\n")
    return Path(path)


def write_northpole(path, times, pole_v, pole_z=None):
    """pole_v has shape (n_times, n_cells); cell ids are column indices."""
    pole_v = np.asarray(pole_v)
    if pole_z is None:
        pole_z = np.zeros_like(pole_v)
    lines = ["step,t,cell,v,Z"]
    for step, t in enumerate(times):
        for cell in range(pole_v.shape[1]):
            lines.append(
                f"{step},{fmt(t)},{cell},"
                f"{fmt(pole_v[step, cell])},{fmt(pole_z[step, cell])}"
            )
    Path(path).write_text("\n".join(lines) + "\n")
    return Path(path)


def write_snapshot(path, u, v, values, region=None, normal="y", offset=0.0,
                   t=0.0):
    """values has shape (len(u), len(v)); u and v fill the two other axes."""
    values = np.asarray(values)
    if region is None:
        region = np.zeros(values.shape, dtype=int)
    axes = [a for a in "xyz" if a != normal]
    lines = [f"# plane {normal} = {fmt(offset)}, axes {axes[0]} {axes[1]}"
             f", t = {fmt(t)}",
             "x,y,z,value,region_id"]
    point = {normal: fmt(offset)}
    for i, ui in enumerate(u):
        point[axes[0]] = fmt(ui)
        for j, vj in enumerate(v):
            point[axes[1]] = fmt(vj)
            lines.append(
                f"{point['x']},{point['y']},{point['z']},"
                f"{fmt(values[i, j])},{int(region[i, j])}"
            )
    Path(path).write_text("\n".join(lines) + "\n")
    return Path(path)
