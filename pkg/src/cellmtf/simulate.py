"""Scenario execution: runs, CSV artifacts, checkpoint round-trips.

Output files per run directory:
  trace_coeffs.csv  step, t, cell, kind, l, m, value
                    kinds vD0/vN0/vD/vN for solved boundary traces,
                    v for membrane-potential coefficients, Z for the
                    degree-L analysis of the pore fraction.
  northpole.csv     step, t, cell, v, Z at theta = 0
  diagnostics.csv   midstep residuals and per-cell extrema
  snapshot_*.csv    planar rasters (x, y, z, value, region_id)

All floats are written with repr (shortest round-trip form), so identical
runs produce identical bytes.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dynamics import MembraneState, SimulationResult, run
from .fields import plane_snapshot
from .harmonics import mode_degrees, mode_orders
from .mtf import MtfSystem, TraceBlock
from .scenario import Scenario, SnapshotConfig
from .operators import BlockCache

__all__ = [
    "RunArtifacts",
    "run_scenario",
    "write_checkpoint",
    "load_checkpoint",
    "system_from_scenario",
]

CHECKPOINT_VERSION = 1


@dataclass
class RunArtifacts:
    """Everything a finished run leaves behind."""

    scenario: Scenario
    system: MtfSystem
    result: SimulationResult | None
    traces: TraceBlock | None
    files: dict[str, Path]


def system_from_scenario(scenario: Scenario, cache: BlockCache | None = None) -> MtfSystem:
    return MtfSystem(
        scenario.spheres(),
        scenario.sigma_out,
        scenario.sigmas(),
        scenario.max_degree,
        quad_order=scenario.quad_degree,
        cache=cache,
    )


# ----------------------------------------------------------------- formatting

def _fmt(x) -> str:
    # adding 0.0 folds -0.0 into 0.0 and leaves every other value alone
    return repr(float(x) + 0.0)


def _open_writer(path: Path, header: list[str]):
    handle = path.open("w", newline="")
    writer = csv.writer(handle)
    writer.writerow(header)
    return handle, writer


# ---------------------------------------------------------------- checkpoints

def write_checkpoint(path, state: MembraneState, tau: float, max_degree: int) -> None:
    cells = []
    n = state.v.shape[0]
    for j in range(n):
        cell = {
            "v": state.v[j].tolist(),
            "z_grid": state.z_grid[j].tolist(),
        }
        if state.v_prev is not None:
            cell["v_prev"] = state.v_prev[j].tolist()
            cell["z_prev"] = state.z_prev[j].tolist()
        cells.append(cell)
    payload = {
        "schema_version": CHECKPOINT_VERSION,
        "t": state.time,
        "step": state.step,
        "tau": tau,
        "L": max_degree,
        "cells": cells,
    }
    Path(path).write_text(json.dumps(payload) + "\n")


def load_checkpoint(path, tau: float | None = None) -> tuple[MembraneState, dict]:
    """Rebuild a MembraneState; a tau mismatch drops the step history.

    The multistep scheme may only reuse (v_prev, z_prev) when the new step
    size equals the one that produced them; otherwise the run re-bootstraps.
    """
    data = json.loads(Path(path).read_text())
    if data.get("schema_version") != CHECKPOINT_VERSION:
        raise ValueError(
            f"checkpoint schema_version {data.get('schema_version')!r} not supported"
        )
    v = np.array([c["v"] for c in data["cells"]])
    z = np.array([c["z_grid"] for c in data["cells"]])
    has_history = all("v_prev" in c for c in data["cells"])
    same_tau = tau is None or abs(tau - data["tau"]) <= 1e-12 * data["tau"]
    if has_history and same_tau:
        v_prev = np.array([c["v_prev"] for c in data["cells"]])
        z_prev = np.array([c["z_prev"] for c in data["cells"]])
    else:
        v_prev = z_prev = None
    t = float(data["t"])
    step = int(data["step"])
    if not same_tau:
        step = int(round(t / tau))
        if abs(step * tau - t) > 1e-9 * max(abs(t), tau):
            raise ValueError(
                f"checkpoint time {t!r} does not land on a step of size {tau!r}"
            )
    state = MembraneState(
        time=t,
        step=step,
        v=v,
        z_grid=z,
        v_prev=v_prev,
        z_prev=z_prev,
    )
    return state, data


# --------------------------------------------------------------- csv writers

def _write_trace_rows(writer, step, t, cell, kind, coeffs, ls, ms):
    t_s = _fmt(t)
    for l, m, value in zip(ls, ms, coeffs):
        writer.writerow([step, t_s, cell, kind, l, m, _fmt(value)])


def _write_static_traces(path: Path, traces: TraceBlock) -> None:
    ls = mode_degrees(traces.max_degree)
    ms = mode_orders(traces.max_degree)
    handle, writer = _open_writer(
        path, ["step", "t", "cell", "kind", "l", "m", "value"]
    )
    with handle:
        for j in range(traces.n_cells):
            for kind, arr in (
                ("vD0", traces.exterior_d),
                ("vN0", traces.exterior_n),
                ("vD", traces.interior_d),
                ("vN", traces.interior_n),
            ):
                _write_trace_rows(writer, 0, 0.0, j, kind, arr[j], ls, ms)


def _write_dynamic_traces(
    path: Path, scenario: Scenario, system: MtfSystem, result: SimulationResult
) -> None:
    ls = mode_degrees(system.L)
    ms = mode_orders(system.L)
    times = result.times
    handle, writer = _open_writer(
        path, ["step", "t", "cell", "kind", "l", "m", "value"]
    )
    with handle:
        for k, step in enumerate(result.sample_steps):
            t = times[step]
            for j in range(scenario.n_cells):
                _write_trace_rows(writer, step, t, j, "v",
                                  result.sample_v[k, j], ls, ms)
                _write_trace_rows(writer, step, t, j, "Z",
                                  result.sample_z[k, j], ls, ms)


def _write_northpole(
    path: Path, scenario: Scenario, result: SimulationResult
) -> None:
    times = result.times
    handle, writer = _open_writer(path, ["step", "t", "cell", "v", "Z"])
    with handle:
        for step in result.sample_steps:
            for j in range(scenario.n_cells):
                writer.writerow([
                    step,
                    _fmt(times[step]),
                    j,
                    _fmt(result.pole_v[step, j]),
                    _fmt(result.pole_z[step, j]),
                ])


def _write_diagnostics(path: Path, scenario: Scenario, result: SimulationResult):
    handle, writer = _open_writer(
        path,
        ["step", "t_mid", "calderon_exterior", "calderon_interior",
         "jump_error", "cell", "v_northpole", "v_max_abs", "z_max"],
    )
    with handle:
        for rec in result.diagnostics:
            for j in range(scenario.n_cells):
                writer.writerow([
                    rec.step,
                    _fmt(rec.time),
                    _fmt(rec.calderon_exterior),
                    _fmt(rec.calderon_interior),
                    _fmt(rec.jump),
                    j,
                    _fmt(rec.v_pole[j]),
                    _fmt(rec.v_max[j]),
                    _fmt(rec.z_max[j]),
                ])


def write_snapshot_csv(
    path: Path, scenario: Scenario, traces: TraceBlock, config: SnapshotConfig,
    t: float = 0.0,
) -> None:
    applied = None
    if config.include_applied and scenario.source.kind != "coeffs":
        phi = scenario.source.applied_potential(scenario.sigma_out)
        applied = lambda pts: phi(pts, t)
    snap = plane_snapshot(
        traces,
        scenario.spheres(),
        normal_axis=config.normal_axis,
        offset=config.offset,
        extent=config.extent,
        resolution=config.resolution,
        applied=applied,
    )
    k = "xyz".index(config.normal_axis)
    iu, iv = [i for i in range(3) if i != k]
    with path.open("w", newline="") as handle:
        handle.write(f"# plane {config.normal_axis} = {_fmt(config.offset)}"
                     f", axes {snap.axes[0]} {snap.axes[1]}"
                     f", t = {_fmt(t)}\n")
        writer = csv.writer(handle)
        writer.writerow(["x", "y", "z", "value", "region_id"])
        point = [0.0, 0.0, 0.0]
        point[k] = config.offset
        for i, u in enumerate(snap.u):
            point[iu] = u
            for jj, v in enumerate(snap.v):
                point[iv] = v
                writer.writerow([
                    _fmt(point[0]), _fmt(point[1]), _fmt(point[2]),
                    _fmt(snap.values[i, jj]), int(snap.region[i, jj]),
                ])


# ---------------------------------------------------------------- run driver

def _final_traces(
    scenario: Scenario, system: MtfSystem, result: SimulationResult
) -> TraceBlock:
    """Boundary traces consistent with the final membrane state."""
    t_end = result.times[-1]
    phi_d, phi_n = scenario.source.as_function(
        scenario.cells, scenario.sigma_out, system.L
    )(t_end)
    return system.solve_static(v=result.final_state.v, phi_d=phi_d, phi_n=phi_n)


def run_scenario(
    scenario: Scenario,
    out_dir,
    checkpoint_path=None,
    resume_from=None,
    cache: BlockCache | None = None,
) -> RunArtifacts:
    """Execute a scenario and write its artifacts under out_dir."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    system = system_from_scenario(scenario, cache=cache)
    files: dict[str, Path] = {}

    if scenario.mode == "static":
        phi_d, phi_n = scenario.source.spatial_traces(
            scenario.cells, scenario.sigma_out, system.L
        )
        traces = system.solve_static(phi_d=phi_d, phi_n=phi_n)
        if scenario.outputs.trace_coeffs:
            files["trace_coeffs"] = out_dir / "trace_coeffs.csv"
            _write_static_traces(files["trace_coeffs"], traces)
        for i, snap_cfg in enumerate(scenario.outputs.snapshots):
            key = f"snapshot_{i}"
            files[key] = out_dir / f"{key}.csv"
            write_snapshot_csv(files[key], scenario, traces, snap_cfg)
        return RunArtifacts(scenario, system, None, traces, files)

    source = scenario.source.as_function(
        scenario.cells, scenario.sigma_out, system.L
    )
    grid = scenario.time.grid()
    initial_state = None
    start_path = resume_from or scenario.initial_checkpoint
    if start_path is not None:
        initial_state, _ = load_checkpoint(start_path, tau=grid.tau)

    result = run(
        system,
        scenario.membranes(),
        grid,
        source,
        linear=scenario.mode == "linear",
        sample_every=scenario.outputs.sample_every,
        diagnostics_every=scenario.outputs.diagnostics_every,
        initial_state=initial_state,
    )

    if scenario.outputs.trace_coeffs:
        files["trace_coeffs"] = out_dir / "trace_coeffs.csv"
        _write_dynamic_traces(files["trace_coeffs"], scenario, system, result)
    if scenario.outputs.northpole:
        files["northpole"] = out_dir / "northpole.csv"
        _write_northpole(files["northpole"], scenario, result)
    if scenario.outputs.diagnostics_every:
        files["diagnostics"] = out_dir / "diagnostics.csv"
        _write_diagnostics(files["diagnostics"], scenario, result)

    traces = None
    if scenario.outputs.snapshots:
        traces = _final_traces(scenario, system, result)
        for i, snap_cfg in enumerate(scenario.outputs.snapshots):
            key = f"snapshot_{i}"
            files[key] = out_dir / f"{key}.csv"
            write_snapshot_csv(
                files[key], scenario, traces, snap_cfg, t=result.times[-1]
            )

    if checkpoint_path is not None:
        write_checkpoint(
            checkpoint_path, result.final_state, grid.tau, system.L
        )
        files["checkpoint"] = Path(checkpoint_path)

    return RunArtifacts(scenario, system, result, traces, files)
