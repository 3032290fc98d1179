"""Convergence-study drivers sweeping the band limit or the step size.

Four sweep kinds cover the standard refinement experiments:

  static_L       static scattering vs the closed-form single-sphere solution
  linear_tau     linear membrane dynamics vs the exact per-mode ODE solution
  nonlinear_tau  self-convergence via max-in-time differences of nested runs
  nonlinear_L    dynamics at degree L vs an overkill reference degree

Sweep points are independent of each other (each run owns its state), so a
study parallelizes trivially if ever needed; this driver runs them in order
and streams one report row per point.
"""

from __future__ import annotations

import copy
import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .analytic import analytic_one_sphere, linear_membrane_coeffs, linear_membrane_solution
from .dynamics import TimeGrid, run
from .harmonics import num_coeffs
from .metrics import re_2, re_22, re_inf2, fit_slope, successive_max_differences
from .scenario import Scenario, apply_override, scenario_from_dict
from .simulate import system_from_scenario, _fmt

__all__ = ["KINDS", "StudyReport", "run_convergence_study"]

KINDS = ("static_L", "linear_tau", "nonlinear_tau", "nonlinear_L")

TRACE_COLUMNS = ("re2_vD0", "re2_vN0", "re2_vD", "re2_vN")


@dataclass
class StudyReport:
    kind: str
    scenario_name: str
    param: str
    columns: list[str]
    rows: list[dict] = field(default_factory=list)
    rates: dict[str, float] = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        """Values of one column as floats, NaN where a row has none."""
        return np.array(
            [np.nan if row.get(name) is None else float(row[name]) for row in self.rows]
        )

    def params(self) -> np.ndarray:
        return np.array([row["param"] for row in self.rows], dtype=float)

    def to_csv(self, path) -> None:
        path = Path(path)
        with path.open("w", newline="") as handle:
            handle.write(
                f"# study {self.kind}, scenario {self.scenario_name}, "
                f"param {self.param}\n"
            )
            writer = csv.writer(handle)
            writer.writerow([self.param, *self.columns])
            for row in self.rows:
                record = [_fmt_param(row["param"])]
                for col in self.columns:
                    value = row.get(col)
                    record.append("" if value is None else _fmt(value))
                writer.writerow(record)
            for col in self.columns:
                if col in self.rates:
                    handle.write(f"# rate {col} {_fmt(self.rates[col])}\n")


def _fmt_param(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return _fmt(value)


def _as_dict(scenario) -> dict:
    if isinstance(scenario, Scenario):
        return scenario.to_dict()
    return copy.deepcopy(scenario)


def _fit_rates(report: StudyReport, columns, log_x: bool) -> None:
    x = report.params()
    for col in columns:
        y = report.column(col)
        keep = np.isfinite(y)
        if keep.sum() < 2 or np.any(y[keep] <= 0.0):
            continue
        report.rates[col] = fit_slope(x[keep], y[keep], log_x=log_x)


def _say(progress, message: str) -> None:
    if progress is not None:
        progress(message)


def run_convergence_study(
    kind: str,
    scenario,
    values,
    reference=None,
    sample_every: int = 1,
    out_path=None,
    cache=None,
    progress=None,
) -> StudyReport:
    """Run one refinement sweep and tabulate errors with fitted rates.

    scenario is a Scenario or its raw dict; values are the band limits
    (ascending) or step sizes (descending). reference overrides the oracle
    resolution: the expansion degree of the closed form for static_L, the
    overkill degree for nonlinear_L (default: the largest sweep value, which
    is then dropped from the rows). A single sweep value yields a single-row
    table and no fitted rate.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown study kind {kind!r}; expected one of {KINDS}")
    if len(values) == 0:
        raise ValueError("need at least one sweep value")
    data = _as_dict(scenario)
    base = scenario_from_dict(data)
    if base.initial_checkpoint is not None:
        raise ValueError("convergence sweeps must start from rest")

    if kind == "static_L":
        report = _static_degree_sweep(data, base, values, reference, cache, progress)
    elif kind == "linear_tau":
        report = _linear_step_sweep(base, values, cache, progress)
    elif kind == "nonlinear_tau":
        report = _nonlinear_step_sweep(base, values, sample_every, cache, progress)
    else:
        report = _nonlinear_degree_sweep(
            data, base, values, reference, sample_every, cache, progress
        )

    if out_path is not None:
        report.to_csv(out_path)
    return report


# ------------------------------------------------------------------ sweeps

def _static_degree_sweep(data, base, degrees, reference, cache, progress):
    if base.mode != "static":
        raise ValueError("static_L expects a static scenario")
    if base.n_cells != 1:
        raise ValueError("the closed-form reference needs exactly one cell")
    degrees = sorted(int(v) for v in degrees)
    ref_degree = int(reference) if reference is not None else degrees[-1] + 10

    cell = base.cells[0]
    sphere = cell.descriptor(0)
    radius = sphere.radius
    phi_d, phi_n = base.source.spatial_traces(base.cells, base.sigma_out, ref_degree)
    exact = analytic_one_sphere(
        phi_d[0], phi_n[0], sphere, base.sigma_out, cell.sigma
    )
    ref_arrays = dict(zip(TRACE_COLUMNS, (
        exact.exterior_d[0], exact.exterior_n[0],
        exact.interior_d[0], exact.interior_n[0],
    )))

    report = StudyReport("static_L", base.name, "L", list(TRACE_COLUMNS))
    for L in degrees:
        point = copy.deepcopy(data)
        apply_override(point, f"discretization.L={L}")
        scen = scenario_from_dict(point)
        system = system_from_scenario(scen, cache=cache)
        pd, pn = scen.source.spatial_traces(scen.cells, scen.sigma_out, L)
        traces = system.solve_static(phi_d=pd, phi_n=pn)
        num_arrays = dict(zip(TRACE_COLUMNS, (
            traces.exterior_d[0], traces.exterior_n[0],
            traces.interior_d[0], traces.interior_n[0],
        )))
        row = {"param": L}
        for col in TRACE_COLUMNS:
            padded = np.zeros(num_coeffs(ref_degree))
            padded[: num_arrays[col].size] = num_arrays[col]
            row[col] = re_2(ref_arrays[col], padded, radius)
        report.rows.append(row)
        _say(progress, f"L={L}: re2_vD={row['re2_vD']:.3e}")

    _fit_rates(report, TRACE_COLUMNS, log_x=False)
    return report


def _linear_step_sweep(base, taus, cache, progress):
    if base.mode != "linear":
        raise ValueError("linear_tau expects a linear-mode scenario")
    if base.n_cells != 1:
        raise ValueError("the exact ODE reference needs exactly one cell")
    drives = {"constant": "constant", "exp_decay": "exp"}
    if base.source.time_kind not in drives:
        raise ValueError("the exact ODE reference covers constant and exp_decay drives")
    drive = drives[base.source.time_kind]
    taus = sorted((float(v) for v in taus), reverse=True)

    system = system_from_scenario(base, cache=cache)
    cell = base.cells[0]
    radius = cell.radius
    phi_d, phi_n = base.source.spatial_traces(base.cells, base.sigma_out, base.max_degree)
    alpha, beta_f = linear_membrane_coeffs(
        cell.descriptor(0), base.sigma_out, cell.sigma,
        cell.membrane.c_m, cell.membrane.r_m, phi_d[0], phi_n[0],
    )
    v0 = np.zeros(system.nm)
    source = base.source.as_function(base.cells, base.sigma_out, base.max_degree)

    report = StudyReport("linear_tau", base.name, "tau", ["re_inf2_v", "re_22_v"])
    for tau in taus:
        grid = TimeGrid.from_tau(base.time.t_end, tau)
        result = run(
            system, base.membranes(), grid, source, linear=True, sample_every=1
        )
        exact = linear_membrane_solution(alpha, beta_f, v0, result.times, drive)
        numeric = result.sample_v[:, 0, :]
        row = {
            "param": grid.tau,
            "re_inf2_v": re_inf2(exact, numeric, radius),
            "re_22_v": re_22(exact, numeric, result.times, radius),
        }
        report.rows.append(row)
        _say(progress, f"tau={grid.tau:.3e}: re_inf2={row['re_inf2_v']:.3e}")

    _fit_rates(report, ["re_inf2_v", "re_22_v"], log_x=True)
    return report


def _nonlinear_step_sweep(base, taus, sample_every, cache, progress):
    if base.mode != "nonlinear":
        raise ValueError("nonlinear_tau expects a nonlinear-mode scenario")
    taus = sorted((float(v) for v in taus), reverse=True)

    system = system_from_scenario(base, cache=cache)
    source = base.source.as_function(base.cells, base.sigma_out, base.max_degree)
    grids = [TimeGrid.from_tau(base.time.t_end, tau) for tau in taus]
    stride = max(1, int(sample_every))
    if grids[0].n_steps % stride:
        raise ValueError("sample_every must divide the coarsest step count")
    shared = grids[0].n_steps // stride  # intervals of the common sampling grid
    for grid in grids:
        if grid.n_steps % grids[0].n_steps:
            raise ValueError(
                "step sizes must nest: every sweep grid must refine the coarsest"
            )

    v_trajs, z_trajs = [], []
    for grid in grids:
        every = grid.n_steps // shared
        result = run(
            system, base.membranes(), grid, source,
            linear=False, sample_every=every,
        )
        v_trajs.append(result.sample_v)
        z_trajs.append(result.sample_z)
        _say(progress, f"tau={grid.tau:.3e}: {grid.n_steps} steps done")

    radii = system.radii
    diff_v = successive_max_differences(v_trajs, radii)
    diff_z = successive_max_differences(z_trajs, radii)

    columns = ["diff_v", "diff_Z", "ratio_v", "ratio_Z"]
    report = StudyReport("nonlinear_tau", base.name, "tau", columns)
    report.rows.append({"param": grids[0].tau})
    for i in range(1, len(grids)):
        row = {
            "param": grids[i].tau,
            "diff_v": float(diff_v[i - 1]),
            "diff_Z": float(diff_z[i - 1]),
        }
        if i >= 2:
            with np.errstate(divide="ignore", invalid="ignore"):
                row["ratio_v"] = float(diff_v[i - 2] / diff_v[i - 1])
                row["ratio_Z"] = float(diff_z[i - 2] / diff_z[i - 1])
        report.rows.append(row)

    _fit_rates(report, ["diff_v", "diff_Z"], log_x=True)
    return report


def _nonlinear_degree_sweep(data, base, degrees, reference, sample_every, cache, progress):
    if base.mode != "nonlinear":
        raise ValueError("nonlinear_L expects a nonlinear-mode scenario")
    if base.n_cells != 1:
        raise ValueError("degree sweeps compare one cell against its overkill run")
    degrees = sorted(int(v) for v in degrees)
    if reference is None:
        ref_degree = degrees[-1]
        degrees = degrees[:-1]
        if not degrees:
            raise ValueError("need a sweep value besides the overkill degree")
    else:
        ref_degree = int(reference)

    radius = base.cells[0].radius
    nm_ref = num_coeffs(ref_degree)

    def run_at(L):
        point = copy.deepcopy(data)
        apply_override(point, f"discretization.L={L}")
        scen = scenario_from_dict(point)
        system = system_from_scenario(scen, cache=cache)
        source = scen.source.as_function(scen.cells, scen.sigma_out, L)
        result = run(
            system, scen.membranes(), scen.time.grid(), source,
            linear=False, sample_every=max(1, int(sample_every)),
        )
        times = result.times[result.sample_steps]
        return result.sample_v[:, 0, :], result.sample_z[:, 0, :], times

    ref_v, ref_z, ref_times = run_at(ref_degree)
    _say(progress, f"reference L={ref_degree} done")

    columns = ["re_inf2_v", "re_22_v", "re_inf2_Z", "re_22_Z"]
    report = StudyReport("nonlinear_L", base.name, "L", columns)
    for L in degrees:
        v, z, times = run_at(L)
        if times.shape != ref_times.shape:
            raise ValueError("sweep runs must share the reference time grid")
        v_pad = np.zeros((v.shape[0], nm_ref))
        v_pad[:, : v.shape[1]] = v
        z_pad = np.zeros((z.shape[0], nm_ref))
        z_pad[:, : z.shape[1]] = z
        row = {"param": L}
        for col, ref_traj, traj in (
            ("re_inf2_v", ref_v, v_pad),
            ("re_22_v", ref_v, v_pad),
            ("re_inf2_Z", ref_z, z_pad),
            ("re_22_Z", ref_z, z_pad),
        ):
            try:
                if col.startswith("re_inf2"):
                    row[col] = re_inf2(ref_traj, traj, radius)
                else:
                    row[col] = re_22(ref_traj, traj, ref_times, radius)
            except ValueError:
                row[col] = float("nan")  # degenerate reference (zero norm)
        report.rows.append(row)
        _say(progress, f"L={L}: re_inf2_v={row['re_inf2_v']:.3e}")

    _fit_rates(report, columns, log_x=False)
    return report
