"""Scenario configuration: JSON schema, validation, source factories.

A scenario file pins everything a run needs: geometry, conductivities,
membrane parameters, the applied potential, time grid, discretization and
output cadences. Units follow the experiment tables verbatim (lengths in um,
times in us, conductivities in uS/um or uS/um^2, potentials in V) with no
hidden conversion.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .analytic import PointSource, affine_z_traces, point_source_traces
from .dynamics import MembraneParams, TimeGrid
from .harmonics import num_coeffs
from .operators import SphereDescriptor

__all__ = [
    "SCHEMA_VERSION",
    "CellConfig",
    "SourceConfig",
    "TimeConfig",
    "SnapshotConfig",
    "OutputConfig",
    "Scenario",
    "ScenarioError",
    "load_scenario",
    "scenario_from_dict",
    "apply_override",
]

SCHEMA_VERSION = 1

MODES = ("static", "linear", "nonlinear")
SOURCE_KINDS = ("point", "affine_z", "coeffs")
TIME_KINDS = ("constant", "exp_decay", "pulse")


class ScenarioError(ValueError):
    """Invalid scenario file; message lists every violated field."""


@dataclass
class CellConfig:
    center: tuple[float, float, float]
    radius: float
    sigma: float
    membrane: MembraneParams = field(default_factory=MembraneParams)

    def descriptor(self, index: int) -> SphereDescriptor:
        return SphereDescriptor(index, self.center, self.radius)


@dataclass
class SourceConfig:
    """Applied potential phi_e = phi_space(r) * phi_time(t).

    kind 'point' is a monopole (intensity, position); 'affine_z' the field
    slope * z; 'coeffs' gives band-limited Dirichlet/Neumann trace
    coefficients per cell directly. time_kind is 'constant', 'exp_decay'
    (e^-t) or 'pulse' (1 until cutoff, then 0).
    """

    kind: str = "affine_z"
    time_kind: str = "constant"
    intensity: float = 1.0
    position: tuple[float, float, float] = (0.0, 0.0, 0.0)
    slope: float = 0.0
    coeffs_d: list | None = None
    coeffs_n: list | None = None
    cutoff: float | None = None

    def time_factor(self, t):
        if self.time_kind == "constant":
            return np.ones_like(np.asarray(t, dtype=float))
        if self.time_kind == "exp_decay":
            return np.exp(-np.asarray(t, dtype=float))
        return (np.asarray(t, dtype=float) < self.cutoff).astype(float)

    def spatial_traces(self, cells: list[CellConfig], sigma_out: float, L: int):
        """(phi_d, phi_n) arrays of shape (n_cells, (L+1)^2) at unit time factor."""
        nm = num_coeffs(L)
        d = np.zeros((len(cells), nm))
        n = np.zeros((len(cells), nm))
        if self.kind == "point":
            src = PointSource(self.intensity, self.position)
            for j, cell in enumerate(cells):
                d[j], n[j] = point_source_traces(
                    src, cell.descriptor(j), sigma_out, L
                )
        elif self.kind == "affine_z":
            for j, cell in enumerate(cells):
                d[j], n[j] = affine_z_traces(self.slope, cell.descriptor(j), L)
        else:
            for j in range(len(cells)):
                dj = np.asarray(self.coeffs_d[j], dtype=float)
                nj = np.asarray(self.coeffs_n[j], dtype=float)
                d[j, : dj.size] = dj[:nm]
                n[j, : nj.size] = nj[:nm]
        return d, n

    def as_function(self, cells: list[CellConfig], sigma_out: float, L: int):
        """Callable t -> (phi_d, phi_n) for the time stepper."""
        d, n = self.spatial_traces(cells, sigma_out, L)

        def source(t):
            f = float(self.time_factor(t))
            return f * d, f * n

        return source

    def applied_potential(self, sigma_out: float):
        """Callable (points, t) -> phi_e values, for exterior field output."""
        if self.kind == "point":
            src = PointSource(self.intensity, self.position)

            def phi(points, t=0.0):
                return src.potential(points, sigma_out) * float(self.time_factor(t))

        elif self.kind == "affine_z":

            def phi(points, t=0.0):
                pts = np.atleast_2d(np.asarray(points, dtype=float))
                return self.slope * pts[:, 2] * float(self.time_factor(t))

        else:
            raise ScenarioError(
                "source.kind: volume evaluation undefined for coefficient sources"
            )
        return phi


@dataclass
class TimeConfig:
    t_end: float
    n_steps: int | None = None
    tau: float | None = None

    def grid(self) -> TimeGrid:
        if self.n_steps is not None:
            return TimeGrid(self.t_end, self.n_steps)
        return TimeGrid.from_tau(self.t_end, self.tau)


@dataclass
class SnapshotConfig:
    normal_axis: str = "y"
    offset: float = 0.0
    resolution: int = 201
    extent: tuple[float, float, float, float] | None = None
    include_applied: bool = True


@dataclass
class OutputConfig:
    sample_every: int = 1
    diagnostics_every: int = 0
    northpole: bool = True
    trace_coeffs: bool = True
    snapshots: list[SnapshotConfig] = field(default_factory=list)


@dataclass
class Scenario:
    name: str
    mode: str
    sigma_out: float
    cells: list[CellConfig]
    source: SourceConfig
    max_degree: int
    quad_degree: int | None = None
    time: TimeConfig | None = None
    outputs: OutputConfig = field(default_factory=OutputConfig)
    initial_checkpoint: str | None = None
    description: str = ""

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    def spheres(self) -> list[SphereDescriptor]:
        return [cell.descriptor(j) for j, cell in enumerate(self.cells)]

    def sigmas(self) -> np.ndarray:
        return np.array([cell.sigma for cell in self.cells])

    def membranes(self) -> list[MembraneParams]:
        return [cell.membrane for cell in self.cells]

    def to_dict(self) -> dict:
        out = {
            "schema_version": SCHEMA_VERSION,
            "name": self.name,
            "description": self.description,
            "mode": self.mode,
            "sigma_out": self.sigma_out,
            "cells": [asdict(c) for c in self.cells],
            "source": _strip_none(asdict(self.source)),
            "discretization": {"L": self.max_degree, "L_quad": self.quad_degree},
            "outputs": {
                "sample_every": self.outputs.sample_every,
                "diagnostics_every": self.outputs.diagnostics_every,
                "northpole": self.outputs.northpole,
                "trace_coeffs": self.outputs.trace_coeffs,
                "snapshots": [_strip_none(asdict(s)) for s in self.outputs.snapshots],
            },
        }
        if self.time is not None:
            out["time"] = _strip_none(asdict(self.time))
        if self.initial_checkpoint is not None:
            out["initial_checkpoint"] = self.initial_checkpoint
        return _jsonify(out)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


def _strip_none(d: dict) -> dict:
    return {k: v for k, v in d.items() if v is not None}


def _jsonify(value):
    """Replace tuples with lists so the canonical form is JSON-typed."""
    if isinstance(value, (tuple, list)):
        return [_jsonify(v) for v in value]
    if isinstance(value, dict):
        return {k: _jsonify(v) for k, v in value.items()}
    return value


def _tuple3(value, errors, where):
    try:
        x, y, z = (float(v) for v in value)
        return (x, y, z)
    except (TypeError, ValueError):
        errors.append(f"{where}: expected a 3-vector, got {value!r}")
        return (0.0, 0.0, 0.0)


def _positive(value, errors, where, strict=True):
    try:
        v = float(value)
    except (TypeError, ValueError):
        errors.append(f"{where}: expected a number, got {value!r}")
        return 1.0
    if strict and not v > 0.0 or not math.isfinite(v):
        errors.append(f"{where}: must be positive and finite, got {v}")
    return v


def scenario_from_dict(data: dict) -> Scenario:
    """Build and fully validate a Scenario; collects every violation."""
    errors: list[str] = []
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ScenarioError(
            f"schema_version: expected {SCHEMA_VERSION}, got {version!r}"
        )

    mode = data.get("mode", "")
    if mode not in MODES:
        errors.append(f"mode: expected one of {MODES}, got {mode!r}")

    sigma_out = _positive(data.get("sigma_out"), errors, "sigma_out")

    cells = []
    raw_cells = data.get("cells", [])
    if not raw_cells:
        errors.append("cells: at least one cell is required")
    for j, raw in enumerate(raw_cells):
        where = f"cells[{j}]"
        center = _tuple3(raw.get("center", ()), errors, f"{where}.center")
        radius = _positive(raw.get("radius"), errors, f"{where}.radius")
        sigma = _positive(raw.get("sigma"), errors, f"{where}.sigma")
        mem_raw = raw.get("membrane", {})
        defaults = MembraneParams()
        kwargs = {}
        for name in defaults.__dataclass_fields__:
            kwargs[name] = _positive(
                mem_raw.get(name, getattr(defaults, name)),
                errors,
                f"{where}.membrane.{name}",
            )
        cells.append(CellConfig(center, radius, sigma, MembraneParams(**kwargs)))

    for a in range(len(cells)):
        for b in range(a + 1, len(cells)):
            gap = math.dist(cells[a].center, cells[b].center)
            if gap <= cells[a].radius + cells[b].radius:
                errors.append(
                    f"cells[{a}]/cells[{b}]: spheres overlap or touch "
                    f"(center distance {gap}, radii sum "
                    f"{cells[a].radius + cells[b].radius})"
                )

    disc = data.get("discretization", {})
    L = disc.get("L")
    if not isinstance(L, int) or L < 0:
        errors.append(f"discretization.L: expected a non-negative integer, got {L!r}")
        L = 1
    L_quad = disc.get("L_quad")
    if L_quad is not None:
        if not isinstance(L_quad, int) or L_quad < L:
            errors.append(
                f"discretization.L_quad: must be an integer >= L={L}, got {L_quad!r}"
            )
            L_quad = None

    raw_src = data.get("source", {})
    kind = raw_src.get("kind", "affine_z")
    time_kind = raw_src.get("time_kind", "constant")
    if kind not in SOURCE_KINDS:
        errors.append(f"source.kind: expected one of {SOURCE_KINDS}, got {kind!r}")
        kind = "affine_z"
    if time_kind not in TIME_KINDS:
        errors.append(
            f"source.time_kind: expected one of {TIME_KINDS}, got {time_kind!r}"
        )
        time_kind = "constant"
    source = SourceConfig(kind=kind, time_kind=time_kind)
    if kind == "point":
        source.intensity = float(raw_src.get("intensity", 1.0))
        source.position = _tuple3(
            raw_src.get("position", ()), errors, "source.position"
        )
    elif kind == "affine_z":
        try:
            source.slope = float(raw_src.get("slope"))
        except (TypeError, ValueError):
            errors.append("source.slope: required for kind 'affine_z'")
    else:
        source.coeffs_d = raw_src.get("coeffs_d")
        source.coeffs_n = raw_src.get("coeffs_n")
        for fname, val in (("coeffs_d", source.coeffs_d),
                           ("coeffs_n", source.coeffs_n)):
            if not isinstance(val, list) or len(val) != len(cells):
                errors.append(
                    f"source.{fname}: expected one coefficient list per cell"
                )
    if time_kind == "pulse":
        source.cutoff = _positive(raw_src.get("cutoff"), errors, "source.cutoff")

    time_cfg = None
    raw_time = data.get("time")
    if raw_time is not None:
        t_end = _positive(raw_time.get("t_end"), errors, "time.t_end")
        n_steps = raw_time.get("n_steps")
        tau = raw_time.get("tau")
        if (n_steps is None) == (tau is None):
            errors.append("time: exactly one of n_steps or tau is required")
        if n_steps is not None and (not isinstance(n_steps, int) or n_steps < 1):
            errors.append(f"time.n_steps: expected a positive integer, got {n_steps!r}")
            n_steps = 1
        if tau is not None:
            tau = _positive(tau, errors, "time.tau")
        time_cfg = TimeConfig(t_end, n_steps, tau)
    elif mode in ("linear", "nonlinear"):
        errors.append(f"time: required for mode '{mode}'")

    raw_out = data.get("outputs", {})
    snapshots = []
    for i, raw in enumerate(raw_out.get("snapshots", [])):
        where = f"outputs.snapshots[{i}]"
        axis = raw.get("normal_axis", "y")
        if axis not in ("x", "y", "z"):
            errors.append(f"{where}.normal_axis: expected x, y or z, got {axis!r}")
            axis = "y"
        resolution = raw.get("resolution", 201)
        if not isinstance(resolution, int) or resolution < 2:
            errors.append(f"{where}.resolution: expected an integer >= 2")
            resolution = 2
        extent = raw.get("extent")
        if extent is not None:
            if len(extent) != 4:
                errors.append(f"{where}.extent: expected 4 numbers")
                extent = None
            else:
                extent = tuple(float(v) for v in extent)
        snapshots.append(
            SnapshotConfig(
                normal_axis=axis,
                offset=float(raw.get("offset", 0.0)),
                resolution=resolution,
                extent=extent,
                include_applied=bool(raw.get("include_applied", True)),
            )
        )
    outputs = OutputConfig(
        sample_every=int(raw_out.get("sample_every", 1)),
        diagnostics_every=int(raw_out.get("diagnostics_every", 0)),
        northpole=bool(raw_out.get("northpole", True)),
        trace_coeffs=bool(raw_out.get("trace_coeffs", True)),
        snapshots=snapshots,
    )
    if outputs.sample_every < 1:
        errors.append("outputs.sample_every: must be >= 1")
    if outputs.diagnostics_every < 0:
        errors.append("outputs.diagnostics_every: must be >= 0")

    if errors:
        raise ScenarioError("invalid scenario:\n  " + "\n  ".join(errors))

    return Scenario(
        name=str(data.get("name", "unnamed")),
        mode=mode,
        sigma_out=sigma_out,
        cells=cells,
        source=source,
        max_degree=L,
        quad_degree=L_quad,
        time=time_cfg,
        outputs=outputs,
        initial_checkpoint=data.get("initial_checkpoint"),
        description=str(data.get("description", "")),
    )


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise ScenarioError(f"scenario file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: invalid JSON ({exc})")
    return scenario_from_dict(data)


def apply_override(data: dict, assignment: str) -> None:
    """Apply a dot-path override like 'time.tau=2.5e-2' to a raw dict.

    Values parse as JSON when possible and fall back to plain strings.
    List elements use integer path parts (cells.0.radius=8).
    """
    if "=" not in assignment:
        raise ScenarioError(f"override '{assignment}': expected key=value")
    key, raw_value = assignment.split("=", 1)
    try:
        value = json.loads(raw_value)
    except json.JSONDecodeError:
        value = raw_value
    parts = key.split(".")
    node = data
    for i, part in enumerate(parts[:-1]):
        if isinstance(node, list):
            try:
                node = node[int(part)]
            except (ValueError, IndexError):
                raise ScenarioError(f"override '{key}': bad list index '{part}'")
        elif isinstance(node, dict):
            node = node.setdefault(part, {})
        else:
            raise ScenarioError(f"override '{key}': '{part}' is not a container")
    last = parts[-1]
    if isinstance(node, list):
        try:
            node[int(last)] = value
        except (ValueError, IndexError):
            raise ScenarioError(f"override '{key}': bad list index '{last}'")
    elif isinstance(node, dict):
        node[last] = value
    else:
        raise ScenarioError(f"override '{key}': target is not a container")
