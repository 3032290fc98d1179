"""Readers for the solver's CSV artifacts.

Three layouts are understood: study tables (a leading ``# study`` line,
one parameter column, error columns, optional trailing ``# rate`` lines),
north-pole histories (``step,t,cell,v,Z``), and planar snapshots (a leading
``# plane`` line followed by ``x,y,z,value,region_id`` rows in row-major
grid order). Masked snapshot points carry ``nan`` in the value column.
"""

import csv
import io
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class SchemaError(ValueError):
    """The file does not follow the expected CSV layout."""


def _float(text):
    if text == "":
        return float("nan")
    try:
        return float(text)
    except ValueError as exc:
        raise SchemaError(f"expected a number, got {text!r}") from exc


# ------------------------------------------------------------ study tables

_STUDY_RE = re.compile(r"# study (\S+), scenario (\S+), param (\S+)\s*$")
_RATE_RE = re.compile(r"# rate (\S+) (\S+)\s*$")


@dataclass
class StudyTable:
    """One refinement sweep: a parameter column plus error columns."""

    kind: str
    scenario: str
    param: str
    columns: list[str]
    values: np.ndarray
    data: np.ndarray
    rates: dict[str, float] = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        return self.data[:, self.columns.index(name)]


def read_study_table(path) -> StudyTable:
    lines = Path(path).read_text().splitlines()
    if not lines or (head := _STUDY_RE.match(lines[0])) is None:
        raise SchemaError(f"{path}: missing '# study' header line")
    kind, scenario, param = head.groups()

    rates = {}
    body = []
    for line in lines[1:]:
        if not line.strip():
            continue
        if line.startswith("#"):
            tail = _RATE_RE.match(line)
            if tail is None:
                raise SchemaError(f"{path}: unrecognized comment {line!r}")
            rates[tail.group(1)] = _float(tail.group(2))
        else:
            body.append(line)
    if not body:
        raise SchemaError(f"{path}: no column header row")
    rows = list(csv.reader(io.StringIO("\n".join(body))))
    header = rows[0]
    if header[0] != param or len(header) < 2:
        raise SchemaError(
            f"{path}: header {header!r} does not start with param {param!r}"
        )
    if len(rows) == 1:
        raise SchemaError(f"{path}: study table has no data rows")
    columns = header[1:]
    values = np.array([_float(r[0]) for r in rows[1:]])
    data = np.full((len(rows) - 1, len(columns)), np.nan)
    for i, row in enumerate(rows[1:]):
        if len(row) != len(header):
            raise SchemaError(f"{path}: row {i + 1} has {len(row)} fields")
        data[i] = [_float(cell) for cell in row[1:]]
    return StudyTable(kind, scenario, param, columns, values, data, rates)


# ------------------------------------------------------- north-pole series

_POLE_HEADER = ["step", "t", "cell", "v", "Z"]


@dataclass
class PoleTable:
    """Per-cell north-pole histories keyed by cell id."""

    cell_ids: list[int]
    times: dict[int, np.ndarray]
    v: dict[int, np.ndarray]
    z: dict[int, np.ndarray]


def read_northpole(path) -> PoleTable:
    with Path(path).open(newline="") as handle:
        rows = list(csv.reader(handle))
    if not rows or rows[0] != _POLE_HEADER:
        raise SchemaError(
            f"{path}: expected header {_POLE_HEADER}, got {rows[0] if rows else 'nothing'}"
        )
    series: dict[int, list[tuple[float, float, float]]] = {}
    for row in rows[1:]:
        if len(row) != 5:
            raise SchemaError(f"{path}: malformed row {row!r}")
        cell = int(row[2])
        series.setdefault(cell, []).append(
            (_float(row[1]), _float(row[3]), _float(row[4]))
        )
    if not series:
        raise SchemaError(f"{path}: no data rows")
    cell_ids = list(series)
    arrays = {c: np.array(series[c]) for c in cell_ids}
    return PoleTable(
        cell_ids,
        {c: a[:, 0] for c, a in arrays.items()},
        {c: a[:, 1] for c, a in arrays.items()},
        {c: a[:, 2] for c, a in arrays.items()},
    )


# ------------------------------------------------------------ plane rasters

_PLANE_RE = re.compile(
    r"# plane ([xyz]) = (\S+), axes (\S+) (\S+), t = (\S+)\s*$"
)


@dataclass
class Snapshot:
    """A potential slice on an axis-aligned plane, row-major in (u, v)."""

    normal_axis: str
    offset: float
    axes: tuple[str, str]
    t: float
    u: np.ndarray
    v: np.ndarray
    values: np.ndarray
    region: np.ndarray


def read_snapshot(path) -> Snapshot:
    with Path(path).open(newline="") as handle:
        first = handle.readline()
        head = _PLANE_RE.match(first)
        if head is None:
            raise SchemaError(f"{path}: missing '# plane' header line")
        rows = list(csv.reader(handle))
    normal, offset, ax_u, ax_v, t = head.groups()
    if not rows or rows[0] != ["x", "y", "z", "value", "region_id"]:
        raise SchemaError(f"{path}: unexpected column header")
    if len(rows) < 2:
        raise SchemaError(f"{path}: no grid points")

    cols = "xyz"
    u_col = np.array([_float(r[cols.index(ax_u)]) for r in rows[1:]])
    v_col = np.array([_float(r[cols.index(ax_v)]) for r in rows[1:]])
    values = np.array([_float(r[3]) for r in rows[1:]])
    region = np.array([int(r[4]) for r in rows[1:]])

    nv = 1
    while nv < u_col.size and u_col[nv] == u_col[0]:
        nv += 1
    if u_col.size % nv:
        raise SchemaError(f"{path}: ragged grid ({u_col.size} points, {nv} per row)")
    nu = u_col.size // nv
    u = u_col.reshape(nu, nv)[:, 0]
    v = v_col.reshape(nu, nv)[0]
    if not (np.all(u_col.reshape(nu, nv) == u[:, None])
            and np.all(v_col.reshape(nu, nv) == v[None, :])):
        raise SchemaError(f"{path}: points do not form a tensor grid")
    return Snapshot(
        normal, _float(offset), (ax_u, ax_v), _float(t),
        u, v, values.reshape(nu, nv), region.reshape(nu, nv),
    )
