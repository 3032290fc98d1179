"""Volume potential reconstruction from solved boundary traces.

Inside a cell the potential is the regular solid-harmonic extension of its
interior trace pair; outside it is the sum of the decaying extensions of all
exterior pairs. Both reconstructions project the trace pair through the
corresponding Calderon projector, so slightly inconsistent numerical pairs
are mapped to the nearest harmonic field.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .harmonics import cartesian_to_angles, mode_degrees, sh_matrix
from .mtf import TraceBlock
from .operators import SphereDescriptor

__all__ = [
    "interior_coeffs",
    "exterior_coeffs",
    "eval_interior",
    "eval_exterior",
    "PlaneSnapshot",
    "plane_snapshot",
]

_SURFACE_BAND = 1e-6


def interior_coeffs(traces: TraceBlock, cell: int) -> np.ndarray:
    """Solid-harmonic coefficients of the potential inside one cell."""
    ls = mode_degrees(traces.max_degree)
    R = traces.radii[cell]
    d = traces.interior_d[cell]
    n = traces.interior_n[cell]
    return ((ls + 1.0) * d + R * n) / (2.0 * ls + 1.0)


def exterior_coeffs(traces: TraceBlock, cell: int) -> np.ndarray:
    """Decaying-harmonic coefficients radiated by one cell boundary."""
    ls = mode_degrees(traces.max_degree)
    R = traces.radii[cell]
    d = traces.exterior_d[cell]
    n = traces.exterior_n[cell]
    return (ls * d + R * n) / (2.0 * ls + 1.0)


def _local_frame(points, sphere: SphereDescriptor):
    rel = np.atleast_2d(np.asarray(points, dtype=float)) - sphere.center
    return cartesian_to_angles(rel)


def eval_interior(
    traces: TraceBlock, sphere: SphereDescriptor, points: np.ndarray
) -> np.ndarray:
    """Potential at points inside the given cell.

    Points outside the closed ball raise, since the regular extension is
    meaningless there.
    """
    r, theta, phi = _local_frame(points, sphere)
    R = sphere.radius
    if np.any(r > R * (1.0 + 1e-12)):
        raise ValueError("interior evaluation point lies outside the cell")
    c = interior_coeffs(traces, sphere.index)
    ls = mode_degrees(traces.max_degree)
    y = sh_matrix(traces.max_degree, theta, phi)
    radial = (np.minimum(r, R)[None, :] / R) ** ls[:, None]
    return (c[:, None] * radial * y).sum(axis=0)


def eval_exterior(
    traces: TraceBlock, spheres: list[SphereDescriptor], points: np.ndarray
) -> np.ndarray:
    """Scattered potential at points of the extracellular medium.

    The applied potential is not included; add it separately when a total
    field is wanted.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.zeros(points.shape[0])
    ls = mode_degrees(traces.max_degree)
    for sphere in spheres:
        r, theta, phi = _local_frame(points, sphere)
        R = sphere.radius
        if np.any(r < R * (1.0 - 1e-12)):
            raise ValueError("exterior evaluation point lies inside a cell")
        c = exterior_coeffs(traces, sphere.index)
        y = sh_matrix(traces.max_degree, theta, phi)
        radial = (R / np.maximum(r, R)[None, :]) ** (ls[:, None] + 1.0)
        out += (c[:, None] * radial * y).sum(axis=0)
    return out


@dataclass
class PlaneSnapshot:
    """Raster of the potential on an axis-aligned plane.

    axes holds the names of the two in-plane coordinates; u and v are their
    1-D grids. values[i, j] is the potential at (u[i], v[j]); region[i, j] is
    0 in the extracellular medium and the 1-based cell index inside a cell.
    Points within a thin band of a membrane are masked with NaN and region -1.
    """

    axes: tuple[str, str]
    normal_axis: str
    offset: float
    u: np.ndarray
    v: np.ndarray
    values: np.ndarray
    region: np.ndarray


def plane_snapshot(
    traces: TraceBlock,
    spheres: list[SphereDescriptor],
    normal_axis: str = "y",
    offset: float = 0.0,
    extent: tuple[float, float, float, float] | None = None,
    resolution: int = 201,
    applied=None,
) -> PlaneSnapshot:
    """Sample the piecewise potential on the plane {normal_axis = offset}.

    extent is (u_min, u_max, v_min, v_max) for the two remaining axes in
    x-y-z order; by default it covers all spheres with a half-radius margin.
    applied, if given, is a callable applied(points) -> values added in the
    extracellular region only.
    """
    names = "xyz"
    if normal_axis not in names:
        raise ValueError("normal_axis must be one of 'x', 'y', 'z'")
    k = names.index(normal_axis)
    iu, iv = [i for i in range(3) if i != k]

    if extent is None:
        lo = min(s.center[i] - 1.5 * s.radius for s in spheres for i in (iu, iv))
        hi = max(s.center[i] + 1.5 * s.radius for s in spheres for i in (iu, iv))
        extent = (lo, hi, lo, hi)
    u = np.linspace(extent[0], extent[1], resolution)
    v = np.linspace(extent[2], extent[3], resolution)
    uu, vv = np.meshgrid(u, v, indexing="ij")
    points = np.zeros((uu.size, 3))
    points[:, iu] = uu.ravel()
    points[:, iv] = vv.ravel()
    points[:, k] = offset

    region = np.zeros(uu.size, dtype=int)
    masked = np.zeros(uu.size, dtype=bool)
    for sphere in spheres:
        r = np.sqrt(((points - sphere.center) ** 2).sum(axis=1))
        band = _SURFACE_BAND * sphere.radius
        masked |= np.abs(r - sphere.radius) < band
        region[r < sphere.radius] = sphere.index + 1

    values = np.full(uu.size, np.nan)
    outside = (region == 0) & ~masked
    if outside.any():
        values[outside] = eval_exterior(traces, spheres, points[outside])
        if applied is not None:
            values[outside] += np.asarray(applied(points[outside]), dtype=float)
    for sphere in spheres:
        inside = (region == sphere.index + 1) & ~masked
        if inside.any():
            values[inside] = eval_interior(traces, sphere, points[inside])
    region[masked] = -1

    return PlaneSnapshot(
        axes=(names[iu], names[iv]),
        normal_axis=normal_axis,
        offset=offset,
        u=u,
        v=v,
        values=values.reshape(uu.shape),
        region=region.reshape(uu.shape),
    )
