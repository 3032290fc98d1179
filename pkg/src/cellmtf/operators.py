"""Galerkin blocks of the Laplace boundary integral operators on spheres.

In the real spherical-harmonic basis every operator restricted to one sphere
is diagonal with entries depending only on the degree l, and every operator
coupling two disjoint spheres is a dense block obtained from the single-layer
block by scaling rows or columns with degree-dependent factors. The exterior
operators use the normal pointing out of the unbounded domain, i.e. into each
cell, which flips the sign of the first-kind double-layer family relative to
the interior ones.

Galerkin pairings are taken over the physical sphere, so the surface measure
contributes a factor R^2 relative to unit-sphere integrals.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .harmonics import (
    QuadratureGrid,
    cartesian_to_angles,
    mode_degrees,
    num_coeffs,
    sh_matrix,
)

__all__ = [
    "SphereDescriptor",
    "diagonal_bio_entry",
    "single_layer_offsphere",
    "cross_v_block",
    "derive_cross_blocks",
    "BlockCache",
]

DIAGONAL_KINDS = ("V", "K0", "K", "Kstar0", "Kstar", "W", "I")


@dataclass
class SphereDescriptor:
    """Geometry of one spherical interface."""

    index: int
    center: np.ndarray
    radius: float

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float).reshape(3)
        if self.radius <= 0.0:
            raise ValueError(f"sphere {self.index}: radius must be positive")

    def gap_to(self, other: "SphereDescriptor") -> float:
        """Surface-to-surface distance; negative means overlap."""
        d = float(np.linalg.norm(self.center - other.center))
        return d - self.radius - other.radius


def diagonal_bio_entry(kind: str, l, radius: float):
    """Galerkin diagonal of one operator at degree(s) l on a sphere.

    Kinds: "V" single layer (same both sides), "K0"/"K" double layer seen from
    the exterior/interior side, "Kstar0"/"Kstar" their adjoints, "W"
    hypersingular (same both sides), "I" the Gram entry of the basis itself.
    """
    l = np.asarray(l, dtype=float)
    R = float(radius)
    two_l1 = 2.0 * l + 1.0
    if kind == "V":
        return R**3 / two_l1
    if kind == "K0" or kind == "Kstar0":
        return R**2 / (2.0 * two_l1)
    if kind == "K" or kind == "Kstar":
        return -(R**2) / (2.0 * two_l1)
    if kind == "W":
        return l * (l + 1.0) * R / two_l1
    if kind == "I":
        return R**2 * np.ones_like(l)
    raise ValueError(f"unknown operator kind {kind!r}; expected one of {DIAGONAL_KINDS}")


def _radial_single_layer(l: np.ndarray, radius: float, r: np.ndarray) -> np.ndarray:
    """Radial profile of the single-layer potential of a degree-l harmonic.

    Shape (len(l), len(r)). Continuous across the sphere: R(r/R)^l / (2l+1)
    inside, R(R/r)^(l+1) / (2l+1) outside.
    """
    l = np.asarray(l, dtype=float)[:, None]
    r = np.asarray(r, dtype=float)[None, :]
    R = float(radius)
    ratio = np.where(r <= R, r / R, R / r)
    expo = np.where(r <= R, l, l + 1.0)
    return (R / (2.0 * l + 1.0)) * ratio**expo


def single_layer_offsphere(sphere: SphereDescriptor, l: int, m: int, points) -> np.ndarray:
    """Single-layer potential of the density Y_{l,m} on the sphere, at points.

    Points are global Cartesian coordinates, shape (n, 3). Valid everywhere;
    the potential is continuous across the surface.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    r, theta, phi = cartesian_to_angles(pts - sphere.center)
    y = sh_matrix(l, theta, phi)[l * l + l + m]
    radial = _radial_single_layer(np.array([l]), sphere.radius, r)[0]
    return radial * y


def cross_v_block(
    target: SphereDescriptor,
    source: SphereDescriptor,
    max_degree: int,
    grid: QuadratureGrid,
    y_target: np.ndarray | None = None,
    chunk_size: int = 8192,
) -> np.ndarray:
    """Galerkin single-layer block: density on source, tested on target.

    Entry [pq, lm] is the integral over the target sphere of the single-layer
    potential of Y_{l,m} on the source sphere against Y_{p,q}. Evaluated by
    quadrature on the target sphere using the closed-form potential, which is
    exact up to the grid's bandwidth because the potential restricted to the
    target sphere is smooth for disjoint spheres.
    """
    if target.index == source.index:
        raise ValueError("cross block requires two distinct spheres")
    if target.gap_to(source) <= 0.0:
        raise ValueError(
            f"spheres {target.index} and {source.index} overlap or touch; "
            "the separated expansion does not apply"
        )
    nm = num_coeffs(max_degree)
    ls = mode_degrees(max_degree)
    if y_target is None:
        y_target = sh_matrix(max_degree, grid.theta_flat, grid.phi_flat)
    points = target.center + target.radius * grid.unit_points()
    r, theta, phi = cartesian_to_angles(points - source.center)

    out = np.zeros((nm, nm))
    w = grid.weights * target.radius**2
    for start in range(0, grid.n_points, chunk_size):
        sl = slice(start, min(start + chunk_size, grid.n_points))
        e = sh_matrix(max_degree, theta[sl], phi[sl])
        e *= _radial_single_layer(ls, source.radius, r[sl])
        out += (y_target[:, sl] * w[sl]) @ e.T
    return out


def derive_cross_blocks(
    v_blocks: dict[tuple[int, int], np.ndarray],
    radii: dict[int, float],
    max_degree: int,
) -> tuple[dict, dict, dict]:
    """Exterior double-layer family from single-layer cross blocks.

    For disjoint spheres the double-layer potential of Y_{l,m} equals
    -l/R_source times its single-layer potential (exterior normals), so the
    K0 block is a column scaling of V, the adjoint K*0 a row scaling, and the
    hypersingular W0 both. Returns dicts keyed like v_blocks.
    """
    ls = mode_degrees(max_degree)
    k0, kstar0, w0 = {}, {}, {}
    for (i, j), v in v_blocks.items():
        if v.shape != (ls.size, ls.size):
            raise ValueError(f"V block {(i, j)} has shape {v.shape}, expected square of {ls.size}")
        col = ls / radii[j]
        row = ls / radii[i]
        k0[i, j] = -v * col[None, :]
        kstar0[i, j] = -v * row[:, None]
        w0[i, j] = -v * (row[:, None] * col[None, :])
    return k0, kstar0, w0


class BlockCache:
    """Optional on-disk cache of assembled cross blocks, keyed by geometry."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    @staticmethod
    def key(spheres: list[SphereDescriptor], max_degree: int, quad_order: int) -> str:
        payload = {
            "geometry": [
                [round(float(c), 12) for c in s.center] + [round(float(s.radius), 12)]
                for s in sorted(spheres, key=lambda s: s.index)
            ],
            "L": int(max_degree),
            "L_quad": int(quad_order),
        }
        digest = hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()
        return digest[:24]

    def load(self, key: str) -> dict[tuple[int, int], np.ndarray] | None:
        path = self.directory / f"vblocks_{key}.npz"
        if not path.exists():
            return None
        with np.load(path) as data:
            return {
                tuple(int(p) for p in name.split("_")[1:]): data[name] for name in data.files
            }

    def save(self, key: str, v_blocks: dict[tuple[int, int], np.ndarray]) -> None:
        path = self.directory / f"vblocks_{key}.npz"
        arrays = {f"V_{i}_{j}": block for (i, j), block in v_blocks.items()}
        np.savez(path, **arrays)
