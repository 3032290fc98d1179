"""Closed-form reference solutions on a single sphere.

Everything here follows from separating the transmission problem in real
harmonics: for one sphere each mode decouples, the exterior scattered field
is a decaying solid harmonic and the interior one a regular solid harmonic,
so traces and membrane evolution reduce to scalar algebra per mode. These
routines provide the source traces used by the simulators and the reference
values used by the tests and convergence studies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .harmonics import (
    SphericalPoint,
    flat_index,
    mode_degrees,
    num_coeffs,
    sh_matrix,
)
from .mtf import TraceBlock
from .operators import SphereDescriptor

__all__ = [
    "PointSource",
    "point_source_traces",
    "affine_z_traces",
    "analytic_one_sphere",
    "linear_membrane_coeffs",
    "linear_membrane_solution",
    "linear_membrane_curvature",
    "step_error_bounds",
]


@dataclass(frozen=True)
class PointSource:
    """Monopole current source: intensity in uA at a fixed position."""

    intensity: float
    position: tuple[float, float, float]

    def potential(self, points: np.ndarray, sigma_out: float) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        dist = np.linalg.norm(pts - np.asarray(self.position), axis=1)
        return self.intensity / (4.0 * math.pi * sigma_out * dist)


def point_source_traces(
    source: PointSource, sphere: SphereDescriptor, sigma_out: float, max_degree: int
) -> tuple[np.ndarray, np.ndarray]:
    """Dirichlet and Neumann traces of the source potential on the sphere.

    The Neumann trace uses the exterior-domain normal (pointing into the
    cell). Requires the source outside the sphere; coefficients decay like
    (R / r0)^l so the truncation tail is geometric.
    """
    rel = np.asarray(source.position, dtype=float) - sphere.center
    p = SphericalPoint.from_cartesian(rel)
    if p.r <= sphere.radius:
        raise ValueError("point source lies inside the sphere")
    ls = mode_degrees(max_degree).astype(float)
    y0 = sh_matrix(max_degree, np.array([p.theta]), np.array([p.phi]))[:, 0]
    radial = (
        sphere.radius**ls / ((2.0 * ls + 1.0) * p.r ** (ls + 1.0))
    ) * (source.intensity / sigma_out)
    d = radial * y0
    n = -(ls / sphere.radius) * d
    return d, n


def affine_z_traces(
    slope: float, sphere: SphereDescriptor, max_degree: int
) -> tuple[np.ndarray, np.ndarray]:
    """Traces of the potential slope * z (global coordinate) on the sphere."""
    d = np.zeros(num_coeffs(max_degree))
    n = np.zeros(num_coeffs(max_degree))
    d[flat_index(0, 0)] = slope * float(sphere.center[2]) * math.sqrt(4.0 * math.pi)
    if max_degree >= 1:
        c10 = math.sqrt(4.0 * math.pi / 3.0)
        d[flat_index(1, 0)] = slope * sphere.radius * c10
        n[flat_index(1, 0)] = -slope * c10
    return d, n


def analytic_one_sphere(
    phi_d: np.ndarray,
    phi_n: np.ndarray,
    sphere: SphereDescriptor,
    sigma_out: float,
    sigma_in: float,
    v: np.ndarray | None = None,
) -> TraceBlock:
    """Exact trace solution of the single-sphere transmission problem.

    Solves, mode by mode, for the decaying exterior and regular interior
    solid harmonic amplitudes satisfying the potential jump v + phi_d and the
    current balance against the source Neumann trace.
    """
    phi_d = np.asarray(phi_d, dtype=float)
    nm = phi_d.size
    max_degree = int(round(math.sqrt(nm))) - 1
    ls = mode_degrees(max_degree).astype(float)
    if v is None:
        v = np.zeros(nm)
    R = sphere.radius
    denom = sigma_out * (ls + 1.0) + sigma_in * ls
    a = -(sigma_out * R * phi_n + sigma_in * ls * (v + phi_d)) / denom
    b = a + v + phi_d
    return TraceBlock(
        max_degree,
        np.array([R]),
        a[None, :],
        ((ls + 1.0) / R * a)[None, :],
        b[None, :],
        (ls / R * b)[None, :],
    )


def linear_membrane_coeffs(
    sphere: SphereDescriptor,
    sigma_out: float,
    sigma_in: float,
    c_m: float,
    r_m: float,
    phi_d: np.ndarray,
    phi_n: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-mode decay rate alpha and forcing beta of the linear membrane ODE.

    With a purely resistive membrane the transmembrane potential satisfies
    v' = -alpha v - beta g(t) per mode, where g is the source time factor.
    """
    phi_d = np.asarray(phi_d, dtype=float)
    phi_n = np.asarray(phi_n, dtype=float)
    max_degree = int(round(math.sqrt(phi_d.size))) - 1
    ls = mode_degrees(max_degree).astype(float)
    R = sphere.radius
    denom = sigma_out * (ls + 1.0) + sigma_in * ls
    alpha = 1.0 / (c_m * r_m) + sigma_out * sigma_in * ls * (ls + 1.0) / (c_m * R * denom)
    beta = (
        sigma_out
        * sigma_in
        * ls
        * ((ls + 1.0) * phi_d - R * phi_n)
        / (c_m * R * denom)
    )
    return alpha, beta


def _exp_drive_parts(alpha: np.ndarray, t: np.ndarray) -> np.ndarray:
    """(exp(-t) - exp(-alpha t)) / (alpha - 1), continuous at alpha = 1."""
    alpha = alpha[None, :]
    t = t[:, None]
    diff = alpha - 1.0
    safe = np.where(np.abs(diff) < 1e-8, 1.0, diff)
    generic = (np.exp(-t) - np.exp(-alpha * t)) / safe
    limit = t * np.exp(-t)
    return np.where(np.abs(diff) < 1e-8, limit, generic)


def linear_membrane_solution(
    alpha: np.ndarray, beta: np.ndarray, v0: np.ndarray, times, drive: str = "constant"
) -> np.ndarray:
    """Exact v(t) per mode, shape (n_times, nm), for g = 1 or g = exp(-t)."""
    t = np.atleast_1d(np.asarray(times, dtype=float))
    decay = np.exp(-alpha[None, :] * t[:, None])
    if drive == "constant":
        ratio = np.where(alpha > 0.0, beta / np.where(alpha == 0.0, 1.0, alpha), 0.0)
        return -ratio[None, :] * (1.0 - decay) + v0[None, :] * decay
    if drive == "exp":
        return -beta[None, :] * _exp_drive_parts(alpha, t) + v0[None, :] * decay
    raise ValueError(f"unknown drive {drive!r}")


def linear_membrane_curvature(
    alpha: np.ndarray, beta: np.ndarray, v0: np.ndarray, times, drive: str = "constant"
) -> np.ndarray:
    """Second time derivative of the exact solution, same shape as above."""
    t = np.atleast_1d(np.asarray(times, dtype=float))
    a = alpha[None, :]
    decay = np.exp(-a * t[:, None])
    if drive == "constant":
        ratio = np.where(alpha == 0.0, 0.0, beta / np.where(alpha == 0.0, 1.0, alpha))
        return a**2 * (ratio[None, :] + v0[None, :]) * decay
    if drive == "exp":
        diff = alpha - 1.0
        expt = np.exp(-t)[:, None]
        safe = np.where(np.abs(diff) < 1e-8, 1.0, diff)[None, :]
        generic = (
            -beta[None, :] * (expt - a**2 * decay) / safe + v0[None, :] * a**2 * decay
        )
        limit = beta[None, :] * (2.0 - t[:, None]) * expt + v0[None, :] * expt
        return np.where(np.abs(diff)[None, :] < 1e-8, limit, generic)
    raise ValueError(f"unknown drive {drive!r}")


def step_error_bounds(
    alpha: np.ndarray,
    beta: np.ndarray,
    v0: np.ndarray,
    radius: float,
    tau: float,
    n_steps: int,
    drive: str = "constant",
    n_samples: int = 33,
) -> tuple[np.ndarray, np.ndarray]:
    """Consistency bounds for midpoint averaging and extrapolation per step.

    Returns two arrays of length n_steps: tau^2/4 * max |v''| over
    [t_s, t_{s+1}] for the centered average, and 5 tau^2/16 * max |v''| over
    [t_{s-1}, t_{s+1}] for the extrapolated value (the first step uses the
    forward window). Maxima are taken in the discrete trace norm over
    n_samples points per window.
    """
    bar = np.empty(n_steps)
    hat = np.empty(n_steps)
    for s in range(n_steps):
        ts = np.linspace(s * tau, (s + 1) * tau, n_samples)
        curv = linear_membrane_curvature(alpha, beta, v0, ts, drive)
        norms = np.sqrt(radius * np.sum(curv**2, axis=1))
        bar[s] = 0.25 * tau**2 * norms.max()
        lo = max(s - 1, 0) * tau
        ts2 = np.linspace(lo, (s + 1) * tau, 2 * n_samples)
        curv2 = linear_membrane_curvature(alpha, beta, v0, ts2, drive)
        norms2 = np.sqrt(radius * np.sum(curv2**2, axis=1))
        hat[s] = (5.0 / 16.0) * tau**2 * norms2.max()
    return bar, hat
