"""Real spherical harmonics, associated Legendre functions, and sphere quadrature.

Conventions used across the package:

* ``Y_{l,m}`` are real, orthonormal in L2 of the unit sphere, built from
  Condon-Shortley-phased associated Legendre functions. ``m >= 0`` carries the
  ``cos(m phi)`` factor, ``m < 0`` the ``sin(|m| phi)`` factor.
* Coefficient vectors are flat arrays of length ``(L+1)**2`` in the order
  ``(0,0), (1,-1), (1,0), (1,1), (2,-2), ...``.
* Quadrature grids pair ``L_c+1`` Gauss-Legendre nodes in ``u = cos(theta)``
  with ``2*L_c+1`` equispaced azimuths, flattened theta-major.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import roots_legendre

__all__ = [
    "SphericalPoint",
    "ShCoeffs",
    "QuadratureGrid",
    "num_coeffs",
    "mode_degrees",
    "mode_orders",
    "flat_index",
    "assoc_legendre",
    "real_sh",
    "sh_matrix",
    "make_grid",
    "sh_analysis",
    "sh_synthesis",
    "pole_values",
]


def num_coeffs(max_degree: int) -> int:
    """Number of real harmonics with degree <= max_degree."""
    return (max_degree + 1) ** 2


def flat_index(l: int, m: int) -> int:
    """Position of (l, m) in the flat coefficient order."""
    if abs(m) > l:
        raise ValueError(f"order |m|={abs(m)} exceeds degree l={l}")
    return l * l + l + m


def mode_degrees(max_degree: int) -> np.ndarray:
    """Degree l of every flat index, shape ((L+1)**2,)."""
    return np.repeat(np.arange(max_degree + 1), 2 * np.arange(max_degree + 1) + 1)


def mode_orders(max_degree: int) -> np.ndarray:
    """Order m of every flat index, shape ((L+1)**2,)."""
    return np.concatenate([np.arange(-l, l + 1) for l in range(max_degree + 1)])


@dataclass(frozen=True)
class SphericalPoint:
    """Point in spherical coordinates: radius, polar angle, azimuth."""

    r: float
    theta: float
    phi: float

    @classmethod
    def from_cartesian(cls, xyz) -> "SphericalPoint":
        x, y, z = float(xyz[0]), float(xyz[1]), float(xyz[2])
        rho = math.hypot(x, y)
        r = math.hypot(rho, z)
        if r == 0.0:
            return cls(0.0, 0.0, 0.0)
        theta = math.atan2(rho, z)
        phi = math.atan2(y, x) % (2.0 * math.pi)
        return cls(r, theta, phi)

    def to_cartesian(self) -> np.ndarray:
        st = math.sin(self.theta)
        return self.r * np.array(
            [st * math.cos(self.phi), st * math.sin(self.phi), math.cos(self.theta)]
        )


def cartesian_to_angles(points: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized (r, theta, phi) of points with shape (n, 3)."""
    pts = np.asarray(points, dtype=float)
    rho = np.hypot(pts[:, 0], pts[:, 1])
    r = np.hypot(rho, pts[:, 2])
    theta = np.arctan2(rho, pts[:, 2])
    phi = np.arctan2(pts[:, 1], pts[:, 0]) % (2.0 * math.pi)
    return r, theta, phi


@dataclass
class ShCoeffs:
    """Real spherical-harmonic coefficients of one field on one sphere."""

    max_degree: int
    radius: float
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (num_coeffs(self.max_degree),):
            raise ValueError(
                f"expected {num_coeffs(self.max_degree)} coefficients for "
                f"L={self.max_degree}, got shape {self.coeffs.shape}"
            )

    @classmethod
    def zeros(cls, max_degree: int, radius: float) -> "ShCoeffs":
        return cls(max_degree, radius, np.zeros(num_coeffs(max_degree)))

    def __getitem__(self, lm: tuple[int, int]) -> float:
        return float(self.coeffs[flat_index(*lm)])

    def norm_discrete(self) -> float:
        """sqrt(R * sum c^2), the discrete trace norm used for diagnostics."""
        return math.sqrt(self.radius * float(self.coeffs @ self.coeffs))

    def norm_l2(self) -> float:
        """sqrt(R^2 * sum c^2), the geometric L2 norm on the sphere."""
        return self.radius * math.sqrt(float(self.coeffs @ self.coeffs))

    def pad_to(self, max_degree: int) -> "ShCoeffs":
        """Zero-pad (or error on truncation) to a larger max degree."""
        if max_degree < self.max_degree:
            raise ValueError("pad_to cannot reduce the degree")
        out = np.zeros(num_coeffs(max_degree))
        out[: self.coeffs.size] = self.coeffs
        return ShCoeffs(max_degree, self.radius, out)


def pad_coeffs(coeffs: np.ndarray, max_degree_to: int) -> np.ndarray:
    """Zero-pad a flat coefficient array (last axis) to a larger degree."""
    n_to = num_coeffs(max_degree_to)
    if coeffs.shape[-1] > n_to:
        raise ValueError("target degree is smaller than the source degree")
    out = np.zeros(coeffs.shape[:-1] + (n_to,))
    out[..., : coeffs.shape[-1]] = coeffs
    return out


def _legendre_table(max_degree: int, x: np.ndarray) -> np.ndarray:
    """Orthonormalized associated Legendre values q_l^m(x) for 0<=m<=l<=L.

    Returns an array of shape (L+1, L+1, len(x)) with entry [m, l] holding
    q_l^m(x) = sqrt((2l+1)(l-m)! / (4 pi (l+m)!)) * P_l^m(x), including the
    Condon-Shortley phase. Uses the standard stable recurrences: a diagonal
    recurrence in m followed by a three-term recurrence upward in l.
    """
    x = np.asarray(x, dtype=float)
    L = max_degree
    table = np.zeros((L + 1, L + 1) + x.shape)
    table[0, 0] = 1.0 / math.sqrt(4.0 * math.pi)
    if L == 0:
        return table

    s = np.sqrt((1.0 - x) * (1.0 + x))
    for m in range(1, L + 1):
        table[m, m] = -math.sqrt((2.0 * m + 1.0) / (2.0 * m)) * s * table[m - 1, m - 1]
    for m in range(0, L):
        table[m, m + 1] = math.sqrt(2.0 * m + 3.0) * x * table[m, m]
    for m in range(0, L - 1):
        for l in range(m + 2, L + 1):
            a = math.sqrt((2.0 * l - 1.0) * (2.0 * l + 1.0) / ((l - m) * (l + m)))
            b = math.sqrt(
                (l + m - 1.0)
                * (l - m - 1.0)
                * (2.0 * l + 1.0)
                / ((l - m) * (l + m) * (2.0 * l - 3.0))
            )
            table[m, l] = a * x * table[m, l - 1] - b * table[m, l - 2]
    return table


def assoc_legendre(l: int, m: int, x):
    """Associated Legendre function P_l^m(x) with the Condon-Shortley phase.

    Evaluated through the orthonormalized recurrence and rescaled, which stays
    stable far beyond the degrees where repeated differentiation overflows.
    Accepts scalar or array x in [-1, 1].
    """
    if m < 0 or l < 0 or m > l:
        raise ValueError(f"need 0 <= m <= l, got l={l}, m={m}")
    x_arr = np.asarray(x, dtype=float)
    if np.any(np.abs(x_arr) > 1.0 + 1e-14):
        raise ValueError("argument outside [-1, 1]")
    x_arr = np.clip(x_arr, -1.0, 1.0)
    q = _legendre_table(l, np.atleast_1d(x_arr))[m, l]
    log_scale = 0.5 * (
        math.lgamma(l + m + 1)
        - math.lgamma(l - m + 1)
        + math.log(4.0 * math.pi)
        - math.log(2.0 * l + 1.0)
    )
    out = q * math.exp(log_scale)
    return float(out[0]) if np.isscalar(x) or np.ndim(x) == 0 else out.reshape(x_arr.shape)


def real_sh(l: int, m: int, theta, phi):
    """Real spherical harmonic Y_{l,m}(theta, phi), orthonormal on the unit sphere."""
    if abs(m) > l:
        raise ValueError(f"order |m|={abs(m)} exceeds degree l={l}")
    theta_arr = np.atleast_1d(np.asarray(theta, dtype=float))
    phi_arr = np.atleast_1d(np.asarray(phi, dtype=float))
    q = _legendre_table(l, np.cos(theta_arr))[abs(m), l]
    if m == 0:
        out = q * np.ones_like(phi_arr)
    elif m > 0:
        out = math.sqrt(2.0) * q * np.cos(m * phi_arr)
    else:
        out = math.sqrt(2.0) * q * np.sin(-m * phi_arr)
    if np.ndim(theta) == 0 and np.ndim(phi) == 0:
        return float(out[0])
    return out


def sh_matrix(max_degree: int, theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """All harmonics up to max_degree at the given points.

    Returns shape ((L+1)**2, npoints); row order is the flat (l, m) order.
    """
    theta = np.asarray(theta, dtype=float).ravel()
    phi = np.asarray(phi, dtype=float).ravel()
    L = max_degree
    q = _legendre_table(L, np.cos(theta))
    out = np.empty((num_coeffs(L), theta.size))
    sqrt2 = math.sqrt(2.0)
    for m in range(0, L + 1):
        if m == 0:
            for l in range(0, L + 1):
                out[flat_index(l, 0)] = q[0, l]
        else:
            cos_m = sqrt2 * np.cos(m * phi)
            sin_m = sqrt2 * np.sin(m * phi)
            for l in range(m, L + 1):
                out[flat_index(l, m)] = q[m, l] * cos_m
                out[flat_index(l, -m)] = q[m, l] * sin_m
    return out


@dataclass
class QuadratureGrid:
    """Gauss-Legendre x trapezoidal product rule on the sphere.

    theta runs over the L_c+1 Gauss-Legendre nodes of u = cos(theta)
    (ascending in u, so descending in theta), phi over 2*L_c+1 equispaced
    azimuths. Flat point index is i_theta * n_phi + i_phi. The combined
    weights integrate spherical-harmonic products exactly up to total
    bandwidth L_c and sum to 4 pi.
    """

    order: int
    theta: np.ndarray
    phi: np.ndarray
    u_weights: np.ndarray
    weights: np.ndarray
    theta_flat: np.ndarray
    phi_flat: np.ndarray

    @property
    def n_theta(self) -> int:
        return self.theta.size

    @property
    def n_phi(self) -> int:
        return self.phi.size

    @property
    def n_points(self) -> int:
        return self.weights.size

    def unit_points(self) -> np.ndarray:
        """Cartesian points on the unit sphere, shape (n_points, 3)."""
        st = np.sin(self.theta_flat)
        return np.column_stack(
            [st * np.cos(self.phi_flat), st * np.sin(self.phi_flat), np.cos(self.theta_flat)]
        )


def make_grid(order: int) -> QuadratureGrid:
    """Build the quadrature grid of the given order L_c >= 0."""
    if order < 0:
        raise ValueError("quadrature order must be >= 0")
    u, wu = roots_legendre(order + 1)
    theta = np.arccos(u)
    n_phi = 2 * order + 1
    phi = 2.0 * math.pi * np.arange(n_phi) / n_phi
    weights = np.repeat(wu, n_phi) * (2.0 * math.pi / n_phi)
    theta_flat = np.repeat(theta, n_phi)
    phi_flat = np.tile(phi, theta.size)
    return QuadratureGrid(order, theta, phi, wu, weights, theta_flat, phi_flat)


def sh_analysis(
    grid: QuadratureGrid,
    samples: np.ndarray,
    max_degree: int,
    radius: float = 1.0,
    y_matrix: np.ndarray | None = None,
) -> ShCoeffs:
    """Project point samples on the grid onto harmonics up to max_degree.

    Exact for fields band-limited to degree <= grid.order - max_degree.
    A precomputed sh_matrix for the grid can be passed to skip rebuilding it.
    """
    if max_degree > grid.order:
        raise ValueError(f"analysis degree {max_degree} exceeds grid order {grid.order}")
    samples = np.asarray(samples, dtype=float).ravel()
    if samples.size != grid.n_points:
        raise ValueError("sample count does not match the grid")
    if y_matrix is None:
        y_matrix = sh_matrix(max_degree, grid.theta_flat, grid.phi_flat)
    coeffs = y_matrix @ (grid.weights * samples)
    return ShCoeffs(max_degree, radius, coeffs)


def sh_synthesis(coeffs: ShCoeffs | np.ndarray, theta, phi, max_degree: int | None = None):
    """Evaluate a coefficient vector at points (theta, phi)."""
    if isinstance(coeffs, ShCoeffs):
        vec = coeffs.coeffs
        max_degree = coeffs.max_degree
    else:
        vec = np.asarray(coeffs, dtype=float)
        if max_degree is None:
            max_degree = int(round(math.sqrt(vec.shape[-1]))) - 1
    y = sh_matrix(max_degree, np.atleast_1d(theta), np.atleast_1d(phi))
    out = vec @ y
    if np.ndim(theta) == 0 and np.ndim(phi) == 0:
        return float(out) if out.ndim == 0 else out
    return out


def pole_values(max_degree: int) -> np.ndarray:
    """Y_{l,m} at the north pole (theta = 0): sqrt((2l+1)/4pi) for m = 0, else 0."""
    vals = np.zeros(num_coeffs(max_degree))
    for l in range(max_degree + 1):
        vals[flat_index(l, 0)] = math.sqrt((2 * l + 1) / (4.0 * math.pi))
    return vals
