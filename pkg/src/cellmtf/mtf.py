"""Local multiple-traces formulation of the transmission problem.

Unknowns are the Cauchy trace pairs of the exterior and interior potentials
on every sphere, excluding the source field. The Galerkin system in the real
harmonic basis couples, per sphere, a diagonal exterior Calderon block, a
diagonal interior Calderon block, and trace-swap identities; distinct spheres
couple only through the exterior blocks. The solvers below never form the
full four-trace matrix: the interior blocks are per-mode 2x2 and are
eliminated exactly, leaving a dense system in the exterior traces alone
(itself per-mode for a single cell).

Sign conventions: exterior normal traces are taken along the normal pointing
into the cells, interior ones along the outward radial direction. The jump
data enters with the potential difference on the Dirichlet side and the
current balance on the Neumann side.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .harmonics import ShCoeffs, make_grid, mode_degrees, num_coeffs, sh_matrix
from .operators import BlockCache, SphereDescriptor, cross_v_block, diagonal_bio_entry

__all__ = ["TraceBlock", "MtfSystem", "assemble_mtf", "product_norm_discrete"]


@dataclass
class TraceBlock:
    """Exterior and interior Cauchy trace coefficients for every cell.

    Arrays have shape (n_cells, (L+1)**2); the exterior pair belongs to the
    unbounded medium, the interior pair to the cell interiors.
    """

    max_degree: int
    radii: np.ndarray
    exterior_d: np.ndarray
    exterior_n: np.ndarray
    interior_d: np.ndarray
    interior_n: np.ndarray

    @classmethod
    def zeros(cls, max_degree: int, radii) -> "TraceBlock":
        radii = np.asarray(radii, dtype=float)
        shape = (radii.size, num_coeffs(max_degree))
        return cls(max_degree, radii, *(np.zeros(shape) for _ in range(4)))

    @property
    def n_cells(self) -> int:
        return self.radii.size

    def coeffs(self, cell: int, which: str) -> ShCoeffs:
        arr = {
            "exterior_d": self.exterior_d,
            "exterior_n": self.exterior_n,
            "interior_d": self.interior_d,
            "interior_n": self.interior_n,
        }[which]
        return ShCoeffs(self.max_degree, float(self.radii[cell]), arr[cell].copy())


def product_norm_discrete(components: np.ndarray, radii: np.ndarray) -> float:
    """Discrete norm over stacked trace components, shape (n_cells, ..., nm).

    Sums R_j * sum(c^2) over all components of every cell and takes the root.
    """
    comp = np.asarray(components, dtype=float)
    sq = (comp.reshape(comp.shape[0], -1) ** 2).sum(axis=1)
    return math.sqrt(float(np.asarray(radii) @ sq))


class MtfSystem:
    """Assembled multiple-traces operator for a fixed geometry and degree."""

    def __init__(
        self,
        spheres: list[SphereDescriptor],
        sigma_out: float,
        sigmas,
        max_degree: int,
        quad_order: int | None = None,
        cache: BlockCache | None = None,
    ):
        if sigma_out <= 0.0 or np.any(np.asarray(sigmas) <= 0.0):
            raise ValueError("conductivities must be positive")
        if len(sigmas) != len(spheres):
            raise ValueError("need one conductivity per sphere")
        for a in range(len(spheres)):
            for b in range(a + 1, len(spheres)):
                gap = spheres[a].gap_to(spheres[b])
                if gap <= 0.0:
                    raise ValueError(
                        f"spheres {spheres[a].index} and {spheres[b].index} "
                        f"overlap (gap {gap:.3g})"
                    )
        self.spheres = list(spheres)
        self.sigma_out = float(sigma_out)
        self.sigmas = np.asarray(sigmas, dtype=float)
        self.L = int(max_degree)
        self.quad_order = int(quad_order) if quad_order is not None else 2 * self.L
        if self.quad_order < self.L:
            raise ValueError("quadrature order below the trace degree")
        self.n_cells = len(spheres)
        self.nm = num_coeffs(self.L)
        self.ls = mode_degrees(self.L).astype(float)
        self.radii = np.array([s.radius for s in spheres])

        R = self.radii[:, None]
        l = self.ls[None, :]
        dV = diagonal_bio_entry("V", l, 1.0) * R**3
        dW = diagonal_bio_entry("W", l, 1.0) * R
        dK0 = R**2 / (2.0 * (2.0 * l + 1.0))
        # Per-cell per-mode 2x2 Calderon blocks, Galerkin-scaled.
        self.a0_diag = np.empty((self.n_cells, self.nm, 2, 2))
        self.a0_diag[:, :, 0, 0] = -dK0
        self.a0_diag[:, :, 0, 1] = dV
        self.a0_diag[:, :, 1, 0] = dW
        self.a0_diag[:, :, 1, 1] = dK0
        self.a1_diag = np.empty_like(self.a0_diag)
        self.a1_diag[:, :, 0, 0] = dK0
        self.a1_diag[:, :, 0, 1] = dV
        self.a1_diag[:, :, 1, 0] = dW
        self.a1_diag[:, :, 1, 1] = -dK0

        self.gram = self.radii**2
        sj = self.sigmas / self.sigma_out
        self.gx = np.stack([self.gram, -self.gram / sj], axis=1)
        self.gxinv = np.stack([self.gram, -self.gram * sj], axis=1)
        self.inv_2a1 = np.linalg.inv(2.0 * self.a1_diag)

        self.grid = make_grid(self.quad_order)
        self._y_grid = None
        self.v_cross: dict[tuple[int, int], np.ndarray] = {}
        if self.n_cells > 1:
            self._assemble_cross_blocks(cache)
        self._static_lu = None

    @property
    def y_grid(self) -> np.ndarray:
        """Harmonics up to L sampled on the quadrature grid, built on demand."""
        if self._y_grid is None:
            self._y_grid = sh_matrix(self.L, self.grid.theta_flat, self.grid.phi_flat)
        return self._y_grid

    def _assemble_cross_blocks(self, cache: BlockCache | None) -> None:
        key = None
        if cache is not None:
            key = BlockCache.key(self.spheres, self.L, self.quad_order)
            loaded = cache.load(key)
            if loaded is not None:
                self.v_cross = loaded
                return
        for a in range(self.n_cells):
            for b in range(a + 1, self.n_cells):
                block = cross_v_block(
                    self.spheres[a], self.spheres[b], self.L, self.grid, self.y_grid
                )
                self.v_cross[a, b] = block
                self.v_cross[b, a] = block.T.copy()
        if cache is not None:
            cache.save(key, self.v_cross)

    # ------------------------------------------------------------------ rhs

    def _check_fields(self, *arrays) -> list[np.ndarray]:
        out = []
        for arr in arrays:
            if arr is None:
                out.append(np.zeros((self.n_cells, self.nm)))
            else:
                arr = np.asarray(arr, dtype=float)
                if arr.shape != (self.n_cells, self.nm):
                    raise ValueError(
                        f"expected trace array of shape {(self.n_cells, self.nm)}, "
                        f"got {arr.shape}"
                    )
                out.append(arr)
        return out

    def static_rhs(self, v, phi_d, phi_n) -> tuple[np.ndarray, np.ndarray]:
        """Right-hand sides (b0, b) with shape (n_cells, 2, nm)."""
        v, phi_d, phi_n = self._check_fields(v, phi_d, phi_n)
        r2 = self.gram[:, None]
        b0 = np.stack([-r2 * (v + phi_d), -r2 * phi_n], axis=1)
        b = np.stack(
            [r2 * (v + phi_d), -r2 * phi_n / (self.sigmas / self.sigma_out)[:, None]],
            axis=1,
        )
        return b0, b

    # -------------------------------------------------------- exterior part

    def _fill_exterior_matrix(self, s: np.ndarray, scale: float) -> None:
        """Write scale * (Galerkin exterior Calderon operator) into s."""
        nm = self.nm
        for c in range(self.n_cells):
            rows = c * 2 * nm
            blk = self.a0_diag[c]
            for bi in range(2):
                for bj in range(2):
                    view = s[rows + bi * nm : rows + (bi + 1) * nm,
                             rows + bj * nm : rows + (bj + 1) * nm]
                    np.fill_diagonal(view, scale * blk[:, bi, bj])
        for (a, b), v in self.v_cross.items():
            ra = a * 2 * nm
            rb = b * 2 * nm
            row = self.ls / self.radii[a]
            col = self.ls / self.radii[b]
            s[ra : ra + nm, rb : rb + nm] = (scale * col)[None, :] * v
            s[ra : ra + nm, rb + nm : rb + 2 * nm] = scale * v
            scaled = (scale * row)[:, None] * v
            s[ra + nm : ra + 2 * nm, rb : rb + nm] = -scaled * col[None, :]
            s[ra + nm : ra + 2 * nm, rb + nm : rb + 2 * nm] = -scaled

    def apply_exterior_calderon(self, x0: np.ndarray, scale: float = 2.0) -> np.ndarray:
        """Matrix-vector product of the scaled exterior Calderon block.

        x0 has shape (n_cells, 2, nm). Never forms the dense matrix.
        """
        out = scale * np.einsum("cmij,cjm->cim", self.a0_diag, x0)
        for (a, b), v in self.v_cross.items():
            t = v @ ((self.ls / self.radii[b]) * x0[b, 0] + x0[b, 1])
            out[a, 0] += scale * t
            out[a, 1] -= scale * (self.ls / self.radii[a]) * t
        return out

    # ------------------------------------------------------------- solvers

    def _static_correction(self) -> np.ndarray:
        c = self.inv_2a1 * self.gx[:, None, None, :]
        return c * self.gxinv[:, None, :, None]

    def solve_static(self, v=None, phi_d=None, phi_n=None) -> TraceBlock:
        """Solve the static transmission problem for given jump data.

        v is the transmembrane potential (Dirichlet jump), phi_d/phi_n the
        source traces; each is (n_cells, nm) or None for zero.
        """
        b0, b = self.static_rhs(v, phi_d, phi_n)
        reduced = b0 + np.einsum(
            "ci,cmij,cjm->cim", self.gxinv, self.inv_2a1, b
        )
        if self.n_cells == 1:
            m = 2.0 * self.a0_diag - self._static_correction()
            x0 = np.linalg.solve(m, np.moveaxis(reduced, 1, 2)[..., None])[..., 0]
            x0 = np.moveaxis(x0, 2, 1)
        else:
            if self._static_lu is None:
                size = 2 * self.n_cells * self.nm
                s = np.zeros((size, size))
                self._fill_exterior_matrix(s, 2.0)
                corr = self._static_correction()
                nm = self.nm
                for c in range(self.n_cells):
                    base = c * 2 * nm
                    for bi in range(2):
                        for bj in range(2):
                            view = s[base + bi * nm : base + (bi + 1) * nm,
                                     base + bj * nm : base + (bj + 1) * nm]
                            view[np.diag_indices(nm)] -= corr[c, :, bi, bj]
                self._static_lu = lu_factor(s, overwrite_a=True)
            x0 = lu_solve(self._static_lu, reduced.reshape(-1))
            x0 = x0.reshape(self.n_cells, 2, self.nm)
        u = np.einsum(
            "cmij,cjm->cim", self.inv_2a1, b + self.gx[:, :, None] * x0
        )
        return TraceBlock(
            self.L, self.radii, x0[:, 0], x0[:, 1], u[:, 0], u[:, 1]
        )

    # ---------------------------------------------------------- diagnostics

    def calderon_errors(self, traces: TraceBlock) -> tuple[float, float]:
        """Norms of the exterior and interior Calderon residuals.

        For exact Cauchy traces (2A - I) annihilates the pair; residual
        coefficients are normalized by the Gram factor before taking the
        discrete product norm.
        """
        x0 = np.stack([traces.exterior_d, traces.exterior_n], axis=1)
        u = np.stack([traces.interior_d, traces.interior_n], axis=1)
        ext = self.apply_exterior_calderon(x0) - self.gram[:, None, None] * x0
        int_ = (
            np.einsum("cmij,cjm->cim", 2.0 * self.a1_diag, u)
            - self.gram[:, None, None] * u
        )
        ext /= self.gram[:, None, None]
        int_ /= self.gram[:, None, None]
        return (
            product_norm_discrete(ext, self.radii),
            product_norm_discrete(int_, self.radii),
        )

    def jump_error(self, traces: TraceBlock, v=None, phi_d=None, phi_n=None) -> float:
        """Residual of the transmission conditions for the given trace set."""
        v, phi_d, phi_n = self._check_fields(v, phi_d, phi_n)
        sj = (self.sigmas / self.sigma_out)[:, None]
        jd = traces.exterior_d - traces.interior_d + v + phi_d
        jn = traces.exterior_n + sj * traces.interior_n + phi_n
        return product_norm_discrete(np.stack([jd, jn], axis=1), self.radii)

    # ------------------------------------------------- dense reference form

    def assemble_full_matrix(self) -> np.ndarray:
        """Literal dense Galerkin matrix over all four traces per cell.

        Ordering: all exterior (D, N) pairs cell by cell, then all interior
        pairs. Intended for validation at small sizes; memory grows as
        (4 n_cells nm)^2.
        """
        nm = self.nm
        n = self.n_cells
        half = 2 * n * nm
        full = np.zeros((2 * half, 2 * half))
        self._fill_exterior_matrix(full[:half, :half], 2.0)
        for c in range(n):
            base = half + c * 2 * nm
            for bi in range(2):
                for bj in range(2):
                    view = full[base + bi * nm : base + (bi + 1) * nm,
                                base + bj * nm : base + (bj + 1) * nm]
                    np.fill_diagonal(view, 2.0 * self.a1_diag[c, :, bi, bj])
            for comp in range(2):
                row = c * 2 * nm + comp * nm
                col = half + c * 2 * nm + comp * nm
                idx = np.arange(nm)
                full[row + idx, col + idx] = -self.gxinv[c, comp]
                full[col + idx, row + idx] = -self.gx[c, comp]
        return full


def assemble_mtf(
    spheres, sigma_out, sigmas, max_degree, quad_order=None, cache=None
) -> MtfSystem:
    """Convenience constructor mirroring MtfSystem's signature."""
    return MtfSystem(spheres, sigma_out, sigmas, max_degree, quad_order, cache)
