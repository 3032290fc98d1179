"""Volume reconstruction tests: harmonicity, boundary traces, closed forms."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from cellmtf.analytic import PointSource, affine_z_traces, point_source_traces
from cellmtf.fields import (
    PlaneSnapshot,
    eval_exterior,
    eval_interior,
    exterior_coeffs,
    interior_coeffs,
    plane_snapshot,
)
from cellmtf.harmonics import flat_index, mode_degrees, num_coeffs, sh_matrix
from cellmtf.mtf import MtfSystem, TraceBlock
from cellmtf.operators import SphereDescriptor


def consistent_traces(max_degree, radius, rng):
    """Random trace block whose pairs already satisfy the trace relations."""
    nm = num_coeffs(max_degree)
    ls = mode_degrees(max_degree)
    c_in = rng.standard_normal(nm)
    c_out = rng.standard_normal(nm)
    return TraceBlock(
        max_degree,
        np.array([radius]),
        c_out[None, :],
        ((ls + 1.0) / radius * c_out)[None, :],
        c_in[None, :],
        (ls / radius * c_in)[None, :],
    )


def random_points(rng, n, r_lo, r_hi, center=(0.0, 0.0, 0.0)):
    direc = rng.standard_normal((n, 3))
    direc /= np.linalg.norm(direc, axis=1, keepdims=True)
    r = rng.uniform(r_lo, r_hi, size=n)
    return np.asarray(center) + direc * r[:, None]


class TestReconstruction:
    def test_interior_matches_surface_trace(self):
        rng = np.random.default_rng(7)
        R = 3.0
        traces = consistent_traces(6, R, rng)
        sphere = SphereDescriptor(0, (0.0, 0.0, 0.0), R)
        pts = random_points(rng, 40, R, R)
        got = eval_interior(traces, sphere, pts)
        rel = pts / R
        theta = np.arccos(np.clip(rel[:, 2], -1, 1))
        phi = np.arctan2(rel[:, 1], rel[:, 0])
        want = traces.interior_d[0] @ sh_matrix(6, theta, phi)
        assert_allclose(got, want, rtol=0, atol=1e-12)

    def test_exterior_matches_surface_trace(self):
        rng = np.random.default_rng(8)
        R = 3.0
        traces = consistent_traces(6, R, rng)
        sphere = SphereDescriptor(0, (0.0, 0.0, 0.0), R)
        pts = random_points(rng, 40, R, R)
        got = eval_exterior(traces, [sphere], pts)
        rel = pts / R
        theta = np.arccos(np.clip(rel[:, 2], -1, 1))
        phi = np.arctan2(rel[:, 1], rel[:, 0])
        want = traces.exterior_d[0] @ sh_matrix(6, theta, phi)
        assert_allclose(got, want, rtol=0, atol=1e-12)

    def test_coeffs_fix_consistent_pairs(self):
        rng = np.random.default_rng(9)
        R = 2.0
        traces = consistent_traces(5, R, rng)
        assert_allclose(interior_coeffs(traces, 0), traces.interior_d[0],
                        rtol=0, atol=1e-14)
        assert_allclose(exterior_coeffs(traces, 0), traces.exterior_d[0],
                        rtol=0, atol=1e-14)

    @pytest.mark.parametrize("mode", ["interior", "exterior"])
    def test_reconstruction_is_harmonic(self, mode):
        rng = np.random.default_rng(10)
        R = 5.0
        traces = consistent_traces(4, R, rng)
        sphere = SphereDescriptor(0, (0.0, 0.0, 0.0), R)
        x0 = np.array([1.1, -0.7, 2.0]) * (1.0 if mode == "interior" else 3.0)
        h = 1e-3
        stencil = [x0]
        for axis in range(3):
            for sign in (1.0, -1.0):
                p = x0.copy()
                p[axis] += sign * h
                stencil.append(p)
        pts = np.array(stencil)
        if mode == "interior":
            vals = eval_interior(traces, sphere, pts)
        else:
            vals = eval_exterior(traces, [sphere], pts)
        lap = (vals[1:].sum() - 6.0 * vals[0]) / h**2
        assert abs(lap) < 1e-6 * max(1.0, np.abs(vals).max())

    def test_exterior_far_field_decay(self):
        rng = np.random.default_rng(11)
        traces = consistent_traces(3, 1.0, rng)
        sphere = SphereDescriptor(0, (0.0, 0.0, 0.0), 1.0)
        direction = np.array([[0.3, 0.5, 0.81]])
        direction /= np.linalg.norm(direction)
        near = eval_exterior(traces, [sphere], 1000.0 * direction)[0]
        far = eval_exterior(traces, [sphere], 2000.0 * direction)[0]
        # Monopole term dominates far out, so doubling r halves u.
        assert far == pytest.approx(near / 2.0, rel=1e-3)

    def test_point_guards(self):
        rng = np.random.default_rng(12)
        traces = consistent_traces(2, 1.0, rng)
        sphere = SphereDescriptor(0, (0.0, 0.0, 0.0), 1.0)
        with pytest.raises(ValueError, match="outside"):
            eval_interior(traces, sphere, np.array([[0.0, 0.0, 1.5]]))
        with pytest.raises(ValueError, match="inside"):
            eval_exterior(traces, [sphere], np.array([[0.0, 0.0, 0.5]]))


class TestClosedForms:
    def test_interior_expansion_reproduces_coulomb_field(self):
        # The potential of an outside monopole, expanded on the sphere and
        # extended inward, must agree with the direct Coulomb formula.
        R = 7.0
        sigma = 5.0
        sphere = SphereDescriptor(0, (0.0, 0.0, 0.0), R)
        src = PointSource(2.0, (0.0, 0.0, 50.0))
        d, n = point_source_traces(src, sphere, sigma, 25)
        ls = mode_degrees(25)
        traces = TraceBlock(25, np.array([R]), 0 * d, 0 * d,
                            d[None, :], (ls / R * d)[None, :])
        assert_allclose(n, -(ls / R) * d, rtol=0, atol=1e-18)
        rng = np.random.default_rng(13)
        pts = random_points(rng, 30, 0.1, 5.0)
        got = eval_interior(traces, sphere, pts)
        want = src.potential(pts, sigma)
        assert_allclose(got, want, rtol=1e-12, atol=0)

    def test_exterior_monopole_and_dipole(self):
        R = 2.0
        sigma = 3.0
        q = 1.7
        p = -0.9
        nm = num_coeffs(1)
        d0 = np.zeros(nm)
        d0[flat_index(0, 0)] = q / (4.0 * math.pi * sigma * R) * math.sqrt(4.0 * math.pi)
        d0[flat_index(1, 0)] = p / (4.0 * math.pi * sigma * R**2) * math.sqrt(
            4.0 * math.pi / 3.0
        )
        ls = mode_degrees(1)
        traces = TraceBlock(1, np.array([R]), d0[None, :],
                            ((ls + 1.0) / R * d0)[None, :],
                            0 * d0[None, :], 0 * d0[None, :])
        sphere = SphereDescriptor(0, (0.0, 0.0, 0.0), R)
        rng = np.random.default_rng(14)
        pts = random_points(rng, 30, 2.5, 40.0)
        got = eval_exterior(traces, [sphere], pts)
        r = np.linalg.norm(pts, axis=1)
        want = q / (4.0 * math.pi * sigma * r) + p * pts[:, 2] / (
            4.0 * math.pi * sigma * r**3
        )
        assert_allclose(got, want, rtol=1e-13, atol=0)


class TestSolvedSystems:
    def one_sphere(self, L=8):
        sphere = SphereDescriptor(0, (0.0, 0.0, 0.0), 10.0)
        system = MtfSystem([sphere], 5.0, [0.455], L)
        return sphere, system

    def surface_samples(self, sphere, n, rng):
        direc = rng.standard_normal((n, 3))
        direc /= np.linalg.norm(direc, axis=1, keepdims=True)
        theta = np.arccos(np.clip(direc[:, 2], -1, 1))
        phi = np.arctan2(direc[:, 1], direc[:, 0])
        return direc, theta, phi

    def test_pointwise_jump_recovered_from_volume(self):
        sphere, system = self.one_sphere()
        rng = np.random.default_rng(15)
        v = np.zeros((1, system.nm))
        v[0, flat_index(1, 0)] = 0.4
        v[0, flat_index(2, -1)] = -0.2
        pd, pn = affine_z_traces(0.05, sphere, system.L)
        traces = system.solve_static(v=v, phi_d=pd[None, :], phi_n=pn[None, :])
        direc, theta, phi = self.surface_samples(sphere, 25, rng)
        R = sphere.radius
        u_in = eval_interior(traces, sphere, direc * R)
        u_out = eval_exterior(traces, [sphere], direc * R)
        y = sh_matrix(system.L, theta, phi)
        v_pts = v[0] @ y
        phi_pts = 0.05 * direc[:, 2] * R
        assert_allclose(u_in - (u_out + phi_pts), v_pts, rtol=0, atol=1e-8)

    def test_pointwise_flux_continuity(self):
        sphere, system = self.one_sphere()
        rng = np.random.default_rng(16)
        v = np.zeros((1, system.nm))
        v[0, flat_index(1, 1)] = 0.3
        pd, pn = affine_z_traces(0.05, sphere, system.L)
        traces = system.solve_static(v=v, phi_d=pd[None, :], phi_n=pn[None, :])
        direc, _, _ = self.surface_samples(sphere, 15, rng)
        R = sphere.radius
        h = 1e-4 * R

        def one_sided_derivative(fn, side):
            # Third-order stencil anchored at the surface, stepping into the
            # side of the membrane where the expansion is valid.
            vals = [fn(direc * (R + side * k * h)) for k in range(4)]
            return side * (
                -11 * vals[0] + 18 * vals[1] - 9 * vals[2] + 2 * vals[3]
            ) / (6 * h)

        du_in = one_sided_derivative(
            lambda p: eval_interior(traces, sphere, p), -1.0
        )
        du_out = one_sided_derivative(
            lambda p: eval_exterior(traces, [sphere], p), 1.0
        )
        # Total exterior field includes the applied drive 0.05 z.
        du_out = du_out + 0.05 * direc[:, 2]
        scale = np.abs(5.0 * du_out).max()
        assert_allclose(0.455 * du_in, 5.0 * du_out, rtol=0, atol=1e-6 * scale)

    def test_equal_conductivity_scattering_vanishes(self):
        sphere = SphereDescriptor(0, (0.0, 0.0, 0.0), 4.0)
        system = MtfSystem([sphere], 2.0, [2.0], 6)
        src = PointSource(1.0, (0.0, 0.0, 30.0))
        pd, pn = point_source_traces(src, sphere, 2.0, 6)
        traces = system.solve_static(phi_d=pd[None, :], phi_n=pn[None, :])
        pts = random_points(np.random.default_rng(17), 10, 6.0, 20.0)
        scat = eval_exterior(traces, [sphere], pts)
        assert np.abs(scat).max() < 1e-12

    def test_two_sphere_jump_recovered_pointwise(self):
        spheres = [
            SphereDescriptor(0, (0.0, 0.0, 0.0), 10.0),
            SphereDescriptor(1, (25.0, 0.0, 0.0), 10.0),
        ]
        system = MtfSystem(spheres, 5.0, [0.455, 0.455], 12)
        rng = np.random.default_rng(18)
        v = np.zeros((2, system.nm))
        v[0, flat_index(1, 0)] = 0.5
        v[1, flat_index(0, 0)] = 0.3
        traces = system.solve_static(v=v)
        for sphere in spheres:
            direc, theta, phi = self.surface_samples(sphere, 20, rng)
            R = sphere.radius
            pts_in = sphere.center + direc * R
            pts_out = sphere.center + direc * R
            u_in = eval_interior(traces, sphere, pts_in)
            u_out = eval_exterior(traces, spheres, pts_out)
            v_pts = v[sphere.index] @ sh_matrix(system.L, theta, phi)
            # Residual is the L = 12 truncation of the inter-sphere coupling.
            assert_allclose(u_in - u_out, v_pts, rtol=0, atol=1e-7)


class TestPlaneSnapshot:
    def setup_method(self):
        self.spheres = [
            SphereDescriptor(0, (0.0, 0.0, 0.0), 10.0),
            SphereDescriptor(1, (25.0, 0.0, 0.0), 10.0),
        ]
        system = MtfSystem(self.spheres, 5.0, [0.455, 0.455], 4)
        v = np.zeros((2, system.nm))
        v[:, flat_index(1, 0)] = 0.4
        self.traces = system.solve_static(v=v)

    def test_region_labels(self):
        snap = plane_snapshot(self.traces, self.spheres, "y", 0.0,
                              extent=(-15.0, 40.0, -15.0, 15.0), resolution=56)
        assert isinstance(snap, PlaneSnapshot)
        assert snap.axes == ("x", "z")
        ix0 = np.argmin(np.abs(snap.u - 0.0))
        ix1 = np.argmin(np.abs(snap.u - 25.0))
        iz0 = np.argmin(np.abs(snap.v - 0.0))
        assert snap.region[ix0, iz0] == 1
        assert snap.region[ix1, iz0] == 2
        assert snap.region[0, 0] == 0
        interior_or_fluid = snap.region >= 0
        assert np.isfinite(snap.values[interior_or_fluid]).all()

    def test_values_match_direct_evaluation(self):
        snap = plane_snapshot(self.traces, self.spheres, "y", 1.5,
                              extent=(-12.0, 12.0, -12.0, 12.0), resolution=21)
        i, j = 3, 17
        pt = np.array([[snap.u[i], 1.5, snap.v[j]]])
        want = eval_exterior(self.traces, self.spheres, pt)[0]
        assert snap.region[i, j] == 0
        assert snap.values[i, j] == pytest.approx(want, rel=1e-13)
        ic = np.argmin(np.abs(snap.u))
        jc = np.argmin(np.abs(snap.v))
        pt_in = np.array([[snap.u[ic], 1.5, snap.v[jc]]])
        assert snap.region[ic, jc] == 1
        want_in = eval_interior(self.traces, self.spheres[0], pt_in)[0]
        assert snap.values[ic, jc] == pytest.approx(want_in, rel=1e-13)

    def test_applied_added_outside_only(self):
        applied = lambda pts: 0.05 * pts[:, 2]
        base = plane_snapshot(self.traces, self.spheres, "y", 0.0,
                              extent=(-14.0, 14.0, -14.0, 14.0), resolution=15)
        snap = plane_snapshot(self.traces, self.spheres, "y", 0.0,
                              extent=(-14.0, 14.0, -14.0, 14.0), resolution=15,
                              applied=applied)
        zz = snap.v[None, :].repeat(snap.u.size, axis=0)
        diff = snap.values - base.values
        outside = snap.region == 0
        inside = snap.region > 0
        assert_allclose(diff[outside], 0.05 * zz[outside], rtol=0, atol=1e-14)
        assert_allclose(diff[inside], 0.0, rtol=0, atol=0.0)

    def test_surface_band_masked(self):
        # Put a grid line exactly on the membrane: those pixels get NaN.
        snap = plane_snapshot(self.traces, self.spheres[:1], "z", 0.0,
                              extent=(-10.0, 10.0, -10.0, 10.0), resolution=3)
        assert snap.region[0, 1] == -1
        assert np.isnan(snap.values[0, 1])
        assert snap.region[1, 1] == 1

    def test_default_extent_covers_all_spheres(self):
        snap = plane_snapshot(self.traces, self.spheres, "y", 0.0, resolution=11)
        assert snap.u[0] <= -15.0 and snap.u[-1] >= 40.0

    def test_normal_axis_validation(self):
        with pytest.raises(ValueError, match="normal_axis"):
            plane_snapshot(self.traces, self.spheres, "w", 0.0)
