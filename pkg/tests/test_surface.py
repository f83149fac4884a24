"""Weierstrass integration, periods, branch detection, meshes, exports."""

import numpy as np
import pytest

from spinorminimal.moduli import klein4_construct, sphere4_solve
from spinorminimal.numkit import QuadraturePath
from spinorminimal.spinor import EndDivisor, SphereDomain, SpinorSection
from spinorminimal.surface import (
    GridSpec,
    SurfaceMesh,
    WeierstrassData,
    branch_points,
    enneper_data,
    export_csv,
    export_obj,
    gauss_map,
    integrate_position,
    integrate_surface,
    period_vector,
    real_period,
    total_curvature_estimate,
)


@pytest.fixture(scope="module")
def enneper_mesh():
    return integrate_surface(enneper_data(), GridSpec(nx=65, ny=65, extent=2.0), 0.0)


@pytest.fixture(scope="module")
def sphere4_data():
    fam = sphere4_solve()
    t1, t2 = fam.K_basis
    return fam, WeierstrassData(s1=t1, s2=t2)


class TestEnneper:
    def test_displacement(self, enneper_mesh):
        d = enneper_mesh.vertices[enneper_mesh.vertex_at(1.0)] \
            - enneper_mesh.vertices[enneper_mesh.vertex_at(0.0)]
        assert np.max(np.abs(d - np.array([2.0 / 3.0, 0.0, 1.0]))) < 1e-8

    def test_basepoint_at_origin(self, enneper_mesh):
        assert np.allclose(enneper_mesh.vertices[enneper_mesh.vertex_at(0.0)], 0.0)

    def test_loop_residuals(self, enneper_mesh):
        scale = enneper_mesh.metadata["mesh_scale"]
        assert enneper_mesh.metadata["loop_residual_max"] < 1e-7 * scale

    def test_entire_loops_vanish(self):
        data = enneper_data()
        for loop in (QuadraturePath.circle(0.3, 0.9), QuadraturePath.circle(-1.0, 0.4)):
            assert np.linalg.norm(real_period(period_vector(data, loop))) < 1e-10
            assert max(abs(x) for x in period_vector(data, loop)) < 1e-10

    def test_null_curve(self):
        data = enneper_data()
        rng = np.random.default_rng(2)
        z = rng.standard_normal(100) + 1j * rng.standard_normal(100)
        w = data.omega(z)
        assert np.max(np.abs(np.sum(w * w, axis=0))) < 1e-10 * max(
            1.0, float(np.max(np.abs(w)) ** 2))

    def test_no_branch_points(self):
        assert branch_points(enneper_data(), resolution=60) == []

    def test_enneper_discrete_laplacian_at_rounding_level(self):
        # Enneper's X is a cubic harmonic polynomial, so the 5-point
        # Laplacian vanishes identically; only rounding noise remains
        data = enneper_data()
        mesh = integrate_surface(data, GridSpec(nx=33, ny=33, extent=1.0), 0.0)
        grid = {complex(u): v for u, v in zip(mesh.domain_uv, mesh.vertices)}
        h = 2.0 / 32
        worst = 0.0
        for u, v in grid.items():
            nb = [u + h, u - h, u + 1j * h, u - 1j * h]
            if all(any(abs(u2 - q) < 1e-12 for u2 in grid) for q in nb):
                s = sum(grid[min(grid, key=lambda x: abs(x - q))] for q in nb)
                worst = max(worst, np.linalg.norm(s - 4 * v))
        assert worst < 1e-12


def _normalized_laplacian_max(mesh, h, window):
    idx = {complex(u): k for k, u in enumerate(mesh.domain_uv)}
    worst = 0.0
    for u, k in idx.items():
        if not window(u):
            continue
        neighbor_ids = []
        for q in (u + h, u - h, u + 1j * h, u - 1j * h):
            hit = [kk for uu, kk in idx.items() if abs(uu - q) < 1e-9]
            if not hit:
                neighbor_ids = None
                break
            neighbor_ids.append(hit[0])
        if neighbor_ids is None:
            continue
        s = sum(mesh.vertices[kk] for kk in neighbor_ids)
        worst = max(worst, np.linalg.norm(s - 4 * mesh.vertices[k]) / h**2)
    return worst


class TestHarmonicityConvergence:
    def test_second_order_on_sphere4(self, sphere4_data):
        # X is harmonic, so the h^2-normalized 5-point Laplacian is
        # O(h^2): halving h divides it by ~4 (within 20%)
        _, data = sphere4_data
        window = lambda u: -1.25 <= u.real <= -0.3 and abs(u.imag) <= 0.45
        norms = []
        for n in (41, 81):
            mesh = integrate_surface(data, GridSpec(nx=n, ny=n, extent=1.6), -1.2)
            norms.append(_normalized_laplacian_max(mesh, 2 * 1.6 / (n - 1), window))
        ratio = norms[0] / norms[1]
        assert 4.0 * 0.8 < ratio < 4.0 * 1.2

    def test_curvature_estimate_tends_to_minus_4pi(self):
        est = total_curvature_estimate(enneper_data(), GridSpec(nx=301, ny=301, extent=12.0))
        assert est == pytest.approx(-4.0 * np.pi, rel=0.01)


class TestGaussMap:
    def test_enneper_values(self):
        data = enneper_data()
        assert np.allclose(gauss_map(data, 0.0), [0, 0, -1])
        n = gauss_map(data, 1.0)  # |g| = 1: horizontal normal
        assert abs(n[2]) < 1e-12
        assert np.linalg.norm(n) == pytest.approx(1.0, abs=1e-10)

    def test_pole_of_g(self):
        dom = SphereDomain(ends=EndDivisor(()))
        s1 = SpinorSection(domain=dom, label="z", evaluate=lambda z: np.asarray(z, dtype=complex),
                           derivative=lambda z: np.ones_like(np.asarray(z, dtype=complex)),
                           expansions=())
        s2 = SpinorSection(domain=dom, label="1",
                           evaluate=lambda z: np.ones_like(np.asarray(z, dtype=complex)),
                           derivative=lambda z: np.zeros_like(np.asarray(z, dtype=complex)),
                           expansions=())
        data = WeierstrassData(s1=s1, s2=s2, end_clearance=0.1)
        assert np.allclose(gauss_map(data, 0.0), [0, 0, 1])

    def test_unit_norm_random(self, sphere4_data):
        _, data = sphere4_data
        rng = np.random.default_rng(3)
        for _ in range(20):
            u = complex(rng.uniform(-2, 2), rng.uniform(-2, 2))
            if float(data.end_distance(u)[0]) < 0.2:
                continue
            assert np.linalg.norm(gauss_map(data, u)) == pytest.approx(1.0, abs=1e-10)


class TestBranchDetection:
    def test_common_zero_detected(self):
        dom = SphereDomain(ends=EndDivisor(()))
        zsec = SpinorSection(domain=dom, label="z phi",
                             evaluate=lambda z: np.asarray(z, dtype=complex),
                             derivative=lambda z: np.ones_like(np.asarray(z, dtype=complex)),
                             expansions=())
        data = WeierstrassData(s1=zsec, s2=zsec, end_clearance=0.05)
        found = branch_points(data, resolution=60)
        assert len(found) == 1
        assert abs(found[0]) < 1e-6

    def test_sphere4_unbranched(self, sphere4_data):
        _, data = sphere4_data
        assert branch_points(data, resolution=80) == []


class TestSphere4Geometry:
    def test_end_loop_periods_vanish(self, sphere4_data):
        fam, data = sphere4_data
        for p in fam.ends.points[:3]:
            loop = QuadraturePath.circle(p, 0.3, samples=64)
            assert np.linalg.norm(real_period(period_vector(data, loop))) < 1e-7

    def test_mesh_loops(self, sphere4_data):
        _, data = sphere4_data
        mesh = integrate_surface(data, GridSpec(nx=61, ny=61, extent=2.0), -1.0 - 1.0j)
        assert mesh.metadata["loop_residual_max"] < 1e-7 * mesh.metadata["mesh_scale"]

    def test_planar_end_flattening(self, sphere4_data):
        fam, data = sphere4_data
        a = fam.ends.points[0]
        base = -1.0 - 1.0j

        def x_on_circle(radius, nsample=12):
            thetas = np.linspace(0.0, 2.0 * np.pi, nsample, endpoint=False)
            out = []
            for th in thetas:
                q = a + radius * np.exp(1j * th)
                out.append(integrate_position(
                    data, [QuadraturePath.segment(base, q)]))
            return np.array(out)

        def plane_residual(points):
            centered = points - points.mean(axis=0)
            return np.linalg.svd(centered, compute_uv=False)[-1] / np.sqrt(len(points))

        residuals = [plane_residual(x_on_circle(r)) for r in (0.2, 0.1, 0.05)]
        assert residuals[0] > residuals[1] > residuals[2]


class TestKleinGeometry:
    def test_klein_periods_and_compatibility(self):
        kb = klein4_construct()
        data = WeierstrassData(s1=kb.s1, s2=kb.s2)
        ctx = kb.ctx
        g1 = QuadraturePath.segment(-ctx.omega1, ctx.omega1, samples=128)
        i11, i22, i12 = period_vector(data, g1)
        scale = sum(abs(c) for c in kb.period_coeffs)
        assert abs(i11) < 1e-8 * scale
        assert abs(i12) < 1e-8 * scale
        assert kb.residuals["deck_conjugate"] < 1e-8

    def test_klein_branch_scan_empty(self):
        kb = klein4_construct()
        data = WeierstrassData(s1=kb.s1, s2=kb.s2)
        assert branch_points(data, resolution=90) == []


class TestExports:
    def test_obj_2x2(self, tmp_path):
        mesh = integrate_surface(enneper_data(), GridSpec(nx=2, ny=2, extent=1.0), -1.0 - 1.0j)
        path = export_obj(mesh, tmp_path / "m.obj")
        lines = path.read_text().splitlines()
        assert sum(1 for l in lines if l.startswith("v ")) == 4
        assert sum(1 for l in lines if l.startswith("f ")) == 2

    def test_obj_roundtrip(self, tmp_path, enneper_mesh):
        path = export_obj(enneper_mesh, tmp_path / "enneper.obj")
        lines = path.read_text().splitlines()
        verts = np.array([[float(x) for x in l.split()[1:]]
                          for l in lines if l.startswith("v ")])
        assert np.array_equal(verts, enneper_mesh.vertices)

    def test_empty_mesh_rejected(self, tmp_path):
        mesh = SurfaceMesh(vertices=np.zeros((0, 3)), faces=np.zeros((0, 3), dtype=int),
                           gauss=np.zeros((0, 3)), domain_uv=np.zeros(0, dtype=complex))
        with pytest.raises(ValueError):
            export_obj(mesh, tmp_path / "empty.obj")

    def test_csv(self, tmp_path):
        mesh = integrate_surface(enneper_data(), GridSpec(nx=3, ny=3, extent=1.0), 0.0)
        path = export_csv(mesh, tmp_path / "m.csv")
        lines = path.read_text().splitlines()
        assert lines[0].startswith("re_u,im_u")
        assert len(lines) == 1 + 9


class TestTorusMesh:
    def test_torus4_mesh_integrates(self):
        from spinorminimal.elliptic import build_context
        from spinorminimal.moduli import torus4_construct
        t4 = torus4_construct(build_context(1.0, 1.0j))
        data = WeierstrassData(s1=t4.s1, s2=t4.s2)
        base = 0.5 * 2 * t4.ctx.omega1 + 0.25 * 2 * t4.ctx.omega3
        # snap to a grid point: fractions k/(n-1)
        base = (24 / 48) * 2 * t4.ctx.omega1 + (12 / 48) * 2 * t4.ctx.omega3
        mesh = integrate_surface(data, GridSpec(nx=49, ny=49), base)
        assert mesh.metadata["vertex_count"] > 1000
        assert mesh.metadata["loop_residual_max"] < 1e-6 * mesh.metadata["mesh_scale"]
