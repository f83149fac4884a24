"""Geometry from a spinor pair: X = Re int (s1^2 - s2^2, i(s1^2 + s2^2), 2 s1 s2).

The mesh integrator lays a rectangular grid over the domain chart
(square [-L, L]^2 on the sphere, the fundamental cell on a torus), drops
cells within the end clearance, integrates the Weierstrass form along a
spanning tree of grid edges from the basepoint, and reports loop-closure
residuals as a built-in integrability check.  Edge quadrature is
Gauss-Legendre; the per-edge work parallelizes across a thread pool
capped by SPINOR_MINIMAL_THREADS, with index-keyed assembly so output is
deterministic regardless of execution order.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .numkit import QuadraturePath, contour_integral
from .spinor import EndDivisor, SpinorSection, UntwistedTorusDomain, is_infinity

__all__ = [
    "WeierstrassData",
    "GridSpec",
    "SurfaceMesh",
    "integrate_surface",
    "period_vector",
    "real_period",
    "branch_points",
    "gauss_map",
    "export_obj",
    "export_csv",
    "integrate_position",
    "enneper_data",
    "total_curvature_estimate",
]

_GL_EDGE = 12
_EDGE_NODES, _EDGE_WEIGHTS = np.polynomial.legendre.leggauss(_GL_EDGE)


def _thread_cap() -> int:
    try:
        return max(1, int(os.environ.get("SPINOR_MINIMAL_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class WeierstrassData:
    """A spinor pair with its domain and an end clearance (chart units)."""

    s1: SpinorSection
    s2: SpinorSection
    end_clearance: float = None

    def __post_init__(self):
        if self.s1.domain.ends != self.s2.domain.ends:
            raise ValueError("sections must share a divisor")
        if self.end_clearance is None:
            eps = 0.05 * self._min_end_separation()
            object.__setattr__(self, "end_clearance", eps)
        if not self.end_clearance > 0:
            raise ValueError("end clearance must be positive")

    def _min_end_separation(self) -> float:
        dom = self.s1.domain
        pts = [p for p in dom.ends.points if not is_infinity(p)]
        if len(pts) < 2:
            return 1.0
        return min(dom.distance(p, q)
                   for i, p in enumerate(pts) for q in pts[i + 1:])

    @property
    def domain(self):
        return self.s1.domain

    def form_weight(self, u):
        dom = self.domain
        if isinstance(dom, UntwistedTorusDomain):
            return 1.0 / dom.wp_r(u)
        return np.ones_like(np.asarray(u, dtype=complex))

    def omega(self, u):
        """The three 1-form coefficients of dX at u, shape (3, ...)."""
        u = np.asarray(u, dtype=complex)
        f1 = np.asarray(self.s1.evaluate(u), dtype=complex)
        f2 = np.asarray(self.s2.evaluate(u), dtype=complex)
        mu = self.form_weight(u)
        return np.stack([(f1 * f1 - f2 * f2) * mu,
                         1j * (f1 * f1 + f2 * f2) * mu,
                         2.0 * f1 * f2 * mu])

    def end_distance(self, u):
        dom = self.domain
        pts = [p for p in dom.ends.points if not is_infinity(p)]
        if not pts:
            return np.full(np.shape(np.atleast_1d(u)), np.inf)
        u = np.atleast_1d(np.asarray(u, dtype=complex))
        return np.array([min(dom.distance(x, p) for p in pts) for x in u])

    def chart_singular_distance(self, u):
        """Distance to chart singularities that are not ends (e.g. the
        lattice point and omega_r for the untwisted torus chart)."""
        dom = self.domain
        extra = [p for p in dom.singular_points()
                 if all(dom.distance(p, q) > 1e-9 for q in dom.ends.points
                        if not is_infinity(q))]
        u = np.atleast_1d(np.asarray(u, dtype=complex))
        if not extra:
            return np.full(u.shape, np.inf)
        return np.array([min(dom.distance(x, p) for p in extra) for x in u])


@dataclass(frozen=True)
class GridSpec:
    """Chart grid: nx * ny vertices; extent L means [-L, L]^2 on the sphere.

    On a torus the unit square of lattice fractions is used and extent is
    ignored.
    """

    nx: int = 65
    ny: int = 65
    extent: float = 2.0

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise ValueError("grid must have at least 2x2 vertices")


@dataclass
class SurfaceMesh:
    vertices: np.ndarray  # (N, 3) real
    faces: np.ndarray  # (M, 3) int, 0-based
    gauss: np.ndarray  # (N, 3) unit normals
    domain_uv: np.ndarray  # (N,) complex chart coordinates
    metadata: dict = field(default_factory=dict)

    def vertex_at(self, u, tol=1e-9):
        """Index of the mesh vertex at chart coordinate u."""
        d = np.abs(self.domain_uv - complex(u))
        k = int(np.argmin(d))
        if d[k] > tol:
            raise KeyError(f"no mesh vertex at {u} (closest {d[k]:.2e} away)")
        return k


def _grid_coordinates(data: WeierstrassData, grid: GridSpec):
    dom = data.domain
    if isinstance(dom, UntwistedTorusDomain) or hasattr(dom, "ctx"):
        ctx = dom.ctx
        fx = np.linspace(0.0, 1.0, grid.nx)
        fy = np.linspace(0.0, 1.0, grid.ny)
        FX, FY = np.meshgrid(fx, fy, indexing="ij")
        U = FX * (2 * ctx.omega1) + FY * (2 * ctx.omega3)
    else:
        xs = np.linspace(-grid.extent, grid.extent, grid.nx)
        ys = np.linspace(-grid.extent, grid.extent, grid.ny)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        U = X + 1j * Y
    return U


def _edge_integrals(data: WeierstrassData, starts, ends):
    """Integrate omega along straight chart edges; returns (E, 3) complex."""
    starts = np.asarray(starts, dtype=complex)
    ends = np.asarray(ends, dtype=complex)
    mid = (starts[:, None] + ends[:, None]) / 2.0
    half = (ends[:, None] - starts[:, None]) / 2.0
    nodes = mid + half * _EDGE_NODES[None, :]

    def worker(idx):
        u = nodes[idx].ravel()
        w = data.omega(u).reshape(3, len(idx), _GL_EDGE)
        return np.einsum("kej,j,e->ek", w, _EDGE_WEIGHTS, half[idx, 0])

    cap = _thread_cap()
    chunks = np.array_split(np.arange(len(starts)), max(1, min(cap * 4, len(starts))))
    chunks = [c for c in chunks if len(c)]
    if cap == 1 or len(chunks) == 1:
        results = [worker(c) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=cap) as pool:
            results = list(pool.map(worker, chunks))
    out = np.zeros((len(starts), 3), dtype=complex)
    for c, r in zip(chunks, results):
        out[c] = r
    return out


def integrate_surface(data: WeierstrassData, grid: GridSpec, basepoint) -> SurfaceMesh:
    """Spanning-tree integration of Re(omega) over the masked chart grid.

    The basepoint must be a grid vertex at clearance distance from every
    end; its image is the origin.  Loop-closure residuals over random
    grid cells are recorded in the metadata (20 cells, plus the maximum
    over all cells).
    """
    U = _grid_coordinates(data, grid)
    nx, ny = U.shape
    eps = data.end_clearance
    valid = data.end_distance(U.ravel()).reshape(U.shape) > eps
    # drop vertices sitting exactly on chart singularities (lattice point,
    # omega_r) when those are not ends; the form itself is regular there
    valid &= data.chart_singular_distance(U.ravel()).reshape(U.shape) > 1e-9

    base = complex(basepoint)
    flat_idx = np.argmin(np.abs(U.ravel() - base))
    bi, bj = np.unravel_index(int(flat_idx), U.shape)
    if not valid[bi, bj]:
        raise ValueError("basepoint is inside an end clearance disk")
    if abs(U[bi, bj] - base) > 1e-9 * max(1.0, abs(base)):
        raise ValueError("basepoint must be a grid vertex")

    # collect grid edges between valid vertices
    edges = []
    for i in range(nx):
        for j in range(ny):
            if not valid[i, j]:
                continue
            if i + 1 < nx and valid[i + 1, j]:
                edges.append(((i, j), (i + 1, j)))
            if j + 1 < ny and valid[i, j + 1]:
                edges.append(((i, j), (i, j + 1)))
    starts = np.array([U[a] for a, b in edges])
    stops = np.array([U[b] for a, b in edges])
    vals = _edge_integrals(data, starts, stops)
    edge_val = {}
    for (a, b), v in zip(edges, vals):
        edge_val[(a, b)] = v
        edge_val[(b, a)] = -v

    # BFS spanning tree from the basepoint
    X = {}
    X[(bi, bj)] = np.zeros(3)
    queue = [(bi, bj)]
    neighbors = ((1, 0), (-1, 0), (0, 1), (0, -1))
    while queue:
        cur = queue.pop(0)
        for di, dj in neighbors:
            nxt = (cur[0] + di, cur[1] + dj)
            if nxt in X or not (0 <= nxt[0] < nx and 0 <= nxt[1] < ny):
                continue
            if not valid[nxt]:
                continue
            if (cur, nxt) not in edge_val:
                continue
            X[nxt] = X[cur] + np.real(edge_val[(cur, nxt)])
            queue.append(nxt)

    index = {}
    verts, uvs, normals = [], [], []
    for (i, j), pos in sorted(X.items()):
        index[(i, j)] = len(verts)
        verts.append(pos)
        uvs.append(U[i, j])
        normals.append(gauss_map(data, U[i, j]))
    faces = []
    cells = []
    for i in range(nx - 1):
        for j in range(ny - 1):
            corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)]
            if all(c in index for c in corners):
                a, b, c, d = (index[c] for c in corners)
                faces.append((a, b, c))
                faces.append((a, c, d))
                cells.append(corners)

    # loop-closure residuals over grid cells
    def cell_residual(corners):
        a, b, c, d = corners
        loop = (edge_val.get((a, b), None), edge_val.get((b, c), None),
                edge_val.get((c, d), None), edge_val.get((d, a), None))
        if any(v is None for v in loop):
            return None
        return float(np.linalg.norm(np.real(sum(loop))))

    rng = np.random.default_rng(20)
    resid_all = [r for r in (cell_residual(c) for c in cells) if r is not None]
    sample = [resid_all[k] for k in rng.integers(0, len(resid_all), size=min(20, len(resid_all)))] \
        if resid_all else []
    span = np.ptp(np.array(verts), axis=0).max() if verts else 1.0
    mesh = SurfaceMesh(
        vertices=np.array(verts, dtype=float),
        faces=np.array(faces, dtype=int).reshape(-1, 3),
        gauss=np.array(normals, dtype=float),
        domain_uv=np.array(uvs, dtype=complex),
        metadata={
            "end_clearance": eps,
            "grid": (grid.nx, grid.ny, grid.extent),
            "basepoint": base,
            "loop_residual_max": max(resid_all) if resid_all else 0.0,
            "loop_residual_sample": sample,
            "mesh_scale": float(span),
            "vertex_count": len(verts),
        })
    return mesh


def period_vector(data: WeierstrassData, loop: QuadraturePath, rel_tol=1e-9):
    """(int s1^2, int s2^2, int s1 s2) along the loop."""
    mu = data.form_weight
    f1, f2 = data.s1.evaluate, data.s2.evaluate
    i11 = contour_integral(lambda u: f1(u) ** 2 * mu(u), loop, rel_tol=rel_tol)
    i22 = contour_integral(lambda u: f2(u) ** 2 * mu(u), loop, rel_tol=rel_tol)
    i12 = contour_integral(lambda u: f1(u) * f2(u) * mu(u), loop, rel_tol=rel_tol)
    return i11, i22, i12


def real_period(periods) -> np.ndarray:
    """Re(omega)-period vector from (int s1^2, int s2^2, int s1 s2)."""
    i11, i22, i12 = periods
    return np.array([np.real(i11 - i22), np.real(1j * (i11 + i22)),
                     np.real(2.0 * i12)])


def gauss_map(data: WeierstrassData, u):
    """Unit normal (2g, |g|^2 - 1)/(|g|^2 + 1) with g = s2/s1.

    At a pole of g (s1 = 0, s2 != 0) the limit (0, 0, 1) is returned.
    """
    f1 = complex(np.asarray(data.s1.evaluate(u), dtype=complex).reshape(()))
    f2 = complex(np.asarray(data.s2.evaluate(u), dtype=complex).reshape(()))
    if f1 == 0 and f2 == 0:
        raise ValueError("gauss map undefined at a common zero (branch point)")
    if abs(f1) <= 1e-15 * abs(f2):
        return np.array([0.0, 0.0, 1.0])
    g = f2 / f1
    den = abs(g) ** 2 + 1.0
    return np.array([2.0 * g.real / den, 2.0 * g.imag / den, (abs(g) ** 2 - 1.0) / den])


def branch_points(data: WeierstrassData, resolution: int = 120,
                  magnitude_tol: float = 1e-8, extent: float = 2.0):
    """Common zeros of (s1, s2) by grid scan plus local subdivision.

    The scanned quantity is the chart-independent weighted magnitude
    (|f1|^2 + |f2|^2) |mu|; local minima below a loose multiple of
    sqrt(magnitude_tol) survive successive rounds of 12x12 subdivision
    and are reported when the refined value drops below magnitude_tol
    times the median magnitude.  Best-effort: the resolution bounds what
    can be detected.
    """
    dom = data.domain
    U = _grid_coordinates(data, GridSpec(nx=resolution, ny=resolution, extent=extent))
    pts = U.ravel()
    spacing = abs(U[1, 0] - U[0, 0])
    keep = (data.end_distance(pts) > data.end_clearance) \
        & (data.chart_singular_distance(pts) > spacing / 4.0)
    pts = pts[keep]

    def magnitude(u):
        f1 = np.asarray(data.s1.evaluate(u), dtype=complex)
        f2 = np.asarray(data.s2.evaluate(u), dtype=complex)
        return (np.abs(f1) ** 2 + np.abs(f2) ** 2) * np.abs(data.form_weight(u))

    mags = magnitude(pts)
    norm = float(np.median(mags))
    if norm == 0:
        norm = 1.0
    h = max(abs(pts[1] - pts[0]), abs(U[1, 0] - U[0, 0]))
    candidates = pts[mags < np.sqrt(magnitude_tol) * norm * 10]
    found = []
    for c in candidates:
        u, size = c, h
        for _ in range(8):
            dx = np.linspace(-size, size, 12)
            local = (u + dx[:, None] + 1j * dx[None, :]).ravel()
            m = magnitude(local)
            u = local[int(np.argmin(m))]
            size /= 5.0
        if magnitude(np.array([u]))[0] < magnitude_tol * norm:
            if not any(dom.distance(u, f) < 10 * h for f in found):
                found.append(complex(u))
    return found


def export_obj(mesh: SurfaceMesh, path) -> Path:
    """Wavefront OBJ with 17-significant-digit vertices and normals."""
    if mesh.vertices.size == 0:
        raise ValueError("cannot export an empty mesh")
    path = Path(path)
    lines = []
    for v in mesh.vertices:
        lines.append("v %.17g %.17g %.17g" % (v[0], v[1], v[2]))
    for n in mesh.gauss:
        lines.append("vn %.17g %.17g %.17g" % (n[0], n[1], n[2]))
    for f in mesh.faces:
        lines.append("f %d//%d %d//%d %d//%d"
                     % (f[0] + 1, f[0] + 1, f[1] + 1, f[1] + 1, f[2] + 1, f[2] + 1))
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")
    return path


def export_csv(mesh: SurfaceMesh, path) -> Path:
    """CSV of (u, X, n) samples: re(u), im(u), x, y, z, nx, ny, nz."""
    path = Path(path)
    rows = ["re_u,im_u,x,y,z,nx,ny,nz"]
    for u, v, n in zip(mesh.domain_uv, mesh.vertices, mesh.gauss):
        rows.append(",".join("%.17g" % x for x in
                             (u.real, u.imag, v[0], v[1], v[2], n[0], n[1], n[2])))
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(rows) + "\n")
    return path


def integrate_position(data: WeierstrassData, paths) -> np.ndarray:
    """X-displacement Re int omega along a sequence of QuadraturePaths."""
    total = np.zeros(3)
    for path in paths:
        total = total + real_period(period_vector(data, path))
    return total


def enneper_data(clearance: float = 0.05) -> WeierstrassData:
    """Enneper data s1 = phi, s2 = z phi on the sphere (no ends)."""
    from .spinor import SphereDomain
    dom = SphereDomain(ends=EndDivisor(()))
    s1 = SpinorSection(domain=dom, label="phi",
                       evaluate=lambda z: np.ones_like(np.asarray(z, dtype=complex)),
                       derivative=lambda z: np.zeros_like(np.asarray(z, dtype=complex)),
                       expansions=())
    s2 = SpinorSection(domain=dom, label="z phi",
                       evaluate=lambda z: np.asarray(z, dtype=complex),
                       derivative=lambda z: np.ones_like(np.asarray(z, dtype=complex)),
                       expansions=())
    return WeierstrassData(s1=s1, s2=s2, end_clearance=clearance)


def total_curvature_estimate(data: WeierstrassData, grid: GridSpec) -> float:
    """Diagnostic Riemann-sum estimate of -int 4 |g'|^2/(1+|g|^2)^2 dA."""
    U = _grid_coordinates(data, grid)
    pts = U.ravel()
    keep = (data.end_distance(pts) > data.end_clearance) \
        & (data.chart_singular_distance(pts) > 1e-9)
    pts = pts[keep]
    f1 = np.asarray(data.s1.evaluate(pts), dtype=complex)
    f2 = np.asarray(data.s2.evaluate(pts), dtype=complex)
    d1 = np.asarray(data.s1.derivative(pts), dtype=complex)
    d2 = np.asarray(data.s2.derivative(pts), dtype=complex)
    gp = (d2 * f1 - f2 * d1)
    dens = 4.0 * np.abs(gp) ** 2 / (np.abs(f1) ** 2 + np.abs(f2) ** 2) ** 2
    du = abs(U[1, 0] - U[0, 0]) * abs(U[0, 1] - U[0, 0])
    return float(-np.sum(dens) * du)
