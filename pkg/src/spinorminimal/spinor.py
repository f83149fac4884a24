"""Spinor sections, the spaces F/H/K, the skew form Omega, and the spin cover.

A section s is stored as its chart function f = s/phi_dom, where phi_dom
is the family's reference spinor: phi^2 = dz on the sphere, phi0^2 = du on
the twisted torus, phi_r^2 = du/wp_r(u) on the untwisted tori.  Per-end
Laurent data (alpha_-1, alpha_0) is stored in an honest local chart at
each end, i.e. one whose coordinate differential is the square of the
local reference spinor.  For the untwisted tori phi_r is not a square
root of du, so the raw coefficients (beta_-1, beta_0) of f in u convert
by the chart weight mu = 1/wp_r:

    alpha_-1 = mu(p) * beta_-1,
    alpha_0  = beta_0 + beta_-1 * mu'(p) / (2 mu(p)).

With that normalization Omega(s, t) = sum_p alpha_0(s) alpha_-1(t) agrees
with the coordinate-free quadratic-residue definition (checked against
the contour-integral oracle), is skew, and reproduces the printed sphere
and twisted-torus matrices verbatim.

The infinity end of the sphere uses the chart w = 1/z with phi = (i/w)
phi_w, the sign fixed once globally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from numpy.polynomial import polynomial as P

from .elliptic import EllipticContext, wp, wp_prime, wp_second, zeta
from .numkit import QuadraturePath, SkewMatrix, contour_integral, skew_rank_kernel

__all__ = [
    "INF",
    "is_infinity",
    "EndDivisor",
    "SphereDomain",
    "TwistedTorusDomain",
    "UntwistedTorusDomain",
    "SpinorSection",
    "OmegaForm",
    "SectionDataError",
    "sigma_map",
    "spin_cover",
    "residue_pair",
    "omega_pair",
    "omega_qres_oracle",
    "basis_F_sphere",
    "basis_F_torus_twisted",
    "basis_F_torus_untwisted",
    "basis_F_torus_untwisted_paired",
    "omega_matrix",
    "extract_K",
    "check_planar_end",
    "section_combination",
    "rational_sphere_section",
    "evaluation_matrix",
    "verify_laurent_consistency",
]

INF = complex(math.inf, 0.0)


def is_infinity(p) -> bool:
    return math.isinf(complex(p).real) or math.isinf(complex(p).imag)


class SectionDataError(ValueError):
    """Inconsistent section data (residue sum, kernel shape, end lookup)."""


@dataclass(frozen=True)
class EndDivisor:
    """Divisor of distinct marked points; INF is an explicit sphere end."""

    points: tuple

    def __post_init__(self):
        pts = tuple(complex(p) for p in self.points)
        finite = [p for p in pts if not is_infinity(p)]
        if sum(1 for p in pts if is_infinity(p)) > 1:
            raise ValueError("at most one end at infinity")
        if len(finite) >= 2:
            scale = max(1.0, max(abs(p) for p in finite))
            for i in range(len(finite)):
                for j in range(i + 1, len(finite)):
                    if abs(finite[i] - finite[j]) < 1e-12 * scale:
                        raise ValueError("ends must be pairwise distinct")
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return len(self.points)

    def index_of(self, p) -> int:
        if isinstance(p, (int, np.integer)) and not isinstance(p, bool):
            if 0 <= p < self.n:
                return int(p)
            raise SectionDataError(f"end index {p} out of range")
        p = complex(p)
        if is_infinity(p):
            for k, q in enumerate(self.points):
                if is_infinity(q):
                    return k
            raise SectionDataError("divisor has no end at infinity")
        dists = [abs(p - q) if not is_infinity(q) else math.inf for q in self.points]
        k = int(np.argmin(dists))
        if dists[k] > 1e-9 * max(1.0, abs(p)):
            raise SectionDataError(f"{p} is not an end of this divisor")
        return k


class _DomainBase:
    ends: EndDivisor

    def chart_weight(self, p):
        """(mu, mu'/(2 mu)) at a finite point: s s = f f * mu * du."""
        return 1.0 + 0.0j, 0.0 + 0.0j

    def singular_points(self):
        """Points the qres contours must stay away from (chart singularities)."""
        return [p for p in self.ends.points if not is_infinity(p)]

    def distance(self, p, q) -> float:
        return abs(p - q)

    def qres_radius(self, p) -> float:
        if is_infinity(p):
            ws = [abs(1.0 / q) for q in self.singular_points() if q != 0]
            return 0.25 * min(ws) if ws else 0.5
        ds = [self.distance(p, q) for q in self.singular_points() if self.distance(p, q) > 1e-12]
        return 0.25 * min(ds) if ds else 0.5


@dataclass(frozen=True)
class SphereDomain(_DomainBase):
    """Riemann sphere, unique spin structure, chart z with phi^2 = dz."""

    ends: EndDivisor
    genus = 0
    h_dim = 0


@dataclass(frozen=True)
class TwistedTorusDomain(_DomainBase):
    """Torus with spin structure du (Arf -1); phi0^2 = du."""

    ends: EndDivisor
    ctx: EllipticContext
    genus = 1
    h_dim = 1

    def distance(self, p, q) -> float:
        return self.ctx.lattice_distance(p - q)

    def singular_points(self):
        return list(self.ends.points)


@dataclass(frozen=True)
class UntwistedTorusDomain(_DomainBase):
    """Torus with spin structure (wp - e_r) du; phi_r^2 = du / wp_r(u)."""

    ends: EndDivisor
    ctx: EllipticContext
    r: int
    genus = 1
    h_dim = 0

    def distance(self, p, q) -> float:
        return self.ctx.lattice_distance(p - q)

    def wp_r(self, u):
        return wp(self.ctx, u) - self.ctx.e(self.r)

    def chart_weight(self, p):
        mu = 1.0 / self.wp_r(p)
        half_dlog = -wp_prime(self.ctx, p) / (2.0 * self.wp_r(p))
        return mu, half_dlog

    def singular_points(self):
        return list(self.ends.points) + [0.0, self.ctx.half_period(self.r)]


@dataclass(frozen=True)
class SpinorSection:
    """Meromorphic section of the domain's spin structure.

    evaluate/derivative act on the chart function f = s/phi_dom;
    expansions[k] = (alpha_-1, alpha_0) at the k-th end of the divisor,
    in the honest local chart (see module docstring).
    """

    domain: _DomainBase
    label: str
    evaluate: Callable
    derivative: Callable
    expansions: Optional[tuple] = None
    coefficients: Optional[tuple] = None

    def alpha(self, p):
        """(alpha_-1, alpha_0) at an end given by value or integer index."""
        k = self.domain.ends.index_of(p)
        return self.expansions[k]

    def __call__(self, u):
        return self.evaluate(u)


@dataclass(frozen=True)
class OmegaForm:
    """Matrix of Omega on a basis of F, with the known H coefficient vectors.

    alpha_scale is the natural magnitude Omega entries would have for this
    basis; rank decisions measure against it so that an Omega that is pure
    rounding noise is recognized as the zero form.
    """

    matrix: SkewMatrix
    basis: tuple
    divisor: EndDivisor
    h_dim: int
    h_vectors: tuple = ()
    alpha_scale: float = 1.0


def sigma_map(z1, z2):
    """Null vector (z1^2 - z2^2, i(z1^2 + z2^2), 2 z1 z2)."""
    z1, z2 = complex(z1), complex(z2)
    return (z1 * z1 - z2 * z2, 1j * (z1 * z1 + z2 * z2), 2.0 * z1 * z2)


_PAULI = (
    np.array([[0.0, -1.0], [-1.0, 0.0]], dtype=complex),
    np.array([[0.0, 1j], [-1j, 0.0]], dtype=complex),
    np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex),
)


def _adjugate2(a):
    return np.array([[a[1, 1], -a[0, 1]], [-a[1, 0], a[0, 0]]], dtype=complex)


def spin_cover(a):
    """Factor the induced action on C^3 as (det A) * R with R in SO(3, C).

    C^3 is identified with trace-free 2x2 matrices; the action is
    X -> A X A' with A' the classical adjoint, which covers the linear
    conformal group two-to-one (A and -A act identically).
    """
    a = np.asarray(a, dtype=complex)
    det = a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
    if det == 0:
        raise ValueError("spin_cover requires det A != 0")
    adj = _adjugate2(a)
    cols = []
    for x in _PAULI:
        y = a @ x @ adj
        x1 = -(y[0, 1] + y[1, 0]) / 2.0
        x2 = (y[0, 1] - y[1, 0]) / 2j
        x3 = y[0, 0]
        cols.append([x1, x2, x3])
    t = np.array(cols, dtype=complex).T
    return complex(det), t / det


def _alpha_scale(s: SpinorSection, t: SpinorSection) -> float:
    total = 0.0
    for (am1_s, a0_s), (am1_t, a0_t) in zip(s.expansions, t.expansions):
        total += (abs(am1_s) + abs(a0_s)) * (abs(am1_t) + abs(a0_t))
    return max(total, 1e-30)


def residue_pair(s: SpinorSection, t: SpinorSection, p):
    """res_p(s t) = alpha_-1(s) alpha_0(t) + alpha_0(s) alpha_-1(t)."""
    am1_s, a0_s = s.alpha(p)
    am1_t, a0_t = t.alpha(p)
    return am1_s * a0_t + a0_s * am1_t


def omega_pair(s: SpinorSection, t: SpinorSection, residue_tol: float = 1e-8):
    """Omega(s, t) = sum over ends of alpha_0(s) alpha_-1(t).

    The residues of the meromorphic 1-form s t must sum to zero over the
    ends; that sanity check guards against inconsistent section data.
    """
    if s.domain.ends != t.domain.ends:
        raise SectionDataError("sections must share a divisor")
    res_sum = sum(residue_pair(s, t, k) for k in range(s.domain.ends.n))
    if abs(res_sum) > residue_tol * _alpha_scale(s, t):
        raise SectionDataError(f"residue sum {abs(res_sum):.2e} over ends is not zero")
    return sum(a0_s * am1_t for (_, a0_s), (am1_t, _) in zip(s.expansions, t.expansions))


def omega_qres_oracle(s: SpinorSection, t: SpinorSection, rel_tol: float = 1e-9):
    """-1/2 sum_p qres_p(s dt - t ds) by small-circle contour quadrature.

    Independent of the Laurent tables: uses only the evaluators.  In the
    domain chart the Hopf integrand is mu(u) (f g' - g f')(u), and
    qres_p = (1/2 pi i) * integral of (u - p) times that around p.
    """
    if s.domain.ends != t.domain.ends:
        raise SectionDataError("sections must share a divisor")
    dom = s.domain
    total = 0.0 + 0.0j
    for p in dom.ends.points:
        rad = dom.qres_radius(p)
        if is_infinity(p):
            # w = 1/z chart with phi = (i/w) phi_w:  F(w) = i f(1/w) / w
            def integrand(w):
                z = 1.0 / w
                fs, ft = s.evaluate(z), t.evaluate(z)
                dfs, dft = s.derivative(z), t.derivative(z)
                F = 1j * fs / w
                G = 1j * ft / w
                dF = -1j * (dfs / w**3 + fs / w**2)
                dG = -1j * (dft / w**3 + ft / w**2)
                return w * (F * dG - G * dF)
            path = QuadraturePath.circle(0.0, rad, samples=64)
        else:
            def integrand(u):
                mu = dom.chart_weight(u)[0] if isinstance(dom, UntwistedTorusDomain) else 1.0
                return (u - p) * mu * (s.evaluate(u) * t.derivative(u)
                                       - t.evaluate(u) * s.derivative(u))
            path = QuadraturePath.circle(p, rad, samples=64)
        total += contour_integral(integrand, path, rel_tol=rel_tol) / (2j * np.pi)
    return -0.5 * total


def check_planar_end(s1: SpinorSection, s2: SpinorSection, p, tol: float = 1e-8) -> bool:
    """True iff the pair has an embedded planar end at p.

    alpha_0 of both sections vanishes and at least one has a pole;
    equivalently res_p of s1^2, s1 s2, s2^2 all vanish with a pole present.
    """
    am1_1, a0_1 = s1.alpha(p)
    am1_2, a0_2 = s2.alpha(p)
    scale = max(abs(am1_1), abs(am1_2), abs(a0_1), abs(a0_2), 1e-30)
    has_pole = max(abs(am1_1), abs(am1_2)) > tol * scale
    return has_pole and abs(a0_1) <= tol * scale and abs(a0_2) <= tol * scale


def section_combination(coefficients, sections, label="combo"):
    """Linear combination of sections over a common divisor."""
    coefficients = tuple(complex(c) for c in coefficients)
    dom = sections[0].domain
    evs = [s.evaluate for s in sections]
    ders = [s.derivative for s in sections]

    def evaluate(u):
        return sum(c * f(u) for c, f in zip(coefficients, evs))

    def derivative(u):
        return sum(c * f(u) for c, f in zip(coefficients, ders))

    n = dom.ends.n
    expansions = []
    for k in range(n):
        am1 = sum(c * s.expansions[k][0] for c, s in zip(coefficients, sections))
        a0 = sum(c * s.expansions[k][1] for c, s in zip(coefficients, sections))
        expansions.append((am1, a0))
    return SpinorSection(domain=dom, label=label, evaluate=evaluate,
                         derivative=derivative, expansions=tuple(expansions),
                         coefficients=coefficients)


# ---------------------------------------------------------------------------
# bases of F
# ---------------------------------------------------------------------------

def basis_F_sphere(divisor: EndDivisor):
    """{phi/(z - a_1), ..., phi/(z - a_{n-1}), phi} on the sphere.

    The divisor must contain infinity; it is moved to the last slot.
    alpha-data at infinity comes from the w = 1/z chart: each phi/(z-a)
    has (0, i) there and phi itself has (i, 0).
    """
    pts = list(divisor.points)
    inf_idx = [k for k, p in enumerate(pts) if is_infinity(p)]
    if not inf_idx:
        raise ValueError("sphere basis requires an end at infinity")
    finite = [p for p in pts if not is_infinity(p)]
    divisor = EndDivisor(tuple(finite) + (INF,))
    dom = SphereDomain(ends=divisor)
    sections = []
    for i, a in enumerate(finite):
        exps = []
        for j, b in enumerate(finite):
            exps.append((1.0 + 0.0j, 0.0 + 0.0j) if j == i else (0.0j, 1.0 / (b - a)))
        exps.append((0.0j, 1j))
        sections.append(SpinorSection(
            domain=dom, label=f"phi/(z-a{i + 1})",
            evaluate=(lambda a: (lambda z: 1.0 / (np.asarray(z, dtype=complex) - a)))(a),
            derivative=(lambda a: (lambda z: -1.0 / (np.asarray(z, dtype=complex) - a) ** 2))(a),
            expansions=tuple(exps)))
    exps = [(0.0j, 1.0 + 0.0j) for _ in finite] + [(1j, 0.0j)]
    sections.append(SpinorSection(
        domain=dom, label="phi",
        evaluate=lambda z: np.ones_like(np.asarray(z, dtype=complex)),
        derivative=lambda z: np.zeros_like(np.asarray(z, dtype=complex)),
        expansions=tuple(exps)))
    return sections


def basis_F_torus_twisted(ctx: EllipticContext, divisor: EndDivisor):
    """{phi0, t_1, ..., t_{n-1}} with t_i = (zeta(u-a_i) - zeta(u) + zeta(a_i)) phi0.

    The divisor must contain 0; remaining ends must be off-lattice.
    H = C phi0 for this spin structure.
    """
    pts = list(divisor.points)
    zero_idx = [k for k, p in enumerate(pts) if ctx.lattice_distance(p) < 1e-10]
    if len(zero_idx) != 1:
        raise ValueError("twisted basis requires exactly one end on the lattice (at 0)")
    others = [p for k, p in enumerate(pts) if k != zero_idx[0]]
    for p in others:
        if ctx.lattice_distance(p) < 1e-9:
            raise ValueError("nonzero ends must be off-lattice")
    divisor = EndDivisor((0.0,) + tuple(others))
    dom = TwistedTorusDomain(ends=divisor, ctx=ctx)
    sections = [SpinorSection(
        domain=dom, label="phi0",
        evaluate=lambda u: np.ones_like(np.asarray(u, dtype=complex)),
        derivative=lambda u: np.zeros_like(np.asarray(u, dtype=complex)),
        expansions=tuple((0.0j, 1.0 + 0.0j) for _ in divisor.points))]
    for i, a in enumerate(others):
        zeta_a = zeta(ctx, a)

        def evaluate(u, a=a, zeta_a=zeta_a):
            return zeta(ctx, np.asarray(u, dtype=complex) - a) - zeta(ctx, u) + zeta_a

        def derivative(u, a=a):
            return wp(ctx, u) - wp(ctx, np.asarray(u, dtype=complex) - a)

        exps = [(-1.0 + 0.0j, 0.0j)]
        for j, b in enumerate(others):
            if j == i:
                exps.append((1.0 + 0.0j, 0.0j))
            else:
                exps.append((0.0j, complex(evaluate(b))))
        sections.append(SpinorSection(domain=dom, label=f"t{i + 1}",
                                      evaluate=evaluate, derivative=derivative,
                                      expansions=tuple(exps)))
    return sections


def basis_F_torus_untwisted(ctx: EllipticContext, r: int, divisor: EndDivisor):
    """t_i = (zeta(u-a_i) - zeta(u) - zeta(w_r - a_i) + zeta(w_r)) phi_r.

    Ends must avoid 0 and w_r mod the lattice.  In the honest charts the
    pole data of t_i at a_i is (1/wp_r(a_i), 0); values at the other ends
    pick up no chart correction.
    """
    wr = ctx.half_period(r)
    for p in divisor.points:
        if ctx.lattice_distance(p) < 1e-9 or ctx.lattice_distance(p - wr) < 1e-9:
            raise ValueError("untwisted ends must avoid 0 and omega_r (mod lattice)")
    dom = UntwistedTorusDomain(ends=divisor, ctx=ctx, r=r)
    zeta_wr = zeta(ctx, wr)
    sections = []
    for i, a in enumerate(divisor.points):
        zeta_shift = -zeta(ctx, wr - a) + zeta_wr

        def evaluate(u, a=a, zeta_shift=zeta_shift):
            u = np.asarray(u, dtype=complex)
            return zeta(ctx, u - a) - zeta(ctx, u) + zeta_shift

        def derivative(u, a=a):
            u = np.asarray(u, dtype=complex)
            return wp(ctx, u) - wp(ctx, u - a)

        exps = []
        for j, b in enumerate(divisor.points):
            if j == i:
                exps.append((1.0 / dom.wp_r(a), 0.0j))
            else:
                exps.append((0.0j, complex(evaluate(b))))
        sections.append(SpinorSection(domain=dom, label=f"t{i + 1}",
                                      evaluate=evaluate, derivative=derivative,
                                      expansions=tuple(exps)))
    return sections


def basis_F_torus_untwisted_paired(ctx: EllipticContext, r: int, half_points):
    """Paired-end basis t-hat for ends {a_i} u {-a_i}.

    t-hat_i = wp_r/(wp_r - p_i) phi_r and t-hat_{m+i} = wp'/(wp_r - p_i) phi_r,
    with p_i = wp_r(a_i).  Omega in this basis is block off-diagonal; the
    textbook W matrix equals -2 times the upper block.
    """
    half_points = [complex(a) for a in half_points]
    m = len(half_points)
    wr = ctx.half_period(r)
    ends = tuple(half_points) + tuple(-a for a in half_points)
    divisor = EndDivisor(ends)
    for p in ends:
        if ctx.lattice_distance(p) < 1e-9 or ctx.lattice_distance(p - wr) < 1e-9:
            raise ValueError("untwisted ends must avoid 0 and omega_r (mod lattice)")
    dom = UntwistedTorusDomain(ends=divisor, ctx=ctx, r=r)
    er = ctx.e(r)
    pvals = [wp(ctx, a) - er for a in half_points]
    dpvals = [wp_prime(ctx, a) for a in half_points]
    ddvals = [wp_second(ctx, a) for a in half_points]
    sections = []
    for i, (a, p_i, dp_i, dd_i) in enumerate(zip(half_points, pvals, dpvals, ddvals)):
        def ev_p(u, p_i=p_i):
            pr = wp(ctx, u) - er
            return pr / (pr - p_i)

        def der_p(u, p_i=p_i):
            pr = wp(ctx, u) - er
            return -p_i * wp_prime(ctx, u) / (pr - p_i) ** 2

        exps = []
        for j, (b, p_j) in enumerate(zip(list(divisor.points), pvals + pvals)):
            if j == i:  # pole at a_i
                exps.append((1.0 / dp_i, 0.5 - p_i * dd_i / (2.0 * dp_i**2)))
            elif j == m + i:  # pole at -a_i
                exps.append((-1.0 / dp_i, 0.5 - p_i * dd_i / (2.0 * dp_i**2)))
            else:
                exps.append((0.0j, p_j / (p_j - p_i)))
        sections.append(SpinorSection(domain=dom, label=f"that{i + 1}",
                                      evaluate=ev_p, derivative=der_p,
                                      expansions=tuple(exps)))
    for i, (a, p_i, dp_i, dd_i) in enumerate(zip(half_points, pvals, dpvals, ddvals)):
        def ev_q(u, p_i=p_i):
            pr = wp(ctx, u) - er
            return wp_prime(ctx, u) / (pr - p_i)

        def der_q(u, p_i=p_i):
            pr = wp(ctx, u) - er
            dp = wp_prime(ctx, u)
            return (wp_second(ctx, u) * (pr - p_i) - dp * dp) / (pr - p_i) ** 2

        exps = []
        for j in range(2 * m):
            p_j = (pvals + pvals)[j]
            dp_j = (dpvals + dpvals)[j]
            sgn = 1.0 if j < m else -1.0
            if j == i:
                exps.append((1.0 / p_i, dd_i / (2.0 * dp_i) - dp_i / (2.0 * p_i)))
            elif j == m + i:
                exps.append((1.0 / p_i, -dd_i / (2.0 * dp_i) + dp_i / (2.0 * p_i)))
            else:
                exps.append((0.0j, sgn * dp_j / (p_j - p_i)))
        sections.append(SpinorSection(domain=dom, label=f"that{m + i + 1}",
                                      evaluate=ev_q, derivative=der_q,
                                      expansions=tuple(exps)))
    return sections


def rational_sphere_section(dom: SphereDomain, numer, denom, label="rational"):
    """Section (N(z)/D(z)) phi with analytically derived Laurent data.

    Poles of N/D must lie among the finite ends; the expansion at
    infinity comes from the w = 1/z chart series of i f(1/w)/w.
    """
    numer = np.atleast_1d(np.asarray(numer, dtype=complex))
    denom = np.atleast_1d(np.asarray(denom, dtype=complex))

    def evaluate(z):
        z = np.asarray(z, dtype=complex)
        return P.polyval(z, numer) / P.polyval(z, denom)

    dn = P.polyder(numer)
    dd = P.polyder(denom)

    def derivative(z):
        z = np.asarray(z, dtype=complex)
        D = P.polyval(z, denom)
        return (P.polyval(z, dn) * D - P.polyval(z, numer) * P.polyval(z, dd)) / D**2

    exps = []
    scale_d = max(np.abs(denom))
    for p0 in dom.ends.points:
        if is_infinity(p0):
            exps.append(_rational_infinity_alpha(numer, denom))
            continue
        if abs(P.polyval(p0, denom)) < 1e-8 * scale_d * max(1.0, abs(p0)) ** len(denom):
            quot, rem = P.polydiv(denom, np.array([-p0, 1.0], dtype=complex))
            e_val = P.polyval(p0, quot)
            am1 = P.polyval(p0, numer) / e_val
            de = P.polyder(quot)
            a0 = (P.polyval(p0, dn) * e_val - P.polyval(p0, numer) * P.polyval(p0, de)) / e_val**2
            exps.append((complex(am1), complex(a0)))
        else:
            exps.append((0.0j, complex(P.polyval(p0, numer) / P.polyval(p0, denom))))
    return SpinorSection(domain=dom, label=label, evaluate=evaluate,
                         derivative=derivative, expansions=tuple(exps))


def _rational_infinity_alpha(numer, denom):
    """(alpha_-1, alpha_0) at infinity of (N/D) phi in the w-chart."""
    dn = len(numer) - 1
    dd = len(denom) - 1
    k = dd - dn
    if k < 0:
        raise ValueError("section has a higher-order pole at infinity")
    rev_n = numer[::-1]
    rev_d = denom[::-1]
    # first two series coefficients of revN/revD at w = 0
    q0 = rev_n[0] / rev_d[0]
    q1 = ((rev_n[1] if dn >= 1 else 0.0) - q0 * (rev_d[1] if dd >= 1 else 0.0)) / rev_d[0]
    if k == 0:
        return (1j * q0, 1j * q1)
    if k == 1:
        return (0.0j, 1j * q0)
    return (0.0j, 0.0j)


def omega_matrix(basis, divisor: EndDivisor = None, h_dim: int = None) -> OmegaForm:
    """Fill Omega on the basis via omega_pair and antisymmetrize."""
    n = len(basis)
    dom = basis[0].domain
    divisor = divisor if divisor is not None else dom.ends
    if h_dim is None:
        h_dim = dom.h_dim
    m = np.zeros((n, n), dtype=complex)
    for i in range(n):
        for j in range(i + 1, n):
            m[i, j] = omega_pair(basis[i], basis[j])
            m[j, i] = omega_pair(basis[j], basis[i])
    skew = SkewMatrix.antisymmetrize(m)
    h_vectors = ()
    if h_dim == 1 and isinstance(dom, TwistedTorusDomain):
        e0 = np.zeros(n, dtype=complex)
        e0[0] = 1.0
        h_vectors = (tuple(e0),)
    scale = max(_alpha_scale(basis[i], basis[j])
                for i in range(n) for j in range(n) if i != j) if n > 1 else 1.0
    return OmegaForm(matrix=skew, basis=tuple(basis), divisor=divisor,
                     h_dim=h_dim, h_vectors=h_vectors, alpha_scale=scale)


def extract_K(form: OmegaForm, tol: float = 1e-9):
    """Kernel of Omega with the known H subspace projected out.

    Returned sections are normalized (first nonzero coefficient = 1) and
    each is verified to satisfy the K test: alpha_0 vanishes at every end.
    """
    rank, kernel = skew_rank_kernel(form.matrix, tol, scale=form.alpha_scale)
    if len(kernel) < form.h_dim:
        raise SectionDataError(
            f"kernel dimension {len(kernel)} below h_dim {form.h_dim}")
    h_basis = []
    for hv in form.h_vectors:
        h = np.asarray(hv, dtype=complex)
        for g in h_basis:
            h = h - np.vdot(g, h) * g
        norm = np.linalg.norm(h)
        if norm > 1e-12:
            h_basis.append(h / norm)
    projected = []
    for v in kernel:
        w = np.asarray(v, dtype=complex)
        for g in h_basis:
            w = w - np.vdot(g, w) * g
        projected.append(w)
    if projected:
        # rows of vh span the row space of the stacked projected vectors
        stack = np.array(projected)
        u, s, vh = np.linalg.svd(stack)
        keep = [vh[i, :] for i in range(len(s)) if s[i] > 1e-8 * max(s[0], 1e-30)]
    else:
        keep = []
    expected = len(kernel) - form.h_dim
    if len(keep) != expected:
        raise SectionDataError(
            f"K dimension {len(keep)} does not match kernel {len(kernel)} minus h_dim {form.h_dim}")
    out = []
    for idx, v in enumerate(keep):
        mags = np.abs(v)
        first = int(np.argmax(mags > 1e-8 * mags.max()))
        v = v / v[first]
        sec = section_combination(tuple(v), form.basis, label=f"K{idx + 1}")
        a0_max = max(abs(a0) for (_, a0) in sec.expansions)
        am1_max = max(abs(am1) for (am1, _) in sec.expansions)
        if a0_max > max(tol * 100, 1e-6) * max(am1_max, 1.0):
            raise SectionDataError(
                f"extracted kernel vector fails the K test (alpha0 max {a0_max:.2e})")
        out.append(sec)
    return out


def evaluation_matrix(sections, probes):
    """Matrix of section chart values at probe points (independence checks)."""
    return np.array([[s.evaluate(z) for s in sections] for z in probes], dtype=complex)


def verify_laurent_consistency(section: SpinorSection, rtol: float = 1e-6):
    """Richardson check of alpha_-1 against the evaluator at each pole end.

    Circle-averages (u - p) f(u) at radii 1e-3 and 1e-4 (in units of the
    local scale), Richardson-extrapolates in the radius, and compares with
    the stored alpha_-1 mapped back to raw chart coefficients.
    """
    dom = section.domain
    worst = 0.0
    for k, p in enumerate(dom.ends.points):
        am1, _ = section.expansions[k]
        if abs(am1) == 0.0:
            continue
        if is_infinity(p):
            def g(w):
                return w * (1j * section.evaluate(1.0 / w) / w)
            target = am1
            unit = 1.0
        else:
            mu, _ = dom.chart_weight(p)
            def g(du, p=p):
                return du * section.evaluate(p + du)
            target = am1 / mu
            unit = dom.qres_radius(p) * 4.0
        vals = []
        for rho in (1e-3 * unit, 1e-4 * unit):
            angles = np.exp(2j * np.pi * np.arange(8) / 8.0)
            vals.append(np.mean([g(rho * w) for w in angles]))
        richardson = (10.0 * vals[1] - vals[0]) / 9.0
        err = abs(richardson - target) / max(abs(target), 1e-30)
        worst = max(worst, err)
        if err > rtol:
            raise SectionDataError(
                f"Laurent data inconsistent at end {p}: {err:.2e} relative")
    return worst
