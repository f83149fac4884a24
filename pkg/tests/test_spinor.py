"""Spinor sections, Omega, the qres oracle, kernels, and the spin cover."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spinorminimal.elliptic import build_context, wp, wp_prime
from spinorminimal.numkit import pfaffian, skew_rank_kernel
from spinorminimal.spinor import (
    INF,
    EndDivisor,
    SectionDataError,
    SphereDomain,
    basis_F_sphere,
    basis_F_torus_twisted,
    basis_F_torus_untwisted,
    basis_F_torus_untwisted_paired,
    check_planar_end,
    evaluation_matrix,
    extract_K,
    omega_matrix,
    omega_pair,
    omega_qres_oracle,
    rational_sphere_section,
    residue_pair,
    section_combination,
    sigma_map,
    spin_cover,
    verify_laurent_consistency,
)


@pytest.fixture(scope="module")
def ctx():
    return build_context(1.0, 1.0j)


@pytest.fixture(scope="module")
def ctx_generic():
    return build_context(1.1, 0.2 + 0.9j)


class TestSigmaAndCover:
    def test_sigma_values(self):
        assert sigma_map(1, 0) == (1, 1j, 0)
        assert sigma_map(0, 1) == (-1, 1j, 0)

    @given(st.complex_numbers(max_magnitude=10, allow_nan=False),
           st.complex_numbers(max_magnitude=10, allow_nan=False))
    @settings(max_examples=50, deadline=None)
    def test_sigma_null(self, z1, z2):
        v = sigma_map(z1, z2)
        assert abs(sum(x * x for x in v)) < 1e-12 * max(1.0, abs(z1) ** 4 + abs(z2) ** 4)

    def test_cover_identity(self):
        lam, rot = spin_cover(np.eye(2))
        assert lam == 1
        assert np.allclose(rot, np.eye(3))

    def test_cover_scalar(self):
        lam = 1.3 - 0.4j
        det, rot = spin_cover(np.diag([lam, lam]))
        assert det == pytest.approx(lam * lam)
        assert np.allclose(rot, np.eye(3))

    def test_cover_commutes_with_sigma(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            a = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
            det, rot = spin_cover(a)
            z = rng.standard_normal(2) + 1j * rng.standard_normal(2)
            lhs = np.array(sigma_map(*(a @ z)))
            rhs = det * rot @ np.array(sigma_map(*z))
            assert np.max(np.abs(lhs - rhs)) < 1e-10 * max(1.0, np.max(np.abs(lhs)))

    def test_cover_su2_gives_so3(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            z = rng.standard_normal(2) + 1j * rng.standard_normal(2)
            al, be = z / np.linalg.norm(z)
            a = np.array([[al, -np.conj(be)], [be, np.conj(al)]])
            det, rot = spin_cover(a)
            assert abs(det - 1.0) < 1e-12
            assert np.max(np.abs(rot.imag)) < 1e-12
            assert np.max(np.abs(rot.T @ rot - np.eye(3))) < 1e-10
            assert np.linalg.det(rot.real) == pytest.approx(1.0)

    def test_cover_minus_a_same(self):
        rng = np.random.default_rng(2)
        a = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        d1, r1 = spin_cover(a)
        d2, r2 = spin_cover(-a)
        assert d1 == pytest.approx(d2)
        assert np.allclose(r1, r2)

    def test_cover_inner_product_scaling(self):
        rng = np.random.default_rng(3)
        a = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        det, rot = spin_cover(a)
        t = det * rot
        x = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        y = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        assert (t @ x) @ (t @ y) == pytest.approx(det**2 * (x @ y), rel=1e-10)

    def test_cover_rejects_singular(self):
        with pytest.raises(ValueError):
            spin_cover(np.array([[1.0, 1.0], [1.0, 1.0]]))


class TestResiduePair:
    def test_values(self):
        div = EndDivisor((0.3, INF))
        dom = SphereDomain(ends=div)
        make = lambda am1, a0: rational_sphere_section(dom, [1.0], [1.0]).__class__(
            domain=dom, label="x", evaluate=lambda z: z, derivative=lambda z: 1.0,
            expansions=((complex(am1), complex(a0)), (0.0j, 0.0j)))
        s = make(2.0, 3.0)
        assert residue_pair(s, s, 0.3) == pytest.approx(12.0)
        s1 = make(1.0, 0.0)
        s2 = make(0.0, 1.0)
        assert residue_pair(s1, s2, 0.3) == pytest.approx(1.0)
        assert residue_pair(s1, s1, 0.3) == 0.0


class TestSphereBasis:
    def test_printed_omega_entries(self):
        a = 0.7 + 0.2j
        ends = (a, 1.7 - 0.4j, -0.3 + 1.1j, INF)
        basis = basis_F_sphere(EndDivisor(ends))
        n = 4
        m = omega_matrix(basis).matrix.entries
        for i in range(n - 1):
            for j in range(n - 1):
                if i != j:
                    assert m[i, j] == pytest.approx(1.0 / (ends[j] - ends[i]))
            assert m[i, n - 1] == pytest.approx(-1.0)
            assert m[n - 1, i] == pytest.approx(1.0)

    def test_independence(self):
        rng = np.random.default_rng(5)
        ends = tuple(rng.standard_normal(5) + 1j * rng.standard_normal(5)) + (INF,)
        basis = basis_F_sphere(EndDivisor(ends))
        probes = rng.standard_normal(6) * 3 + 1j * rng.standard_normal(6)
        mat = evaluation_matrix(basis, probes)
        assert np.linalg.matrix_rank(mat, tol=1e-8) == 6

    def test_two_ended_sphere(self):
        basis = basis_F_sphere(EndDivisor((0.0, INF)))
        form = omega_matrix(basis)
        assert np.allclose(form.matrix.entries, [[0, -1], [1, 0]])
        rank, kern = skew_rank_kernel(form.matrix, 1e-9)
        assert rank == 2 and len(kern) == 0
        assert extract_K(form, 1e-9) == []

    def test_three_ended_sphere_kernel_dim_one(self):
        rng = np.random.default_rng(6)
        for _ in range(5):
            ends = tuple(rng.standard_normal(2) + 1j * rng.standard_normal(2)) + (INF,)
            form = omega_matrix(basis_F_sphere(EndDivisor(ends)))
            K = extract_K(form, 1e-9)
            assert len(K) == 1  # dim K = 1 < 2: no surface

    def test_requires_infinity(self):
        with pytest.raises(ValueError):
            basis_F_sphere(EndDivisor((0.0, 1.0)))

    def test_laurent_consistency(self):
        basis = basis_F_sphere(EndDivisor((0.4 + 0.1j, -1.2, INF)))
        for s in basis:
            verify_laurent_consistency(s, 1e-6)


class TestTwistedBasis:
    def test_omega_entries_match_evaluator(self, ctx):
        a1, a2 = 0.4 + 0.33j, 1.1 + 0.7j
        basis = basis_F_torus_twisted(ctx, EndDivisor((0.0, a1, a2)))
        m = omega_matrix(basis).matrix.entries
        assert m[1, 2] == pytest.approx(complex(basis[1].evaluate(a2)))
        assert m[0, 1] == 0 and m[0, 2] == 0

    def test_zeta_closed_form_identity(self, ctx):
        a1 = 0.4 + 0.33j
        basis = basis_F_torus_twisted(ctx, EndDivisor((0.0, a1, 1.1 + 0.7j)))
        u = 0.23 + 0.51j
        lhs = basis[1].evaluate(u)
        rhs = 0.5 * (wp_prime(ctx, u) + wp_prime(ctx, a1)) / (wp(ctx, u) - wp(ctx, a1))
        assert lhs == pytest.approx(rhs, rel=1e-10)

    def test_half_lattice_omega_vanishes(self, ctx):
        div = EndDivisor((0.0, ctx.omega1, ctx.omega2, ctx.omega3))
        form = omega_matrix(basis_F_torus_twisted(ctx, div))
        assert np.max(np.abs(form.matrix.entries)) < 1e-12
        K = extract_K(form, 1e-9)
        assert len(K) == 3

    def test_three_end_generic_kernel(self, ctx):
        # generic placement: Omega != 0, so ker = H alone and K = 0
        # (with wp'(a1) + wp'(a2) = 0 instead, Omega = 0 and dim K = 2)
        a1, a2 = 0.4 + 0.33j, 1.1 + 0.7j
        assert abs(wp_prime(ctx, a1) + wp_prime(ctx, a2)) > 1e-3
        form = omega_matrix(basis_F_torus_twisted(ctx, EndDivisor((0.0, a1, a2))))
        rank, kern = skew_rank_kernel(form.matrix, 1e-9, scale=form.alpha_scale)
        assert rank == 2 and len(kern) == 1
        assert len(extract_K(form, 1e-9)) == 0  # K too small: no surface

    def test_end_on_lattice_rejected(self, ctx):
        with pytest.raises(ValueError):
            basis_F_torus_twisted(ctx, EndDivisor((0.0, 2 * ctx.omega1 + 1e-12, 0.5)))

    def test_laurent_consistency(self, ctx):
        basis = basis_F_torus_twisted(ctx, EndDivisor((0.0, 0.4 + 0.33j, 1.1 + 0.7j)))
        for s in basis:
            verify_laurent_consistency(s, 1e-6)


class TestUntwistedBasis:
    def test_skew_and_oracle(self, ctx_generic):
        ctx = ctx_generic
        div = EndDivisor((0.31 + 0.4j, 0.9 + 0.77j, 1.3 + 0.2j))
        for r in (1, 2, 3):
            basis = basis_F_torus_untwisted(ctx, r, div)
            m = omega_matrix(basis).matrix.entries
            assert np.max(np.abs(np.diagonal(m))) == 0.0
            for i in range(3):
                for j in range(3):
                    if i != j:
                        oracle = omega_qres_oracle(basis[i], basis[j])
                        assert m[i, j] == pytest.approx(oracle, abs=1e-8, rel=1e-8)

    def test_forbidden_ends_rejected(self, ctx):
        with pytest.raises(ValueError):
            basis_F_torus_untwisted(ctx, 1, EndDivisor((ctx.omega1, 0.5 + 0.5j)))

    def test_paired_block_structure_and_W(self, ctx):
        half = [0.31 + 0.4j, 0.9 + 0.77j]
        basis = basis_F_torus_untwisted_paired(ctx, 1, half)
        m = omega_matrix(basis).matrix.entries
        assert np.max(np.abs(m[:2, :2])) < 1e-13
        assert np.max(np.abs(m[2:, 2:])) < 1e-13
        # W = -2 x upper block reproduces the published entries
        W = -2.0 * m[:2, 2:]
        er = ctx.e(1)
        cp, cq = ctx.e(2) - er, ctx.e(3) - er
        p = [wp(ctx, a) - er for a in half]
        assert W[0, 1] == pytest.approx(4.0 / (p[0] - p[1]), rel=1e-10)
        assert W[1, 0] == pytest.approx(4.0 / (p[1] - p[0]), rel=1e-10)
        for i in (0, 1):
            diag = (p[i] ** 2 - cp * cq) / (p[i] * (p[i] - cp) * (p[i] - cq))
            assert W[i, i] == pytest.approx(diag, rel=1e-10)

    def test_paired_laurent_consistency(self, ctx):
        basis = basis_F_torus_untwisted_paired(ctx, 1, [0.31 + 0.4j, 0.9 + 0.77j])
        for s in basis:
            verify_laurent_consistency(s, 1e-6)


class TestOmegaPairProperties:
    def test_antisymmetry(self, ctx):
        basis = basis_F_torus_twisted(ctx, EndDivisor((0.0, 0.4 + 0.33j, 1.1 + 0.7j)))
        for i in range(3):
            for j in range(3):
                assert omega_pair(basis[i], basis[j]) == pytest.approx(
                    -omega_pair(basis[j], basis[i]), abs=1e-12)

    def test_oracle_equals_pair_on_sphere(self):
        a = (np.sqrt(3) + 1j) / 2
        basis = basis_F_sphere(EndDivisor((a, 1 / a, 0.0, INF)))
        for i in range(4):
            for j in range(4):
                pair = omega_pair(basis[i], basis[j]) if i != j else 0.0
                oracle = omega_qres_oracle(basis[i], basis[j])
                assert abs(pair - oracle) < 1e-8

    def test_mismatched_divisors_rejected(self, ctx):
        b1 = basis_F_sphere(EndDivisor((0.0, 1.0, INF)))
        b2 = basis_F_sphere(EndDivisor((0.0, 2.0, INF)))
        with pytest.raises(SectionDataError):
            omega_pair(b1[0], b2[0])


class TestCheckPlanarEnd:
    def test_phi_pair_is_not_planar_at_finite_ends(self):
        # phi has no pole at any finite end, so the test fails there
        basis = basis_F_sphere(EndDivisor((0.3, -0.9, INF)))
        phi = basis[-1]
        for k in range(2):
            assert not check_planar_end(phi, phi, k)

    def test_nonzero_alpha0_fails(self):
        basis = basis_F_sphere(EndDivisor((0.3, -0.9, INF)))
        assert not check_planar_end(basis[0], basis[1], 0.3)


class TestParityInvariant:
    def test_sphere_n_minus_dimK_even(self):
        rng = np.random.default_rng(9)
        for n in (2, 3, 4, 5, 6, 7):
            ends = tuple(rng.standard_normal(n - 1) + 1j * rng.standard_normal(n - 1)) + (INF,)
            form = omega_matrix(basis_F_sphere(EndDivisor(ends)))
            K = extract_K(form, 1e-9)
            assert (n - len(K)) % 2 == 0


class TestLargerBases:
    def test_sphere_n8_oracle_spot_checks(self):
        rng = np.random.default_rng(10)
        ends = tuple(2 * rng.standard_normal(7) + 2j * rng.standard_normal(7)) + (INF,)
        basis = basis_F_sphere(EndDivisor(ends))
        for i, j in ((0, 7), (2, 5), (7, 3), (1, 6)):
            pair = omega_pair(basis[i], basis[j])
            oracle = omega_qres_oracle(basis[i], basis[j])
            assert abs(pair - oracle) < 1e-6 * max(1.0, abs(pair))

    def test_twisted_n6_oracle_spot_checks(self, ctx):
        rng = np.random.default_rng(12)
        others = tuple(complex(x) * ctx.omega1 + complex(y) * ctx.omega3
                       for x, y in zip(rng.uniform(0.2, 1.8, 5), rng.uniform(0.2, 1.8, 5)))
        basis = basis_F_torus_twisted(ctx, EndDivisor((0.0,) + others))
        for i, j in ((0, 3), (1, 4), (5, 2)):
            pair = omega_pair(basis[i], basis[j])
            oracle = omega_qres_oracle(basis[i], basis[j])
            assert abs(pair - oracle) < 1e-6 * max(1.0, abs(pair))

    def test_torus_bases_independent(self, ctx):
        rng = np.random.default_rng(13)
        probes = (rng.uniform(0.05, 0.95, 4) * 2 * ctx.omega1
                  + rng.uniform(0.05, 0.95, 4) * 2 * ctx.omega3)
        tw = basis_F_torus_twisted(ctx, EndDivisor((0.0, 0.4 + 0.33j, 1.1 + 0.7j, 1.5 + 1.4j)))
        assert np.linalg.matrix_rank(evaluation_matrix(tw, probes), tol=1e-8) == 4
        ut = basis_F_torus_untwisted(
            ctx, 1, EndDivisor((0.31 + 0.4j, 0.9 + 0.77j, 1.3 + 0.2j)))
        probes3 = probes[:3]
        assert np.linalg.matrix_rank(evaluation_matrix(ut, probes3), tol=1e-8) == 3
        pb = basis_F_torus_untwisted_paired(ctx, 1, [0.31 + 0.4j, 0.9 + 0.77j])
        assert np.linalg.matrix_rank(evaluation_matrix(pb, probes), tol=1e-8) == 4
