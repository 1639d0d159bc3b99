import math

import numpy as np
import pytest

from bilevelsdp.jacobian import (
    LowerLevel,
    SystemSizeError,
    b_matrix,
    build_system,
    count_minimal,
    fritz_john_residual,
    minors,
)
from bilevelsdp.poly import Polynomial, Signature


def degenerate_lower():
    """min x(z1+z2) s.t. z1^2-z2^2-(z1^2+z2^2)^2 >= 0, z1 >= 0."""
    sig = Signature(1, 2)
    x = Polynomial.variable(sig, "x", 0)
    z1 = Polynomial.variable(sig, "z", 0)
    z2 = Polynomial.variable(sig, "z", 1)
    f = x * (z1 + z2)
    g1 = z1 * z1 - z2 * z2 - (z1 * z1 + z2 * z2) ** 2
    return LowerLevel(f, [g1, z1], kind="simple"), sig


def mirrlees_lower():
    """min x^2 z s.t. -z^2 >= 0."""
    sig = Signature(1, 1)
    x = Polynomial.variable(sig, "x", 0)
    z = Polynomial.variable(sig, "z", 0)
    return LowerLevel(x * x * z, [(z * z).scale(-1.0)], kind="simple"), sig


class TestBMatrix:
    def test_degenerate_columns_at_origin(self):
        ll, _ = degenerate_lower()
        B = b_matrix(ll, [0, 1])
        vals = np.array(
            [[B[i][j].eval(x=[3.0], z=[0.0, 0.0]) for j in range(3)] for i in range(2)]
        )
        np.testing.assert_allclose(vals[:, 0], [3.0, 3.0])
        np.testing.assert_allclose(vals[:, 1], [0.0, 0.0])
        np.testing.assert_allclose(vals[:, 2], [1.0, 0.0])

    def test_empty_subset_single_column(self):
        ll, _ = degenerate_lower()
        B = b_matrix(ll, [])
        assert len(B) == 2 and len(B[0]) == 1

    def test_unconstrained_is_gradient(self):
        sig = Signature(1, 2)
        x = Polynomial.variable(sig, "x", 0)
        z1 = Polynomial.variable(sig, "z", 0)
        ll = LowerLevel(x * z1 * z1, [], kind="simple")
        B = b_matrix(ll, [])
        assert B[0][0] == x * z1.scale(2.0)

    def test_index_out_of_range(self):
        ll, _ = degenerate_lower()
        with pytest.raises(IndexError):
            b_matrix(ll, [5])


class TestMinors:
    def test_2x2_determinant(self):
        sig = Signature(1, 1)
        x = Polynomial.variable(sig, "x", 0)
        one = Polynomial.constant(sig, 1.0)
        zero = Polynomial.zero(sig)
        out = minors([[x, one], [x, zero]], 2)
        assert len(out) == 1 and out[0] == -x

    def test_size_one_returns_entries(self):
        sig = Signature(1, 2)
        x = Polynomial.variable(sig, "x", 0)
        out = minors([[x], [x]], 1)
        assert out == [x, x]

    def test_rank_oracle_on_numeric_matrices(self):
        sig = Signature(0, 1)
        rng = np.random.default_rng(42)
        for _ in range(20):
            rows, cols = 4, 3
            rank = int(rng.integers(1, 4))
            M = (rng.normal(size=(rows, rank)) @ rng.normal(size=(rank, cols)))
            mat = [
                [Polynomial.constant(sig, M[i, j]) for j in range(cols)]
                for i in range(rows)
            ]
            for size in range(1, 4):
                vals = [m.constant_term() for m in minors(mat, size)]
                numeric_rank = int(
                    np.sum(np.linalg.svd(M, compute_uv=False) > 1e-8)
                )
                all_vanish = max(abs(v) for v in vals) <= 1e-8
                assert all_vanish == (numeric_rank < size)


class TestBuildSystem:
    def test_mirrlees_zero_set_matches_paper(self):
        ll, sig = mirrlees_lower()
        system = build_system(ll)
        paper = (
            Polynomial.variable(sig, "x", 0) ** 2
            * Polynomial.variable(sig, "z", 0) ** 2
        )
        grid = np.linspace(-2, 2, 50)
        for xv in grid:
            for zv in grid:
                ours = max(abs(p.eval(x=[xv], z=[zv])) for p in system.psi)
                ref = abs(paper.eval(x=[xv], z=[zv]))
                assert (ours <= 1e-9) == (ref <= 1e-9)

    def test_degenerate_zero_set_matches_paper_triple(self):
        ll, sig = degenerate_lower()
        system = build_system(ll)
        assert system.count_actual == 3
        x = Polynomial.variable(sig, "x", 0)
        z1 = Polynomial.variable(sig, "z", 0)
        z2 = Polynomial.variable(sig, "z", 1)
        g1 = z1 * z1 - z2 * z2 - (z1 * z1 + z2 * z2) ** 2
        cubic = z1 + z2 + (z2 - z1).scale(2.0) * (z1 * z1 + z2 * z2)
        paper = [x * g1 * z1, (x * z1 * cubic).scale(-1.0), (x * g1).scale(-1.0)]
        grid = np.linspace(-1, 1, 11)
        for xv in grid:
            for z1v in grid:
                for z2v in grid:
                    ours = max(
                        abs(p.eval(x=[xv], z=[z1v, z2v])) for p in system.psi
                    )
                    ref = max(abs(p.eval(x=[xv], z=[z1v, z2v])) for p in paper)
                    assert (ours <= 1e-9) == (ref <= 1e-9)

    def test_unconstrained_system_is_gradient(self):
        sig = Signature(1, 2)
        x = Polynomial.variable(sig, "x", 0)
        z1 = Polynomial.variable(sig, "z", 0)
        z2 = Polynomial.variable(sig, "z", 1)
        f = x * z1 * z1 + z2 ** 4
        ll = LowerLevel(f, [], kind="simple")
        system = build_system(ll)
        assert system.psi == f.gradient("z")

    def test_degree_cap_drops_with_warning(self):
        ll, _ = degenerate_lower()
        with pytest.warns(UserWarning):
            capped = build_system(ll, max_psi_degree=4)
        assert capped.count_actual < 3
        assert capped.dropped_by_degree > 0

    def test_subset_cap(self):
        sig = Signature(0, 1)
        z = Polynomial.variable(sig, "z", 0)
        one = Polynomial.constant(sig, 1.0)
        gs = [one - z.scale(float(i + 1)) for i in range(13)]
        ll = LowerLevel(z * z, gs, kind="simple")
        with pytest.raises(SystemSizeError):
            build_system(ll)

    def test_degree_bound_per_subset(self):
        ll, _ = degenerate_lower()
        system = build_system(ll)
        deg_f = ll.f.degree()
        for entry in system.entries:
            comp = [j for j in range(ll.m2) if j not in entry.subset]
            cap = (
                deg_f - 1
                + sum(ll.g[j].degree() for j in comp)
                + sum(ll.g[j].degree() - 1 for j in entry.subset)
            )
            assert entry.poly.degree() <= cap


class TestCountMinimal:
    def test_paper_values(self):
        assert count_minimal(2, 2) == 4
        assert count_minimal(0, 1) == 1
        assert count_minimal(3, 3) == 15

    def test_matches_displayed_sum(self):
        for m2 in range(0, 5):
            for p in range(1, 5):
                total = 0
                for k in range(min(m2, p - 1) + 1):
                    total += math.comb(m2, k) * (p * (k + 1) - (k + 1) ** 2 + 1)
                assert count_minimal(m2, p) == total


class TestFritzJohnResidual:
    def test_degenerate_origin_is_fj(self):
        ll, _ = degenerate_lower()
        assert fritz_john_residual(ll, [2.0], [0.0, 0.0]) <= 1e-12

    def test_interior_point_not_fj(self):
        ll, _ = degenerate_lower()
        r = fritz_john_residual(ll, [2.0], [0.5, 0.1])
        grad = np.array([2.0, 2.0])
        assert r == pytest.approx(np.linalg.norm(grad), rel=1e-12)

    def test_second_fj_point(self):
        ll, _ = degenerate_lower()
        assert fritz_john_residual(ll, [2.0], [0.8990, 0.2409], tol=1e-3) <= 1e-3


class TestLemmaEquivalenceSampled:
    """K_FJ = W on a grid: max |psi| small iff the FJ residual is small."""

    def check(self, ll, x_vals, z_grid, psi=None):
        psi = psi or build_system(ll)
        bad = 0
        for xv in x_vals:
            vals = np.array(
                [
                    [max(abs(p.eval(x=xv, z=zv)) for p in psi.psi) for zv in z_grid]
                ]
            ).ravel()
            res = np.array(
                [fritz_john_residual(ll, xv, zv, tol=1e-6) for zv in z_grid]
            )
            flag_psi = vals <= 1e-6
            flag_fj = res <= 1e-4
            bad += int(np.sum(flag_psi != flag_fj))
        assert bad == 0

    def test_mirrlees(self):
        ll, _ = mirrlees_lower()
        zs = [[z] for z in np.linspace(-2, 2, 101)]
        self.check(ll, [[1.0], [0.5]], zs)

    def test_degenerate_small_grid(self):
        ll, _ = degenerate_lower()
        g = np.linspace(-1, 1, 31)
        zs = [[a, b] for a in g for b in g]
        self.check(ll, [[2.0]], zs)
