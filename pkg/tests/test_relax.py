import itertools
import math

import numpy as np
import pytest

from bilevelsdp import relax
from bilevelsdp.poly import Polynomial, Signature, basis_size, monomial_exponents
from bilevelsdp.relax import (
    MomentSequence,
    PopOptions,
    PopProblem,
    build,
    extract,
    flat_truncation,
    solve,
    solve_pop,
)

SIG_Z = Signature(0, 1)
Z = Polynomial.variable(SIG_Z, "z", 0)
ONE_Z = Polynomial.constant(SIG_Z, 1.0)


def zpop(objective, eqs=(), ineqs=()):
    return PopProblem(objective, list(eqs), list(ineqs), [("z", 0)])


class TestBuild:
    def test_unconstrained_univariate_sizes(self):
        rel = build(zpop(Z * Z), 1)
        assert rel.moment_side == 2  # basis {1, z}
        assert rel.localizing_sides == []

    def test_table3_lower_level_sizes(self):
        # z^3/3 - x z at fixed x, z in [-1,1]: k=2 -> moment side 3, loc side 2
        f = (Z**3).scale(1 / 3) - Z.scale(0.25)
        rel = build(zpop(f, ineqs=[ONE_Z - Z * Z]), 2)
        assert rel.moment_side == 3
        assert rel.localizing_sides == [2]

    def test_equality_multiplier_dimension(self):
        # an equality of degree d contributes dim R[z]_{2k-d} multiplier rows
        for d, k in ((2, 2), (3, 3), (4, 3)):
            psi = Z**d
            rel = build(zpop(Z * Z, eqs=[psi]), k)
            assert rel.eq_row_counts == [basis_size(1, 2 * k - d)]

    def test_order_too_small(self):
        with pytest.raises(relax.OrderTooSmall):
            build(zpop(Z**4), 1)


class TestSolve:
    def test_min_square(self):
        rel = build(zpop(Z * Z), 1)
        bound, seq, st = solve(rel)
        assert st == "ok"
        assert bound == pytest.approx(0.0, abs=1e-7)
        assert seq.values[seq.index[(2,)]] == pytest.approx(0.0, abs=1e-6)

    def test_cubic_on_box(self):
        f = (Z**3).scale(1 / 3) - Z.scale(0.25)
        rel = build(zpop(f, ineqs=[ONE_Z - Z * Z]), 2)
        bound, seq, st = solve(rel)
        assert st == "ok"
        assert bound == pytest.approx(-1 / 12, abs=1e-6)

    def test_bounds_nondecreasing_in_order(self):
        f = (Z**3).scale(1 / 3) - Z.scale(0.25)
        pop = zpop(f, ineqs=[ONE_Z - Z * Z])
        prev = -math.inf
        for k in (2, 3, 4):
            bound, _, st = solve(build(pop, k))
            assert st == "ok"
            assert bound >= prev - 1e-7
            prev = bound


def dirac_moments(points, weights, nvars, k):
    monos = monomial_exponents(nvars, 2 * k)
    vals = np.zeros(len(monos))
    for w, pt in zip(weights, points):
        vals += w * np.array([np.prod(np.power(pt, m)) for m in monos])
    return MomentSequence(
        values=vals,
        nvars=nvars,
        order=k,
        monomials=monos,
        index={m: i for i, m in enumerate(monos)},
    )


class TestFlatTruncation:
    def test_rank_one_quadratic(self):
        pop = zpop((Z - ONE_Z) * (Z - ONE_Z))
        bound, seq, st = solve(build(pop, 1))
        assert st == "ok"
        ft = flat_truncation(seq, 1, 1)
        assert ft is not None and ft[1] == 1

    def test_planted_atoms_flat_with_rank(self):
        rng = np.random.default_rng(5)
        for r in (1, 2, 3):
            pts = rng.uniform(-1, 1, size=(r, 2))
            wts = np.full(r, 1.0 / r)
            seq = dirac_moments(pts, wts, 2, 3)
            ft = flat_truncation(seq, 3, 1)
            assert ft is not None
            assert ft[1] == r


class TestExtract:
    def test_single_dirac(self):
        seq = dirac_moments(np.array([[0.7]]), [1.0], 1, 2)
        pts = extract(seq, 2, 1)
        assert len(pts) == 1
        assert pts[0][0] == pytest.approx(0.7, abs=1e-8)

    def test_planted_mixture_recovery(self):
        rng = np.random.default_rng(12)
        for r in (2, 3):
            pts = rng.uniform(-1, 1, size=(r, 2))
            wts = np.full(r, 1.0 / r)
            seq = dirac_moments(pts, wts, 2, 3)
            t, rank = flat_truncation(seq, 3, 1)
            got = extract(seq, t, rank)
            assert len(got) == r
            got_sorted = sorted(got, key=lambda q: tuple(q))
            ref_sorted = sorted(pts, key=lambda q: tuple(q))
            for a, b in zip(got_sorted, ref_sorted):
                np.testing.assert_allclose(a, b, atol=1e-6)


class TestSolvePop:
    def test_unconstrained_quadratic_certified_at_k1(self):
        res = solve_pop(zpop((Z - ONE_Z) ** 2), PopOptions(k_max_order=1))
        assert res.status == relax.GLOBAL_CERTIFIED
        assert res.bound == pytest.approx(0.0, abs=1e-6)
        assert res.minimizers[0][0] == pytest.approx(1.0, abs=1e-4)
        assert res.certified_order == 1

    def test_gbpp_lower_level_at_x1(self):
        # min (z-5)^2 s.t. 0 <= z <= 6, z <= 3, 2z >= 3, 2z <= 13 -> z = 3
        five = Polynomial.constant(SIG_Z, 5.0)
        gs = [
            Z,
            Polynomial.constant(SIG_Z, 6.0) - Z,
            Polynomial.constant(SIG_Z, 3.0) - Z,
            Z.scale(2.0) - Polynomial.constant(SIG_Z, 3.0),
            Polynomial.constant(SIG_Z, 13.0) - Z.scale(2.0),
        ]
        res = solve_pop(zpop((Z - five) ** 2, ineqs=gs))
        assert res.status == relax.GLOBAL_CERTIFIED
        assert res.bound == pytest.approx(4.0, abs=1e-5)
        assert res.minimizers[0][0] == pytest.approx(3.0, abs=1e-4)

    def test_ablation_lower_level_two_minimizers(self):
        # min -x z^2 + z^4/2 at x = 0.1886, z in [-1,1]: minimizers +-sqrt(x)
        xv = 0.1886
        f = (Z * Z).scale(-xv) + (Z**4).scale(0.5)
        res = solve_pop(zpop(f, ineqs=[ONE_Z - Z * Z]))
        assert res.status == relax.GLOBAL_CERTIFIED
        assert len(res.minimizers) == 2
        got = sorted(p[0] for p in res.minimizers)
        root = math.sqrt(xv)
        assert got[0] == pytest.approx(-root, abs=1e-4)
        assert got[1] == pytest.approx(root, abs=1e-4)

    def test_infeasible_pop(self):
        # z >= 1 and z <= -1 simultaneously
        gs = [Z - ONE_Z, (Z + ONE_Z).scale(-1.0)]
        res = solve_pop(zpop(Z, ineqs=gs), PopOptions(k_max_order=3))
        assert res.status == relax.INFEASIBLE

    def test_ball_option_bounds_unconstrained_linear(self):
        res = solve_pop(zpop(Z), PopOptions(ball_radius=2.0, k_max_order=2))
        assert res.status == relax.GLOBAL_CERTIFIED
        assert res.bound == pytest.approx(-2.0, abs=1e-5)


def grid_oracle(pop: PopProblem, box, step=1e-4):
    """Feasible-grid minimum for POPs without equality constraints."""
    assert not pop.eqs
    lo, hi = box
    zs = np.arange(lo, hi + step, step)
    pts = zs.reshape(-1, 1)
    feas = np.ones(len(zs), dtype=bool)
    sig = pop.objective.sig
    for q in pop.ineqs:
        vals = q.eval_many(z=pts)
        feas &= vals >= -1e-12
    if not feas.any():
        return math.inf
    obj = pop.objective.eval_many(z=pts)[feas]
    return float(obj.min())


class TestLowerBoundProperty:
    def test_bound_below_grid_oracle(self):
        cases = [
            zpop((Z**3).scale(1 / 3) - Z.scale(0.25), ineqs=[ONE_Z - Z * Z]),
            zpop((Z * Z).scale(-0.3) + (Z**4).scale(0.5), ineqs=[ONE_Z - Z * Z]),
            zpop(Z * Z - Z, ineqs=[Z, ONE_Z - Z]),
        ]
        for pop in cases:
            res = solve_pop(pop)
            gmin = grid_oracle(pop, (-1.0, 1.0))
            assert res.bound <= gmin + 1e-4

    def test_certificate_soundness(self):
        pop = zpop((Z**3).scale(1 / 3) - Z.scale(0.25), ineqs=[ONE_Z - Z * Z])
        opts = PopOptions()
        res = solve_pop(pop, opts)
        assert res.status == relax.GLOBAL_CERTIFIED
        for p in res.minimizers:
            for q in pop.ineqs:
                assert pop.eval_flat(q, p) >= -opts.feas_tol
            val = pop.eval_flat(pop.objective, p)
            assert abs(val - res.bound) <= 1e-4 * (1 + abs(res.bound))

    def test_moment_matrix_psd(self):
        pop = zpop((Z**3).scale(1 / 3) - Z.scale(0.25), ineqs=[ONE_Z - Z * Z])
        rel = build(pop, 3)
        bound, seq, st = solve(rel)
        assert st == "ok"
        M = seq.moment_matrix(3)
        assert np.linalg.eigvalsh(M)[0] >= -1e-7
