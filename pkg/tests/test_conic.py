import numpy as np
import pytest
import scipy.sparse as sp

from bilevelsdp import conic
from bilevelsdp.conic import (
    ConeBlock,
    ConicProblem,
    SolverParams,
    dump_problem,
    smat,
    solve_sdp,
    svec,
)


def lp(c, A, b, blocks):
    return ConicProblem(np.array(c, float), sp.csr_matrix(np.array(A, float)),
                        np.array(b, float), blocks)


class TestSvec:
    def test_roundtrip(self):
        rng = np.random.default_rng(0)
        for side in (1, 2, 5):
            M = rng.normal(size=(side, side))
            M = M + M.T
            np.testing.assert_allclose(smat(svec(M), side), M, atol=1e-14)

    def test_inner_product_is_trace(self):
        rng = np.random.default_rng(1)
        A = rng.normal(size=(4, 4)); A = A + A.T
        B = rng.normal(size=(4, 4)); B = B + B.T
        assert svec(A) @ svec(B) == pytest.approx(np.trace(A @ B), rel=1e-12)


class TestBasicSolves:
    def test_min_x_nonneg_psd1(self):
        prob = lp([1.0], np.zeros((0, 1)), [], [ConeBlock(conic.PSD, 1)])
        sol = solve_sdp(prob)
        assert sol.status == conic.OPTIMAL
        assert abs(sol.primal_objective) <= 1e-7

    def test_min_trace_with_corner_fixed(self):
        A = np.zeros((1, 3))
        A[0, 0] = 1.0
        prob = lp(svec(np.eye(2)), A, [1.0], [ConeBlock(conic.PSD, 2)])
        sol = solve_sdp(prob)
        assert sol.status == conic.OPTIMAL
        assert sol.primal_objective == pytest.approx(1.0, abs=1e-7)
        X = smat(sol.x, 2)
        np.testing.assert_allclose(X, np.outer([1, 0], [1, 0]), atol=1e-6)

    def test_moment_relaxation_of_scalar_quadratic(self):
        # min z^2 - z on [0, 1] -> -0.25 at z = 0.5 (calculus oracle)
        from bilevelsdp.poly import Polynomial, Signature
        from bilevelsdp import relax

        sig = Signature(0, 1)
        z = Polynomial.variable(sig, "z", 0)
        one = Polynomial.constant(sig, 1.0)
        pop = relax.PopProblem(z * z - z, [], [z, one - z], [("z", 0)])
        rel = relax.build(pop, 1)
        sol = solve_sdp(rel.problem)
        assert sol.status == conic.OPTIMAL
        bound = -sol.primal_objective * rel.obj_scale
        assert bound == pytest.approx(-0.25, abs=1e-7)

    def test_lp_with_free_variable(self):
        prob = lp(
            [1.0, 1.0, 0.0],
            [[1.0, 0.0, -1.0], [0.0, 1.0, 1.0]],
            [1.0, 2.0],
            [ConeBlock(conic.NONNEG, 2), ConeBlock(conic.FREE, 1)],
        )
        sol = solve_sdp(prob)
        assert sol.status == conic.OPTIMAL
        assert sol.primal_objective == pytest.approx(3.0, abs=1e-7)

    def test_zero_cone_pins_variable(self):
        # min x1 s.t. x1 + x2 = 1, x2 in Zero => x1 = 1
        prob = lp(
            [1.0, 0.0],
            [[1.0, 1.0]],
            [1.0],
            [ConeBlock(conic.NONNEG, 1), ConeBlock(conic.ZERO, 1)],
        )
        sol = solve_sdp(prob)
        assert sol.status == conic.OPTIMAL
        assert sol.x[1] == 0.0
        assert sol.primal_objective == pytest.approx(1.0, abs=1e-6)


class TestStatuses:
    def test_primal_infeasible(self):
        # x = -1 with x >= 0
        prob = lp([0.0], [[1.0]], [-1.0], [ConeBlock(conic.NONNEG, 1)])
        sol = solve_sdp(prob, SolverParams(max_iter=300))
        assert sol.status == conic.PRIMAL_INFEASIBLE

    def test_dual_infeasible_unbounded(self):
        # min -x1 s.t. x1 - x2 = 0, x >= 0: unbounded below
        prob = lp(
            [-1.0, 0.0], [[1.0, -1.0]], [0.0], [ConeBlock(conic.NONNEG, 2)]
        )
        sol = solve_sdp(prob, SolverParams(max_iter=300))
        assert sol.status == conic.DUAL_INFEASIBLE

    def test_presolve_inconsistent_duplicate_row(self):
        A = [[1.0, 1.0], [1.0, 1.0]]
        prob = lp([1.0, 1.0], A, [1.0, 2.0], [ConeBlock(conic.NONNEG, 2)])
        sol = solve_sdp(prob)
        assert sol.status == conic.PRIMAL_INFEASIBLE

    def test_presolve_redundant_row_kept_solution(self):
        A = [[1.0, 1.0], [2.0, 2.0]]
        prob = lp([1.0, 2.0], A, [1.0, 2.0], [ConeBlock(conic.NONNEG, 2)])
        sol = solve_sdp(prob)
        assert sol.status == conic.OPTIMAL
        assert sol.primal_objective == pytest.approx(1.0, abs=1e-7)


class TestInvariants:
    def problems(self):
        rng = np.random.default_rng(9)
        out = []
        # random small SDP: min <C,X> s.t. <A_i, X> = b_i, X psd
        for trial in range(4):
            side = 3
            t = side * (side + 1) // 2
            C = rng.normal(size=(side, side)); C = C + C.T + 3 * np.eye(side)
            rows = []
            for _ in range(2):
                Ai = rng.normal(size=(side, side))
                rows.append(svec(Ai + Ai.T))
            X0 = np.eye(side)
            b = [r @ svec(X0) for r in rows]
            out.append(lp(svec(C), rows, b, [ConeBlock(conic.PSD, side)]))
        return out

    def test_weak_duality_and_psd_blocks(self):
        for prob in self.problems():
            sol = solve_sdp(prob)
            assert sol.status == conic.OPTIMAL
            assert sol.dual_objective <= sol.primal_objective + 1e-7 * (
                1 + abs(sol.primal_objective)
            )
            X = smat(sol.x, 3)
            w = np.linalg.eigvalsh(X)
            assert w[0] >= -1e-7 * (1 + np.linalg.norm(X))

    def test_determinism(self):
        prob = self.problems()[0]
        s1 = solve_sdp(prob)
        s2 = solve_sdp(prob)
        assert s1.iterations == s2.iterations
        assert s1.primal_objective == s2.primal_objective
        assert s1.dual_objective == s2.dual_objective


class TestDump:
    def test_format(self):
        prob = lp([1.0, 0.0], [[1.0, 2.0]], [1.0],
                  [ConeBlock(conic.NONNEG, 2)])
        text = dump_problem(prob)
        lines = text.strip().splitlines()
        assert lines[0].startswith("cones nonneg:2")
        assert lines[1] == "size 1 2"
        assert lines[2] == "A 2"
        assert lines[-2].startswith("b ")
        assert lines[-1].startswith("c ")
