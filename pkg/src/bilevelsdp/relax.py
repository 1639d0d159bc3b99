"""Lasserre moment-SOS relaxations of polynomial optimization problems.

`build` assembles the order-k relaxation of

    min f(w)  s.t.  p_j(w) = 0,  q_i(w) >= 0

as a standard-form conic program whose primal is the SOS certificate side
(max gamma with f - gamma in I_2k(p) + Q_k(q)) and whose dual vector is the
moment sequence: the moment matrix and the localizing matrices are exactly
the dual slacks, the ideal-truncation rows are the free-multiplier columns,
and m_0 = 1 comes out of the normalization of the dual.  `solve_pop` runs
the hierarchy, certifies global optimality via flat truncation and extracts
minimizers with the standard multiplication-matrix eigenvalue procedure.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from . import conic
from .conic import ConeBlock, ConicProblem, ConicSolution, SolverParams
from .poly import Polynomial, basis_size, grlex_key, monomial_exponents

GLOBAL_CERTIFIED = "GlobalCertified"
BOUND_ONLY = "BoundOnly"
INFEASIBLE = "Infeasible"
NUMERICAL_FAILURE = "NumericalFailure"

# loose acceptance thresholds for a stalled backend run that is still usable
_SALVAGE_GAP = 1e-5
_SALVAGE_RES = 1e-5


class OrderTooSmall(ValueError):
    """2k is below the degree of the objective or a constraint."""


_DUMP_COUNTER = 0


@dataclass
class PopProblem:
    """Single-level polynomial optimization instance over named variables."""

    objective: Polynomial
    eqs: List[Polynomial] = field(default_factory=list)
    ineqs: List[Polynomial] = field(default_factory=list)
    variables: List[Tuple[str, int]] = field(default_factory=list)

    def __post_init__(self):
        sig = self.objective.sig
        positions = []
        for block, idx in self.variables:
            positions.append(sig.block_slice(block).start + idx)
        if len(set(positions)) != len(positions):
            raise ValueError("duplicate variables")
        self._positions = positions
        for poly in [self.objective, *self.eqs, *self.ineqs]:
            if poly.sig != sig:
                raise ValueError("mixed signatures in POP")
            for key in poly.terms:
                for pos, e in enumerate(key):
                    if e and pos not in positions:
                        raise ValueError(
                            "polynomial uses a variable outside the declared list"
                        )

    @property
    def nvars(self) -> int:
        return len(self.variables)

    def flat(self, poly: Polynomial) -> Dict[Tuple[int, ...], float]:
        out: Dict[Tuple[int, ...], float] = {}
        for key, coef in poly.terms.items():
            out[tuple(key[pos] for pos in self._positions)] = coef
        return out

    def max_degree(self) -> int:
        return max(
            [self.objective.degree()]
            + [p.degree() for p in self.eqs]
            + [p.degree() for p in self.ineqs]
        )

    def eval_flat(self, poly: Polynomial, point: np.ndarray) -> float:
        total = 0.0
        for key, coef in self.flat(poly).items():
            term = coef
            for v, e in zip(point, key):
                if e:
                    term *= v**e
            total += term
        return total


@dataclass
class MomentSequence:
    """Pseudo-moment vector indexed by monomials of degree <= 2k."""

    values: np.ndarray
    nvars: int
    order: int  # k
    monomials: List[Tuple[int, ...]]
    index: Dict[Tuple[int, ...], int]
    # worst of the backend's relative gap / residuals; downstream gates
    # widen with this so they never outrun the solve accuracy
    quality: float = 0.0
    # False when the backend froze before its targets: the self-reported
    # gap then understates the objective error (consistent-but-perturbed
    # primal-dual pair), so certification floors kick in
    converged: bool = True

    def moment_matrix(self, t: int) -> np.ndarray:
        basis = monomial_exponents(self.nvars, t)
        N = len(basis)
        M = np.empty((N, N))
        for a in range(N):
            for b in range(a, N):
                key = tuple(x + y for x, y in zip(basis[a], basis[b]))
                M[a, b] = M[b, a] = self.values[self.index[key]]
        return M


@dataclass
class MomentRelaxation:
    """Order-k relaxation: index maps plus the assembled conic problem."""

    pop: PopProblem
    order: int
    basis: List[Tuple[int, ...]]
    monomials: List[Tuple[int, ...]]
    mono_index: Dict[Tuple[int, ...], int]
    localizing_sides: List[int]
    eq_row_counts: List[int]
    problem: ConicProblem
    obj_scale: float
    max_constraint_halfdeg: int

    @property
    def moment_side(self) -> int:
        return len(self.basis)


@dataclass
class PopOptions:
    k_start: Optional[int] = None
    k_max_order: Optional[int] = None
    k_extra: int = 3  # orders above k_start when k_max_order not given
    feas_tol: float = 1e-6
    opt_tol: float = 1e-6
    gap_tol: float = 1e-9
    res_tol: float = 1e-9
    max_iter: int = 200
    ball_radius: Optional[float] = None
    rank_tol: float = 1e-6
    polish: bool = True
    dump_dir: Optional[str] = None
    verbose: bool = False


@dataclass
class PopResult:
    status: str
    bound: float
    minimizers: List[np.ndarray] = field(default_factory=list)
    certified_order: Optional[int] = None
    flat_rank: Optional[int] = None
    orders_tried: List[int] = field(default_factory=list)
    bounds: List[float] = field(default_factory=list)

    @property
    def certified(self) -> bool:
        return self.status == GLOBAL_CERTIFIED


class DenseInteriorPoint:
    """Default backend: the dense NT-scaled predictor-corrector in `conic`."""

    def solve(self, prob: ConicProblem, params: SolverParams) -> ConicSolution:
        return conic.solve_sdp(prob, params)


_DEFAULT_BACKEND = DenseInteriorPoint()


# ----------------------------------------------------------------------
# relaxation assembly
# ----------------------------------------------------------------------
def _scaled(flat: Dict[Tuple[int, ...], float]) -> Tuple[Dict, float]:
    scale = max((abs(c) for c in flat.values()), default=1.0)
    if scale == 0.0:
        scale = 1.0
    return {k: c / scale for k, c in flat.items()}, scale


def build(pop: PopProblem, k: int) -> MomentRelaxation:
    """Assemble the order-k relaxation as a standard-form conic problem."""
    nv = pop.nvars
    if 2 * k < pop.max_degree():
        raise OrderTooSmall(
            f"order {k} too small: 2k must cover degree {pop.max_degree()}"
        )
    basis = monomial_exponents(nv, k)
    monomials = monomial_exponents(nv, 2 * k)
    mono_index = {mexp: i for i, mexp in enumerate(monomials)}
    m_rows = len(monomials)

    f_flat, f_scale = _scaled(pop.flat(pop.objective))
    b = np.zeros(m_rows)
    for mexp, coef in f_flat.items():
        b[mono_index[mexp]] = coef

    rowsA: List[int] = []
    colsA: List[int] = []
    valsA: List[float] = []
    blocks: List[ConeBlock] = []

    # free block: gamma followed by the ideal multiplier coefficients
    eq_row_counts = []
    eq_flat = []
    for p in pop.eqs:
        flat, _ = _scaled(pop.flat(p))
        deg = max(sum(kk) for kk in flat) if flat else 0
        dim = basis_size(nv, 2 * k - deg)
        eq_row_counts.append(dim)
        eq_flat.append((flat, deg, dim))
    free_dim = 1 + sum(eq_row_counts)
    blocks.append(ConeBlock(conic.FREE, free_dim))
    col = 0
    const_row = mono_index[tuple([0] * nv)]
    rowsA.append(const_row)
    colsA.append(col)
    valsA.append(1.0)
    col += 1
    for flat, deg, dim in eq_flat:
        mult_basis = monomial_exponents(nv, 2 * k - deg)
        for delta in mult_basis:
            for beta, coef in flat.items():
                key = tuple(a + bb for a, bb in zip(delta, beta))
                rowsA.append(mono_index[key])
                colsA.append(col)
                valsA.append(coef)
            col += 1

    sqrt2 = math.sqrt(2.0)

    def add_gram(center_flat: Optional[Dict], side: int, gbasis, col0: int) -> int:
        cc = col0
        for a in range(side):
            for bb in range(a, side):
                w = 1.0 if a == bb else sqrt2
                pair = tuple(x + y for x, y in zip(gbasis[a], gbasis[bb]))
                if center_flat is None:
                    rowsA.append(mono_index[pair])
                    colsA.append(cc)
                    valsA.append(w)
                else:
                    for beta, coef in center_flat.items():
                        key = tuple(x + y for x, y in zip(pair, beta))
                        rowsA.append(mono_index[key])
                        colsA.append(cc)
                        valsA.append(w * coef)
                cc += 1
        return cc

    # sigma_0 Gram block
    blocks.append(ConeBlock(conic.PSD, len(basis)))
    col = add_gram(None, len(basis), basis, col)

    # localizing blocks per inequality
    localizing_sides = []
    for q in pop.ineqs:
        flat, _ = _scaled(pop.flat(q))
        deg = max(sum(kk) for kk in flat) if flat else 0
        half = (deg + 1) // 2
        side = basis_size(nv, k - half)
        localizing_sides.append(side)
        gbasis = monomial_exponents(nv, k - half)
        blocks.append(ConeBlock(conic.PSD, side))
        col = add_gram(flat, side, gbasis, col)

    A = sp.csr_matrix(
        (valsA, (rowsA, colsA)), shape=(m_rows, col)
    )
    c = np.zeros(col)
    c[0] = -1.0  # maximize gamma
    problem = ConicProblem(c, A, b, blocks)

    halfdegs = [1]
    for p in pop.eqs + pop.ineqs:
        halfdegs.append((p.degree() + 1) // 2)
    return MomentRelaxation(
        pop=pop,
        order=k,
        basis=basis,
        monomials=monomials,
        mono_index=mono_index,
        localizing_sides=localizing_sides,
        eq_row_counts=eq_row_counts,
        problem=problem,
        obj_scale=f_scale,
        max_constraint_halfdeg=max(halfdegs),
    )


def solve(
    rel: MomentRelaxation,
    backend=None,
    params: Optional[SolverParams] = None,
) -> Tuple[float, Optional[MomentSequence], str]:
    """Solve the relaxation; returns (bound, moment sequence, status).

    Status is one of "ok" (bound and moments valid), "infeasible" (the
    moment side is empty, so the POP is infeasible), "weak" (the SOS side
    is infeasible at this order; no bound), "fail" (numerical).
    """
    backend = backend or _DEFAULT_BACKEND
    params = params or SolverParams()
    sol = backend.solve(rel.problem, params)
    usable = sol.status == conic.OPTIMAL or (
        sol.status in (conic.MAX_ITER, conic.NUMERICAL)
        and sol.rel_gap <= _SALVAGE_GAP
        and sol.res_primal <= _SALVAGE_RES
        and sol.res_dual <= _SALVAGE_RES
    )
    if usable:
        moments = -sol.y
        m0 = moments[rel.mono_index[tuple([0] * rel.pop.nvars)]]
        if not np.isfinite(m0) or abs(m0) < 1e-8:
            return math.nan, None, "fail"
        moments = moments / m0
        seq = MomentSequence(
            values=moments,
            nvars=rel.pop.nvars,
            order=rel.order,
            monomials=rel.monomials,
            index=rel.mono_index,
            quality=max(sol.rel_gap, sol.res_primal, sol.res_dual, 1e-12),
            converged=sol.status == conic.OPTIMAL,
        )
        bound = -sol.primal_objective * rel.obj_scale
        return bound, seq, "ok"
    if sol.status == conic.DUAL_INFEASIBLE:
        return math.inf, None, "infeasible"
    if sol.status == conic.PRIMAL_INFEASIBLE:
        return -math.inf, None, "weak"
    return math.nan, None, "fail"


# ----------------------------------------------------------------------
# flat truncation and extraction
# ----------------------------------------------------------------------
def _rank(M: np.ndarray, rel_tol: float = 1e-6) -> int:
    if M.size == 0:
        return 0
    sv = np.linalg.svd(M, compute_uv=False)
    if sv[0] <= 0:
        return 0
    return int(np.sum(sv > rel_tol * sv[0]))


def flat_truncation(
    moments: MomentSequence, k: int, d: int, rank_tol: float = 1e-6
) -> Optional[Tuple[int, int]]:
    """Smallest t <= k with rank M_t == rank M_{t-d}; None if no such t."""
    d = max(d, 1)
    ranks: Dict[int, int] = {}

    def rank_at(t: int) -> int:
        if t not in ranks:
            ranks[t] = _rank(moments.moment_matrix(t), rank_tol)
        return ranks[t]

    for t in range(d, k + 1):
        r_hi = rank_at(t)
        if r_hi == rank_at(t - d):
            return t, r_hi
    return None


class ExtractionError(RuntimeError):
    pass


def extract(
    moments: MomentSequence, t: int, r: int, dedup_tol: float = 1e-6
) -> List[np.ndarray]:
    """Extract the r atoms of a flat moment matrix M_t.

    Standard procedure: low-rank factor of M_t, column echelon form to pick
    a monomial basis, multiplication matrices, simultaneous diagonalization
    through the real Schur form of a random convex combination.
    """
    nv = moments.nvars
    basis = monomial_exponents(nv, t)
    pos = {mexp: i for i, mexp in enumerate(basis)}
    M = moments.moment_matrix(t)
    w, V = np.linalg.eigh(M)
    idx = np.argsort(w)[::-1][:r]
    if np.any(w[idx] <= 0):
        raise ExtractionError("flat rank larger than the positive spectrum")
    U = V[:, idx] * np.sqrt(w[idx])

    # reduced row echelon of U^T with column pivoting in the monomial order
    W = U.T.copy()
    npiv = 0
    pivots: List[int] = []
    norm = np.abs(W).max()
    for j in range(len(basis)):
        if npiv == r:
            break
        col = W[npiv:, j]
        imax = int(np.argmax(np.abs(col)))
        if abs(col[imax]) <= 1e-8 * norm:
            continue
        W[[npiv, npiv + imax]] = W[[npiv + imax, npiv]]
        W[npiv] = W[npiv] / W[npiv, j]
        for i in range(r):
            if i != npiv:
                W[i] -= W[i, j] * W[npiv]
        pivots.append(j)
        npiv += 1
    if npiv < r:
        raise ExtractionError("could not find a full pivot basis")

    mult = []
    for v in range(nv):
        Nv = np.empty((r, r))
        for i, pj in enumerate(pivots):
            shifted = list(basis[pj])
            shifted[v] += 1
            key = tuple(shifted)
            if key not in pos:
                raise ExtractionError("pivot monomial leaves the basis")
            Nv[i] = W[:, pos[key]]
        mult.append(Nv)

    rng = np.random.default_rng(20160321)
    weights = rng.random(nv)
    weights /= weights.sum()
    Nc = sum(wgt * Nv for wgt, Nv in zip(weights, mult))
    try:
        T, Q = sla.schur(Nc, output="real")
    except Exception as exc:  # pragma: no cover - LAPACK failure
        raise ExtractionError(str(exc)) from exc
    pts = np.empty((r, nv))
    for j in range(r):
        qj = Q[:, j]
        for v in range(nv):
            pts[j, v] = qj @ mult[v] @ qj

    # deduplicate
    out: List[np.ndarray] = []
    for p in pts:
        if not any(np.max(np.abs(p - q)) <= dedup_tol for q in out):
            out.append(p)

    # validate: the atoms must reproduce the truncated moments
    cols = []
    for p in out:
        vals = np.array(
            [np.prod(np.power(p, mexp)) for mexp in monomial_exponents(nv, 2 * t)]
        )
        cols.append(vals)
    target = np.array(
        [
            moments.values[moments.index[mexp]]
            for mexp in monomial_exponents(nv, 2 * t)
        ]
    )
    Vmat = np.column_stack(cols)
    wts, *_ = np.linalg.lstsq(Vmat, target, rcond=None)
    resid = np.linalg.norm(Vmat @ wts - target)
    if resid > 1e-5 * (1.0 + np.linalg.norm(target)):
        raise ExtractionError(f"atomic measure residual {resid:.2e} too large")
    return out


# ----------------------------------------------------------------------
# hierarchy driver
# ----------------------------------------------------------------------
def _polish(pop: PopProblem, point: np.ndarray, iters: int = 30) -> np.ndarray:
    """Deterministic Gauss-Newton projection onto the feasible set.

    Drives the equality residuals and any inequality violations to zero;
    used to clean extraction noise off candidate minimizers.  Returns the
    original point when the polish wanders too far.
    """
    eq_flats = [pop.flat(p) for p in pop.eqs]
    iq_flats = [pop.flat(q) for q in pop.ineqs]

    def fval(flat, w):
        tot = 0.0
        for key, coef in flat.items():
            term = coef
            for v, e in zip(w, key):
                if e:
                    term *= v**e
            tot += term
        return tot

    def fgrad(flat, w):
        g = np.zeros(len(w))
        for key, coef in flat.items():
            for j, e in enumerate(key):
                if e == 0:
                    continue
                term = coef * e
                for i, (v, ei) in enumerate(zip(w, key)):
                    if i == j:
                        if ei > 1:
                            term *= v ** (ei - 1)
                    elif ei:
                        term *= v**ei
                g[j] += term
        return g

    w = np.asarray(point, dtype=float).copy()
    for _ in range(iters):
        res = []
        rows = []
        for flat in eq_flats:
            res.append(fval(flat, w))
            rows.append(fgrad(flat, w))
        for flat in iq_flats:
            v = fval(flat, w)
            if v < 0.0:
                res.append(v)
                rows.append(fgrad(flat, w))
        if not res:
            break
        res = np.array(res)
        if np.max(np.abs(res)) < 1e-13:
            break
        J = np.vstack(rows)
        JtJ = J.T @ J
        lam = 1e-10 * (1.0 + np.trace(JtJ) / max(len(w), 1))
        try:
            step = np.linalg.solve(JtJ + lam * np.eye(len(w)), -J.T @ res)
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(step)):
            break
        w = w + step
        if np.linalg.norm(step) < 1e-14:
            break
    if np.linalg.norm(w - point) > 0.05 * (1.0 + np.linalg.norm(point)):
        return np.asarray(point, dtype=float)
    return w


def _candidate_points(
    seq: MomentSequence, k: int, d: int, rank_tol: float
) -> Tuple[List[np.ndarray], Optional[Tuple[int, int]]]:
    """Candidate minimizers from the moment sequence.

    First the flat-truncation route; if no order is flat, nearly-flat
    fallbacks: extraction at (t, rank M_{t-1}) for descending t (the top
    block of a not-yet-tight relaxation carries slack that flatness would
    reject), and finally the first-order moment vector when the matrix is
    numerically rank one.  Every candidate is verified downstream, so the
    fallbacks cannot make the result less sound, only less incomplete.
    """
    flat = flat_truncation(seq, k, d, rank_tol)
    if flat is not None:
        try:
            return extract(seq, *flat), flat
        except ExtractionError:
            pass
    for t in range(k, 0, -1):
        r = _rank(seq.moment_matrix(t - 1), rank_tol)
        if r > max(3, len(monomial_exponents(seq.nvars, t - 1)) // 2):
            continue
        try:
            return extract(seq, t, max(r, 1)), None
        except ExtractionError:
            continue
    mean = np.array(
        [
            seq.values[seq.index[tuple(int(i == j) for j in range(seq.nvars))]]
            for i in range(seq.nvars)
        ]
    )
    return [mean], None


def _with_ball(pop: PopProblem, radius: float) -> PopProblem:
    sig = pop.objective.sig
    ball = Polynomial.constant(sig, radius * radius)
    for block, idx in pop.variables:
        v = Polynomial.variable(sig, block, idx)
        ball = ball - v * v
    return PopProblem(pop.objective, list(pop.eqs), list(pop.ineqs) + [ball],
                      list(pop.variables))


def solve_pop(
    pop: PopProblem, opts: Optional[PopOptions] = None, backend=None
) -> PopResult:
    """Run the hierarchy k_start..k_max_order with certification."""
    opts = opts or PopOptions()
    if opts.ball_radius is not None:
        pop = _with_ball(pop, opts.ball_radius)
    k_min = max(1, (pop.max_degree() + 1) // 2)
    k_start = max(opts.k_start or k_min, k_min)
    k_max = opts.k_max_order if opts.k_max_order is not None else k_start + opts.k_extra
    k_max = max(k_max, k_start)
    params = SolverParams(
        gap_tol=opts.gap_tol, res_tol=opts.res_tol, max_iter=opts.max_iter
    )

    best_bound = -math.inf
    orders: List[int] = []
    bounds: List[float] = []
    any_ok = False
    for k in range(k_start, k_max + 1):
        rel = build(pop, k)
        if opts.dump_dir is not None:
            global _DUMP_COUNTER
            _DUMP_COUNTER += 1
            path = os.path.join(
                opts.dump_dir, f"sdp_{_DUMP_COUNTER:04d}_order{k}.sdp"
            )
            with open(path, "w") as fh:
                fh.write(conic.dump_problem(rel.problem))
        bound, seq, st = solve(rel, backend=backend, params=params)
        orders.append(k)
        if st == "infeasible":
            return PopResult(INFEASIBLE, math.inf, orders_tried=orders, bounds=bounds)
        if st in ("weak", "fail"):
            bounds.append(math.nan)
            continue
        any_ok = True
        bounds.append(bound)
        if bound > best_bound:
            best_bound = bound
        # gates widen with the achieved solve accuracy, never below the
        # requested tolerances; a frozen backend gets fixed floors on top
        jam_opt = 0.0 if seq.converged else 3e-4
        jam_rank = 0.0 if seq.converged else 1e-3
        eff_rank = min(1e-2, max(opts.rank_tol, 1e3 * seq.quality, jam_rank))
        eff_opt = max(opts.opt_tol, 50.0 * seq.quality, jam_opt)
        pts, flat = _candidate_points(seq, k, rel.max_constraint_halfdeg, eff_rank)
        if opts.polish:
            pts = [_polish(pop, p) for p in pts]
        dedup: List[np.ndarray] = []
        for p in pts:
            if not any(np.max(np.abs(p - q)) <= 1e-6 for q in dedup):
                dedup.append(p)
        certified = [
            p for p in dedup if _is_certified(pop, p, bound, opts, eff_opt)
        ]
        if certified:
            certified.sort(key=lambda q: tuple(q))
            return PopResult(
                GLOBAL_CERTIFIED,
                bound,
                minimizers=certified,
                certified_order=k,
                flat_rank=flat[1] if flat else len(certified),
                orders_tried=orders,
                bounds=bounds,
            )
    if not any_ok:
        return PopResult(NUMERICAL_FAILURE, math.nan, orders_tried=orders, bounds=bounds)
    return PopResult(BOUND_ONLY, best_bound, orders_tried=orders, bounds=bounds)


def _is_certified(pop: PopProblem, point: np.ndarray, bound: float,
                  opts: PopOptions, opt_tol: Optional[float] = None) -> bool:
    if opt_tol is None:
        opt_tol = opts.opt_tol
    for p in pop.eqs:
        if abs(pop.eval_flat(p, point)) > opts.feas_tol:
            return False
    for q in pop.ineqs:
        if pop.eval_flat(q, point) < -opts.feas_tol:
            return False
    val = pop.eval_flat(pop.objective, point)
    return abs(val - bound) <= opt_tol * (1.0 + abs(bound))
