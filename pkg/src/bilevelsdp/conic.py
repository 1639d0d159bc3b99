"""Dense primal-dual interior-point solver for standard-form conic programs.

Solves
    min  c'v   s.t.  A v = b,   v in K
where K is a product of Free, Zero, NonNeg and PSD blocks (PSD blocks are
stored as scaled upper triangles, sqrt(2) on off-diagonals, so the Euclidean
inner product equals the trace inner product).  The algorithm is
infeasible-start path following with Nesterov-Todd scaling and a Mehrotra
predictor-corrector; free variables are handled inside the Newton system via
a bordered Schur complement.  Everything is deterministic: no randomized
pivoting, no RNG.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

PSD = "psd"
NONNEG = "nonneg"
ZERO = "zero"
FREE = "free"

OPTIMAL = "Optimal"
PRIMAL_INFEASIBLE = "PrimalInfeasible"
DUAL_INFEASIBLE = "DualInfeasible"
MAX_ITER = "MaxIter"
NUMERICAL = "Numerical"

_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class ConeBlock:
    kind: str
    size: int

    def __post_init__(self):
        if self.kind not in (PSD, NONNEG, ZERO, FREE):
            raise ValueError(f"unknown cone kind {self.kind!r}")
        if self.size < 1:
            raise ValueError("cone block size must be positive")

    @property
    def dim(self) -> int:
        if self.kind == PSD:
            return self.size * (self.size + 1) // 2
        return self.size


@dataclass
class ConicProblem:
    """Standard-form conic program data."""

    c: np.ndarray
    A: sp.csr_matrix
    b: np.ndarray
    blocks: List[ConeBlock]

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        self.b = np.asarray(self.b, dtype=float).ravel()
        self.A = sp.csr_matrix(self.A)
        n = sum(bl.dim for bl in self.blocks)
        if self.A.shape != (self.b.size, n) or self.c.size != n:
            raise ValueError(
                f"dimension mismatch: A {self.A.shape}, b {self.b.size}, "
                f"c {self.c.size}, cone dim {n}"
            )

    @property
    def num_rows(self) -> int:
        return self.b.size

    @property
    def num_cols(self) -> int:
        return self.c.size


@dataclass
class SolverParams:
    gap_tol: float = 1e-8
    res_tol: float = 1e-8
    max_iter: int = 200
    step_frac: float = 0.99
    diverge: float = 1e13
    stall_iters: int = 30
    verbose: bool = False


@dataclass
class ConicSolution:
    status: str
    x: np.ndarray
    y: np.ndarray
    s: np.ndarray
    primal_objective: float
    dual_objective: float
    rel_gap: float
    res_primal: float
    res_dual: float
    iterations: int


# ----------------------------------------------------------------------
# svec helpers
# ----------------------------------------------------------------------
_SVEC_CACHE: Dict[int, Tuple[np.ndarray, np.ndarray]] = {}


def svec_indices(side: int) -> Tuple[np.ndarray, np.ndarray]:
    """(i, j) row/col index arrays for the packed upper triangle."""
    cached = _SVEC_CACHE.get(side)
    if cached is None:
        ii, jj = np.triu_indices(side)
        cached = (ii.astype(np.int64), jj.astype(np.int64))
        _SVEC_CACHE[side] = cached
    return cached


def svec(M: np.ndarray) -> np.ndarray:
    side = M.shape[0]
    ii, jj = svec_indices(side)
    v = M[ii, jj].copy()
    v[ii != jj] *= _SQRT2
    return v


def smat(v: np.ndarray, side: int) -> np.ndarray:
    ii, jj = svec_indices(side)
    M = np.zeros((side, side))
    off = ii != jj
    vals = v.copy()
    vals[off] /= _SQRT2
    M[ii, jj] = vals
    M[jj, ii] = vals
    return M


def _chol_psd(M: np.ndarray, jitter: float = 0.0) -> np.ndarray:
    """Cholesky with escalating diagonal jitter for nearly-singular input."""
    n = M.shape[0]
    base = max(np.trace(M) / max(n, 1), 1.0)
    for k in range(8):
        try:
            return np.linalg.cholesky(M + (jitter * base) * np.eye(n) if jitter else M)
        except np.linalg.LinAlgError:
            jitter = max(jitter * 100.0, 1e-14)
    raise np.linalg.LinAlgError("matrix not positive definite even with jitter")


# ----------------------------------------------------------------------
# problem layout
# ----------------------------------------------------------------------
class _Layout:
    """Index bookkeeping: cone columns vs free columns vs zero columns."""

    def __init__(self, prob: ConicProblem):
        self.blocks = prob.blocks
        offs = np.cumsum([0] + [bl.dim for bl in prob.blocks])
        self.offsets = offs
        self.free_cols: List[np.ndarray] = []
        self.zero_cols: List[np.ndarray] = []
        self.cone_blocks: List[Tuple[ConeBlock, int]] = []  # (block, cone_offset)
        cone_cols: List[np.ndarray] = []
        pos = 0
        for bl, off in zip(prob.blocks, offs[:-1]):
            idx = np.arange(off, off + bl.dim)
            if bl.kind == FREE:
                self.free_cols.append(idx)
            elif bl.kind == ZERO:
                self.zero_cols.append(idx)
            else:
                self.cone_blocks.append((bl, pos))
                cone_cols.append(idx)
                pos += bl.dim
        self.cone_idx = (
            np.concatenate(cone_cols) if cone_cols else np.zeros(0, dtype=int)
        )
        self.free_idx = (
            np.concatenate(self.free_cols) if self.free_cols else np.zeros(0, dtype=int)
        )
        self.zero_idx = (
            np.concatenate(self.zero_cols) if self.zero_cols else np.zeros(0, dtype=int)
        )
        self.cone_dim = pos
        self.nu = sum(
            bl.size for bl, _ in self.cone_blocks
        )  # barrier parameter: side for PSD, len for NonNeg

    def identity(self) -> np.ndarray:
        out = np.zeros(self.cone_dim)
        for bl, off in self.cone_blocks:
            if bl.kind == NONNEG:
                out[off : off + bl.dim] = 1.0
            else:
                out[off : off + bl.dim] = svec(np.eye(bl.size))
        return out


class _PsdSchurData:
    """Per-PSD-block constraint data for the closed-form Schur assembly.

    Every constraint row touches the block through a sparse symmetric
    matrix; with U_r = sum_p t_p S_p in the orthonormal svec basis, the
    Schur entry is  <U_r, W U_q W> = sum_{p in r, q' in q}
    t_p t_q (W_ik W_jl + W_il W_jk), with t = a (off-diag) or a/sqrt(2)
    (diag), a being the stored svec coefficient.
    """

    def __init__(self, A_block: sp.csr_matrix, side: int):
        coo = A_block.tocoo()
        ii, jj = svec_indices(side)
        order = np.argsort(coo.row, kind="stable")
        self.rows = coo.row[order].astype(np.int64)
        pos = coo.col[order]
        self.i = ii[pos]
        self.j = jj[pos]
        vals = coo.data[order].copy()
        vals[self.i == self.j] /= _SQRT2
        self.t = vals
        self.touched, starts = np.unique(self.rows, return_index=True)
        self.starts = starts
        self.count = self.rows.size

    def schur(self, W: np.ndarray, out: np.ndarray, chunk_bytes: float = 1.3e8):
        """Accumulate A_blk (W (x)s W) A_blk' into `out`.

        Two stages: per constraint row r build the s x s matrix
        D_r = sum_{p in r} t_p W[i_p] W[j_p]' (a small matmul per row),
        then S_{rq} = sum_{p' in q} t_{p'} (D_r[i',j'] + D_r[j',i']) is a
        column gather plus a segmented reduction.  Row blocks bound the
        memory of the flattened D buffer.
        """
        if self.count == 0:
            return
        s = W.shape[0]
        P = self.count
        R = self.touched.size
        Wi = W[self.i]
        Wj = W[self.j]
        tWi = self.t[:, None] * Wi
        colA = self.i * s + self.j
        colB = self.j * s + self.i
        bounds = np.append(self.starts, P)
        max_rows = max(1, int(chunk_bytes / (s * s * 8.0)))
        for lo in range(0, R, max_rows):
            hi = min(lo + max_rows, R)
            D = np.empty((hi - lo, s * s))
            for rr in range(lo, hi):
                a, b = bounds[rr], bounds[rr + 1]
                D[rr - lo] = (tWi[a:b].T @ Wj[a:b]).ravel()
            G = D[:, colA]
            G += D[:, colB]
            G *= self.t[None, :]
            red = np.add.reduceat(G, self.starts, axis=1)
            out[np.ix_(self.touched[lo:hi], self.touched)] += red


# ----------------------------------------------------------------------
# presolve
# ----------------------------------------------------------------------
class PresolveInfeasible(Exception):
    pass


def _presolve_rows(A: sp.csr_matrix, b: np.ndarray, norm_a: float):
    """Drop linearly dependent rows (QR threshold 1e-10 * ||A||).

    Rows owning a column that no other row touches are structurally
    independent and skipped; the QR pass only runs over the rest.  Raises
    PresolveInfeasible when a dependent row has inconsistent b.
    """
    m = A.shape[0]
    thresh = 1e-10 * max(norm_a, 1.0)
    col_counts = np.asarray((A != 0).sum(axis=0)).ravel()
    keep = np.zeros(m, dtype=bool)
    csr = A.tocsr()
    undecided = []
    for r in range(m):
        cols = csr.indices[csr.indptr[r] : csr.indptr[r + 1]]
        if cols.size and np.any(col_counts[cols] == 1):
            keep[r] = True
        else:
            undecided.append(r)
    if not undecided:
        return np.arange(m)
    base_idx = np.where(keep)[0]
    undecided = np.array(undecided, dtype=int)
    # incremental QR over the undecided rows against the kept row space
    support = np.unique(csr[np.concatenate([base_idx, undecided])].indices)
    dense = csr[:, support]
    kept_list = list(base_idx)
    Q: Optional[np.ndarray] = None
    if kept_list:
        block = dense[kept_list].toarray()
        Q, _ = np.linalg.qr(block.T)
    for r in undecided:
        row = dense[[r]].toarray().ravel()
        resid = row - Q @ (Q.T @ row) if Q is not None else row.copy()
        nrm = np.linalg.norm(resid)
        if nrm > thresh:
            kept_list.append(r)
            qcol = resid / nrm
            Q = qcol[:, None] if Q is None else np.column_stack([Q, qcol])
        else:
            # dependent row: b must be consistent with the kept combination
            sub = dense[kept_list].toarray()
            coef, *_ = np.linalg.lstsq(sub.T, row, rcond=None)
            if abs(b[r] - coef @ b[kept_list]) > 1e-8 * (1.0 + np.abs(b).max()):
                raise PresolveInfeasible(
                    f"row {r} is linearly dependent with inconsistent rhs"
                )
    kept_list.sort()
    return np.array(kept_list, dtype=int)


def _free_col_rank(Af: np.ndarray, cf: np.ndarray, norm_a: float):
    """Independent free columns by pivoted QR; flag unbounded rays.

    A dropped (dependent) column j gives a direction e_j - combo with
    A d = 0 over the free block; if its reduced cost c_j - c'combo is
    nonzero the primal objective is unbounded along it.
    """
    thresh = 1e-10 * max(norm_a, 1.0)
    Q, R, piv = sla.qr(Af, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > max(thresh, 1e-13 * (diag[0] if diag.size else 1.0))))
    keep = np.sort(piv[:rank])
    dropped = piv[rank:]
    unbounded = False
    if dropped.size:
        kept_mat = Af[:, keep]
        for j in dropped:
            coef, *_ = np.linalg.lstsq(kept_mat, Af[:, j], rcond=None)
            red_cost = cf[j] - cf[keep] @ coef
            if abs(red_cost) > 1e-8 * (1.0 + np.abs(cf).max()):
                unbounded = True
                break
    return keep, unbounded


# ----------------------------------------------------------------------
# main solver
# ----------------------------------------------------------------------
def solve_sdp(prob: ConicProblem, params: Optional[SolverParams] = None) -> ConicSolution:
    """Solve the conic program; see the module docstring for the algorithm."""
    params = params or SolverParams()
    layout = _Layout(prob)

    norm_a = sp.linalg.norm(prob.A) if prob.A.nnz else 0.0
    full_cols = prob.num_cols

    # remove Zero-cone columns entirely (their variables are pinned at 0)
    act_cols = np.setdiff1d(np.arange(full_cols), layout.zero_idx)
    A_act = prob.A[:, act_cols] if layout.zero_idx.size else prob.A
    try:
        kept = _presolve_rows(A_act, prob.b, norm_a)
    except PresolveInfeasible:
        zeros = np.zeros(full_cols)
        return ConicSolution(
            PRIMAL_INFEASIBLE, zeros, np.zeros(prob.num_rows), zeros,
            math.nan, math.nan, math.inf, math.inf, math.inf, 0,
        )
    # column index maps relative to the active matrix
    col_map = -np.ones(full_cols, dtype=int)
    col_map[act_cols] = np.arange(act_cols.size)
    cone_cols_act = col_map[layout.cone_idx]
    free_cols_act = col_map[layout.free_idx]

    A_kept = A_act[kept]
    b_kept = prob.b[kept]
    Ak = sp.csr_matrix(A_kept[:, cone_cols_act])
    Af = A_kept[:, free_cols_act].toarray() if free_cols_act.size else np.zeros(
        (kept.size, 0)
    )
    ck = prob.c[layout.cone_idx]
    cf = prob.c[layout.free_idx]
    free_orig = layout.free_idx

    # free columns must be independent for the KKT system to be
    # nonsingular; dependent ones are redundant multipliers unless they
    # carry reduced cost, in which case the primal is unbounded
    if Af.shape[1]:
        keep_f, unbounded = _free_col_rank(Af, cf, norm_a)
        if unbounded:
            zeros = np.zeros(full_cols)
            return ConicSolution(
                DUAL_INFEASIBLE, zeros, np.zeros(prob.num_rows), zeros,
                -math.inf, math.nan, math.inf, math.inf, math.inf, 0,
            )
        Af = Af[:, keep_f]
        cf = cf[keep_f]
        free_orig = layout.free_idx[keep_f]

    m = kept.size
    nf = Af.shape[1]

    # per-block views of the cone part
    psd_data: List[Tuple[ConeBlock, int, _PsdSchurData]] = []
    nn_slices: List[Tuple[int, int]] = []
    for bl, off in layout.cone_blocks:
        if bl.kind == PSD:
            psd_data.append((bl, off, _PsdSchurData(Ak[:, off : off + bl.dim], bl.size)))
        else:
            nn_slices.append((off, off + bl.dim))
    Ann = [sp.csr_matrix(Ak[:, lo:hi]) for lo, hi in nn_slices]

    def blocks_iter(v):
        for bl, off in layout.cone_blocks:
            yield bl, v[off : off + bl.dim]

    def wop_factory(scal):
        """v -> svec(W mat(v) W) blockwise given scaling data."""

        def apply(v):
            out = np.empty_like(v)
            for (bl, off), data in zip(layout.cone_blocks, scal):
                seg = v[off : off + bl.dim]
                if bl.kind == NONNEG:
                    out[off : off + bl.dim] = data["d2"] * seg
                else:
                    W = data["W"]
                    out[off : off + bl.dim] = svec(W @ smat(seg, bl.size) @ W)
            return out

        return apply

    # starting point: scaled identity
    eta = max(1.0, float(np.abs(prob.b).max(initial=0.0)),
              float(np.abs(prob.c).max(initial=0.0)))
    x = layout.identity() * eta
    s = layout.identity() * eta
    u = np.zeros(nf)
    y = np.zeros(m)

    nu = max(layout.nu, 1)
    bnorm = 1.0 + np.linalg.norm(b_kept)
    cnorm = 1.0 + np.linalg.norm(np.concatenate([ck, cf]))

    best = None
    status = MAX_ITER
    iters_done = 0
    mu_hist: List[float] = []

    def residuals():
        rp = b_kept - Ak @ x - (Af @ u if nf else 0.0)
        rdk = ck - Ak.T @ y - s
        rdf = cf - Af.T @ y if nf else np.zeros(0)
        return rp, rdk, rdf

    def metrics():
        rp, rdk, rdf = residuals()
        pobj = float(ck @ x + (cf @ u if nf else 0.0))
        dobj = float(b_kept @ y)
        gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        resp = np.linalg.norm(rp) / bnorm
        resd = math.hypot(np.linalg.norm(rdk), np.linalg.norm(rdf)) / cnorm
        return rp, rdk, rdf, pobj, dobj, gap, resp, resd

    for it in range(params.max_iter):
        iters_done = it
        rp, rdk, rdf, pobj, dobj, gap, resp, resd = metrics()
        mu = float(x @ s) / nu
        mu_hist.append(mu)
        if params.verbose:
            print(
                f"  ipm {it:3d}  mu={mu:9.2e} gap={gap:9.2e} "
                f"rp={resp:9.2e} rd={resd:9.2e} pobj={pobj:+.9e}"
            )
        merit = gap + resp + resd
        if best is None or merit < best[0]:
            best = (merit, x.copy(), y.copy(), s.copy(), u.copy(),
                    pobj, dobj, gap, resp, resd, it)
        if gap <= params.gap_tol and resp <= params.res_tol and resd <= params.res_tol:
            status = OPTIMAL
            break
        # ray certificates: a large iterate that is nearly a feasible ray
        # with negative cost (primal side) or a separating functional
        # (dual side) flags unboundedness / infeasibility
        xnorm = math.hypot(np.linalg.norm(x), np.linalg.norm(u))
        if xnorm > 1e8 * eta:
            ax = Ak @ x + (Af @ u if nf else 0.0)
            cost = ck @ x + (cf @ u if nf else 0.0)
            if (
                np.linalg.norm(ax) <= 1e-7 * xnorm * (1.0 + np.linalg.norm(b_kept))
                and cost <= -1e-9 * xnorm
            ):
                status = DUAL_INFEASIBLE
                break
        ynorm = math.hypot(np.linalg.norm(y), np.linalg.norm(s))
        if ynorm > 1e8 * eta:
            aty = Ak.T @ y + s
            if (
                np.linalg.norm(aty) <= 1e-7 * ynorm
                and (not nf or np.linalg.norm(Af.T @ y) <= 1e-7 * ynorm)
                and b_kept @ y >= 1e-9 * ynorm
            ):
                status = PRIMAL_INFEASIBLE
                break
        if pobj < -params.diverge * eta and resp <= 1e-6:
            status = DUAL_INFEASIBLE
            break
        if dobj > params.diverge * eta and resd <= 1e-6:
            status = PRIMAL_INFEASIBLE
            break
        # stall exits: no real merit progress for a stretch of iterations
        if it - best[10] >= params.stall_iters:
            status = MAX_ITER if best[0] < 1e-3 else NUMERICAL
            break
        if len(mu_hist) > 30 and mu_hist[-1] > 0.5 * mu_hist[-20] and merit > 1e-4:
            status = NUMERICAL
            break

        # ---- NT scaling per block
        scal = []
        ok = True
        for bl, seg in blocks_iter(x):
            off = layout.cone_blocks[len(scal)][1]
            sseg = s[off : off + bl.dim]
            if bl.kind == NONNEG:
                d = np.sqrt(seg / sseg)
                scal.append({"d": d, "d2": d * d, "lam": np.sqrt(seg * sseg)})
            else:
                X = smat(seg, bl.size)
                S = smat(sseg, bl.size)
                try:
                    Lx = _chol_psd(X)
                    Ls = _chol_psd(S)
                except np.linalg.LinAlgError:
                    ok = False
                    break
                U, sv, Vt = np.linalg.svd(Ls.T @ Lx)
                sv = np.maximum(sv, 1e-300)
                R = Lx @ Vt.T / np.sqrt(sv)
                Rinv = (U / np.sqrt(sv)).T @ Ls.T
                scal.append({"R": R, "Rinv": Rinv, "W": R @ R.T, "lam": sv})
        if not ok:
            status = NUMERICAL
            break
        wop = wop_factory(scal)

        # ---- Schur complement over cone blocks
        S_mat = np.zeros((m, m))
        for (bl, off, data) in psd_data:
            data.schur(scal_W(scal, layout, off), S_mat)
        for (lo, hi), Asp in zip(nn_slices, Ann):
            d2 = scal[_block_pos(layout, lo)]["d2"]
            S_mat += (Asp.multiply(d2[None, :]) @ Asp.T).toarray()

        if not np.all(np.isfinite(S_mat)):
            status = NUMERICAL
            break
        use_lu = (m + nf) <= 2500
        if use_lu:
            # full bordered KKT by LU: slower but much more stable when the
            # Schur complement gets ill-conditioned near a degenerate optimum
            KKT = np.zeros((m + nf, m + nf))
            KKT[:m, :m] = S_mat
            if nf:
                KKT[:m, m:] = Af
                KKT[m:, :m] = Af.T
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    lu_fact = sla.lu_factor(KKT)
            except (ValueError, np.linalg.LinAlgError):
                status = NUMERICAL
                break
            KKT_ld = KKT.astype(np.longdouble)

            def kkt_solve(r1, r2, refine=3):
                rhs = np.concatenate([r1, r2])
                sol_v = sla.lu_solve(lu_fact, rhs)
                if not np.all(np.isfinite(sol_v)):
                    return sol_v[:m], sol_v[m:]
                rhs_ld = rhs.astype(np.longdouble)
                for _ in range(refine):
                    # residual in extended precision beats the kappa*eps
                    # saturation of the ill-conditioned endgame
                    err = np.asarray(
                        rhs_ld - KKT_ld @ sol_v.astype(np.longdouble),
                        dtype=float,
                    )
                    if not np.all(np.isfinite(err)):
                        break
                    sol_v = sol_v + sla.lu_solve(lu_fact, err)
                return sol_v[:m], sol_v[m:]

        else:
            try:
                L = _chol_psd(S_mat, jitter=0.0)
            except np.linalg.LinAlgError:
                status = NUMERICAL
                break
            if nf:
                T = sla.cho_solve((L, True), Af)
                Mf = Af.T @ T
                try:
                    Lf = _chol_psd(Mf)
                except np.linalg.LinAlgError:
                    status = NUMERICAL
                    break
            S_ld = S_mat.astype(np.longdouble)
            Af_ld = Af.astype(np.longdouble)

            def kkt_solve(r1, r2, refine=3):
                dy = sla.cho_solve((L, True), r1)
                if nf:
                    du = sla.cho_solve((Lf, True), Af.T @ dy - r2)
                    dy = dy - T @ du
                else:
                    du = np.zeros(0)
                r1_ld = r1.astype(np.longdouble)
                r2_ld = r2.astype(np.longdouble)
                for _ in range(refine):
                    dy_ld = dy.astype(np.longdouble)
                    e1 = r1_ld - S_ld @ dy_ld
                    if nf:
                        e1 = e1 - Af_ld @ du.astype(np.longdouble)
                        e2 = np.asarray(r2_ld - Af_ld.T @ dy_ld, dtype=float)
                    else:
                        e2 = np.zeros(0)
                    e1 = np.asarray(e1, dtype=float)
                    if not np.all(np.isfinite(e1)):
                        break
                    cy = sla.cho_solve((L, True), e1)
                    if nf:
                        cu = sla.cho_solve((Lf, True), Af.T @ cy - e2)
                        cy = cy - T @ cu
                        du = du + cu
                    dy = dy + cy
                return dy, du

        def directions(q):
            rhs1 = rp - Ak @ q + Ak @ wop(rdk)
            dy, du = kkt_solve(rhs1, rdf)
            ds = rdk - Ak.T @ dy
            dx = q - wop(ds)
            if not np.all(np.isfinite(dx)):
                return dx, dy, ds, du
            # dx = q - Wop(ds) cancels catastrophically once W is large;
            # feed the achieved primal residual back through the KKT system
            # so A dx tracks rp to solver precision
            res_fix = rp - Ak @ dx - (Af @ du if nf else 0.0)
            if np.linalg.norm(res_fix) > 1e-13 * (1.0 + np.linalg.norm(rp)):
                dy2, du2 = kkt_solve(res_fix, np.zeros(nf))
                dx = dx + wop(Ak.T @ dy2)
                du = du + du2
            return dx, dy, ds, du

        # ---- predictor
        try:
            dx_a, dy_a, ds_a, du_a = directions(-x)
        except FloatingPointError:
            status = NUMERICAL
            break
        if not (np.all(np.isfinite(dx_a)) and np.all(np.isfinite(dy_a))
                and np.all(np.isfinite(ds_a)) and np.all(np.isfinite(du_a))):
            status = NUMERICAL
            break
        ap = _max_step(layout, scal, x, dx_a, params.step_frac)
        ad = _max_step(layout, scal, s, ds_a, params.step_frac)
        mu_aff = float((x + ap * dx_a) @ (s + ad * ds_a)) / nu
        sigma = min(1.0, max(0.0, (mu_aff / mu)) ** 3)

        # ---- corrector (combined direction)
        q = _corr_target(layout, scal, sigma * mu, dx_a, ds_a)
        dx, dy, ds, du = directions(q)
        if not (np.all(np.isfinite(dx)) and np.all(np.isfinite(dy))
                and np.all(np.isfinite(ds)) and np.all(np.isfinite(du))):
            status = NUMERICAL
            break
        ap = _max_step(layout, scal, x, dx, params.step_frac)
        ad = _max_step(layout, scal, s, ds, params.step_frac)

        if ap < 1e-10 and ad < 1e-10:
            status = NUMERICAL
            break
        x = x + ap * dx
        u = u + ap * du
        y = y + ad * dy
        s = s + ad * ds
    else:
        iters_done = params.max_iter

    if status != OPTIMAL and best is not None:
        # return the best iterate seen; callers may still salvage a loose one
        _, x, y, s, u, pobj, dobj, gap, resp, resd, _ = best
    else:
        rp, rdk, rdf, pobj, dobj, gap, resp, resd = metrics()

    # reassemble full-length primal/dual vectors
    x_full = np.zeros(full_cols)
    s_full = np.zeros(full_cols)
    x_full[layout.cone_idx] = x
    if nf:
        x_full[free_orig] = u
    y_full = np.zeros(prob.num_rows)
    y_full[kept] = y
    s_full[layout.cone_idx] = s
    if layout.zero_idx.size:
        s_full[layout.zero_idx] = prob.c[layout.zero_idx] - prob.A[
            :, layout.zero_idx
        ].T @ y_full
    return ConicSolution(
        status, x_full, y_full, s_full, pobj, dobj, gap, resp, resd, iters_done
    )


def _block_pos(layout: _Layout, off: int) -> int:
    for idx, (_, o) in enumerate(layout.cone_blocks):
        if o == off:
            return idx
    raise KeyError(off)


def scal_W(scal, layout: _Layout, off: int) -> np.ndarray:
    return scal[_block_pos(layout, off)]["W"]


def _max_step(layout, scal, v, dv, frac) -> float:
    """Largest alpha <= 1 with v + alpha * dv staying in the cone interior."""
    alpha = 1.0
    for pos, (bl, off) in enumerate(layout.cone_blocks):
        seg = v[off : off + bl.dim]
        dseg = dv[off : off + bl.dim]
        if bl.kind == NONNEG:
            neg = dseg < 0
            if np.any(neg):
                alpha = min(alpha, frac * float(np.min(-seg[neg] / dseg[neg])))
        else:
            side = bl.size
            D = smat(dseg, side)
            Lb = _chol_psd(smat(seg, side))
            Z = sla.solve_triangular(Lb, D, lower=True)
            Z = sla.solve_triangular(Lb, Z.T, lower=True)
            w = np.linalg.eigvalsh(0.5 * (Z + Z.T))
            wmin = w[0]
            if wmin < 0:
                alpha = min(alpha, frac / (-wmin))
    return max(alpha, 0.0)


def _corr_target(layout, scal, sigmamu, dx_a, ds_a) -> np.ndarray:
    """RHS of the scaled complementarity equation for the combined step."""
    out = np.empty_like(dx_a)
    for pos, (bl, off) in enumerate(layout.cone_blocks):
        if bl.kind == NONNEG:
            d = scal[pos]["d"]
            lam = scal[pos]["lam"]
            dxh = dx_a[off : off + bl.dim] / d
            dsh = ds_a[off : off + bl.dim] * d
            rc = (sigmamu - lam * lam - dxh * dsh) / lam
            out[off : off + bl.dim] = d * rc
        else:
            side = bl.size
            R = scal[pos]["R"]
            Rinv = scal[pos]["Rinv"]
            lam = scal[pos]["lam"]
            DXh = Rinv @ smat(dx_a[off : off + bl.dim], side) @ Rinv.T
            DSh = R.T @ smat(ds_a[off : off + bl.dim], side) @ R
            corr = DXh @ DSh
            corr = 0.5 * (corr + corr.T)
            target = -np.diag(lam * lam) - corr
            target[np.diag_indices(side)] += sigmamu
            denom = 0.5 * (lam[:, None] + lam[None, :])
            rc = target / denom
            out[off : off + bl.dim] = svec(R @ rc @ R.T)
    return out


# ----------------------------------------------------------------------
# text dump
# ----------------------------------------------------------------------
def dump_problem(prob: ConicProblem) -> str:
    """Sparse text form: cone header, A triplets, then b and c."""
    lines = ["cones " + " ".join(f"{bl.kind}:{bl.size}" for bl in prob.blocks)]
    lines.append(f"size {prob.num_rows} {prob.num_cols}")
    coo = prob.A.tocoo()
    lines.append(f"A {coo.nnz}")
    for r, cc, v in zip(coo.row, coo.col, coo.data):
        lines.append(f"{r} {cc} {v:.17g}")
    lines.append("b " + " ".join(f"{v:.17g}" for v in prob.b))
    lines.append("c " + " ".join(f"{v:.17g}" for v in prob.c))
    return "\n".join(lines) + "\n"
