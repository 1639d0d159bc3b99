"""Exchange algorithm for bilevel polynomial programs.

The bilevel program is reformulated as a semi-infinite program over the
Fritz John variety of the lower level: minimize F(x, y) subject to
psi(x, y) = 0, xi(x, y) >= 0 and H(x, y, z) = f(x, z) - f(x, y) >= 0 for
all feasible z.  The infinite constraint family is handled by the exchange
scheme: solve the master over a finite grid Z_k, test each master minimizer
with the inner separation problem, accept when the separation value clears
-eps, otherwise grow the grid with the separation minimizers.

For the simple kind (lower feasible set independent of x) accepted points
are global minimizers up to eps; for the general kind the same loop runs
but the result always carries `global_not_guaranteed`.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import relax
from .jacobian import GENERAL, SIMPLE, JacobianSystem, LowerLevel, build_system
from .poly import Polynomial, Signature
from .relax import PopOptions, PopProblem, PopResult

GLOBAL_SOLVED_EPS = "GlobalSolvedEps"
MAX_ITERATIONS = "MaxIterations"
INFEASIBLE = "Infeasible"
SUBPROBLEM_FAILURE = "SubproblemFailure"

_DEDUP_TOL = 1e-6


@dataclass
class BilevelProblem:
    """Upper objective F, upper constraints G and the lower-level program."""

    F: Polynomial
    G: List[Polynomial]
    lower: LowerLevel

    def __post_init__(self):
        sig = self.F.sig
        if self.F.block_degree("z") > 0:
            raise ValueError("upper objective must live in the (x, y) blocks")
        for i, gi in enumerate(self.G):
            if gi.sig != sig:
                raise ValueError(f"G[{i}] signature differs from F")
            if gi.block_degree("z") > 0:
                raise ValueError(f"G[{i}] must live in the (x, y) blocks")
        if self.lower.sig != sig:
            raise ValueError("lower level signature differs from F")

    @property
    def n(self) -> int:
        return self.F.sig.n

    @property
    def p(self) -> int:
        return self.F.sig.p

    @property
    def kind(self) -> str:
        return self.lower.kind


@dataclass
class CandidateRecord:
    x: np.ndarray
    y: np.ndarray
    v: float  # H evaluated at the best computed separation minimizer
    v_bound: float  # SDP lower bound of the separation subproblem
    lower_minimizers: List[np.ndarray]
    accepted: bool


@dataclass
class IterationRecord:
    k: int
    master_bound: float
    candidates: List[CandidateRecord] = field(default_factory=list)


@dataclass
class ExchangeState:
    """Mutable state of the loop: grid, per-iteration records, accepted set."""

    k: int = 0
    grid: List[np.ndarray] = field(default_factory=list)
    records: List[IterationRecord] = field(default_factory=list)
    accepted: List[Tuple[np.ndarray, np.ndarray]] = field(default_factory=list)


def _default_subproblem_options() -> PopOptions:
    """Subproblem options for the exchange loop.

    The certification gates are the strict relax defaults; they
    self-widen with the achieved solver accuracy on degenerate
    instances.  One escalation order less than the relax default keeps
    the per-iteration cost bounded.
    """
    return PopOptions(k_extra=2)


@dataclass
class ExchangeOptions:
    eps: float = 1e-5
    k_max: int = 20
    no_psi: bool = False
    pop: PopOptions = field(default_factory=_default_subproblem_options)
    max_psi_degree: Optional[int] = None
    subset_cap: int = 4096
    audit: bool = True
    verbose: bool = False


@dataclass
class Solution:
    x: np.ndarray
    y: np.ndarray
    F_value: float
    v_check: float  # separation value from the psi-constrained subproblem
    v_audit: float = math.nan  # independent audit without psi
    audit_certified: bool = False


@dataclass
class BilevelResult:
    status: str
    solutions: List[Solution]
    v_star: float
    master_bounds: List[float]
    history: List[IterationRecord]
    iterations: int
    wall_time: float
    global_not_guaranteed: bool
    psi: Optional[JacobianSystem] = None
    failure_note: str = ""

    @property
    def best_F(self) -> float:
        if self.solutions:
            return min(s.F_value for s in self.solutions)
        return math.nan


# ----------------------------------------------------------------------
# subproblem constructions
# ----------------------------------------------------------------------
def _h_cut(f: Polynomial, z_val: np.ndarray) -> Polynomial:
    """H(x, y, z_val) = f(x, z_val) - f(x, y) as a polynomial in (x, y)."""
    return f.substitute("z", z_val) - f.rename_block("z", "y")


def build_master(
    bp: BilevelProblem,
    psi: JacobianSystem,
    grid: Sequence[np.ndarray],
    no_psi: bool = False,
) -> PopProblem:
    """Master over (x, y): psi = 0, xi >= 0, H(., ., z) >= 0 on the grid."""
    variables = [("x", i) for i in range(bp.n)] + [("y", j) for j in range(bp.p)]
    eqs: List[Polynomial] = []
    if not no_psi:
        eqs = [p.rename_block("z", "y") for p in psi]
    ineqs = list(bp.G) + [g.rename_block("z", "y") for g in bp.lower.g]
    for z_val in grid:
        ineqs.append(_h_cut(bp.lower.f, np.asarray(z_val, dtype=float)))
    ineqs = [q for q in ineqs if not q.is_zero()]
    eqs = [q for q in eqs if not q.is_zero()]
    return PopProblem(bp.F, eqs, ineqs, variables)


def build_lower_check(
    bp: BilevelProblem,
    psi: JacobianSystem,
    x_val: Sequence[float],
    y_val: Sequence[float],
    include_psi: bool = True,
) -> PopProblem:
    """Separation subproblem in z at a fixed master candidate (x, y)."""
    x_val = np.asarray(x_val, dtype=float)
    y_val = np.asarray(y_val, dtype=float)
    f = bp.lower.f
    objective = f.substitute("x", x_val) - Polynomial.constant(
        f.sig, f.eval(x=x_val, z=y_val)
    )
    eqs: List[Polynomial] = []
    if include_psi:
        eqs = [p.substitute("x", x_val) for p in psi]
        eqs = [p for p in eqs if not p.is_zero()]
    if bp.kind == GENERAL:
        ineqs = [g.substitute("x", x_val) for g in bp.lower.g]
    else:
        ineqs = list(bp.lower.g)
    ineqs = [q for q in ineqs if not q.is_zero()]
    variables = [("z", j) for j in range(bp.p)]
    return PopProblem(objective, eqs, ineqs, variables)


def _audit(bp, x_val, y_val, opts=None, backend=None):
    """(phi estimate, certified?) for the no-psi separation problem."""
    pop = build_lower_check(bp, JacobianSystem([], 0), x_val, y_val, include_psi=False)
    if opts is None:
        k_min = max(1, (pop.max_degree() + 1) // 2)
        opts = PopOptions(k_start=k_min, k_max_order=k_min + 4, rank_tol=1e-3)
    res = relax.solve_pop(pop, opts, backend=backend)
    if res.status == relax.INFEASIBLE:
        return math.inf, True
    if res.certified and res.minimizers:
        return (
            min(pop.eval_flat(pop.objective, z) for z in res.minimizers),
            True,
        )
    if math.isnan(res.bound):
        raise RuntimeError("audit subproblem failed numerically")
    return res.bound, False


def verify_candidate(
    bp: BilevelProblem,
    x_val: Sequence[float],
    y_val: Sequence[float],
    eps: float = 1e-5,
    opts: Optional[PopOptions] = None,
    backend=None,
) -> float:
    """Audit value phi(x, y) = inf_z H(x, y, z) over the raw lower feasible set.

    Solved without the psi equalities so the audit is independent of the
    Jacobian construction; phi >= -eps certifies eps-feasibility.  Uses a
    deeper order schedule than the in-loop subproblems because without psi
    the hierarchy may converge only asymptotically at degenerate minimizers.
    """
    return _audit(bp, x_val, y_val, opts=opts, backend=backend)[0]


# ----------------------------------------------------------------------
# the exchange loop
# ----------------------------------------------------------------------
def _dedup_points(
    existing: List[np.ndarray], new_pts: Sequence[np.ndarray]
) -> List[np.ndarray]:
    out = list(existing)
    for p in new_pts:
        p = np.asarray(p, dtype=float)
        if not any(np.max(np.abs(p - q)) <= _DEDUP_TOL for q in out):
            out.append(p)
    return out


def exchange_solve(
    bp: BilevelProblem,
    opts: Optional[ExchangeOptions] = None,
    backend=None,
) -> BilevelResult:
    """Run the exchange algorithm (grid starts empty, grows by separation)."""
    opts = opts or ExchangeOptions()
    t0 = time.perf_counter()
    psi = build_system(
        bp.lower, max_psi_degree=opts.max_psi_degree, subset_cap=opts.subset_cap
    )
    flag = bp.kind == GENERAL
    state = ExchangeState()
    master_bounds: List[float] = []

    def finish(status, solutions, note=""):
        vs = [
            s.v_audit if (s.audit_certified and not math.isnan(s.v_audit))
            else s.v_check
            for s in solutions
        ]
        v_star = min(vs) if vs else math.nan
        return BilevelResult(
            status=status,
            solutions=solutions,
            v_star=v_star,
            master_bounds=master_bounds,
            history=state.records,
            iterations=len(state.records),
            wall_time=time.perf_counter() - t0,
            global_not_guaranteed=flag,
            psi=psi,
            failure_note=note,
        )

    while True:
        k = state.k
        master = build_master(bp, psi, state.grid, no_psi=opts.no_psi)
        mres = relax.solve_pop(master, opts.pop, backend=backend)
        if opts.verbose:
            print(
                f"[k={k}] master: {mres.status} bound={mres.bound:.6f} "
                f"points={len(mres.minimizers)} grid={len(state.grid)}"
            )
        if mres.status == relax.INFEASIBLE:
            return finish(INFEASIBLE, [], note=f"master infeasible at k={k}")
        if not mres.certified:
            return finish(
                SUBPROBLEM_FAILURE,
                [],
                note=f"master not certified at k={k} ({mres.status})",
            )
        master_bounds.append(mres.bound)
        record = IterationRecord(k=k, master_bound=mres.bound)
        state.records.append(record)

        new_points: List[np.ndarray] = []
        accepted_here: List[Solution] = []
        for pt in mres.minimizers:
            x_val, y_val = pt[: bp.n], pt[bp.n :]
            sub = build_lower_check(
                bp, psi, x_val, y_val, include_psi=not opts.no_psi
            )
            lres = relax.solve_pop(sub, opts.pop, backend=backend)
            if lres.status == relax.INFEASIBLE or not lres.certified:
                return finish(
                    SUBPROBLEM_FAILURE,
                    [],
                    note=f"separation subproblem {lres.status} at k={k}",
                )
            # the separation value is H evaluated at the certified
            # minimizers (the SDP bound alone carries solver noise on
            # degenerate instances and both estimates agree within the
            # certification gap anyway)
            v = min(sub.eval_flat(sub.objective, z) for z in lres.minimizers)
            ok = v >= -opts.eps
            record.candidates.append(
                CandidateRecord(
                    x=np.array(x_val),
                    y=np.array(y_val),
                    v=v,
                    v_bound=lres.bound,
                    lower_minimizers=lres.minimizers,
                    accepted=ok,
                )
            )
            if opts.verbose:
                zs = ", ".join(np.array2string(z, precision=4) for z in lres.minimizers)
                print(f"    cand x={x_val} y={y_val} v={v:.3e} z*=[{zs}] ok={ok}")
            if ok:
                accepted_here.append(
                    Solution(
                        x=np.array(x_val),
                        y=np.array(y_val),
                        F_value=bp.F.eval(x=x_val, y=y_val),
                        v_check=v,
                    )
                )
            else:
                new_points.extend(lres.minimizers)

        if accepted_here:
            if opts.audit:
                for sol in accepted_here:
                    try:
                        sol.v_audit, sol.audit_certified = _audit(
                            bp, sol.x, sol.y, backend=backend
                        )
                    except RuntimeError:
                        sol.v_audit = math.nan
            state.accepted = [(s.x, s.y) for s in accepted_here]
            return finish(GLOBAL_SOLVED_EPS, accepted_here)

        if k > opts.k_max:
            return finish(MAX_ITERATIONS, [], note="iteration cap reached")

        grown = _dedup_points(state.grid, new_points)
        if len(grown) == len(state.grid):
            return finish(
                MAX_ITERATIONS,
                [],
                note="grid stopped growing (numerical stagnation)",
            )
        state.grid = grown
        state.k += 1


def iteration_trace(result: BilevelResult, precision: int = 4) -> str:
    """Plain-text trace with the paper-style columns."""
    lines = ["Iter k | (x_i^k, y_i^k) | z_{i,j}^k | F_k* | v_i^k"]
    for rec in result.history:
        for cand in rec.candidates:
            pt = np.concatenate([cand.x, cand.y])
            zs = "; ".join(
                np.array2string(z, precision=precision, separator=",")
                for z in cand.lower_minimizers
            )
            lines.append(
                f"{rec.k} | {np.array2string(pt, precision=precision, separator=',')}"
                f" | {zs} | {rec.master_bound:.{precision}f} | {cand.v:.3e}"
            )
    return "\n".join(lines)
