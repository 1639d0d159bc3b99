"""Jacobian representation of the Fritz John points of a lower-level program.

For the program  min_z f(x, z)  s.t.  g_j >= 0  (g_j in z for the simple
kind, in (x, z) for the general kind), the Fritz John points are cut out by
polynomial equations built from minors of the gradient matrix

    B[J, z] = [ grad_z f ; grad_z g_{i1} ; ... ; grad_z g_{ik} ]

multiplied by the product of the constraints outside J.  We use the full set
of maximal minors of each B[J, .], which defines the same zero set as the
minimal defining set (rank deficiency iff all maximal minors vanish) at a
polynomially larger count.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .poly import Polynomial, Signature

SIMPLE = "simple"
GENERAL = "general"


class SystemSizeError(ValueError):
    """Subset enumeration would exceed the configured cap."""


@dataclass
class LowerLevel:
    """Lower-level program data: inner objective and constraint tuple."""

    f: Polynomial
    g: List[Polynomial]
    kind: str = SIMPLE

    def __post_init__(self):
        if self.kind not in (SIMPLE, GENERAL):
            raise ValueError(f"kind must be 'simple' or 'general', got {self.kind!r}")
        if self.p < 1:
            raise ValueError("lower-level dimension p must be >= 1")
        if self.f.block_degree("y") > 0:
            raise ValueError("inner objective must not involve the y block")
        for j, gj in enumerate(self.g):
            if gj.sig != self.f.sig:
                raise ValueError(f"g[{j}] signature differs from f")
            if gj.block_degree("y") > 0:
                raise ValueError(f"g[{j}] must not involve the y block")
            if self.kind == SIMPLE and gj.block_degree("x") > 0:
                raise ValueError(
                    f"kind is 'simple' but g[{j}] depends on x"
                )

    @property
    def sig(self) -> Signature:
        return self.f.sig

    @property
    def p(self) -> int:
        return self.f.sig.p

    @property
    def m2(self) -> int:
        return len(self.g)


@dataclass(frozen=True)
class PsiEntry:
    """One polynomial of the system with its construction provenance."""

    poly: Polynomial
    subset: Tuple[int, ...]
    minor_rows: Tuple[int, ...]


@dataclass
class JacobianSystem:
    """The deduplicated list psi_1, ..., psi_L cutting out the Fritz John set."""

    entries: List[PsiEntry]
    minimal_count: int
    dropped_by_degree: int = 0

    @property
    def psi(self) -> List[Polynomial]:
        return [e.poly for e in self.entries]

    @property
    def count_actual(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.psi)

    def __len__(self):
        return len(self.entries)


def b_matrix(ll: LowerLevel, J: Sequence[int]) -> List[List[Polynomial]]:
    """Gradient matrix B[J, z], shape p x (|J| + 1), rows = z-coordinates."""
    for j in J:
        if not 0 <= j < ll.m2:
            raise IndexError(f"constraint index {j} out of range [0, {ll.m2})")
    cols = [ll.f.gradient("z")] + [ll.g[j].gradient("z") for j in J]
    return [[col[i] for col in cols] for i in range(ll.p)]


def _det(mat: List[List[Polynomial]]) -> Polynomial:
    n = len(mat)
    if n == 1:
        return mat[0][0]
    if n == 2:
        return mat[0][0] * mat[1][1] - mat[0][1] * mat[1][0]
    sig = mat[0][0].sig
    out = Polynomial.zero(sig)
    for j in range(n):
        if mat[0][j].is_zero():
            continue
        sub = [[row[c] for c in range(n) if c != j] for row in mat[1:]]
        term = mat[0][j] * _det(sub)
        out = out + term if j % 2 == 0 else out - term
    return out


def minors(mat: List[List[Polynomial]], size: int) -> List[Polynomial]:
    """All size x size minors; subsets enumerated in lexicographic order."""
    rows, cols = len(mat), len(mat[0])
    if size > min(rows, cols) or size < 1:
        raise ValueError(f"minor size {size} invalid for {rows}x{cols} matrix")
    out = []
    for rsub in itertools.combinations(range(rows), size):
        for csub in itertools.combinations(range(cols), size):
            out.append(_det([[mat[r][c] for c in csub] for r in rsub]))
    return out


def count_minimal(m2: int, p: int) -> int:
    """The paper-count L of minimal defining polynomials (diagnostic only)."""
    if m2 < 0 or p < 1:
        raise ValueError("need m2 >= 0 and p >= 1")
    total = 0
    for k in range(min(m2, p - 1) + 1):
        total += math.comb(m2, k) * (p * (k + 1) - (k + 1) ** 2 + 1)
    return total


def build_system(
    ll: LowerLevel,
    max_psi_degree: Optional[int] = None,
    subset_cap: int = 4096,
) -> JacobianSystem:
    """Construct the full deduplicated psi system for the Fritz John set."""
    m2, p = ll.m2, ll.p
    if 2**m2 > subset_cap:
        raise SystemSizeError(
            f"2^{m2} constraint subsets exceed the cap {subset_cap}; "
            "raise subset_cap explicitly if this is intended"
        )
    deg_f = ll.f.degree()
    deg_g = [gj.degree() for gj in ll.g]
    entries: List[PsiEntry] = []
    seen = set()
    dropped = 0
    for size in range(min(m2, p - 1) + 1):
        for J in itertools.combinations(range(m2), size):
            comp = [j for j in range(m2) if j not in J]
            tail = Polynomial.constant(ll.sig, 1.0)
            for j in comp:
                tail = tail * ll.g[j]
            mat = b_matrix(ll, J)
            row_subsets = list(itertools.combinations(range(p), size + 1))
            mins = minors(mat, size + 1)
            deg_cap = (
                max(deg_f - 1, 0)
                + sum(deg_g[j] for j in comp)
                + sum(max(deg_g[j] - 1, 0) for j in J)
            )
            for rsub, eta in zip(row_subsets, mins):
                psi = eta * tail
                if psi.is_zero():
                    continue
                assert psi.degree() <= deg_cap, "minor degree bound violated"
                if max_psi_degree is not None and psi.degree() > max_psi_degree:
                    dropped += 1
                    continue
                key = psi.canonical_key()
                if key in seen:
                    continue
                seen.add(key)
                entries.append(PsiEntry(psi, J, rsub))
    if dropped:
        warnings.warn(
            f"{dropped} psi entries above degree {max_psi_degree} were dropped; "
            "the Fritz John variety is relaxed but still valid",
            stacklevel=2,
        )
    return JacobianSystem(entries, count_minimal(m2, p), dropped)


def fritz_john_residual(
    ll: LowerLevel, x: Sequence[float], z: Sequence[float], tol: float = 1e-6
) -> float:
    """Smallest singular value of [grad f, grad g_active] at (x, z).

    A residual ~0 means z is a Fritz John point of the lower-level program
    at x: either the active-gradient matrix is column-rank deficient or the
    active set alone has >= p + 1 columns (automatic dependence).  Used as a
    sampling oracle for checking that the psi system cuts out exactly the
    Fritz John set.
    """
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    cols = [np.array([gi.eval(x=x, z=z) for gi in ll.f.gradient("z")])]
    for gj in ll.g:
        if abs(gj.eval(x=x, z=z)) <= tol:
            cols.append(np.array([gi.eval(x=x, z=z) for gi in gj.gradient("z")]))
    if len(cols) >= ll.p + 1:
        return 0.0
    mat = np.column_stack(cols)
    return float(np.linalg.svd(mat, compute_uv=False)[-1])
