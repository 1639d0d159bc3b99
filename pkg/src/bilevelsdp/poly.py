"""Sparse multivariate polynomial arithmetic over named variable blocks.

Polynomials live in R[x, y, z] where x has length ``n`` and y, z both have
length ``p`` (y is the upper-level copy of the lower-level variable z).
Coefficients are doubles; terms are stored sparsely as a map from exponent
tuples to coefficients.  The term order used everywhere (printing, moment
bases) is graded lexicographic on the concatenated (x, y, z) exponent
vector: lower total degree first, and within a degree the x-heavy monomial
first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

BLOCKS = ("x", "y", "z")

# Coefficients below this magnitude are dropped on normalization.
COEF_EPS = 1e-15
# Relative cleanup threshold after numeric substitution.
SUBST_EPS = 1e-12

ExpKey = Tuple[int, ...]


class SignatureMismatch(ValueError):
    """Operands declare different variable-block signatures."""


class DimensionMismatch(ValueError):
    """A point or value vector does not match the block length."""


@dataclass(frozen=True)
class Signature:
    """Variable-block signature: x in R^n, y and z in R^p."""

    n: int
    p: int

    def __post_init__(self):
        if self.n < 0 or self.p < 0:
            raise ValueError("block lengths must be nonnegative")

    @property
    def total(self) -> int:
        return self.n + 2 * self.p

    def block_slice(self, block: str) -> slice:
        if block == "x":
            return slice(0, self.n)
        if block == "y":
            return slice(self.n, self.n + self.p)
        if block == "z":
            return slice(self.n + self.p, self.n + 2 * self.p)
        raise ValueError(f"unknown block {block!r}")

    def block_len(self, block: str) -> int:
        return self.n if block == "x" else self.p


@dataclass(frozen=True)
class Monomial:
    """Exponent data of a single term, split by block."""

    x_exp: Tuple[int, ...]
    y_exp: Tuple[int, ...]
    z_exp: Tuple[int, ...]

    def __post_init__(self):
        if len(self.y_exp) != len(self.z_exp):
            raise DimensionMismatch("y and z exponent blocks must have equal length")
        if any(e < 0 for e in self.x_exp + self.y_exp + self.z_exp):
            raise ValueError("exponents must be nonnegative")

    @property
    def degree(self) -> int:
        return sum(self.x_exp) + sum(self.y_exp) + sum(self.z_exp)

    def key(self) -> ExpKey:
        return self.x_exp + self.y_exp + self.z_exp


def grlex_key(exps: ExpKey):
    """Sort key for graded lexicographic order (x-heavy terms first)."""
    return (sum(exps), tuple(-e for e in exps))


def _format_coef(c: float) -> str:
    s = f"{c:.12g}"
    return s


class Polynomial:
    """Immutable sparse polynomial over a fixed block signature."""

    __slots__ = ("sig", "_terms", "_hash")

    def __init__(self, sig: Signature, terms: Dict[ExpKey, float] | None = None):
        self.sig = sig
        clean: Dict[ExpKey, float] = {}
        if terms:
            for key, coef in terms.items():
                if len(key) != sig.total:
                    raise DimensionMismatch(
                        f"exponent tuple of length {len(key)} for signature {sig}"
                    )
                if abs(coef) >= COEF_EPS:
                    clean[key] = float(coef)
        self._terms = clean
        self._hash = None

    # ------------------------------------------------------------------
    # constructors
    # ------------------------------------------------------------------
    @classmethod
    def zero(cls, sig: Signature) -> "Polynomial":
        return cls(sig, {})

    @classmethod
    def constant(cls, sig: Signature, c: float) -> "Polynomial":
        return cls(sig, {tuple([0] * sig.total): c})

    @classmethod
    def variable(cls, sig: Signature, block: str, index: int) -> "Polynomial":
        length = sig.block_len(block)
        if not 0 <= index < length:
            raise DimensionMismatch(f"{block}[{index}] out of range (len {length})")
        exps = [0] * sig.total
        exps[sig.block_slice(block).start + index] = 1
        return cls(sig, {tuple(exps): 1.0})

    @classmethod
    def from_terms(
        cls,
        sig: Signature,
        terms: Iterable[Tuple[float, Sequence[int], Sequence[int], Sequence[int]]],
    ) -> "Polynomial":
        """Build from (coef, x_exp, y_exp, z_exp) tuples, summing duplicates."""
        acc: Dict[ExpKey, float] = {}
        for coef, xe, ye, ze in terms:
            if len(xe) != sig.n or len(ye) != sig.p or len(ze) != sig.p:
                raise DimensionMismatch("term exponent blocks do not match signature")
            key = tuple(xe) + tuple(ye) + tuple(ze)
            acc[key] = acc.get(key, 0.0) + float(coef)
        return cls(sig, acc)

    # ------------------------------------------------------------------
    # inspection
    # ------------------------------------------------------------------
    @property
    def terms(self) -> Dict[ExpKey, float]:
        return self._terms

    def monomials(self) -> List[Tuple[Monomial, float]]:
        out = []
        for key in sorted(self._terms, key=grlex_key):
            n, p = self.sig.n, self.sig.p
            out.append(
                (
                    Monomial(key[:n], key[n : n + p], key[n + p :]),
                    self._terms[key],
                )
            )
        return out

    def is_zero(self) -> bool:
        return not self._terms

    def degree(self) -> int:
        if not self._terms:
            return 0
        return max(sum(k) for k in self._terms)

    def block_degree(self, block: str) -> int:
        sl = self.sig.block_slice(block)
        if not self._terms:
            return 0
        return max(sum(k[sl]) for k in self._terms)

    def max_abs_coef(self) -> float:
        if not self._terms:
            return 0.0
        return max(abs(c) for c in self._terms.values())

    def constant_term(self) -> float:
        return self._terms.get(tuple([0] * self.sig.total), 0.0)

    # ------------------------------------------------------------------
    # ring operations
    # ------------------------------------------------------------------
    def _check_sig(self, other: "Polynomial"):
        if self.sig != other.sig:
            raise SignatureMismatch(f"{self.sig} vs {other.sig}")

    def __add__(self, other: "Polynomial") -> "Polynomial":
        self._check_sig(other)
        acc = dict(self._terms)
        for key, coef in other._terms.items():
            acc[key] = acc.get(key, 0.0) + coef
        return Polynomial(self.sig, acc)

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        self._check_sig(other)
        acc = dict(self._terms)
        for key, coef in other._terms.items():
            acc[key] = acc.get(key, 0.0) - coef
        return Polynomial(self.sig, acc)

    def __neg__(self) -> "Polynomial":
        return Polynomial(self.sig, {k: -c for k, c in self._terms.items()})

    def __mul__(self, other: "Polynomial") -> "Polynomial":
        self._check_sig(other)
        acc: Dict[ExpKey, float] = {}
        for k1, c1 in self._terms.items():
            for k2, c2 in other._terms.items():
                key = tuple(a + b for a, b in zip(k1, k2))
                acc[key] = acc.get(key, 0.0) + c1 * c2
        return Polynomial(self.sig, acc)

    def scale(self, c: float) -> "Polynomial":
        return Polynomial(self.sig, {k: c * v for k, v in self._terms.items()})

    def __pow__(self, e: int) -> "Polynomial":
        if e < 0:
            raise ValueError("negative powers not supported")
        out = Polynomial.constant(self.sig, 1.0)
        base = self
        while e:
            if e & 1:
                out = out * base
            base = base * base if e > 1 else base
            e >>= 1
        return out

    # ------------------------------------------------------------------
    # evaluation
    # ------------------------------------------------------------------
    def _point(self, x, y, z) -> np.ndarray:
        sig = self.sig
        parts = []
        for block, vals in (("x", x), ("y", y), ("z", z)):
            length = sig.block_len(block)
            if vals is None:
                if self.block_degree(block) > 0:
                    raise DimensionMismatch(f"block {block} required but not given")
                parts.append(np.zeros(length))
            else:
                arr = np.asarray(vals, dtype=float).ravel()
                if arr.size != length:
                    raise DimensionMismatch(
                        f"block {block} expects length {length}, got {arr.size}"
                    )
                parts.append(arr)
        return np.concatenate(parts) if parts else np.zeros(0)

    def eval(self, x=None, y=None, z=None) -> float:
        """Evaluate at one point, given per-block value vectors."""
        pt = self._point(x, y, z)
        total = 0.0
        for key, coef in self._terms.items():
            term = coef
            for v, e in zip(pt, key):
                if e:
                    term *= v**e
            total += term
        return total

    def eval_many(self, x=None, y=None, z=None) -> np.ndarray:
        """Vectorized evaluation; block arrays have shape (m, block_len)."""
        sig = self.sig
        cols = []
        m = None
        for block, vals in (("x", x), ("y", y), ("z", z)):
            length = sig.block_len(block)
            if vals is None:
                if self.block_degree(block) > 0:
                    raise DimensionMismatch(f"block {block} required but not given")
                cols.append(None)
            else:
                arr = np.atleast_2d(np.asarray(vals, dtype=float))
                if arr.shape[1] != length:
                    raise DimensionMismatch(
                        f"block {block} expects width {length}, got {arr.shape[1]}"
                    )
                m = arr.shape[0] if m is None else m
                cols.append(arr)
        if m is None:
            m = 1
        full = np.zeros((m, sig.total))
        for block, arr in zip(BLOCKS, cols):
            if arr is not None:
                full[:, sig.block_slice(block)] = arr
        out = np.zeros(m)
        for key, coef in self._terms.items():
            term = np.full(m, coef)
            for j, e in enumerate(key):
                if e:
                    term = term * full[:, j] ** e
            out += term
        return out

    # ------------------------------------------------------------------
    # calculus / structural operations
    # ------------------------------------------------------------------
    def diff(self, block: str, index: int) -> "Polynomial":
        pos = self.sig.block_slice(block).start + index
        acc: Dict[ExpKey, float] = {}
        for key, coef in self._terms.items():
            e = key[pos]
            if e == 0:
                continue
            new = list(key)
            new[pos] = e - 1
            nk = tuple(new)
            acc[nk] = acc.get(nk, 0.0) + coef * e
        return Polynomial(self.sig, acc)

    def gradient(self, block: str) -> List["Polynomial"]:
        return [self.diff(block, i) for i in range(self.sig.block_len(block))]

    def substitute(self, block: str, values: Sequence[float]) -> "Polynomial":
        """Fix one block to numeric values; small coefficients are swept."""
        vals = np.asarray(values, dtype=float).ravel()
        if vals.size != self.sig.block_len(block):
            raise DimensionMismatch(
                f"block {block} expects length {self.sig.block_len(block)}"
            )
        sl = self.sig.block_slice(block)
        acc: Dict[ExpKey, float] = {}
        for key, coef in self._terms.items():
            factor = 1.0
            for v, e in zip(vals, key[sl]):
                if e:
                    factor *= v**e
            new = list(key)
            new[sl] = [0] * vals.size
            nk = tuple(new)
            acc[nk] = acc.get(nk, 0.0) + coef * factor
        out = Polynomial(self.sig, acc)
        cut = SUBST_EPS * out.max_abs_coef()
        return Polynomial(
            self.sig, {k: c for k, c in out._terms.items() if abs(c) >= cut}
        )

    def rename_block(self, src: str, dst: str) -> "Polynomial":
        """Move exponents from one p-length block to the other (y <-> z)."""
        if src not in ("y", "z") or dst not in ("y", "z"):
            raise ValueError("rename operates on the y/z blocks only")
        if src == dst:
            return self
        ssl, dsl = self.sig.block_slice(src), self.sig.block_slice(dst)
        acc: Dict[ExpKey, float] = {}
        for key, coef in self._terms.items():
            new = list(key)
            for i in range(self.sig.p):
                new[dsl.start + i] += key[ssl.start + i]
                new[ssl.start + i] = 0
            nk = tuple(new)
            acc[nk] = acc.get(nk, 0.0) + coef
        return Polynomial(self.sig, acc)

    # ------------------------------------------------------------------
    # equality / rendering
    # ------------------------------------------------------------------
    def __eq__(self, other) -> bool:
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.sig == other.sig and self._terms == other._terms

    def __hash__(self):
        if self._hash is None:
            object.__setattr__(
                self, "_hash", hash((self.sig, tuple(sorted(self._terms.items()))))
            )
        return self._hash

    def canonical_key(self):
        return tuple(sorted(self._terms.items()))

    def __str__(self) -> str:
        if not self._terms:
            return "0"
        sig = self.sig
        names = (
            [f"x{i + 1}" for i in range(sig.n)]
            + [f"y{i + 1}" for i in range(sig.p)]
            + [f"z{i + 1}" for i in range(sig.p)]
        )
        pieces = []
        for key in sorted(self._terms, key=grlex_key):
            coef = self._terms[key]
            factors = [_format_coef(abs(coef))]
            for name, e in zip(names, key):
                if e == 1:
                    factors.append(name)
                elif e > 1:
                    factors.append(f"{name}^{e}")
            body = "*".join(factors)
            if not pieces:
                pieces.append(("-" if coef < 0 else "") + body)
            else:
                pieces.append(("- " if coef < 0 else "+ ") + body)
        return " ".join(pieces)

    def __repr__(self) -> str:
        return f"Polynomial({self})"


def monomial_exponents(nvars: int, max_deg: int) -> List[Tuple[int, ...]]:
    """All exponent tuples with total degree <= max_deg, in the global order."""
    out: List[Tuple[int, ...]] = []

    def rec(prefix: List[int], remaining: int, pos: int):
        if pos == nvars - 1:
            for e in range(remaining + 1):
                out.append(tuple(prefix + [e]))
            return
        for e in range(remaining + 1):
            rec(prefix + [e], remaining - e, pos + 1)

    if nvars == 0:
        return [()] if max_deg >= 0 else []
    rec([], max_deg, 0)
    out.sort(key=grlex_key)
    return out


def basis_size(nvars: int, deg: int) -> int:
    """dim R[w]_deg = C(nvars + deg, deg)."""
    return math.comb(nvars + deg, deg)
