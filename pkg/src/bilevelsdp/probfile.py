"""Problem file grammar: parsing and emission.

A problem file is a flat structured-text document:

    # comments run to end of line
    kind simple            # or: general
    dims 1 1               # n p

    F:                     # upper objective, terms: coef x-exps y-exps
    1    0  2
    -1   1  1

    f:                     # lower objective, terms: coef x-exps z-exps
    1/3  0  3

    G:                     # upper constraints (>= 0), '-' separates them
    1    0  0
    -1   2  0

    g:                     # lower constraints (>= 0)
    1    0  0
    -1   0  2

    box:                   # optional metadata (grid oracles), 1-indexed
    x 1 -1 1

    known:                 # optional regression data
    F* 0.25
    sol 0.25 0.5
    iter 2

Coefficients are floats or integer fractions `a/b`.  A `kind simple` file
whose g-terms carry x-exponents is rejected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

import numpy as np

from .bilevel import BilevelProblem
from .jacobian import GENERAL, SIMPLE, LowerLevel
from .poly import Polynomial, Signature


class ProblemFileError(ValueError):
    def __init__(self, msg: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {msg}" if line else msg)


@dataclass
class KnownData:
    F_star: Optional[float] = None
    solutions: List[np.ndarray] = field(default_factory=list)
    iterations: Optional[int] = None


@dataclass
class ParsedProblem:
    name: str
    kind: str
    n: int
    p: int
    F: Polynomial
    f: Polynomial
    G: List[Polynomial]
    g: List[Polynomial]
    known: KnownData = field(default_factory=KnownData)
    box: Dict[Tuple[str, int], Tuple[float, float]] = field(default_factory=dict)

    @property
    def bilevel(self) -> BilevelProblem:
        return BilevelProblem(self.F, list(self.G), LowerLevel(self.f, list(self.g), self.kind))


def _coef(tok: str, lineno: int) -> float:
    try:
        if "/" in tok:
            return float(Fraction(tok))
        return float(tok)
    except (ValueError, ZeroDivisionError) as exc:
        raise ProblemFileError(f"bad coefficient {tok!r}: {exc}", lineno)


def _exps(toks: List[str], count: int, lineno: int, what: str) -> Tuple[int, ...]:
    if len(toks) != count:
        raise ProblemFileError(
            f"expected {count} {what} exponents, got {len(toks)}", lineno
        )
    out = []
    for t in toks:
        try:
            e = int(t)
        except ValueError:
            raise ProblemFileError(f"bad exponent {t!r}", lineno)
        if e < 0:
            raise ProblemFileError(f"negative exponent {e}", lineno)
        out.append(e)
    return tuple(out)


_HEADERS = ("F:", "f:", "G:", "g:", "known:", "box:")


def parse_text(text: str, name: str = "<string>") -> ParsedProblem:
    kind: Optional[str] = None
    n = p = None
    sig: Optional[Signature] = None
    section: Optional[str] = None
    term_acc: List = []
    poly_lists: Dict[str, List[Polynomial]] = {"F": [], "f": [], "G": [], "g": []}
    known = KnownData()
    box: Dict[Tuple[str, int], Tuple[float, float]] = {}

    def close_poly(lineno):
        nonlocal term_acc
        if section in ("F", "f", "G", "g"):
            if term_acc:
                poly_lists[section].append(Polynomial.from_terms(sig, term_acc))
                term_acc = []
            elif section in ("F", "f") and not poly_lists[section]:
                pass  # empty objective caught later

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        head = toks[0]
        if head == "kind":
            if len(toks) != 2 or toks[1] not in (SIMPLE, GENERAL):
                raise ProblemFileError("kind must be 'simple' or 'general'", lineno)
            kind = toks[1]
            continue
        if head == "dims":
            if len(toks) != 3:
                raise ProblemFileError("dims takes two integers", lineno)
            try:
                n, p = int(toks[1]), int(toks[2])
            except ValueError:
                raise ProblemFileError("dims takes two integers", lineno)
            if n < 0 or p < 1:
                raise ProblemFileError("need n >= 0 and p >= 1", lineno)
            sig = Signature(n, p)
            continue
        if head in _HEADERS:
            if sig is None:
                raise ProblemFileError("dims must precede sections", lineno)
            close_poly(lineno)
            section = head.rstrip(":")
            continue
        if section is None:
            raise ProblemFileError(f"unexpected content {line!r}", lineno)
        if section in ("F", "f", "G", "g"):
            if head == "-":
                close_poly(lineno)
                continue
            coef = _coef(toks[0], lineno)
            rest = toks[1:]
            xe = _exps(rest[:n], n, lineno, "x")
            oe = _exps(rest[n:], p, lineno, "y/z")
            if section in ("F", "G"):
                term_acc.append((coef, xe, oe, (0,) * p))
            else:
                term_acc.append((coef, xe, (0,) * p, oe))
        elif section == "known":
            if head == "F*":
                known.F_star = _coef(toks[1], lineno)
            elif head == "sol":
                vals = [_coef(t, lineno) for t in toks[1:]]
                if len(vals) != n + p:
                    raise ProblemFileError(
                        f"sol expects {n + p} values, got {len(vals)}", lineno
                    )
                known.solutions.append(np.array(vals))
            elif head == "iter":
                known.iterations = int(toks[1])
            else:
                raise ProblemFileError(f"unknown known-entry {head!r}", lineno)
        elif section == "box":
            if head not in ("x", "y", "z") or len(toks) != 4:
                raise ProblemFileError("box lines: <block> <index> <lo> <hi>", lineno)
            idx = int(toks[1]) - 1
            limit = n if head == "x" else p
            if not 0 <= idx < limit:
                raise ProblemFileError(f"box index {idx + 1} out of range", lineno)
            box[(head, idx)] = (_coef(toks[2], lineno), _coef(toks[3], lineno))
    close_poly(None)

    if kind is None:
        raise ProblemFileError("missing 'kind'")
    if sig is None:
        raise ProblemFileError("missing 'dims'")
    if not poly_lists["F"]:
        raise ProblemFileError("missing upper objective F")
    if not poly_lists["f"]:
        raise ProblemFileError("missing lower objective f")
    if len(poly_lists["F"]) > 1 or len(poly_lists["f"]) > 1:
        raise ProblemFileError("F and f sections hold exactly one polynomial")
    parsed = ParsedProblem(
        name=name,
        kind=kind,
        n=n,
        p=p,
        F=poly_lists["F"][0],
        f=poly_lists["f"][0],
        G=poly_lists["G"],
        g=poly_lists["g"],
        known=known,
        box=box,
    )
    # invariant checks surface as ProblemFileError with a field path
    try:
        parsed.bilevel
    except ValueError as exc:
        raise ProblemFileError(str(exc))
    return parsed


def parse(path) -> ParsedProblem:
    with open(path, "r") as fh:
        text = fh.read()
    import os

    return parse_text(text, name=os.path.splitext(os.path.basename(path))[0])


def _fmt(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return f"{v:.17g}"


def _emit_poly(poly: Polynomial, n: int, p: int, lower: bool) -> List[str]:
    lines = []
    for mono, coef in poly.monomials():
        exps = mono.z_exp if lower else mono.y_exp
        lines.append(
            " ".join([_fmt(coef)] + [str(e) for e in mono.x_exp] + [str(e) for e in exps])
        )
    return lines


def emit(parsed: ParsedProblem) -> str:
    out = [f"# {parsed.name}", f"kind {parsed.kind}", f"dims {parsed.n} {parsed.p}", ""]
    out.append("F:")
    out.extend(_emit_poly(parsed.F, parsed.n, parsed.p, lower=False))
    out.append("")
    out.append("f:")
    out.extend(_emit_poly(parsed.f, parsed.n, parsed.p, lower=True))
    out.append("")
    if parsed.G:
        out.append("G:")
        for i, gi in enumerate(parsed.G):
            if i:
                out.append("-")
            out.extend(_emit_poly(gi, parsed.n, parsed.p, lower=False))
        out.append("")
    if parsed.g:
        out.append("g:")
        for i, gi in enumerate(parsed.g):
            if i:
                out.append("-")
            out.extend(_emit_poly(gi, parsed.n, parsed.p, lower=True))
        out.append("")
    if parsed.box:
        out.append("box:")
        for (block, idx), (lo, hi) in sorted(parsed.box.items()):
            out.append(f"{block} {idx + 1} {_fmt(lo)} {_fmt(hi)}")
        out.append("")
    kn = parsed.known
    if kn.F_star is not None or kn.solutions or kn.iterations is not None:
        out.append("known:")
        if kn.F_star is not None:
            out.append(f"F* {_fmt(kn.F_star)}")
        for sol in kn.solutions:
            out.append("sol " + " ".join(_fmt(v) for v in sol))
        if kn.iterations is not None:
            out.append(f"iter {kn.iterations}")
        out.append("")
    return "\n".join(out)
