"""Random SBPP instance generators.

Two families, both deterministic from the seed:

* ``unconstrained_inner``: F = a1'[u]_{2d1-1} + ||B1 [u]^{d1}||^2 with
  u = (x, y), f = a2'[x]_{2d2-1} + a3'[z]_{2d2-1} + ||B2([x]^{d2};[z]^{d2})||^2,
  upper constraint ||x||^2 <= 1, no lower constraints.
* ``ball_both``: F = a'[(x,y)]_{2d1}, f = m' B m with m = ([x]_{d2};[z]_{d2}),
  upper ||x||^2 <= 1 and lower ||z||^2 <= 1.

[u]_d collects the monomials of degree <= d, [u]^d those of degree exactly
d, in the global term order.  Coefficients are standard Gaussians; each
generated polynomial is rescaled so its largest coefficient has magnitude 1.
"""

from __future__ import annotations

from typing import List, Sequence, Tuple

import numpy as np

from .bilevel import BilevelProblem
from .jacobian import LowerLevel
from .poly import Polynomial, Signature, grlex_key
from .probfile import KnownData, ParsedProblem

UNCONSTRAINED_INNER = "unconstrained_inner"
BALL_BOTH = "ball_both"
KINDS = (UNCONSTRAINED_INNER, BALL_BOTH)


def _monomials(sig: Signature, blocks: Sequence[str], deg: int, exact: bool):
    """Monomial polynomials over the given blocks, ordered globally."""
    positions: List[Tuple[str, int]] = []
    for b in blocks:
        positions.extend((b, i) for i in range(sig.block_len(b)))
    nv = len(positions)
    exps: List[Tuple[int, ...]] = []

    def rec(prefix, remaining, pos):
        if pos == nv - 1:
            rng_lo = remaining if exact else 0
            for e in range(rng_lo, remaining + 1):
                exps.append(tuple(prefix + [e]))
            return
        for e in range(remaining + 1):
            rec(prefix + [e], remaining - e, pos + 1)

    if nv == 0:
        return []
    rec([], deg, 0)
    if exact:
        exps[:] = [e for e in exps if sum(e) == deg]
    exps.sort(key=grlex_key)
    out = []
    for e in exps:
        poly = Polynomial.constant(sig, 1.0)
        for (b, i), k in zip(positions, e):
            if k:
                poly = poly * Polynomial.variable(sig, b, i) ** k
        out.append(poly)
    return out


def _unit_scale(poly: Polynomial) -> Polynomial:
    m = poly.max_abs_coef()
    return poly.scale(1.0 / m) if m > 0 else poly


def _lincomb(coefs: np.ndarray, monos: List[Polynomial], sig: Signature) -> Polynomial:
    out = Polynomial.zero(sig)
    for c, m in zip(coefs, monos):
        out = out + m.scale(float(c))
    return out


def _gram_form(B: np.ndarray, monos: List[Polynomial], sig: Signature) -> Polynomial:
    gram = B.T @ B
    out = Polynomial.zero(sig)
    for i in range(len(monos)):
        for j in range(len(monos)):
            if gram[i, j] != 0.0:
                out = out + (monos[i] * monos[j]).scale(float(gram[i, j]))
    return out


def _quad_form(B: np.ndarray, monos: List[Polynomial], sig: Signature) -> Polynomial:
    out = Polynomial.zero(sig)
    for i in range(len(monos)):
        for j in range(len(monos)):
            if B[i, j] != 0.0:
                out = out + (monos[i] * monos[j]).scale(float(B[i, j]))
    return out


def gen_random(
    kind: str, n: int, p: int, d1: int, d2: int, seed: int
) -> ParsedProblem:
    """Deterministic random SBPP; see the module docstring for the recipes."""
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}, got {kind!r}")
    if d1 < 1 or d2 < 1:
        raise ValueError("d1 and d2 must be >= 1")
    rng = np.random.default_rng(seed)
    sig = Signature(n, p)
    one = Polynomial.constant(sig, 1.0)
    x_ball = one
    for i in range(n):
        v = Polynomial.variable(sig, "x", i)
        x_ball = x_ball - v * v

    if kind == UNCONSTRAINED_INNER:
        u_low = _monomials(sig, ("x", "y"), 2 * d1 - 1, exact=False)
        u_top = _monomials(sig, ("x", "y"), d1, exact=True)
        a1 = rng.standard_normal(len(u_low))
        B1 = rng.standard_normal((len(u_top), len(u_top)))
        F = _unit_scale(_lincomb(a1, u_low, sig) + _gram_form(B1, u_top, sig))

        x_low = _monomials(sig, ("x",), 2 * d2 - 1, exact=False)
        z_low = _monomials(sig, ("z",), 2 * d2 - 1, exact=False)
        mixed_top = _monomials(sig, ("x",), d2, exact=True) + _monomials(
            sig, ("z",), d2, exact=True
        )
        a2 = rng.standard_normal(len(x_low))
        a3 = rng.standard_normal(len(z_low))
        B2 = rng.standard_normal((len(mixed_top), len(mixed_top)))
        f = _unit_scale(
            _lincomb(a2, x_low, sig)
            + _lincomb(a3, z_low, sig)
            + _gram_form(B2, mixed_top, sig)
        )
        G = [x_ball]
        g: List[Polynomial] = []
    else:
        u_all = _monomials(sig, ("x", "y"), 2 * d1, exact=False)
        a = rng.standard_normal(len(u_all))
        F = _unit_scale(_lincomb(a, u_all, sig))
        mixed = _monomials(sig, ("x",), d2, exact=False) + _monomials(
            sig, ("z",), d2, exact=False
        )
        B = rng.standard_normal((len(mixed), len(mixed)))
        f = _unit_scale(_quad_form(B, mixed, sig))
        z_ball = one
        for i in range(p):
            v = Polynomial.variable(sig, "z", i)
            z_ball = z_ball - v * v
        G = [x_ball]
        g = [z_ball]

    name = f"random_{kind}_n{n}_p{p}_d{d1}{d2}_s{seed}"
    return ParsedProblem(
        name=name, kind="simple", n=n, p=p, F=F, f=f, G=G, g=g, known=KnownData()
    )
