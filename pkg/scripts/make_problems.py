#!/usr/bin/env python3
"""Regenerate the bundled benchmark problem files (problems/*.blp)."""

import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from bilevelsdp.poly import Polynomial, Signature
from bilevelsdp.probfile import KnownData, ParsedProblem, emit

OUT = os.path.join(os.path.dirname(__file__), "..", "src", "bilevelsdp", "problems")


def C(sig, c):
    return Polynomial.constant(sig, c)


def V(sig, block, i):
    return Polynomial.variable(sig, block, i)


def known(Fs=None, sols=(), iters=None):
    return KnownData(
        F_star=Fs, solutions=[np.array(s, dtype=float) for s in sols], iterations=iters
    )


problems = []


def add(name, kind, n, p, F, f, G, g, kn, boxes=None):
    problems.append(
        ParsedProblem(
            name=name, kind=kind, n=n, p=p, F=F, f=f, G=list(G), g=list(g),
            known=kn, box=boxes or {},
        )
    )


def unit_box_1d():
    """The seven Table-3 SBPPs share x in [-1,1], z in [-1,1]."""
    sig = Signature(1, 1)
    x, y, z = V(sig, "x", 0), V(sig, "y", 0), V(sig, "z", 0)
    one = C(sig, 1.0)
    return sig, x, y, z, one


# ---------------------------------------------------------------- ablation pair
sig, x, y, z, one = unit_box_1d()
F = x * y - y + (y * y).scale(0.5)
f = (x * (z * z)).scale(-1.0) + (z**4).scale(0.5)
bx = {("x", 0): (-1.0, 1.0), ("y", 0): (-1.0, 1.0), ("z", 0): (-1.0, 1.0)}
add("ex2_2", "simple", 1, 1, F, f, [one - x * x], [one - z * z],
    known(-0.2581, [(0.1886, 0.4343)], 2), bx)
add("ex3_19", "simple", 1, 1, F, f, [one - x * x], [one - z * z],
    known(-0.2581, [(0.1886, 0.4343)], 2), bx)

# ------------------------------------------------------------- KKT-failure pair
sig = Signature(1, 1)
x, y, z = V(sig, "x", 0), V(sig, "y", 0), V(sig, "z", 0)
one = C(sig, 1.0)
add("ex2_3", "simple", 1, 1, (x - one) ** 2 + y * y, x * x * z,
    [], [(z * z).scale(-1.0)], known(0.0, [(1.0, 0.0)], 1),
    {("x", 0): (-2.0, 2.0), ("y", 0): (-2.0, 2.0), ("z", 0): (-2.0, 2.0)})

sig = Signature(1, 2)
x = V(sig, "x", 0)
y1, y2 = V(sig, "y", 0), V(sig, "y", 1)
z1, z2 = V(sig, "z", 0), V(sig, "z", 1)
one, two, three = C(sig, 1.0), C(sig, 2.0), C(sig, 3.0)
add("ex2_4", "simple", 1, 2, x + y1 + y2, x * (z1 + z2),
    [x - two, three - x],
    [z1 * z1 - z2 * z2 - (z1 * z1 + z2 * z2) ** 2, z1],
    known(2.0, [(2.0, 0.0, 0.0)], 1),
    {("x", 0): (2.0, 3.0), ("y", 0): (-1.0, 1.0), ("y", 1): (-1.0, 1.0),
     ("z", 0): (-1.0, 1.0), ("z", 1): (-1.0, 1.0)})

# ------------------------------------------------------------------ Table 3 set
sig, x, y, z, one = unit_box_1d()
quarter = C(sig, 0.25)


def t3(name, F, f, Fs, sols, iters):
    add(name, "simple", 1, 1, F, f, [one - x * x], [one - z * z],
        known(Fs, sols, iters), dict(bx))


t3("ex3_14", (x - quarter) ** 2 + y * y, (z**3).scale(1 / 3) - x * z,
   0.25, [(0.25, 0.5)], 2)
t3("ex3_15", x + y, (x * z * z).scale(0.5) - (z**3).scale(1 / 3),
   0.0, [(-1.0, 1.0)], 2)
t3("ex3_16", x.scale(2.0) + y, (x * z * z).scale(-0.5) - (z**4).scale(0.25),
   -2.0, [(-0.5, -1.0), (-1.0, 0.0)], 2)
t3("ex3_17", (x + C(sig, 0.5)) ** 2 + (y * y).scale(0.5),
   (x * z * z).scale(0.5) + (z**4).scale(0.25),
   0.1875, [(-0.25, 0.5), (-0.25, -0.5)], 4)
t3("ex3_18", (x * x).scale(-1.0) + y * y, x * z * z - (z**4).scale(0.5),
   -1.0, [(1.0, 0.0)], 2)
t3("ex3_20", (x - quarter) ** 2 + y * y, (z**3).scale(1 / 3) - x * x * z,
   0.3125, [(0.5, 0.5)], 2)

# -------------------------------------------------- value-function comparison
sig = Signature(2, 2)
x1, x2 = V(sig, "x", 0), V(sig, "x", 1)
y1, y2 = V(sig, "y", 0), V(sig, "y", 1)
z1, z2 = V(sig, "z", 0), V(sig, "z", 1)
one = C(sig, 1.0)
F = (y1**3) * (x1 * x1 - (x1 * x2).scale(3.0)) - y1 * y1 * y2 + y2 * (x2**3)
f = z1 * z2 * z2 - z2**3 - z1 * z1 * (x2 - x1 * x1)
add("ex6_1", "simple", 2, 2, F, f,
    [one - x1 * x1, one - x2 * x2, y2 + y1 * (one - x1 * x1)],
    [one - z1 * z1 - z2 * z2],
    known(-1.0219, [(0.5708, -1.0, -0.1639, 0.9865)], 2),
    {("x", 0): (-1, 1), ("x", 1): (-1, 1), ("y", 0): (-1.5, 1.5),
     ("y", 1): (-1.5, 1.5), ("z", 0): (-1, 1), ("z", 1): (-1, 1)})

# --------------------------------------------------------------- larger SBPPs
sig = Signature(2, 3)
x1, x2 = V(sig, "x", 0), V(sig, "x", 1)
ys = [V(sig, "y", i) for i in range(3)]
zs = [V(sig, "z", i) for i in range(3)]
one = C(sig, 1.0)
ynorm = ys[0] * ys[0] + ys[1] * ys[1] + ys[2] * ys[2]
add("ex5_1", "simple", 2, 3,
    x1 * ys[0] + x2 * ys[1] * ys[1] + x1 * x2 * ys[2] ** 3,
    x1 * zs[0] * zs[0] + x2 * zs[1] * zs[1] + (x1 - x2) * zs[2] * zs[2],
    [one - x1 * x1, one - x2 * x2, x1 * x1 - C(sig, 0.1),
     ynorm - C(sig, 1.5), C(sig, 2.5) - ynorm],
    [one - zs[i] * zs[i] for i in range(3)],
    known(-2.3536, [(-1, -1, 1, 1, -0.7071), (-1, -1, 1, -1, -0.7071)], 1))

znorm = zs[0] * zs[0] + zs[1] * zs[1] + zs[2] * zs[2]
add("ex5_2", "simple", 2, 3,
    x1 * ys[0] + x2 * ys[1] + x1 * x2 * ys[0] * ys[1] * ys[2],
    x1 * zs[0] * zs[0] + x2 * x2 * zs[1] * zs[2] - zs[0] * zs[2] * zs[2],
    [one - x1 * x1, one - x2 * x2, x1 * x1 - ys[0] * ys[1]],
    [znorm - one, C(sig, 2.0) - znorm],
    known(-1.7095, [(-1, -1, 1.1097, 0.3143, -0.8184)], 1))

sig = Signature(4, 4)
xs = [V(sig, "x", i) for i in range(4)]
ys = [V(sig, "y", i) for i in range(4)]
zs = [V(sig, "z", i) for i in range(4)]
one = C(sig, 1.0)
xnorm = sum((xi * xi for xi in xs), C(sig, 0.0))
znorm = sum((zi * zi for zi in zs), C(sig, 0.0))
add("table5", "simple", 4, 4,
    xs[0] * xs[0] * ys[0] + xs[1] * ys[1] + xs[2] * ys[2] * ys[2] + xs[3] * ys[3] * ys[3],
    zs[0] * zs[0] - zs[1] * (xs[0] + xs[1]) - (zs[2] + zs[3]) * (xs[2] + xs[3]),
    [one - xnorm, xs[0] - ys[0] * ys[1], xs[2] * xs[2] - ys[2] * ys[3]],
    [one - znorm, zs[0] - zs[1] * zs[1] - zs[2] * zs[2] - zs[3] * zs[3]],
    known(-0.4370, [(0, 0, -0.7071, -0.7071, 0.6180, 0, -0.5559, -0.5559)], 5))

# ----------------------------------------------------------------- small GBPPs
sig = Signature(1, 1)
x, y, z = V(sig, "x", 0), V(sig, "y", 0), V(sig, "z", 0)
one = C(sig, 1.0)
add("ex4_1", "general", 1, 1, x * x, z,
    [one - x * x, one - y * y, y - one - x + (x * x).scale(9.0)],
    [(z * z) * (C(sig, 0.5) - x), one - z * z],
    known(0.1757, [(-0.4191, -1.0)], 2),
    {("x", 0): (-1, 1), ("y", 0): (-1, 1), ("z", 0): (-1, 1)})

five = C(sig, 5.0)
add("ex4_3", "general", 1, 1, (x - C(sig, 3.0)) ** 2 + (y - C(sig, 2.0)) ** 2,
    (z - five) ** 2,
    [x, C(sig, 8.0) - x],
    [z, C(sig, 6.0) - z, one + x.scale(2.0) - z, z.scale(2.0) - x - C(sig, 2.0),
     C(sig, 14.0) - x - z.scale(2.0)],
    known(9.0001, [(2.9972, 5.0)], 2),
    {("x", 0): (0, 8), ("y", 0): (0, 6), ("z", 0): (0, 6)})

sig = Signature(2, 3)
x1, x2 = V(sig, "x", 0), V(sig, "x", 1)
ys = [V(sig, "y", i) for i in range(3)]
zs = [V(sig, "z", i) for i in range(3)]
one = C(sig, 1.0)
add("ex5_7", "general", 2, 3,
    (x1 * x1 * ys[0]).scale(0.5) + x2 * ys[1] * ys[1] - (x1 + x2 * x2) * ys[2],
    x2 * (zs[0] * zs[1] * zs[2] + zs[1] * zs[1] - zs[2] ** 3),
    [one - x1 * x1, one - x2 * x2,
     x1 + x2 - x1 * x1 - ys[0] * ys[0] - ys[1] * ys[1]],
    [x1 - zs[0] * zs[0] - zs[1] * zs[1] - zs[2] * zs[2], one - (zs[1] * zs[2]).scale(2.0)],
    known(-2.0, [(1, 1, 0, 0, 1)], 1))

sig = Signature(4, 4)
xs = [V(sig, "x", i) for i in range(4)]
ys = [V(sig, "y", i) for i in range(4)]
zs = [V(sig, "z", i) for i in range(4)]
one = C(sig, 1.0)
xnorm = sum((xi * xi for xi in xs), C(sig, 0.0))
add("table7", "general", 4, 4,
    (xs[0] + xs[1] + xs[2] + xs[3]) * (ys[0] + ys[1] + ys[2] + ys[3]),
    xs[0] * zs[0] + xs[1] * zs[1] + zs[2].scale(0.1) + zs[3].scale(0.5) - zs[2] * zs[3],
    [one - xnorm, xs[3] - ys[2] * ys[2], xs[0] - ys[1] * ys[3]],
    [xs[0] * xs[0] + xs[2] * xs[2] + xs[1] + xs[3]
     - zs[0] * zs[0] - (zs[1] * zs[1]).scale(2.0)
     - (zs[2] * zs[2]).scale(3.0) - (zs[3] * zs[3]).scale(4.0),
     zs[1] * zs[2] - zs[0] * zs[3]],
    known(-3.4880, [(0.5135, 0.5050, 0.4882, 0.4929,
                     -0.8346, -0.4104, -0.2106, -0.2887)], 2))

# ------------------------------------------------------------------- Table 9
sig = Signature(1, 1)
x, y, z = V(sig, "x", 0), V(sig, "y", 0), V(sig, "z", 0)
one = C(sig, 1.0)
add("t9_1", "general", 1, 1, (x + y).scale(-1.0), z,
    [], [z - x, z.scale(-1.0)], known(0.0, [(0.0, 0.0)], 1))

add("t9_2", "general", 1, 1, (x - one) ** 2 + y * y, z**3 - z.scale(3.0),
    [x + C(sig, 3.0), C(sig, 2.0) - x], [z - x],
    known(1.0, [(1.0, 1.0)], 2),
    {("x", 0): (-3, 2), ("y", 0): (-3, 3), ("z", 0): (-3, 3)})

f3 = (z**4 + (z**3) * (one - x).scale(4.0 / 30.0)
      + (z * z) * (x.scale(0.16) - (x * x).scale(0.02) - C(sig, 0.4))
      + z * ((x**3).scale(0.004) - (x * x).scale(0.036) + x.scale(0.08)))
add("t9_3", "general", 1, 1, (x - C(sig, 0.6)) ** 2 + y * y, f3,
    [one - x * x, one - y * y],
    [z * z - C(sig, 0.01) - (x * x).scale(0.01), one - z * z],
    known(0.1917, [(0.6436, -0.4356)], 2),
    {("x", 0): (-1, 1), ("y", 0): (-1, 1), ("z", 0): (-1, 1)})

sig = Signature(1, 2)
x = V(sig, "x", 0)
y1, y2 = V(sig, "y", 0), V(sig, "y", 1)
z1, z2 = V(sig, "z", 0), V(sig, "z", 1)
one = C(sig, 1.0)
add("t9_4", "general", 1, 2, (x**3) * y1 + y2, z2.scale(-1.0),
    [x, one - x, y1 + one, one - y1, y2, C(sig, 100.0) - y2],
    [C(sig, 10.0) - x * z1, one - z1 * z1 - x * z2,
     z1 + one, one - z1, z2, C(sig, 100.0) - z2],
    known(1.0, [(1.0, 0.0, 1.0)], 1),
    {("x", 0): (0, 1), ("y", 0): (-1, 1), ("y", 1): (0, 100)})

add("t9_5", "general", 1, 2, x.scale(-1.0) - y1.scale(3.0) + y2.scale(2.0),
    z1.scale(-1.0),
    [x, C(sig, 8.0) - x, y1, C(sig, 4.0) - y1, y2, C(sig, 6.0) - y2],
    [C(sig, 16.0) + x.scale(2.0) - z1 - z2.scale(4.0),
     C(sig, 48.0) - x.scale(8.0) - z1.scale(3.0) + z2.scale(2.0),
     x.scale(2.0) - z1 + z2.scale(3.0) - C(sig, 12.0),
     z1, C(sig, 4.0) - z1, z2, C(sig, 6.0) - z2],
    known(-13.0, [(5.0, 4.0, 2.0)], 1),
    {("x", 0): (0, 8), ("y", 0): (0, 4), ("y", 1): (0, 6)})

sig = Signature(2, 2)
x1, x2 = V(sig, "x", 0), V(sig, "x", 1)
y1, y2 = V(sig, "y", 0), V(sig, "y", 1)
z1, z2 = V(sig, "z", 0), V(sig, "z", 1)
one = C(sig, 1.0)
add("t9_6", "general", 2, 2, y2.scale(-1.0),
    z1 * z1 + (z2 + one) ** 2,
    [y1 * y2, (y1 * y2).scale(-1.0), x1, x2],
    [one - (z1 - x1) ** 2 - (z2 - one - x1) ** 2,
     one - (z1 + x2) ** 2 - (z2 - one - x2) ** 2],
    known(-1.0, [(0.7071, 0.7071, 0.0, 1.0)], 2))

add("t9_7", "general", 2, 2,
    (x1 * x1).scale(-1.0) - x2.scale(3.0) - y1.scale(4.0) + y2 * y2,
    z1 * z1 - z2.scale(5.0),
    [x1, x2, y1, y2, C(sig, 4.0) - x1 * x1 - x2.scale(2.0)],
    [x1 * x1 - x1.scale(2.0) + x2 * x2 - z1.scale(2.0) + z2 + C(sig, 3.0),
     x2 + z1.scale(3.0) - z2.scale(4.0) - C(sig, 4.0)],
    known(-12.6787, [(0.0, 2.0, 1.875, 0.90625)], 2))


def main():
    os.makedirs(OUT, exist_ok=True)
    for prob in problems:
        path = os.path.join(OUT, prob.name + ".blp")
        with open(path, "w") as fh:
            fh.write(emit(prob))
        print("wrote", path)
    print(f"{len(problems)} problem files")


if __name__ == "__main__":
    main()
