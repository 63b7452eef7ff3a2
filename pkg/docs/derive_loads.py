"""Offline derivation of the manufactured right-hand sides.

Run with any recent sympy:  python docs/derive_loads.py

For a prescribed pair (u, v) the clamped plate system needs

    f = Lap^2 u - [u, v],
    g = Lap^2 v + 1/2 [u, u],

with the bracket [a, b] = a_xx b_yy + a_yy b_xx - 2 a_xy b_xy.  The
printed expressions are transcribed by hand into vkmorley/problems.py;
this script is the source of record for that transcription and also
prints spot-check values frozen into the test suite.
"""

import sympy as sp

x, y = sp.symbols("x y")


def bracket(a, b):
    return (
        sp.diff(a, x, 2) * sp.diff(b, y, 2)
        + sp.diff(a, y, 2) * sp.diff(b, x, 2)
        - 2 * sp.diff(a, x, 1, y, 1) * sp.diff(b, x, 1, y, 1)
    )


def bilap(a):
    return sp.diff(a, x, 4) + 2 * sp.diff(a, x, 2, y, 2) + sp.diff(a, y, 4)


def report(name, u, v):
    f = sp.expand(bilap(u) - bracket(u, v))
    g = sp.expand(bilap(v) + sp.Rational(1, 2) * bracket(u, u))
    print(f"== {name} ==")
    print("u      =", u)
    print("f      =", sp.simplify(f))
    print("g      =", sp.simplify(g))
    for expr, label in ((f, "f"), (g, "g")):
        val = expr.subs({x: sp.Rational(1, 2), y: sp.Rational(1, 2)})
        print(f"{label}(1/2, 1/2) =", sp.nsimplify(val), "=", float(val))
    # Clamped boundary: value and normal slope vanish on the unit square.
    for side in ({x: 0}, {x: 1}, {y: 0}, {y: 1}):
        assert sp.simplify(u.subs(side)) == 0
        assert sp.simplify(sp.diff(u, x).subs(side)) == 0 or list(side) == [y]
        assert sp.simplify(sp.diff(u, y).subs(side)) == 0 or list(side) == [x]
    print()
    return f, g


poly = (x * (1 - x) * y * (1 - y)) ** 2
report("square-poly (v = u)", poly, poly)

trig = sp.sin(sp.pi * x) ** 2 * sp.sin(sp.pi * y) ** 2
report("square-trig (v = u)", trig, trig)

print("== biharm-linear ==")
print("f = g =", sp.expand(bilap(poly)))
print("f(1/2, 1/2) =", float(bilap(poly).subs({x: sp.Rational(1, 2), y: sp.Rational(1, 2)})))
