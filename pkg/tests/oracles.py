"""Independent symbolic oracles for the unit tests.

Everything here is computed with sympy in exact arithmetic and
deliberately avoids the package's own basis and assembly code paths, so
agreement is evidence rather than tautology.
"""

import sympy as sp

X, Y = sp.symbols("x y")
MONOMIALS = (sp.Integer(1), X, Y, X**2, X * Y, Y**2)


def triangle_area(coords):
    (x0, y0), (x1, y1), (x2, y2) = coords
    return sp.Rational(1, 2) * ((x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0))


def edge_normal(coords, k):
    """Unit normal of the edge opposite vertex k.

    Orientation follows the global convention: the edge runs from its
    lower-index endpoint to the higher one, and the normal is the
    tangent rotated a quarter turn counterclockwise.
    """
    i, j = sorted({0, 1, 2} - {k})
    ax, ay = coords[i]
    bx, by = coords[j]
    dx, dy = bx - ax, by - ay
    length = sp.sqrt(dx * dx + dy * dy)
    return sp.simplify(-dy / length), sp.simplify(dx / length)


def morley_basis(coords):
    """Six local shape functions on one triangle, as sympy expressions.

    Degrees of freedom: values at the three vertices, then the mean
    normal derivative over the edge opposite each vertex.
    """
    coords = [(sp.nsimplify(p[0]), sp.nsimplify(p[1])) for p in coords]
    t = sp.symbols("t")
    rows = []
    for k in range(3):
        px, py = coords[k]
        rows.append([m.subs({X: px, Y: py}) for m in MONOMIALS])
    for k in range(3):
        i, j = sorted({0, 1, 2} - {k})
        ax, ay = coords[i]
        bx, by = coords[j]
        nx, ny = edge_normal(coords, k)
        row = []
        for m in MONOMIALS:
            nd = sp.diff(m, X) * nx + sp.diff(m, Y) * ny
            on_edge = nd.subs({X: ax + t * (bx - ax), Y: ay + t * (by - ay)})
            row.append(sp.integrate(sp.expand(on_edge), (t, 0, 1)))
        rows.append(row)
    D = sp.Matrix(rows)
    C = D.inv()
    return [
        sp.expand(sum(C[m, i] * MONOMIALS[m] for m in range(6))) for i in range(6)
    ]


def integrate_triangle(expr, coords):
    """Exact integral of expr(x, y) over the triangle."""
    coords = [(sp.nsimplify(p[0]), sp.nsimplify(p[1])) for p in coords]
    u, v = sp.symbols("u v")
    (x0, y0), (x1, y1), (x2, y2) = coords
    xm = x0 + u * (x1 - x0) + v * (x2 - x0)
    ym = y0 + u * (y1 - y0) + v * (y2 - y0)
    jac = sp.Abs((x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0))
    inner = sp.integrate(sp.expand(expr.subs({X: xm, Y: ym})), (u, 0, 1 - v))
    return sp.integrate(inner, (v, 0, 1)) * jac


def hessian(expr):
    return (
        sp.diff(expr, X, 2),
        sp.diff(expr, X, Y),
        sp.diff(expr, Y, 2),
    )


def biharmonic_entry(phi, psi, coords):
    """Exact full-Hessian inner product of two polynomials over a triangle."""
    hxx1, hxy1, hyy1 = hessian(phi)
    hxx2, hxy2, hyy2 = hessian(psi)
    integrand = hxx1 * hxx2 + 2 * hxy1 * hxy2 + hyy1 * hyy2
    return integrate_triangle(integrand, coords)


def monomial_integral_reference(a, b):
    """Exact integral of x^a y^b over the unit reference triangle."""
    return sp.Rational(
        sp.factorial(a) * sp.factorial(b), sp.factorial(a + b + 2)
    )
