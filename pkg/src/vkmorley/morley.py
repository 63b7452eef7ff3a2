"""The nonconforming Morley element on a triangulation.

A Morley function is piecewise quadratic, continuous at interior
vertices, and has a continuous mean normal derivative across interior
edges; on a clamped plate both vanish along the boundary.  Degrees of
freedom are therefore the values at interior vertices followed by the
mean normal derivatives over interior edges.

Each element's six shape functions are found by solving the 6x6 duality
system against quadratic monomials written in centered coordinates
(x - c) / h, which keeps the system well conditioned at any refinement
depth.  Edge functionals are taken directly against the global edge
normal, so no per-element sign flip is needed; the sign array is kept to
make the orientation convention explicit in the data model.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .mesh import Mesh, MeshError
from .quadrature import edge_rule

__all__ = [
    "MorleySpace",
    "MorleyField",
    "build_space",
    "interpolate",
    "evaluate",
    "prolongate",
    "write_field",
    "read_field",
]

_COND_LIMIT = 1e12
_DUALITY_TOL = 1e-10


class MorleySpace:
    """Global Morley space on a mesh, with per-element shape data."""

    def __init__(self, mesh: Mesh, constrained: bool = True, _reverse_edges: bool = False):
        self.mesh = mesh
        self.constrained = constrained

        sign = -1.0 if _reverse_edges else 1.0
        self.edge_normal = sign * mesh.edge_normal
        self.edge_tangent = sign * mesh.edge_tangent

        nv, ne, nt = mesh.n_vertices, mesh.n_edges, mesh.n_triangles
        self.vertex_dof = np.full(nv, -1, dtype=np.int64)
        self.edge_dof = np.full(ne, -1, dtype=np.int64)
        if constrained:
            free_v = np.nonzero(~mesh.vertex_is_boundary)[0]
            free_e = np.nonzero(~mesh.edge_is_boundary)[0]
        else:
            free_v = np.arange(nv)
            free_e = np.arange(ne)
        self.vertex_dof[free_v] = np.arange(len(free_v))
        self.edge_dof[free_e] = len(free_v) + np.arange(len(free_e))
        self.n_vertex_dofs = len(free_v)
        self.n_dofs = len(free_v) + len(free_e)

        self.dof_map = np.empty((nt, 6), dtype=np.int64)
        self.dof_map[:, 0:3] = self.vertex_dof[mesh.tri_vertices]
        self.dof_map[:, 3:6] = self.edge_dof[mesh.tri_edges]
        self.signs = np.ones((nt, 6))

        self.centers = mesh.triangle_coords().mean(axis=1)
        self.scales = mesh.h.copy()
        self._build_local_bases()
        self._midpoints = 0.5 * (
            mesh.coords[mesh.edge_vertices[:, 0]] + mesh.coords[mesh.edge_vertices[:, 1]]
        )

    # -- local bases ---------------------------------------------------------

    def local_coords(self, t, points: np.ndarray) -> np.ndarray:
        """Map physical points to the element's centered coordinates."""
        return (points - self.centers[t]) / self.scales[t]

    def _monomials(self, xi: np.ndarray) -> np.ndarray:
        x, y = xi[..., 0], xi[..., 1]
        return np.stack([np.ones_like(x), x, y, x * x, x * y, y * y], axis=-1)

    def _build_local_bases(self) -> None:
        mesh = self.mesh
        nt = mesh.n_triangles
        pts = mesh.triangle_coords()
        xi_v = (pts - self.centers[:, None, :]) / self.scales[:, None, None]

        mids = np.empty((nt, 3, 2))
        normals = np.empty((nt, 3, 2))
        for k in range(3):
            e = mesh.tri_edges[:, k]
            ev = mesh.edge_vertices[e]
            mids[:, k] = 0.5 * (mesh.coords[ev[:, 0]] + mesh.coords[ev[:, 1]])
            normals[:, k] = self.edge_normal[e]
        xi_m = (mids - self.centers[:, None, :]) / self.scales[:, None, None]

        D = np.empty((nt, 6, 6))
        D[:, 0:3, :] = self._monomials(xi_v)
        nx, ny = normals[..., 0], normals[..., 1]
        xm, ym = xi_m[..., 0], xi_m[..., 1]
        s = self.scales[:, None]
        D[:, 3:6, 0] = 0.0
        D[:, 3:6, 1] = nx / s
        D[:, 3:6, 2] = ny / s
        D[:, 3:6, 3] = 2.0 * xm * nx / s
        D[:, 3:6, 4] = (ym * nx + xm * ny) / s
        D[:, 3:6, 5] = 2.0 * ym * ny / s

        cond = np.linalg.cond(D)
        if np.any(cond > _COND_LIMIT):
            bad = int(np.argmax(cond))
            raise MeshError(
                f"triangle {bad} produces an ill-conditioned Morley basis "
                f"(cond {cond[bad]:.2e})"
            )
        eye = np.broadcast_to(np.eye(6), (nt, 6, 6))
        self.coeffs = np.linalg.solve(D, eye)
        resid = np.abs(D @ self.coeffs - eye).max() if nt else 0.0
        if resid > _DUALITY_TOL:
            raise MeshError(f"Morley duality residual {resid:.2e} exceeds {_DUALITY_TOL}")

        C = self.coeffs
        s2 = (self.scales**2)[:, None]
        self.shape_hess = np.stack(
            [2.0 * C[:, 3, :] / s2, C[:, 4, :] / s2, 2.0 * C[:, 5, :] / s2], axis=-1
        )  # (nt, 6, 3) as (hxx, hxy, hyy)

        # Integral of each shape function: edge-midpoint rule, exact for
        # quadratics.
        vals = np.einsum("tkj,tji->tki", self._monomials(xi_m), C)
        self.shape_integral = (mesh.areas[:, None] / 3.0) * vals.sum(axis=1)

    # -- field algebra -------------------------------------------------------

    def local_values(self, coeffs: np.ndarray) -> np.ndarray:
        """Per-element dof values, constrained slots as zero: (nt, 6)."""
        padded = np.concatenate([coeffs, [0.0]])
        return padded[self.dof_map]

    def element_polys(self, coeffs: np.ndarray) -> np.ndarray:
        """Monomial coefficients (centered basis) per element: (nt, 6)."""
        return np.einsum("tij,tj->ti", self.coeffs, self.local_values(coeffs))

    def element_hessians(self, coeffs: np.ndarray) -> np.ndarray:
        """Piecewise constant Hessians as (nt, 3) rows (hxx, hxy, hyy)."""
        p = self.element_polys(coeffs)
        s2 = self.scales**2
        return np.stack([2.0 * p[:, 3] / s2, p[:, 4] / s2, 2.0 * p[:, 5] / s2], axis=-1)

    def poly_eval(self, t, polys: np.ndarray, points: np.ndarray):
        """Evaluate centered-monomial polynomials at physical points.

        Returns (values, gradients); polys has shape (..., 6) matching t.
        """
        xi = self.local_coords(t, points)
        x, y = xi[..., 0], xi[..., 1]
        c = polys
        val = (
            c[..., 0]
            + c[..., 1] * x
            + c[..., 2] * y
            + c[..., 3] * x * x
            + c[..., 4] * x * y
            + c[..., 5] * y * y
        )
        s = self.scales[t]
        gx = (c[..., 1] + 2.0 * c[..., 3] * x + c[..., 4] * y) / s
        gy = (c[..., 2] + c[..., 4] * x + 2.0 * c[..., 5] * y) / s
        return val, np.stack([gx, gy], axis=-1)


def batch_eval(space: MorleySpace, polys: np.ndarray, points: np.ndarray):
    """Evaluate per-element polynomials at per-element point sets.

    polys has shape (nt, 6), points (nt, q, 2); returns values (nt, q)
    and gradients (nt, q, 2).
    """
    xi = (points - space.centers[:, None, :]) / space.scales[:, None, None]
    x, y = xi[..., 0], xi[..., 1]
    c = polys[:, None, :]
    val = (
        c[..., 0]
        + c[..., 1] * x
        + c[..., 2] * y
        + c[..., 3] * x * x
        + c[..., 4] * x * y
        + c[..., 5] * y * y
    )
    s = space.scales[:, None]
    gx = (c[..., 1] + 2.0 * c[..., 3] * x + c[..., 4] * y) / s
    gy = (c[..., 2] + c[..., 4] * x + 2.0 * c[..., 5] * y) / s
    return val, np.stack([gx, gy], axis=-1)


@dataclass
class MorleyField:
    """Coefficients of one scalar Morley function."""

    space: MorleySpace
    coeffs: np.ndarray

    def copy(self) -> "MorleyField":
        return MorleyField(self.space, self.coeffs.copy())


def build_space(mesh: Mesh, constrained: bool = True, _reverse_edges: bool = False) -> MorleySpace:
    return MorleySpace(mesh, constrained=constrained, _reverse_edges=_reverse_edges)


def zero_field(space: MorleySpace) -> MorleyField:
    return MorleyField(space, np.zeros(space.n_dofs))


def interpolate(space: MorleySpace, v, grad, edge_points: int = 3) -> MorleyField:
    """Morley interpolation of a smooth function.

    v(x, y) and grad(x, y) -> (vx, vy) must accept numpy arrays.  Vertex
    dofs take point values; edge dofs take the mean normal derivative,
    computed with ``edge_points``-point Gauss quadrature along each edge
    (the 3-point default integrates the edge trace of grad exactly when
    v is a polynomial of degree <= 6).
    """
    mesh = space.mesh
    coeffs = np.zeros(space.n_dofs)

    vidx = np.nonzero(space.vertex_dof >= 0)[0]
    if len(vidx):
        pts = mesh.coords[vidx]
        coeffs[space.vertex_dof[vidx]] = np.asarray(v(pts[:, 0], pts[:, 1]), dtype=float)

    eidx = np.nonzero(space.edge_dof >= 0)[0]
    if len(eidx):
        ts, ws = edge_rule(edge_points)
        a = mesh.coords[mesh.edge_vertices[eidx, 0]]
        b = mesh.coords[mesh.edge_vertices[eidx, 1]]
        acc = np.zeros(len(eidx))
        for t, w in zip(ts, ws):
            p = a + t * (b - a)
            gx, gy = grad(p[:, 0], p[:, 1])
            acc += w * (
                np.asarray(gx, dtype=float) * space.edge_normal[eidx, 0]
                + np.asarray(gy, dtype=float) * space.edge_normal[eidx, 1]
            )
        coeffs[space.edge_dof[eidx]] = acc
    return MorleyField(space, coeffs)


def evaluate(field: MorleyField, t: int, points, tol: float = 1e-10):
    """Evaluate a Morley field inside one triangle.

    Returns (values, gradients, hessian) where hessian is the constant
    (hxx, hxy, hyy) row of the element.  Points outside the triangle
    (barycentric coordinate below -tol) raise ValueError.
    """
    space = field.space
    mesh = space.mesh
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    tri = mesh.coords[mesh.tri_vertices[t]]
    T = np.column_stack([tri[1] - tri[0], tri[2] - tri[0]])
    lam12 = np.linalg.solve(T, (pts - tri[0]).T).T
    lam0 = 1.0 - lam12.sum(axis=1)
    bary = np.column_stack([lam0, lam12])
    if np.any(bary < -tol):
        raise ValueError(f"point outside triangle {t}")

    polys = space.element_polys(field.coeffs)[t]
    val, grad = space.poly_eval(t, polys, pts)
    hess = space.element_hessians(field.coeffs)[t]
    if np.ndim(points) == 1:
        return val[0], grad[0], hess
    return val, grad, hess


def _compose_ancestors(coarse: Mesh, fine: Mesh) -> np.ndarray:
    anc = np.arange(fine.n_triangles, dtype=np.int64)
    m = fine
    while m is not coarse:
        if m.parent is None:
            raise MeshError("fine mesh does not descend from the coarse mesh")
        anc = m.ancestors[anc]
        m = m.parent
    return anc


def prolongate(coarse_field: MorleyField, fine_space: MorleySpace) -> MorleyField:
    """Carry a coarse Morley field to a refined mesh.

    Fine vertex dofs average the coarse values from every distinct
    coarse triangle meeting the vertex (two-sided on old edges); fine
    edge dofs average the one-sided coarse mean normal derivatives.  On
    fine triangles strictly inside one coarse triangle the result
    reproduces the coarse quadratic exactly.
    """
    cspace = coarse_field.space
    cmesh = cspace.mesh
    fmesh = fine_space.mesh
    if fmesh is cmesh and fine_space.constrained == cspace.constrained:
        return MorleyField(fine_space, coarse_field.coeffs.copy())
    anc = _compose_ancestors(cmesh, fmesh)
    polys = cspace.element_polys(coarse_field.coeffs)

    vert_tris: list[list[int]] = [[] for _ in range(fmesh.n_vertices)]
    for t in range(fmesh.n_triangles):
        for v in fmesh.tri_vertices[t]:
            vert_tris[v].append(t)

    coeffs = np.zeros(fine_space.n_dofs)

    for v in np.nonzero(fine_space.vertex_dof >= 0)[0]:
        ancestors = sorted({int(anc[t]) for t in vert_tris[v]})
        pt = fmesh.coords[v]
        total = 0.0
        for a in ancestors:
            val, _ = cspace.poly_eval(a, polys[a], pt[None, :])
            total += float(val[0])
        coeffs[fine_space.vertex_dof[v]] = total / len(ancestors)

    for e in np.nonzero(fine_space.edge_dof >= 0)[0]:
        tris = [int(t) for t in fmesh.edge_tris[e] if t >= 0]
        ancestors = sorted({int(anc[t]) for t in tris})
        mid = 0.5 * (
            fmesh.coords[fmesh.edge_vertices[e, 0]] + fmesh.coords[fmesh.edge_vertices[e, 1]]
        )
        nu = fine_space.edge_normal[e]
        total = 0.0
        for a in ancestors:
            _, grad = cspace.poly_eval(a, polys[a], mid[None, :])
            total += float(grad[0] @ nu)
        coeffs[fine_space.edge_dof[e]] = total / len(ancestors)

    return MorleyField(fine_space, coeffs)


# -- serialization -----------------------------------------------------------


def write_field(field: MorleyField, path) -> None:
    lines = ["morleyfield 1", f"{field.space.n_dofs}"]
    lines.extend(f"{c:.17g}" for c in field.coeffs)
    Path(path).write_text("\n".join(lines) + "\n")


def read_field(path, space: MorleySpace) -> MorleyField:
    rows = [r.strip() for r in Path(path).read_text().split("\n") if r.strip()]
    if not rows or rows[0].split() != ["morleyfield", "1"]:
        raise ValueError(f"{path}: not a morleyfield version 1 file")
    n = int(rows[1])
    if n != space.n_dofs:
        raise ValueError(f"{path}: field has {n} dofs, space has {space.n_dofs}")
    if len(rows) != 2 + n:
        raise ValueError(f"{path}: expected {n} coefficient lines")
    return MorleyField(space, np.asarray([float(r) for r in rows[2:]], dtype=float))
