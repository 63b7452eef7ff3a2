"""Discrete forms for the von Karman plate system.

The unknown is a pair (u, v) of Morley functions: u is the transverse
deflection, v the Airy stress function.  With the piecewise quadratic
bracket  [a, b] = a_xx b_yy + a_yy b_xx - 2 a_xy b_xy  (constant per
element), the residual of the clamped system reads

    N(u, v; p, q) =  a(u, p) + a(v, q)
                   + b(u, v, p) + b(v, u, p) - b(u, u, q)
                   - (f, p) - (g, q),

where a is the piecewise Hessian inner product and
b(a, bb, c) = -1/2 sum_K int_K [a, bb] c dx.  The derivative of the
nonlinear part at a state is twice the state-frozen trilinear form,
which assemble_linearized_bracket provides for Newton's method.

All element loops are batched; global matrices are assembled from
triplets in a fixed element order, so repeated runs are bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .morley import MorleyField, MorleySpace, batch_eval
from .quadrature import triangle_rule, triangle_points

__all__ = [
    "ProblemData",
    "StatePair",
    "SparseSystem",
    "vk_bracket",
    "assemble_bilaplacian",
    "assemble_load",
    "assemble_linearized_bracket",
    "apply_residual",
    "energy_norms",
]

# Frobenius weights for Hessians stored as (hxx, hxy, hyy).
_FROB = np.array([1.0, 2.0, 1.0])


@dataclass
class ProblemData:
    """Right-hand sides and assembly options for one plate problem.

    f and g take numpy coordinate arrays and return arrays; g may be
    None for a zero load on the stress equation.  include_bracket turns
    the nonlinear coupling off, reducing the system to two decoupled
    bilaplacian problems (a linear debugging mode).
    """

    f: Callable
    g: Callable | None = None
    include_bracket: bool = True
    quad_degree: int = 4


@dataclass
class StatePair:
    """A deflection/stress pair over one Morley space."""

    u: MorleyField
    v: MorleyField

    @property
    def space(self) -> MorleySpace:
        return self.u.space

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.u.coeffs, self.v.coeffs])

    @staticmethod
    def from_vector(space: MorleySpace, x: np.ndarray) -> "StatePair":
        n = space.n_dofs
        return StatePair(
            MorleyField(space, x[:n].copy()), MorleyField(space, x[n:].copy())
        )

    @staticmethod
    def zero(space: MorleySpace) -> "StatePair":
        return StatePair(
            MorleyField(space, np.zeros(space.n_dofs)),
            MorleyField(space, np.zeros(space.n_dofs)),
        )


@dataclass
class SparseSystem:
    """A sparse operator with its right-hand side (u block first)."""

    matrix: sp.csr_matrix
    rhs: np.ndarray


def vk_bracket(h1: np.ndarray, h2: np.ndarray) -> np.ndarray:
    """Bracket of Hessians given as (..., 3) rows (hxx, hxy, hyy)."""
    return (
        h1[..., 0] * h2[..., 2]
        + h1[..., 2] * h2[..., 0]
        - 2.0 * h1[..., 1] * h2[..., 1]
    )


def _scatter(space: MorleySpace, local: np.ndarray,
             row_offset: int = 0, col_offset: int = 0):
    """Triplets of one (nt, 6, 6) local block, constrained slots dropped."""
    dm = space.dof_map
    rows = np.broadcast_to(dm[:, :, None], local.shape)
    cols = np.broadcast_to(dm[:, None, :], local.shape)
    mask = (rows >= 0) & (cols >= 0)
    return (
        rows[mask] + row_offset,
        cols[mask] + col_offset,
        local[mask],
    )


def assemble_bilaplacian(space: MorleySpace) -> sp.csr_matrix:
    """Scalar piecewise Hessian stiffness matrix (n_dofs square)."""
    H = space.shape_hess  # (nt, 6, 3)
    local = np.einsum("tic,tjc,c,t->tij", H, H, _FROB, space.mesh.areas)
    r, c, vals = _scatter(space, local)
    n = space.n_dofs
    return sp.coo_matrix((vals, (r, c)), shape=(n, n)).tocsr()


def assemble_load(space: MorleySpace, data: ProblemData) -> np.ndarray:
    """Load vector of both equations, length 2 n_dofs."""
    n = space.n_dofs
    out = np.zeros(2 * n)
    rule = triangle_rule(data.quad_degree)
    pts = triangle_points(rule, space.mesh.triangle_coords())  # (nt, q, 2)
    xi = (pts - space.centers[:, None, :]) / space.scales[:, None, None]
    x, y = xi[..., 0], xi[..., 1]
    mono = np.stack([np.ones_like(x), x, y, x * x, x * y, y * y], axis=-1)
    shapes = np.einsum("tqm,tmi->tqi", mono, space.coeffs)  # (nt, q, 6)
    warea = rule.weights[None, :] * space.mesh.areas[:, None]

    for offset, func in ((0, data.f), (n, data.g)):
        if func is None:
            continue
        fv = np.asarray(func(pts[..., 0], pts[..., 1]), dtype=float)
        local = np.einsum("tq,tq,tqi->ti", warea, fv, shapes)
        dm = space.dof_map
        mask = dm >= 0
        np.add.at(out, dm[mask] + offset, local[mask])
    return out


def _state_brackets(space: MorleySpace, state: StatePair):
    Hu = space.element_hessians(state.u.coeffs)
    Hv = space.element_hessians(state.v.coeffs)
    return Hu, Hv


def assemble_linearized_bracket(space: MorleySpace, state: StatePair) -> sp.csr_matrix:
    """Derivative of the quadratic bracket terms at a state (2n square).

    Row blocks are test functions (p, q), column blocks the direction
    (du, dv); the (q, dv) block is zero.
    """
    n = space.n_dofs
    Hu, Hv = _state_brackets(space, state)
    H = space.shape_hess
    SI = space.shape_integral  # (nt, 6)

    # [w, shape_j] for the frozen fields, shape (nt, 6).
    br_u = Hu[:, None, 0] * H[:, :, 2] + Hu[:, None, 2] * H[:, :, 0] \
        - 2.0 * Hu[:, None, 1] * H[:, :, 1]
    br_v = Hv[:, None, 0] * H[:, :, 2] + Hv[:, None, 2] * H[:, :, 0] \
        - 2.0 * Hv[:, None, 1] * H[:, :, 1]

    blocks = (
        (0, 0, -np.einsum("ti,tj->tij", SI, br_v)),
        (0, n, -np.einsum("ti,tj->tij", SI, br_u)),
        (n, 0, np.einsum("ti,tj->tij", SI, br_u)),
    )
    rows, cols, vals = [], [], []
    for ro, co, local in blocks:
        r, c, v = _scatter(space, local, ro, co)
        rows.append(r)
        cols.append(c)
        vals.append(v)
    return sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(2 * n, 2 * n),
    ).tocsr()


def apply_residual(
    space: MorleySpace,
    state: StatePair,
    data: ProblemData,
    A: sp.csr_matrix | None = None,
    load: np.ndarray | None = None,
) -> np.ndarray:
    """Residual vector of the discrete system at a state (length 2n)."""
    if A is None:
        A = assemble_bilaplacian(space)
    if load is None:
        load = assemble_load(space, data)
    n = space.n_dofs
    x = state.to_vector()
    r = np.concatenate([A @ x[:n], A @ x[n:]]) - load
    if data.include_bracket:
        Hu, Hv = _state_brackets(space, state)
        br_uv = vk_bracket(Hu, Hv)
        br_uu = vk_bracket(Hu, Hu)
        SI = space.shape_integral
        dm = space.dof_map
        mask = dm >= 0
        local1 = -br_uv[:, None] * SI  # test block p
        local2 = 0.5 * br_uu[:, None] * SI  # test block q
        np.add.at(r, dm[mask], local1[mask])
        np.add.at(r, dm[mask] + n, local2[mask])
    return r


def energy_norms(space: MorleySpace, state: StatePair, exact, degree: int = 6):
    """Error norms against a smooth exact pair.

    Returns (piecewise H2 seminorm error, piecewise H1 seminorm error,
    piecewise H2 seminorm of the discrete state).  exact provides
    vectorized du, d2u, dv, d2v callables; Hessians as (hxx, hxy, hyy).
    """
    mesh = space.mesh
    rule = triangle_rule(degree)
    pts = triangle_points(rule, mesh.triangle_coords())
    warea = rule.weights[None, :] * mesh.areas[:, None]
    X, Y = pts[..., 0], pts[..., 1]

    Hu = space.element_hessians(state.u.coeffs)
    Hv = space.element_hessians(state.v.coeffs)
    pu = space.element_polys(state.u.coeffs)
    pv = space.element_polys(state.v.coeffs)
    _, gu = batch_eval(space, pu, pts)
    _, gv = batch_eval(space, pv, pts)

    err2 = 0.0
    errh1 = 0.0
    for H, G, dfun, hfun in ((Hu, gu, exact.du, exact.d2u), (Hv, gv, exact.dv, exact.d2v)):
        hxx, hxy, hyy = hfun(X, Y)
        diff = np.stack([hxx, hxy, hyy], axis=-1) - H[:, None, :]
        err2 += np.einsum("tqc,c,tq->", diff**2, _FROB, warea)
        gx, gy = dfun(X, Y)
        gdiff = np.stack([gx, gy], axis=-1) - G
        errh1 += np.einsum("tqc,tq->", gdiff**2, warea)

    energy = np.einsum("tc,c,t->", Hu**2 + Hv**2, _FROB, mesh.areas)
    return float(np.sqrt(err2)), float(np.sqrt(errh1)), float(np.sqrt(energy))


def state_energy(space: MorleySpace, state: StatePair) -> float:
    """Piecewise H2 seminorm of a state pair."""
    Hu = space.element_hessians(state.u.coeffs)
    Hv = space.element_hessians(state.v.coeffs)
    total = np.einsum("tc,c,t->", Hu**2 + Hv**2, _FROB, space.mesh.areas)
    return float(np.sqrt(total))
