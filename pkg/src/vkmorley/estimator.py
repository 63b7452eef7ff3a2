"""Residual a posteriori error estimator for the plate system.

Per triangle K with area |K| and edges E the indicator is

    eta^2(K) = |K|^2 ( ||[u,v] + f||_K^2 + ||[u,u] - 2g||_K^2 )
             + |K|^(1/2) sum_E ( ||jump(D^2 u) tau||_E^2
                               + ||jump(D^2 v) tau||_E^2 ),

where tau is the unit edge tangent and boundary edges use the one-sided
trace.  The volume part alone is mu^2(K).  An interior edge contributes
its full jump norm to both adjacent triangles, each weighted by that
triangle's own |K|^(1/2).  Data oscillation uses h^4 = |K|^2 against an
elementwise L2 projection of f.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .forms import ProblemData, StatePair, vk_bracket
from .morley import MorleySpace
from .quadrature import triangle_rule, triangle_points

__all__ = ["EstimatorReport", "estimate", "oscillation", "restrict_estimator"]


@dataclass
class EstimatorReport:
    """Per-triangle indicator pieces and their totals."""

    eta_sq: np.ndarray
    mu_sq: np.ndarray
    osc_sq: np.ndarray
    areas: np.ndarray
    osc_order: int

    @property
    def total_eta_sq(self) -> float:
        return float(self.eta_sq.sum())

    @property
    def eta(self) -> float:
        return float(np.sqrt(self.eta_sq.sum()))

    @property
    def mu(self) -> float:
        return float(np.sqrt(self.mu_sq.sum()))

    @property
    def osc(self) -> float:
        return float(np.sqrt(self.osc_sq.sum()))

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["triangle_id", "area", "eta_sq", "mu_sq", "osc_sq"])
            for t in range(len(self.eta_sq)):
                writer.writerow(
                    [
                        t,
                        f"{self.areas[t]:.17g}",
                        f"{self.eta_sq[t]:.17g}",
                        f"{self.mu_sq[t]:.17g}",
                        f"{self.osc_sq[t]:.17g}",
                    ]
                )


def _volume_terms(space: MorleySpace, state: StatePair, data: ProblemData) -> np.ndarray:
    """|K|^2 weighted L2 norms of both strong volume residuals."""
    mesh = space.mesh
    Hu = space.element_hessians(state.u.coeffs)
    Hv = space.element_hessians(state.v.coeffs)
    br_uv = vk_bracket(Hu, Hv)
    br_uu = vk_bracket(Hu, Hu)

    rule = triangle_rule(data.quad_degree)
    pts = triangle_points(rule, mesh.triangle_coords())
    wts = rule.weights[None, :]

    fv = np.asarray(data.f(pts[..., 0], pts[..., 1]), dtype=float)
    res1 = np.einsum("tq,tq->t", wts * (br_uv[:, None] + fv), br_uv[:, None] + fv)
    res1 = res1 * mesh.areas
    if data.g is None:
        res2 = br_uu**2 * mesh.areas
    else:
        gv = np.asarray(data.g(pts[..., 0], pts[..., 1]), dtype=float)
        r2 = br_uu[:, None] - 2.0 * gv
        res2 = np.einsum("tq,tq->t", wts * r2, r2) * mesh.areas
    return mesh.areas**2 * (res1 + res2)


def _edge_terms(space: MorleySpace, state: StatePair) -> np.ndarray:
    """|K|^(1/2) weighted tangential Hessian jump norms per triangle."""
    mesh = space.mesh
    jump_sq = np.zeros(mesh.n_edges)
    tau = mesh.edge_tangent
    for coeffs in (state.u.coeffs, state.v.coeffs):
        H = space.element_hessians(coeffs)  # (nt, 3) rows (hxx, hxy, hyy)
        # Hessian times tangent, one value per edge side.
        t0 = mesh.edge_tris[:, 0]
        t1 = mesh.edge_tris[:, 1]
        H0 = H[t0]
        jx0 = H0[:, 0] * tau[:, 0] + H0[:, 1] * tau[:, 1]
        jy0 = H0[:, 1] * tau[:, 0] + H0[:, 2] * tau[:, 1]
        inner = t1 >= 0
        H1 = H[np.where(inner, t1, 0)]
        jx1 = np.where(inner, H1[:, 0] * tau[:, 0] + H1[:, 1] * tau[:, 1], 0.0)
        jy1 = np.where(inner, H1[:, 1] * tau[:, 0] + H1[:, 2] * tau[:, 1], 0.0)
        jump_sq += (jx0 - jx1) ** 2 + (jy0 - jy1) ** 2

    edge_contrib = mesh.edge_length * jump_sq  # ||jump||^2 over the edge
    out = np.zeros(mesh.n_triangles)
    for k in range(3):
        out += edge_contrib[mesh.tri_edges[:, k]]
    return np.sqrt(mesh.areas) * out


def oscillation(mesh_or_space, func, order: int, quad_degree: int = 4) -> np.ndarray:
    """Per-triangle squared data oscillation h^4 ||f - P_m f||^2.

    P_m is the elementwise L2 projection onto polynomials of total
    degree at most order (0, 1 or 2), computed with a quadrature rule
    exact for the projection system.
    """
    space = mesh_or_space
    mesh = getattr(space, "mesh", space)
    if order not in (0, 1, 2):
        raise ValueError(f"oscillation order must be 0, 1 or 2, got {order}")

    rule = triangle_rule(max(quad_degree, 2 * order))
    pts = triangle_points(rule, mesh.triangle_coords())
    wts = rule.weights[None, :]
    fv = np.asarray(func(pts[..., 0], pts[..., 1]), dtype=float)

    centers = mesh.triangle_coords().mean(axis=1)
    scale = np.sqrt(mesh.areas)
    xi = (pts - centers[:, None, :]) / scale[:, None, None]
    x, y = xi[..., 0], xi[..., 1]
    cols = [np.ones_like(x), x, y, x * x, x * y, y * y]
    nb = {0: 1, 1: 3, 2: 6}[order]
    basis = np.stack(cols[:nb], axis=-1)  # (nt, q, nb)

    M = np.einsum("tq,tqi,tqj->tij", wts, basis, basis)
    rhs = np.einsum("tq,tq,tqi->ti", wts, fv, basis)
    coef = np.linalg.solve(M, rhs[..., None])[..., 0]
    ff = np.einsum("tq,tq,tq->t", wts, fv, fv)
    resid = ff - np.einsum("ti,ti->t", coef, rhs)
    np.clip(resid, 0.0, None, out=resid)
    # h^4 = |K|^2; the quadrature carries one |K| factor for the L2 norm.
    return mesh.areas**2 * mesh.areas * resid


def estimate(
    space: MorleySpace, state: StatePair, data: ProblemData, osc_order: int = 0
) -> EstimatorReport:
    """Assemble the full indicator report for a solved state."""
    mu_sq = _volume_terms(space, state, data)
    eta_sq = mu_sq + _edge_terms(space, state)
    osc_sq = oscillation(space, data.f, osc_order, data.quad_degree)
    return EstimatorReport(
        eta_sq=eta_sq,
        mu_sq=mu_sq,
        osc_sq=osc_sq,
        areas=space.mesh.areas.copy(),
        osc_order=osc_order,
    )


def restrict_estimator(report: EstimatorReport, subset) -> dict:
    """Partial sums over a set of triangle ids."""
    ids = np.asarray(sorted(set(int(t) for t in subset)), dtype=np.int64)
    if len(ids) and (ids[0] < 0 or ids[-1] >= len(report.eta_sq)):
        raise ValueError("triangle id outside the report's mesh")
    return {
        "eta_sq": float(report.eta_sq[ids].sum()),
        "mu_sq": float(report.mu_sq[ids].sum()),
        "osc_sq": float(report.osc_sq[ids].sum()),
    }
