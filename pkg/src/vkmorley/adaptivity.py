"""Adaptive solve/estimate/mark/refine driver.

One run pre-refines the initial mesh uniformly until every triangle
satisfies sqrt(|K|) <= delta, then loops: solve the nonlinear system
(seeded by the prolongated previous solution), assemble the indicator,
mark a minimal bulk set, bisect.  Uniform runs mark everything.  The
axiom diagnostics compare two consecutive solved levels and report the
empirical stability and reduction quotients of the indicator under
refinement, using the exact piecewise representation of the coarse
solution on the fine mesh for the distance term.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field as dfield
from pathlib import Path

import numpy as np

from .estimator import EstimatorReport, estimate, restrict_estimator
from .forms import ProblemData, StatePair, energy_norms
from .mesh import Mesh, build_initial_mesh, mesh_partition, refine, uniform_refine
from .morley import build_space, prolongate, _compose_ancestors
from .solver import NewtonConfig, SolveReport, newton_solve

__all__ = [
    "AmfemConfig",
    "LevelRow",
    "ConvergenceReport",
    "LevelArtifacts",
    "RunResult",
    "AxiomDiagnostics",
    "doerfler_mark",
    "amfem_run",
    "uniform_run",
    "axiom_check",
]

logger = logging.getLogger(__name__)

CSV_HEADER = [
    "level", "ntri", "ndofs", "eta", "mu", "osc",
    "err_energy", "err_h1pw", "newton_iters", "marked", "rate_eta",
]


def doerfler_mark(eta_sq: np.ndarray, theta: float) -> np.ndarray:
    """Minimal bulk-chasing marking.

    Returns the shortest prefix of triangles sorted by decreasing
    indicator (ties by id) whose indicator mass reaches theta times the
    total.  The returned set has minimal cardinality among all sets
    satisfying the criterion.
    """
    if not 0.0 < theta <= 1.0:
        raise ValueError(f"marking fraction must be in (0, 1], got {theta}")
    eta_sq = np.asarray(eta_sq, dtype=float)
    if np.any(eta_sq < 0.0) or not np.all(np.isfinite(eta_sq)):
        raise ValueError("indicators must be finite and nonnegative")
    order = np.lexsort((np.arange(len(eta_sq)), -eta_sq))
    sorted_vals = eta_sq[order]
    total = float(sorted_vals.sum())
    if total <= 0.0:
        raise ValueError("all indicators vanish; nothing to mark")
    partial = np.cumsum(sorted_vals)
    k = int(np.searchsorted(partial, theta * total)) + 1
    k = min(k, len(sorted_vals))
    # Never mark zero-indicator triangles (possible when theta = 1 and
    # trailing entries vanish).
    while k > 1 and sorted_vals[k - 1] == 0.0:
        k -= 1
    return order[:k]


@dataclass
class AmfemConfig:
    theta: float = 0.3
    delta: float = 0.3
    max_levels: int = 10
    max_ndofs: int = 200_000
    osc_order: int = 0
    newton: NewtonConfig = dfield(default_factory=NewtonConfig)
    keep_history: bool = False

    def __post_init__(self) -> None:
        if not 0.0 < self.theta <= 1.0:
            raise ValueError(f"bulk fraction must be in (0, 1], got {self.theta}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(
                f"pre-refinement threshold must be in (0, 1), got {self.delta}"
            )
        if self.max_levels < 1:
            raise ValueError("need at least one level")


@dataclass
class LevelRow:
    level: int
    ntri: int
    ndofs: int
    eta: float
    mu: float
    osc: float
    err_energy: float | None
    err_h1pw: float | None
    newton_iters: int
    marked: int
    rate_eta: float | None


@dataclass
class LevelArtifacts:
    """Solved objects for one level, retained when keep_history is set."""

    mesh: Mesh
    space: object
    state: StatePair
    report: EstimatorReport
    solve: SolveReport


@dataclass
class ConvergenceReport:
    problem: str
    mode: str
    rows: list[LevelRow] = dfield(default_factory=list)

    def to_csv(self, path_or_buf) -> None:
        own = isinstance(path_or_buf, (str, Path))
        fh = open(path_or_buf, "w", newline="") if own else path_or_buf
        try:
            writer = csv.writer(fh)
            writer.writerow(CSV_HEADER)
            for r in self.rows:
                writer.writerow(
                    [
                        r.level, r.ntri, r.ndofs,
                        f"{r.eta:.17g}", f"{r.mu:.17g}", f"{r.osc:.17g}",
                        "" if r.err_energy is None else f"{r.err_energy:.17g}",
                        "" if r.err_h1pw is None else f"{r.err_h1pw:.17g}",
                        r.newton_iters, r.marked,
                        "" if r.rate_eta is None else f"{r.rate_eta:.17g}",
                    ]
                )
        finally:
            if own:
                fh.close()

    def csv_text(self) -> str:
        buf = io.StringIO()
        self.to_csv(buf)
        return buf.getvalue()

    def rate_table(self) -> list[tuple[int, float | None]]:
        return [(r.level, r.rate_eta) for r in self.rows]


@dataclass
class RunResult:
    report: ConvergenceReport
    final: LevelArtifacts
    history: list[LevelArtifacts]


def _prerefine(mesh: Mesh, delta: float) -> Mesh:
    guard = 0
    while float(mesh.h.max()) > delta:
        mesh = uniform_refine(mesh)
        guard += 1
        if guard > 60:
            raise ValueError(f"pre-refinement to mesh size {delta} did not terminate")
    return mesh


def _rate(prev: LevelRow | None, eta: float, ndofs: int) -> float | None:
    if prev is None or prev.eta <= 0.0 or eta <= 0.0 or ndofs == prev.ndofs:
        return None
    return -float(np.log(eta / prev.eta) / np.log(ndofs / prev.ndofs))


def _run(problem, cfg: AmfemConfig, mode: str) -> RunResult:
    """Shared driver; mode is "adaptive" or "uniform"."""
    data: ProblemData = problem.data
    mesh = _prerefine(build_initial_mesh(problem.domain), cfg.delta)
    report = ConvergenceReport(problem.name, mode)
    history: list[LevelArtifacts] = []
    prev_row: LevelRow | None = None
    prev: LevelArtifacts | None = None

    level = 0
    while True:
        space = build_space(mesh)
        if prev is None:
            initial = None
        else:
            initial = StatePair(
                prolongate(prev.state.u, space), prolongate(prev.state.v, space)
            )
        state, solve = newton_solve(space, data, initial, cfg.newton)
        if not solve.converged:
            raise RuntimeError(
                f"Newton failed on level {level} "
                f"({space.n_dofs} dofs, residual {solve.residuals[-1]:.3e})"
            )
        est = estimate(space, state, data, cfg.osc_order)

        if problem.exact is not None:
            err_energy, err_h1, _ = energy_norms(space, state, problem.exact)
        else:
            err_energy = err_h1 = None

        arts = LevelArtifacts(mesh, space, state, est, solve)
        row = LevelRow(
            level=level,
            ntri=mesh.n_triangles,
            ndofs=space.n_dofs,
            eta=est.eta,
            mu=est.mu,
            osc=est.osc,
            err_energy=err_energy,
            err_h1pw=err_h1,
            newton_iters=solve.iterations,
            marked=0,
            rate_eta=_rate(prev_row, est.eta, space.n_dofs),
        )
        report.rows.append(row)
        if cfg.keep_history:
            history.append(arts)
        logger.info(
            "level %d: %d triangles, %d dofs, eta %.4e, %d Newton iterations",
            level, mesh.n_triangles, space.n_dofs, est.eta, solve.iterations,
        )

        if level + 1 >= cfg.max_levels or space.n_dofs >= cfg.max_ndofs:
            break
        if est.total_eta_sq <= 0.0:
            logger.info("estimator vanished on level %d; stopping", level)
            break
        if mode == "uniform":
            marked = np.arange(mesh.n_triangles)
        else:
            marked = doerfler_mark(est.eta_sq, cfg.theta)
        row.marked = len(marked)
        mesh = refine(mesh, marked)
        prev_row = row
        prev = arts
        level += 1

    return RunResult(report, arts, history)


def amfem_run(problem, cfg: AmfemConfig | None = None) -> RunResult:
    """Adaptive run with bulk marking."""
    return _run(problem, cfg or AmfemConfig(), "adaptive")


def uniform_run(problem, cfg: AmfemConfig | None = None) -> RunResult:
    """Reference run marking every triangle on every level."""
    return _run(problem, cfg or AmfemConfig(), "uniform")


# -- refinement axiom diagnostics -------------------------------------------


@dataclass
class AxiomDiagnostics:
    """Empirical stability/reduction quotients for one mesh pair."""

    delta: float
    eta_common_coarse: float
    eta_common_fine: float
    eta_refined_coarse: float
    eta_refined_fine: float
    lambda1_star: float
    lambda2_star: float
    mu_common_coarse: float
    mu_common_fine: float
    mu_refined_coarse: float
    mu_refined_fine: float
    lambda1_mu_star: float
    lambda2_mu_star: float


def _ratio(num: float, den: float) -> float:
    if num == 0.0:
        return 0.0
    if den == 0.0:
        return float("inf")
    return num / den


def axiom_check(coarse: LevelArtifacts, fine: LevelArtifacts) -> AxiomDiagnostics:
    """Compare indicator restrictions across one refinement step.

    Both states must be true discrete solutions on their own meshes.
    The distance is the piecewise H2 seminorm of their difference,
    evaluated exactly: the coarse polynomials restrict to each fine
    triangle through its ancestor.
    """
    common, coarse_only, fine_only, _ = mesh_partition(coarse.mesh, fine.mesh)
    fspace, cspace = fine.space, coarse.space
    anc = _compose_ancestors(coarse.mesh, fine.mesh)

    delta_sq = 0.0
    for cf, ff in ((coarse.state.u, fine.state.u), (coarse.state.v, fine.state.v)):
        Hc = cspace.element_hessians(cf.coeffs)[anc]
        Hf = fspace.element_hessians(ff.coeffs)
        d = Hf - Hc
        frob = d[:, 0] ** 2 + 2.0 * d[:, 1] ** 2 + d[:, 2] ** 2
        delta_sq += float((fine.mesh.areas * frob).sum())
    delta = float(np.sqrt(delta_sq))

    fine_common = [t for t in range(fine.mesh.n_triangles) if int(anc[t]) in common
                   and t not in fine_only]
    ec = np.sqrt(restrict_estimator(coarse.report, common)["eta_sq"])
    ef = np.sqrt(restrict_estimator(fine.report, fine_common)["eta_sq"])
    ero_c = np.sqrt(restrict_estimator(coarse.report, coarse_only)["eta_sq"])
    ero_f = np.sqrt(restrict_estimator(fine.report, fine_only)["eta_sq"])
    mc = np.sqrt(restrict_estimator(coarse.report, common)["mu_sq"])
    mf = np.sqrt(restrict_estimator(fine.report, fine_common)["mu_sq"])
    mro_c = np.sqrt(restrict_estimator(coarse.report, coarse_only)["mu_sq"])
    mro_f = np.sqrt(restrict_estimator(fine.report, fine_only)["mu_sq"])

    q_eta = 2.0 ** (-0.25)
    q_mu = 2.0 ** (-0.5)
    return AxiomDiagnostics(
        delta=delta,
        eta_common_coarse=float(ec),
        eta_common_fine=float(ef),
        eta_refined_coarse=float(ero_c),
        eta_refined_fine=float(ero_f),
        lambda1_star=_ratio(abs(float(ef) - float(ec)), delta),
        lambda2_star=_ratio(max(0.0, float(ero_f) - q_eta * float(ero_c)), delta),
        mu_common_coarse=float(mc),
        mu_common_fine=float(mf),
        mu_refined_coarse=float(mro_c),
        mu_refined_fine=float(mro_f),
        lambda1_mu_star=_ratio(abs(float(mf) - float(mc)), delta),
        lambda2_mu_star=_ratio(max(0.0, float(mro_f) - q_mu * float(mro_c)), delta),
    )
