"""Command line driver for convergence and estimator experiments.

Example:

    vkmorley --problem square-poly --mode uniform --levels 5 --out runs/p1
    vkmorley --problem lshape-f1 --mode adaptive --theta 0.3 --svg --out runs/ad

Options may also come from a config file of flat key=value lines
(--config); explicit command line flags win over file values.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from .adaptivity import AmfemConfig, amfem_run, axiom_check, uniform_run
from .mesh import write_mesh, write_svg
from .problems import get_problem
from .solver import NewtonConfig

logger = logging.getLogger(__name__)

_MODES = ("adaptive", "uniform", "axiom-check")


def _parse_config_file(path: Path) -> dict[str, str]:
    values = {}
    for ln, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise SystemExit(f"{path}:{ln}: expected key=value, got {raw!r}")
        key, _, val = line.partition("=")
        values[key.strip().replace("-", "_")] = val.strip()
    return values


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="vkmorley",
        description="Adaptive Morley solver for the clamped von Karman plate system.",
    )
    p.add_argument("--problem", default="square-poly",
                   help="problem id from the registry (default: %(default)s)")
    p.add_argument("--mode", choices=_MODES, default="adaptive")
    p.add_argument("--theta", type=float, default=0.3,
                   help="bulk marking fraction (default: %(default)s)")
    p.add_argument("--delta", type=float, default=0.3,
                   help="pre-refine until sqrt(area) <= delta (default: %(default)s)")
    p.add_argument("--levels", type=int, default=10, help="maximum number of levels")
    p.add_argument("--max-ndofs", type=int, default=200_000)
    p.add_argument("--newton-tol", type=float, default=None,
                   help="absolute Newton residual tolerance (default: load-scaled)")
    p.add_argument("--osc-order", type=int, default=0, choices=(0, 1, 2))
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--dump-estimator", action="store_true",
                   help="write per-triangle indicator tables per level")
    p.add_argument("--svg", action="store_true", help="write mesh images per level")
    p.add_argument("--config", default=None, help="key=value defaults file")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        file_values = _parse_config_file(Path(args.config))
        explicit = {
            a.dest for a in parser._actions
            if any(opt in (argv if argv is not None else sys.argv[1:])
                   for opt in a.option_strings)
        }
        for key, val in file_values.items():
            if key in explicit:
                continue
            if not hasattr(args, key):
                raise SystemExit(f"{args.config}: unknown option {key!r}")
            current = getattr(args, key)
            if isinstance(current, bool):
                setattr(args, key, val.lower() in ("1", "true", "yes", "on"))
            elif key == "newton_tol" or isinstance(current, float):
                setattr(args, key, float(val))
            elif isinstance(current, int):
                setattr(args, key, int(val))
            else:
                setattr(args, key, val)
    if args.mode not in _MODES:
        raise SystemExit(f"invalid mode {args.mode!r}; choose from {', '.join(_MODES)}")
    return args


def main(argv=None) -> int:
    args = parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        problem = get_problem(args.problem)
    except KeyError as exc:
        print(exc.args[0], file=sys.stderr)
        return 2

    try:
        cfg = AmfemConfig(
            theta=args.theta,
            delta=args.delta,
            max_levels=args.levels,
            max_ndofs=args.max_ndofs,
            osc_order=args.osc_order,
            newton=NewtonConfig(residual_tol=args.newton_tol),
            keep_history=True,
        )
    except ValueError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return 2

    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"cannot create output directory: {exc}", file=sys.stderr)
        return 2

    try:
        if args.mode == "adaptive":
            result = amfem_run(problem, cfg)
        else:
            result = uniform_run(problem, cfg)
    except RuntimeError as exc:
        print(f"run aborted: {exc}", file=sys.stderr)
        return 1

    result.report.to_csv(out / "report.csv")
    for level, arts in enumerate(result.history):
        write_mesh(arts.mesh, out / f"mesh_L{level}.morleymesh")
        if args.svg:
            write_svg(arts.mesh, out / f"mesh_L{level}.svg")
        if args.dump_estimator:
            arts.report.to_csv(out / f"estimator_L{level}.csv")

    if args.mode == "axiom-check":
        rows = []
        for level in range(len(result.history) - 1):
            diag = axiom_check(result.history[level], result.history[level + 1])
            rows.append((level, diag))
        with (out / "axioms.csv").open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["pair", "delta", "lambda1_star", "lambda2_star",
                 "lambda1_mu_star", "lambda2_mu_star",
                 "eta_refined_coarse", "eta_refined_fine"]
            )
            for level, d in rows:
                writer.writerow(
                    [level, f"{d.delta:.17g}",
                     f"{d.lambda1_star:.17g}", f"{d.lambda2_star:.17g}",
                     f"{d.lambda1_mu_star:.17g}", f"{d.lambda2_mu_star:.17g}",
                     f"{d.eta_refined_coarse:.17g}", f"{d.eta_refined_fine:.17g}"]
                )
        logger.info("wrote %s", out / "axioms.csv")

    logger.info("wrote %s", out / "report.csv")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
