"""Command-line entry point: ``platepml <subcommand> [options]``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, ScenarioConfig
from .lifting import (CASES, LiftEvaluator, boundary_residuals, lambda_n, stability_ratio)
from .meshing import MeshError, audit_mesh, export_mesh, import_mesh, mesh_quality
from .output import write_json, write_rows
from .pml import PMLValidationError
from .solve import SolverError
from .spectral import CutoffError, TraceCoefficients, make_mode_basis, mode_table
from . import studies

EXIT_OK, EXIT_VALIDATION, EXIT_SOLVER = 0, 2, 3


def _global_flags(parser, suppress: bool):
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", default=default, help="scenario JSON file")
    parser.add_argument("--out", default=default, help="output directory")
    parser.add_argument("--threads", type=int, default=argparse.SUPPRESS if suppress else 1,
                        help="worker threads for independent solves")
    parser.add_argument("--allow-invalid-pml", action="store_true",
                        default=argparse.SUPPRESS if suppress else False,
                        help="run even if the PML parameters fail the admissibility check")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="platepml", description=__doc__)
    _global_flags(parser, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[common], help="solve one scenario")
    p.add_argument("--h", type=float, help="override mesh size")
    p.add_argument("--methods", nargs="+", choices=["qp", "uq", "decoupled"])
    p.add_argument("--vtk", action="store_true", help="also write legacy VTK files")

    p = sub.add_parser("converge", parents=[common], help="mesh-refinement study")
    p.add_argument("--hs", type=float, nargs="+", default=[0.05, 0.04, 0.03])
    p.add_argument("--h-ref", type=float, default=0.015)
    p.add_argument("--method", default="decoupled", choices=["qp", "uq", "decoupled"])
    p.add_argument("--reference-method", default="decoupled",
                   choices=["qp", "uq", "decoupled"])

    p = sub.add_parser("pml-study", parents=[common], help="sweep a PML parameter")
    p.add_argument("--parameter", default="dh", choices=["dh", "sigma1", "sigma2"])
    p.add_argument("--values", type=float, nargs="+", default=[0.5, 1.0, 1.5, 2.0, 2.5])
    p.add_argument("--method", default="decoupled", choices=["qp", "uq", "decoupled"])

    p = sub.add_parser("compare", parents=[common], help="pairwise method differences")
    p.add_argument("--h", type=float)

    p = sub.add_parser("modes", parents=[common], help="print the Floquet mode ladder")

    p = sub.add_parser("lift-test", parents=[common], help="boundary-lift diagnostics CSV")
    p.add_argument("--height", type=float, default=1.0)
    p.add_argument("--n-max", type=int, default=10)

    p = sub.add_parser("mesh", parents=[common], help="generate, audit or export meshes")
    p.add_argument("action", choices=["generate", "audit", "export"])
    p.add_argument("path", nargs="?", help="mesh file (audit) or output file")
    p.add_argument("--h", type=float)
    p.add_argument("--min-angle", type=float, default=20.0)
    return parser


def load_config(args) -> ScenarioConfig:
    if args.config:
        config = ScenarioConfig.from_json(Path(args.config).read_text())
    else:
        config = ScenarioConfig()
    if args.out:
        config.output_dir = args.out
    if args.allow_invalid_pml:
        config.allow_invalid_pml = True
    config.validate()
    return config


def _cmd_solve(args, config):
    if args.h:
        config.discretization.h = args.h
    if args.methods:
        config.methods = args.methods
    summary = studies.run_scenario(config, threads=args.threads, vtk=args.vtk)
    print(json.dumps({"theta": summary["theta"], "nodes": summary["mesh"]["nodes"],
                      "out": str(Path(config.output_dir) / "summary.json")}))


def _cmd_converge(args, config):
    report = studies.convergence_study(config, args.hs, args.h_ref, args.method,
                                       args.reference_method, threads=args.threads)
    out = Path(config.output_dir)
    write_json(out / "convergence.json", report.to_dict(), config)
    rows = zip(report.hs, report.err_u, report.err_lap_u, report.rel_err_u, report.rel_err_lap_u)
    write_rows(out / "convergence.csv", ["h", "err_u", "err_lap_u", "rel_err_u", "rel_err_lap_u"],
               rows, config)
    print(json.dumps({"slope_u": report.slope_u, "slope_lap_u": report.slope_lap_u}))


def _cmd_pml(args, config):
    rows = studies.pml_study(config, args.parameter, args.values, args.method, args.threads)
    out = Path(config.output_dir)
    slope = studies.proxy_theta_slope(rows)
    write_json(out / "pml_study.json", {"rows": rows, "proxy_theta_slope": slope}, config)
    write_rows(out / "pml_study.csv", list(rows[0]), [list(r.values()) for r in rows], config)
    print(json.dumps({"proxy_theta_slope": slope}))


def _cmd_compare(args, config):
    table = studies.compare_decompositions(config, args.h, threads=args.threads)
    write_json(Path(config.output_dir) / "compare.json", {"differences": table}, config)
    print(json.dumps(table, sort_keys=True))


def _cmd_modes(args, config):
    wave = config.incident()
    basis = make_mode_basis(wave, config.geometry.lattice, config.discretization.n_modes)
    rows = mode_table(basis)
    write_rows(Path(config.output_dir) / "modes.csv",
               ["n", "alpha_n", "re_beta_n", "im_beta_n", "gamma_n"], rows, config)
    for row in rows:
        print(" ".join(f"{v:.12g}" if isinstance(v, float) else str(v) for v in row))


def _cmd_lift(args, config):
    wave = config.incident()
    basis = make_mode_basis(wave, config.geometry.lattice, args.n_max)
    rows = []
    for case in CASES:
        for j, (n, a) in enumerate(zip(basis.n, basis.alpha_n)):
            values = np.zeros(basis.size, dtype=complex)
            values[j] = 1.0
            ev = LiftEvaluator(case, args.height, basis, TraceCoefficients(1, values))
            res = boundary_residuals(ev)
            lam = lambda_n(a, args.height) if (case == "neumann-top" and a != 0) else float("nan")
            rows.append([case, int(n), res["top_value"], res["bottom_value"], res["top_slope"],
                         res["bottom_slope"], float(lam), stability_ratio(ev)])
    header = ["case", "n", "res_top_value", "res_bottom_value", "res_top_slope",
              "res_bottom_slope", "lambda_n", "stability_ratio"]
    path = write_rows(Path(config.output_dir) / "lift_test.csv", header, rows, config)
    print(path)


def _cmd_mesh(args, config):
    if args.action == "audit":
        if not args.path:
            raise ConfigError("mesh audit needs a mesh file path")
        mesh = import_mesh(Path(args.path).read_text(), min_angle=args.min_angle)
    else:
        mesh = studies.build_mesh(config, args.h)
        audit_mesh(mesh, min_angle=args.min_angle)
        target = Path(args.path) if args.path else Path(config.output_dir) / "mesh.txt"
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(export_mesh(mesh))
        print(target)
    q = mesh_quality(mesh)
    print(json.dumps({"nodes": mesh.n_nodes, "triangles": mesh.n_triangles,
                      "min_angle": q.min_angle, "max_aspect": q.max_aspect,
                      "h_min": q.h_min, "h_max": q.h_max}))


COMMANDS = {"solve": _cmd_solve, "converge": _cmd_converge, "pml-study": _cmd_pml,
            "compare": _cmd_compare, "modes": _cmd_modes, "lift-test": _cmd_lift,
            "mesh": _cmd_mesh}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args)
        COMMANDS[args.command](args, config)
    except (ConfigError, PMLValidationError, MeshError, CutoffError, ValueError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
