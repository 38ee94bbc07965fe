"""End-to-end scenario runs, mesh-refinement and PML-parameter studies."""
from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from matplotlib.tri import Triangulation
from scipy.spatial import cKDTree

from .assembly import assemble_nodal_forms
from .config import ScenarioConfig
from .meshing import REGION_STRIP, Mesh, generate_mesh, mesh_quality
from .output import write_field_csv, write_json, write_vtk
from .solve import (ScatterSolution, band_triangles, cavity_mismatch, field_norms,
                    l2_squared_per_triangle, solve)
from .spectral import make_mode_basis, theta


def _map(func, items, threads: int):
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [func(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))


def build_mesh(config: ScenarioConfig, h: float | None = None) -> Mesh:
    d = config.discretization
    return generate_mesh(config.cell(), config.cavity_shape(), h or d.h, seed=d.seed)


def _method_options(config: ScenarioConfig, method: str) -> dict:
    d = config.discretization
    if method == "qp":
        return {"penalty_form": d.qp_penalty_form}
    if method == "decoupled":
        return {"source_weight": d.decoupled_source_weight}
    return {}


def solve_methods(config: ScenarioConfig, mesh: Mesh, methods=None, threads: int = 1) -> dict:
    """Solve each requested splitting on one mesh, sharing the node-level forms."""
    config.validate()
    profile = config.profile()
    forms = assemble_nodal_forms(mesh, profile, config.discretization.quad_degree)
    wave = config.incident()
    methods = list(methods or config.methods)

    def one(method):
        return solve(method, mesh, wave, profile, config.eta, forms,
                     **_method_options(config, method))

    return dict(zip(methods, _map(one, methods, threads)))


def strip_nodes(mesh: Mesh) -> np.ndarray:
    return np.unique(mesh.triangles[mesh.regions == REGION_STRIP])


def strip_l2(mesh: Mesh, values) -> float:
    per = l2_squared_per_triangle(mesh, values)
    return float(np.sqrt(per[mesh.regions == REGION_STRIP].sum()))


def absorption_levels(solution: ScatterSolution, config: ScenarioConfig, band: float = 0.2) -> dict:
    """Field level in the outer ``band`` of each layer relative to max |u| in the strip.

    The upper layer carries the unattenuated incident wave by construction,
    so the scattered part ``u - u_inc`` is measured there.
    """
    mesh = solution.mesh
    profile = config.profile()
    wave = config.incident()
    interior = np.abs(solution.u[strip_nodes(mesh)]).max()
    top = np.unique(mesh.triangles[band_triangles(mesh, profile.top - band * profile.dh1, profile.top)])
    bottom = np.unique(mesh.triangles[band_triangles(mesh, profile.bottom,
                                                     profile.bottom + band * profile.dh2)])
    x1, x2 = mesh.nodes.T
    scattered = solution.u - wave(x1, x2)
    return {
        "strip_max": float(interior),
        "upper_band": float(np.abs(scattered[top]).max() / interior),
        "lower_band": float(np.abs(solution.u[bottom]).max() / interior),
    }


def scenario_theta(config: ScenarioConfig) -> float:
    wave = config.incident()
    basis = make_mode_basis(wave, config.geometry.lattice, config.discretization.n_modes)
    return theta(basis, config.profile(), wave)


def run_scenario(config: ScenarioConfig, out_dir=None, threads: int = 1, vtk: bool = False) -> dict:
    """Mesh, solve every requested method, and write summary plus field dumps."""
    config.validate()
    out = Path(out_dir or config.output_dir)
    mesh = build_mesh(config)
    quality = mesh_quality(mesh)
    sols = solve_methods(config, mesh, threads=threads)
    profile = config.profile()
    summary = {
        "theta": scenario_theta(config),
        "mesh": {"nodes": mesh.n_nodes, "triangles": mesh.n_triangles,
                 "min_angle": quality.min_angle, "max_aspect": quality.max_aspect,
                 "h_min": quality.h_min, "h_max": quality.h_max},
        "methods": {},
    }
    for name, sol in sols.items():
        summary["methods"][name] = {
            "residual": sol.residual,
            "n_dofs": sol.n_dofs,
            "kappa_used": sol.kappa,
            "events": sol.events,
            "cavity_max_abs_u": cavity_mismatch(sol),
            "norms_u": field_norms(mesh, sol.u, profile),
            "norms_lap_u": field_norms(mesh, sol.lap_u, profile),
            "absorption": absorption_levels(sol, config),
        }
        write_field_csv(out / f"field_{name}.csv", mesh, sol.u, sol.lap_u, config)
        if vtk:
            write_vtk(out / f"field_{name}.vtk", mesh, {"u": sol.u, "lap_u": sol.lap_u})
    write_json(out / "summary.json", summary, config)
    return summary


# ---------------------------------------------------------------- transfer

def interpolate_p1(mesh: Mesh, values, points) -> np.ndarray:
    """Evaluate a nodal P1 field at arbitrary points.

    Points outside the triangulation (e.g. between a coarse and a fine
    polygonal cavity) use the linear extension of the nearest triangle.
    """
    points = np.asarray(points, dtype=float)
    tri = Triangulation(mesh.nodes[:, 0], mesh.nodes[:, 1], mesh.triangles)
    found = tri.get_trifinder()(points[:, 0], points[:, 1])
    missing = found < 0
    if np.any(missing):
        centroids = mesh.nodes[mesh.triangles].mean(axis=1)
        found[missing] = cKDTree(centroids).query(points[missing])[1]
    v = mesh.nodes[mesh.triangles[found]]
    jac = np.stack([v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]], axis=2)
    lam = np.linalg.solve(jac, (points - v[:, 0])[..., None])[..., 0]
    bary = np.column_stack([1.0 - lam.sum(axis=1), lam])
    return np.sum(bary * np.asarray(values)[mesh.triangles[found]], axis=1)


@dataclass
class ConvergenceReport:
    method: str
    reference_method: str
    h_ref: float
    hs: list
    err_u: list
    err_lap_u: list
    rel_err_u: list
    rel_err_lap_u: list
    slope_u: float
    slope_lap_u: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def fitted_slope(hs, errors) -> float:
    return float(np.polyfit(np.log(hs), np.log(errors), 1)[0])


def solve_ladder(config: ScenarioConfig, hs, methods, threads: int = 1) -> dict:
    """``{h: (mesh, {method: solution})}`` for every mesh size."""
    def run(h):
        mesh = build_mesh(config, h)
        return mesh, solve_methods(config, mesh, methods)

    return dict(zip(hs, _map(run, hs, threads)))


def convergence_reports(config: ScenarioConfig, hs, h_ref: float, methods=("decoupled",),
                        reference_method: str = "decoupled", threads: int = 1,
                        ladder: dict | None = None) -> dict:
    """L2(strip) errors against a fine-mesh reference, compared at reference nodes.

    ``ladder`` may carry precomputed solves from :func:`solve_ladder`.
    """
    hs = sorted(hs, reverse=True)
    if not h_ref < min(hs):
        raise ValueError("reference mesh must be finer than every study mesh")
    methods = list(methods)
    if ladder is None:
        ladder = solve_ladder(config, hs, methods, threads)
    ref_mesh = build_mesh(config, h_ref)
    ref = solve_methods(config, ref_mesh, [reference_method])[reference_method]
    nodes = strip_nodes(ref_mesh)
    points = ref_mesh.nodes[nodes]
    nu, nl = strip_l2(ref_mesh, ref.u), strip_l2(ref_mesh, ref.lap_u)

    def error(mesh, values, ref_values):
        full = np.zeros(ref_mesh.n_nodes, dtype=complex)
        full[nodes] = interpolate_p1(mesh, values, points) - ref_values[nodes]
        return strip_l2(ref_mesh, full)

    reports = {}
    for method in methods:
        eu, el = [], []
        for h in hs:
            mesh, sols = ladder[h]
            eu.append(error(mesh, sols[method].u, ref.u))
            el.append(error(mesh, sols[method].lap_u, ref.lap_u))
        reports[method] = ConvergenceReport(method, reference_method, h_ref, hs, eu, el,
                                            [e / nu for e in eu], [e / nl for e in el],
                                            fitted_slope(hs, eu), fitted_slope(hs, el))
    return reports


def convergence_study(config: ScenarioConfig, hs, h_ref: float, method: str = "decoupled",
                      reference_method: str = "decoupled", threads: int = 1) -> ConvergenceReport:
    return convergence_reports(config, hs, h_ref, [method], reference_method, threads)[method]


# ---------------------------------------------------------------- PML sweep

def _with_pml(config: ScenarioConfig, parameter: str, value: float) -> ScenarioConfig:
    if parameter == "dh":
        geometry = replace(config.geometry, dh1=value, dh2=value)
        return replace(config, geometry=geometry)
    if parameter in ("sigma1", "sigma2"):
        return replace(config, pml=replace(config.pml, **{parameter: value}))
    raise ValueError(f"unknown sweep parameter {parameter!r}")


def pml_study(config: ScenarioConfig, parameter: str = "dh", values=(0.5, 1.0, 1.5, 2.0, 2.5),
              method: str = "decoupled", threads: int = 1) -> list:
    """Rows ``{value, theta, proxy, upper_band, lower_band}``.

    The proxy is the relative L2(strip) distance to the solution at the
    largest sweep value.  The strip mesh does not depend on the layer
    thickness, so strip nodal values are compared directly.
    """
    values = sorted(values)
    configs = [_with_pml(config, parameter, v) for v in values]

    def run(cfg):
        mesh = build_mesh(cfg)
        return mesh, solve_methods(cfg, mesh, [method])[method]

    runs = _map(run, configs, threads)
    ref_mesh, ref = runs[-1]
    nodes = strip_nodes(ref_mesh)
    n_strip = nodes.max() + 1
    norm_ref = strip_l2(ref_mesh, ref.u)
    rows = []
    for value, cfg, (mesh, sol) in zip(values, configs, runs):
        if not np.array_equal(mesh.nodes[:n_strip], ref_mesh.nodes[:n_strip]):
            raise RuntimeError("strip mesh changed across the sweep")
        diff = np.zeros(ref_mesh.n_nodes, dtype=complex)
        diff[:n_strip] = sol.u[:n_strip] - ref.u[:n_strip]
        levels = absorption_levels(sol, cfg)
        rows.append({"parameter": parameter, "value": value, "theta": scenario_theta(cfg),
                     "proxy": strip_l2(ref_mesh, diff) / norm_ref,
                     "upper_band": levels["upper_band"], "lower_band": levels["lower_band"]})
    return rows


def proxy_theta_slope(rows) -> float:
    """Least-squares slope of log(proxy) against log(theta), reference row excluded."""
    use = [r for r in rows if r["proxy"] > 0]
    if len(use) < 2:
        return float("nan")
    return fitted_slope([r["theta"] for r in use], [r["proxy"] for r in use])


def pairwise_differences(mesh: Mesh, sols: dict) -> dict:
    """Relative L2(strip) differences of u and lap u for every pair of solutions."""
    out = {}
    for a, b in itertools.combinations(sols, 2):
        out[f"{a}-{b}"] = {
            "u": strip_l2(mesh, sols[a].u - sols[b].u) / strip_l2(mesh, sols[b].u),
            "lap_u": strip_l2(mesh, sols[a].lap_u - sols[b].lap_u) / strip_l2(mesh, sols[b].lap_u),
        }
    return out


def compare_decompositions(config: ScenarioConfig, h: float | None = None, threads: int = 1) -> dict:
    """Pairwise relative L2(strip) differences over all three splittings on one mesh."""
    mesh = build_mesh(config, h)
    return pairwise_differences(mesh, solve_methods(config, mesh, ["qp", "uq", "decoupled"],
                                                    threads=threads))
