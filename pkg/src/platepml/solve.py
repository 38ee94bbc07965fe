"""Mixed P1 solvers for the clamped-cavity plate scattering problem.

Three splittings of the fourth-order problem into second-order pairs are
provided:

``qp``
    Helmholtz / modified Helmholtz pair coupled through shared boundary
    unknowns; ``u = q - p`` and ``lap u = kappa^2 (q + p)``.
``uq``
    The displacement together with the modified Helmholtz field;
    ``lap u = 2 kappa^2 q - kappa^2 u``.
``decoupled``
    Unscaled pair ``p = lap u - kappa^2 u``, ``q = lap u + kappa^2 u`` coupled
    only on the cavity; ``u = (q - p) / (2 kappa^2)`` and ``lap u = (q + p) / 2``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .assembly import (NodalForms, assemble_nodal_forms, boundary_flux_nodal,
                       build_dof_map, interpolate_on, load_F1_nodal, reduce,
                       reduce_vector)
from .meshing import (GAMMA1, GAMMA1_PML, GAMMA2, GAMMA_C, REGION_LOWER,
                      REGION_STRIP, REGION_UPPER, Mesh)
from .pml import PmlProfile
from .spectral import IncidentWave

log = logging.getLogger(__name__)

METHODS = ("qp", "uq", "decoupled")
DEFAULT_ETA = 0.001 + 0.001j


class SolverError(RuntimeError):
    pass


class SingularMatrixError(SolverError):
    pass


class ResidualError(SolverError):
    pass


def sparse_solve(matrix, rhs, rtol: float = 1e-10, return_residual: bool = False):
    """Sparse LU solve with a residual check and one refinement sweep."""
    a = sp.csc_matrix(matrix)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"matrix must be square, got {a.shape}")
    b = np.asarray(rhs, dtype=complex)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        x = np.zeros(a.shape[1], dtype=complex)
        return (x, 0.0) if return_residual else x
    try:
        lu = splu(a.astype(complex), permc_spec="COLAMD")
    except RuntimeError as exc:
        raise SingularMatrixError(f"sparse LU failed: {exc}") from None
    x = lu.solve(b)
    res = np.linalg.norm(a @ x - b) / bnorm
    if not np.isfinite(res):
        raise SingularMatrixError("sparse LU produced non-finite values")
    if res > rtol:
        x = x + lu.solve(b - a @ x)
        res = np.linalg.norm(a @ x - b) / bnorm
    if res > rtol:
        raise ResidualError(f"relative residual {res:.3e} exceeds {rtol:.1e}")
    return (x, float(res)) if return_residual else x


@dataclass
class ScatterSolution:
    method: str
    mesh: Mesh = field(repr=False)
    fields: dict = field(repr=False)
    u: np.ndarray = field(repr=False)
    lap_u: np.ndarray = field(repr=False)
    residual: float
    kappa: float
    n_dofs: int
    events: list = field(default_factory=list)


def postprocess(fields: dict, method: str, kappa: float):
    """Displacement and bending moment from the algebraic identities."""
    k2 = kappa ** 2
    if method == "qp":
        p, q = fields["p"], fields["q"]
        return q - p, k2 * (q + p)
    if method == "uq":
        u, q = fields["u"], fields["q"]
        return u, 2 * k2 * q - k2 * u
    if method == "decoupled":
        p, q = fields["p"], fields["q"]
        return (q - p) / (2 * k2), 0.5 * (q + p)
    raise ValueError(f"unknown method {method!r}")


def _qp_system(mesh, wave, profile, eta, forms, penalty_form="equations",
               q_penalty_sign=None):
    """Helmholtz / modified Helmholtz pair with shared boundary unknowns.

    ``penalty_form="equations"`` adds ``+G`` to the p rows, ``-G`` to the q rows
    and ``G(p_h + q_h + 2 w)`` to the boundary rows.  ``"display"`` uses the
    block layout with ``+G`` on both field rows and ``G`` on the boundary
    unknown only.  ``q_penalty_sign`` overrides the sign on the q rows.
    """
    if penalty_form not in ("equations", "display"):
        raise ValueError(f"unknown penalty_form {penalty_form!r}")
    if q_penalty_sign is None:
        q_penalty_sign = -1.0 if penalty_form == "equations" else 1.0
    k2 = wave.kappa ** 2
    inner = build_dof_map(mesh, wave.alpha, "interior")
    bnd = build_dof_map(mesh, wave.alpha, "boundary")
    bp = forms.stiffness - k2 * forms.mass
    bq = forms.stiffness + k2 * forms.mass
    pen = eta * forms.jumps
    bq_pen = bq + q_penalty_sign * pen
    if penalty_form == "equations":
        w_p, w_q, w_w = bp + pen, bq - pen, -2 * k2 * forms.mass + 2 * pen
    else:
        w_p, w_q, w_w = bp, bq, -2 * k2 * forms.mass + pen
    # q carries the incident trace on the outer top boundary as a nodal lift
    lift = interpolate_on(mesh, GAMMA1_PML, wave)
    f1 = reduce_vector(-load_F1_nodal(mesh, wave, profile, degree=forms.degree) / (2 * k2), inner)
    rhs = np.concatenate([
        f1,
        f1 - reduce_vector(bq_pen @ lift, inner),
        reduce_vector(w_q @ lift - boundary_flux_nodal(mesh, wave, profile), bnd),
    ])
    mat = sp.bmat([
        [reduce(bp + pen, inner, inner), None, reduce(bp + pen, inner, bnd)],
        [None, reduce(bq_pen, inner, inner), reduce(bq_pen, inner, bnd)],
        [reduce(w_p, bnd, inner), -reduce(w_q, bnd, inner), reduce(w_w, bnd, bnd)],
    ], format="csc")
    n0 = inner.n_dofs

    def unpack(x):
        w = bnd.expand(x[2 * n0:])
        return {"p": inner.expand(x[:n0]) + w,
                "q": inner.expand(x[n0:2 * n0]) + w + lift,
                "w": w}

    return mat, rhs, unpack


def _uq_system(mesh, wave, profile, eta, forms):
    k2 = wave.kappa ** 2
    inner = build_dof_map(mesh, wave.alpha, "interior")
    full = build_dof_map(mesh, wave.alpha, "all")
    bp_pen = forms.stiffness - k2 * forms.mass + eta * forms.jumps
    bq = forms.stiffness + k2 * forms.mass
    lift = interpolate_on(mesh, GAMMA1_PML, wave)
    rhs = np.concatenate([
        reduce_vector(boundary_flux_nodal(mesh, wave, profile) - bp_pen @ lift, full),
        reduce_vector(-load_F1_nodal(mesh, wave, profile, degree=forms.degree) / (2 * k2), inner),
    ])
    mat = sp.bmat([
        [reduce(bp_pen, full, inner), reduce(2 * k2 * forms.mass, full, full)],
        [None, reduce(bq, inner, full)],
    ], format="csc")
    n0 = inner.n_dofs

    def unpack(x):
        return {"u": inner.expand(x[:n0]) + lift, "q": full.expand(x[n0:])}

    return mat, rhs, unpack


def _decoupled_system(mesh, wave, profile, eta, forms, source_weight="plain"):
    k2 = wave.kappa ** 2
    inner = build_dof_map(mesh, wave.alpha, "interior")
    cav = build_dof_map(mesh, wave.alpha, "cavity")
    pen = eta * forms.jumps
    bp_pen = forms.stiffness - k2 * forms.mass + pen
    bq_pen = forms.stiffness + k2 * forms.mass - pen
    lift = -2 * k2 * interpolate_on(mesh, GAMMA1_PML, wave)
    weight = "sigma" if source_weight == "sigma" else "plain"
    load = load_F1_nodal(mesh, wave, profile, variant="helmholtz_decoupled",
                         weight=weight, degree=forms.degree)
    rhs = np.concatenate([
        reduce_vector(load - bp_pen @ lift, inner),
        np.zeros(inner.n_dofs, dtype=complex),
        reduce_vector(-(bp_pen @ lift), cav),
    ])
    mat = sp.bmat([
        [reduce(bp_pen, inner, inner), None, reduce(bp_pen, inner, cav)],
        [None, reduce(bq_pen, inner, inner), reduce(bq_pen, inner, cav)],
        [reduce(bp_pen, cav, inner),
         reduce(-(forms.stiffness + k2 * forms.mass) + pen, cav, inner),
         reduce(-2 * k2 * forms.mass + 2 * pen, cav, cav)],
    ], format="csc")
    n0 = inner.n_dofs

    def unpack(x):
        w = cav.expand(x[2 * n0:])
        return {"p": inner.expand(x[:n0]) + w + lift,
                "q": inner.expand(x[n0:2 * n0]) + w,
                "w": w}

    return mat, rhs, unpack


_BUILDERS = {"qp": _qp_system, "uq": _uq_system, "decoupled": _decoupled_system}


def solve(method: str, mesh: Mesh, wave: IncidentWave, profile: PmlProfile,
          eta: complex = DEFAULT_ETA, forms: NodalForms | None = None,
          rtol: float = 1e-10, **options) -> ScatterSolution:
    """Assemble and solve one splitting; retries once off a discrete resonance."""
    if method not in _BUILDERS:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    if forms is None:
        forms = assemble_nodal_forms(mesh, profile)
    events = []
    current = wave
    for attempt in range(2):
        mat, rhs, unpack = _BUILDERS[method](mesh, current, profile, eta, forms, **options)
        try:
            x, res = sparse_solve(mat, rhs, rtol=rtol, return_residual=True)
            break
        except SingularMatrixError as exc:
            if attempt:
                raise
            shifted = current.kappa * (1.0 + 1e-8)
            events.append(f"singular factorization ({exc}); retried with kappa={shifted!r}")
            log.warning(events[-1])
            current = IncidentWave(kappa=shifted, theta=current.theta)
    fields = unpack(x)
    u, lap = postprocess(fields, method, current.kappa)
    return ScatterSolution(method, mesh, fields, u, lap, res, current.kappa, mat.shape[0], events)


def solve_qp(mesh, wave, profile, eta=DEFAULT_ETA, forms=None, penalty_form="equations",
             q_penalty_sign=None):
    return solve("qp", mesh, wave, profile, eta, forms, penalty_form=penalty_form,
                 q_penalty_sign=q_penalty_sign)


def solve_uq(mesh, wave, profile, eta=DEFAULT_ETA, forms=None):
    return solve("uq", mesh, wave, profile, eta, forms)


def solve_decoupled(mesh, wave, profile, eta=DEFAULT_ETA, forms=None, source_weight="plain"):
    return solve("decoupled", mesh, wave, profile, eta, forms, source_weight=source_weight)


# ---------------------------------------------------------------- norms

def l2_squared_per_triangle(mesh: Mesh, values) -> np.ndarray:
    """Exact ``int |v|^2`` of the P1 interpolant on every triangle."""
    v = np.asarray(values)[mesh.triangles]
    area = np.abs(mesh.areas())
    return area / 12.0 * (np.sum(np.abs(v) ** 2, axis=1) + np.abs(v.sum(axis=1)) ** 2)


def band_triangles(mesh: Mesh, lower: float, upper: float) -> np.ndarray:
    """Triangles whose three vertices satisfy ``lower <= x2 <= upper``."""
    y = mesh.nodes[mesh.triangles][:, :, 1]
    return np.flatnonzero((y.min(axis=1) >= lower - 1e-12) & (y.max(axis=1) <= upper + 1e-12))


def trace_l2(mesh: Mesh, values, flag: int) -> float:
    """L2 norm along the boundary or interface line of nodes with ``flag``."""
    ids = np.flatnonzero(mesh.markers & flag)
    order = ids[np.argsort(mesh.nodes[ids, 0])]
    x = mesh.nodes[order, 0]
    v = np.asarray(values)[order]
    dx = np.diff(x)
    a, b = v[:-1], v[1:]
    seg = dx / 3.0 * (np.abs(a) ** 2 + np.real(a * np.conj(b)) + np.abs(b) ** 2)
    return float(np.sqrt(seg.sum()))


def field_norms(mesh: Mesh, values, profile: PmlProfile, band: float = 0.2) -> dict:
    """L2 norms over the strip, each absorbing layer, its outer ``band`` fraction,
    and traces on the two interfaces."""
    per = l2_squared_per_triangle(mesh, values)
    top_band = band_triangles(mesh, profile.top - band * profile.dh1, profile.top)
    bottom_band = band_triangles(mesh, profile.bottom, profile.bottom + band * profile.dh2)
    out = {
        "strip": float(np.sqrt(per[mesh.regions == REGION_STRIP].sum())),
        "upper_layer": float(np.sqrt(per[mesh.regions == REGION_UPPER].sum())),
        "lower_layer": float(np.sqrt(per[mesh.regions == REGION_LOWER].sum())),
        "upper_band": float(np.sqrt(per[top_band].sum())),
        "lower_band": float(np.sqrt(per[bottom_band].sum())),
    }
    if np.any(mesh.markers & GAMMA1):
        out["trace_top"] = trace_l2(mesh, values, GAMMA1)
    if np.any(mesh.markers & GAMMA2):
        out["trace_bottom"] = trace_l2(mesh, values, GAMMA2)
    return out


def cavity_mismatch(solution: ScatterSolution) -> float:
    """max |u| over cavity nodes (clamped condition residual)."""
    ids = np.flatnonzero(solution.mesh.markers & GAMMA_C)
    return float(np.max(np.abs(solution.u[ids]))) if ids.size else 0.0
