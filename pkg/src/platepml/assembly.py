"""Quasi-periodic P1 spaces and the discrete forms of the mixed plate systems.

Every form is first assembled on all mesh nodes with the real hat basis
(so node-level matrices are complex symmetric).  A :class:`DofMap` then
folds each right-boundary node into its left partner with the Bloch phase
``exp(i alpha L)``; reduced matrices are ``P_row^H A P_col`` because the test
side of every sesquilinear form is conjugated.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .meshing import (GAMMA1_PML, GAMMA2_PML, GAMMA_C, REGION_UPPER, Mesh)
from .pml import PmlProfile, source_f
from .quadrature import DEFAULT_DEGREE, segment_rule, triangle_rule

SUBSPACES = ("all", "interior", "boundary", "no_cavity", "cavity")
GAMMA_ALL = GAMMA_C | GAMMA1_PML | GAMMA2_PML


@dataclass
class DofMap:
    """Subspace of quasi-periodic P1 functions.

    ``prolongation`` maps dof values to nodal values (shape ``V x n``); slave
    nodes on the right boundary receive ``phase`` times their master value.
    """
    tag: str
    phase: complex
    node_mask: np.ndarray
    node_dof: np.ndarray
    prolongation: sp.csr_matrix

    @property
    def n_dofs(self) -> int:
        return self.prolongation.shape[1]

    def expand(self, values) -> np.ndarray:
        return self.prolongation @ np.asarray(values)

    def restrict(self, nodal) -> np.ndarray:
        """Master-node values of a nodal array (inverse of :meth:`expand`)."""
        nodal = np.asarray(nodal)
        out = np.zeros(self.n_dofs, dtype=complex)
        coo = self.prolongation.tocoo()
        unit = np.abs(coo.data - 1.0) < 1e-15
        out[coo.col[unit]] = nodal[coo.row[unit]]
        return out


def subspace_mask(mesh: Mesh, subspace: str) -> np.ndarray:
    on_gamma = (mesh.markers & GAMMA_ALL) != 0
    on_cavity = (mesh.markers & GAMMA_C) != 0
    if subspace == "all":
        return np.ones(mesh.n_nodes, dtype=bool)
    if subspace == "interior":      # vanishes on the cavity and both outer layers
        return ~on_gamma
    if subspace == "boundary":      # supported on those boundary nodes only
        return on_gamma
    if subspace == "no_cavity":     # vanishes on the cavity only
        return ~on_cavity
    if subspace == "cavity":        # supported on the cavity only
        return on_cavity
    raise ValueError(f"unknown subspace {subspace!r}; choose from {SUBSPACES}")


def build_dof_map(mesh: Mesh, alpha: float, subspace: str = "all") -> DofMap:
    """Eliminate right-boundary slaves and keep nodes of ``subspace``."""
    phase = complex(np.exp(1j * alpha * mesh.lattice))
    mask = subspace_mask(mesh, subspace)
    n = mesh.n_nodes
    slave_of = np.full(n, -1, dtype=np.int64)
    slave_of[mesh.pairs[:, 1]] = mesh.pairs[:, 0]
    is_master = mask & (slave_of < 0)
    node_dof = np.full(n, -1, dtype=np.int64)
    node_dof[is_master] = np.arange(int(is_master.sum()))
    slaves = np.flatnonzero(mask & (slave_of >= 0))
    node_dof[slaves] = node_dof[slave_of[slaves]]
    if np.any(node_dof[slaves] < 0):
        raise ValueError("a right-boundary node lies in the subspace but its partner does not")
    rows = np.concatenate([np.flatnonzero(is_master), slaves])
    cols = np.concatenate([node_dof[is_master], node_dof[slaves]])
    vals = np.concatenate([np.ones(int(is_master.sum()), dtype=complex),
                           np.full(len(slaves), phase)])
    prol = sp.csr_matrix((vals, (rows, cols)), shape=(n, int(is_master.sum())))
    return DofMap(subspace, phase, mask, node_dof, prol)


def reduce(matrix, rows: DofMap, cols: DofMap) -> sp.csr_matrix:
    out = rows.prolongation.conj().T @ matrix @ cols.prolongation
    out = sp.csr_matrix(out)
    out.sum_duplicates()
    out.sort_indices()
    return out


def reduce_vector(vector, rows: DofMap) -> np.ndarray:
    return rows.prolongation.conj().T @ np.asarray(vector)


# ---------------------------------------------------------------- node level

def _geometry(mesh: Mesh):
    p = mesh.nodes[mesh.triangles]
    x, y = p[..., 0], p[..., 1]
    det = (x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0])
    area = 0.5 * det
    # gradients of the three barycentric coordinates
    gx = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1) / det[:, None]
    gy = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1) / det[:, None]
    return p, area, gx, gy


def _scatter(mesh: Mesh, local):
    tris = mesh.triangles
    rows = np.repeat(tris, 3, axis=1).ravel()
    cols = np.tile(tris, (1, 3)).ravel()
    n = mesh.n_nodes
    mat = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    mat.sum_duplicates()
    return mat


def quadrature_points(mesh: Mesh, degree: int = DEFAULT_DEGREE):
    bary, w = triangle_rule(degree)
    p = mesh.nodes[mesh.triangles]
    return np.einsum("qk,tkd->tqd", bary, p), bary, w


@dataclass
class NodalForms:
    """Node-level pieces; ``b_p = stiff - k^2 mass`` and ``b_q = stiff + k^2 mass``."""
    stiffness: sp.csr_matrix
    mass: sp.csr_matrix
    jumps: sp.csr_matrix
    degree: int = DEFAULT_DEGREE


def local_matrices(mesh: Mesh, profile: PmlProfile, degree: int = DEFAULT_DEGREE):
    """Per-triangle ``(stiffness, mass)`` arrays of shape ``(T, 3, 3)``."""
    _, area, gx, gy = _geometry(mesh)
    pts, bary, w = quadrature_points(mesh, degree)
    sig = profile.sigma(pts[..., 1])
    s_mean = sig @ w
    inv_mean = (1.0 / sig) @ w
    stiff = area[:, None, None] * (s_mean[:, None, None] * gx[:, :, None] * gx[:, None, :]
                                   + inv_mean[:, None, None] * gy[:, :, None] * gy[:, None, :])
    mass = area[:, None, None] * np.einsum("tq,q,qi,qj->tij", sig, w, bary, bary)
    return stiff, mass


def penalty_structure(mesh: Mesh) -> sp.csr_matrix:
    """Real matrix ``sum_e h_e^2 j_i j_j`` over interior edges (multiply by eta)."""
    edges = mesh.edges
    _, _, gx, gy = _geometry(mesh)
    tris = mesh.triangles
    e = edges.interior
    if len(e) == 0:
        return sp.csr_matrix((mesh.n_nodes, mesh.n_nodes))
    k0, k1 = edges.interior_tris[:, 0], edges.interior_tris[:, 1]
    a, b = mesh.nodes[e[:, 0]], mesh.nodes[e[:, 1]]
    tangent = b - a
    length = np.linalg.norm(tangent, axis=1)
    normal = np.column_stack([tangent[:, 1], -tangent[:, 0]]) / length[:, None]
    # orient the normal from K (lower index) towards K'
    centroid0 = mesh.nodes[tris[k0]].mean(axis=1)
    flip = np.sum((centroid0 - a) * normal, axis=1) > 0
    normal[flip] *= -1
    # the union of the two triangles carries four distinct nodes
    nodes4 = np.concatenate([tris[k0], tris[k1]], axis=1)
    dn0 = gx[k0] * normal[:, :1] + gy[k0] * normal[:, 1:]
    dn1 = gx[k1] * normal[:, :1] + gy[k1] * normal[:, 1:]
    jump = np.concatenate([dn0, -dn1], axis=1)
    weight = length ** 2
    rows = np.repeat(nodes4, 6, axis=1).ravel()
    cols = np.tile(nodes4, (1, 6)).ravel()
    vals = (weight[:, None, None] * jump[:, :, None] * jump[:, None, :]).ravel()
    n = mesh.n_nodes
    mat = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    mat.sum_duplicates()
    return mat


def assemble_nodal_forms(mesh: Mesh, profile: PmlProfile, degree: int = DEFAULT_DEGREE) -> NodalForms:
    stiff, mass = local_matrices(mesh, profile, degree)
    return NodalForms(_scatter(mesh, stiff), _scatter(mesh, mass), penalty_structure(mesh),
                      degree)


def _forms(mesh, profile, forms):
    return forms if forms is not None else assemble_nodal_forms(mesh, profile)


def assemble_bp(mesh, dofs: DofMap, profile, kappa, col_dofs: DofMap | None = None,
                forms: NodalForms | None = None):
    f = _forms(mesh, profile, forms)
    return reduce(f.stiffness - kappa ** 2 * f.mass, dofs, col_dofs or dofs)


def assemble_bq(mesh, dofs: DofMap, profile, kappa, col_dofs: DofMap | None = None,
                forms: NodalForms | None = None):
    f = _forms(mesh, profile, forms)
    return reduce(f.stiffness + kappa ** 2 * f.mass, dofs, col_dofs or dofs)


def assemble_penalty(mesh, dofs: DofMap, eta: complex, col_dofs: DofMap | None = None,
                     forms: NodalForms | None = None):
    jumps = forms.jumps if forms is not None else penalty_structure(mesh)
    return reduce(eta * jumps, dofs, col_dofs or dofs)


def assemble_mass_sigma(mesh, dofs_row: DofMap, dofs_col: DofMap, profile=None,
                        forms: NodalForms | None = None):
    f = _forms(mesh, profile, forms)
    return reduce(f.mass, dofs_row, dofs_col)


# ---------------------------------------------------------------- loads

def nodal_load(mesh: Mesh, density, triangles=None, degree: int = DEFAULT_DEGREE) -> np.ndarray:
    """``int density * phi_i`` over the chosen triangles, for every node ``i``."""
    if triangles is None:
        triangles = np.arange(mesh.n_triangles)
    _, area, _, _ = _geometry(mesh)
    pts, bary, w = quadrature_points(mesh, degree)
    pts = pts[triangles]
    vals = density(pts[..., 0], pts[..., 1])
    local = area[triangles, None] * np.einsum("tq,q,qi->ti", vals, w, bary)
    out = np.zeros(mesh.n_nodes, dtype=complex)
    np.add.at(out, mesh.triangles[triangles], local)
    return out


def load_F1_nodal(mesh, wave, profile, variant="biharmonic", weight="sigma", degree=DEFAULT_DEGREE):
    """Nodal ``int_{upper layer} w f phi_i`` (``w`` is sigma or one)."""
    upper = np.flatnonzero(mesh.regions == REGION_UPPER)

    def density(x1, x2):
        f = source_f(x1, x2, wave, profile, variant=variant)
        return profile.sigma(x2) * f if weight == "sigma" else f

    return nodal_load(mesh, density, upper, degree)


def assemble_load_F1(mesh, dofs: DofMap, wave, profile, variant="biharmonic", degree=DEFAULT_DEGREE):
    """``-(1/(2 kappa^2)) int_{upper layer} sigma f conj(phi_i)``."""
    nodal = load_F1_nodal(mesh, wave, profile, variant, "sigma", degree)
    return reduce_vector(-nodal / (2 * wave.kappa ** 2), dofs)


def top_edges(mesh: Mesh) -> np.ndarray:
    b = mesh.edges.boundary
    on = (mesh.markers & GAMMA1_PML) != 0
    return b[on[b[:, 0]] & on[b[:, 1]]]


def boundary_flux_nodal(mesh, wave, profile, n_gauss: int = 4) -> np.ndarray:
    """Nodal ``int_{outer top} sigma^-1 phi_i d2 u_inc dx1``."""
    edges = top_edges(mesh)
    t, w = segment_rule(n_gauss)
    a, b = mesh.nodes[edges[:, 0]], mesh.nodes[edges[:, 1]]
    length = np.linalg.norm(b - a, axis=1)
    x = a[:, None, :] + t[None, :, None] * (b - a)[:, None, :]
    vals = wave.dx2(x[..., 0], x[..., 1]) / profile.sigma(x[..., 1])
    out = np.zeros(mesh.n_nodes, dtype=complex)
    np.add.at(out, edges[:, 0], length * ((1.0 - t) * w * vals).sum(axis=1))
    np.add.at(out, edges[:, 1], length * (t * w * vals).sum(axis=1))
    return out


def assemble_load_F2(mesh, dofs: DofMap, wave, profile, n_gauss: int = 4):
    """``int_{outer top} sigma^-1 conj(psi_i) d2 u_inc dx1``."""
    return reduce_vector(boundary_flux_nodal(mesh, wave, profile, n_gauss), dofs)


def interpolate_on(mesh: Mesh, flag: int, func) -> np.ndarray:
    """Nodal interpolant of ``func`` on nodes carrying ``flag``, zero elsewhere."""
    out = np.zeros(mesh.n_nodes, dtype=complex)
    ids = np.flatnonzero(mesh.markers & flag)
    out[ids] = func(mesh.nodes[ids, 0], mesh.nodes[ids, 1])
    return out
