import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from platepml.assembly import (assemble_bp, assemble_bq, assemble_nodal_forms,
                               assemble_penalty, boundary_flux_nodal, build_dof_map,
                               load_F1_nodal, local_matrices, penalty_structure, reduce,
                               subspace_mask, top_edges)
from platepml.meshing import GAMMA1_PML, GAMMA2_PML, GAMMA_C, REGION_UPPER, Mesh
from platepml.pml import PmlProfile
from platepml.quadrature import segment_rule, triangle_rule
from platepml.spectral import IncidentWave

UNIT_STIFF = np.array([[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]])
UNIT_MASS = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 24.0


class ConstantStretch:
    """Stand-in profile with a constant complex stretching factor."""

    def __init__(self, value):
        self.value = value

    def sigma(self, t):
        return np.full(np.shape(t), self.value, dtype=complex)


def unit_triangle():
    return Mesh(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), np.array([[0, 1, 2]]),
                np.zeros(3, dtype=int), np.zeros(1, dtype=int), np.zeros((0, 2), dtype=int), 1.0)


def two_triangles():
    nodes = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    return Mesh(nodes, np.array([[0, 1, 2], [1, 3, 2]]), np.zeros(4, dtype=int),
                np.zeros(2, dtype=int), np.zeros((0, 2), dtype=int), 1.0)


def test_unit_triangle_elements():
    strip_only = PmlProfile(h1=2.0, h2=-1.0)
    stiff, mass = local_matrices(unit_triangle(), strip_only)
    assert np.abs(stiff[0] - UNIT_STIFF).max() <= 1e-13
    assert np.abs(mass[0] - UNIT_MASS).max() <= 1e-13


def test_constant_stretch_elements():
    s = 15 + 5j
    stiff, mass = local_matrices(unit_triangle(), ConstantStretch(s))
    gx = np.array([-1.0, 1.0, 0.0])
    gy = np.array([-1.0, 0.0, 1.0])
    expected = 0.5 * (s * np.outer(gx, gx) + np.outer(gy, gy) / s)
    assert np.abs(stiff[0] - expected).max() <= 1e-13
    assert np.abs(mass[0] - s * UNIT_MASS).max() <= 1e-13


def test_two_triangle_penalty():
    eta = 0.001 + 0.001j
    jumps = penalty_structure(two_triangles()).toarray()
    # jump vector is sqrt(2) (-1, 1, 1, -1) and h_e^2 = 2
    expected = 4.0 * np.outer([-1, 1, 1, -1], [-1, 1, 1, -1])
    assert np.abs(eta * jumps - eta * expected).max() <= 1e-13
    assert np.abs(eta * jumps[0, 0] - 4 * eta) <= 1e-13


@pytest.mark.parametrize("degree", [1, 2, 3, 4, 5, 6, 8])
def test_triangle_rule_exactness(degree):
    pts, w = triangle_rule(degree)
    assert w.sum() == pytest.approx(1.0, abs=1e-14)
    x, y = pts[:, 1], pts[:, 2]
    for i in range(degree + 1):
        for j in range(degree + 1 - i):
            exact = 2.0 * math.factorial(i) * math.factorial(j) / math.factorial(i + j + 2)
            assert np.dot(w, x ** i * y ** j) == pytest.approx(exact, rel=1e-12, abs=1e-15)


def test_segment_rule():
    t, w = segment_rule(4)
    assert np.dot(w, t ** 7) == pytest.approx(1 / 8, rel=1e-14)


def test_node_level_symmetry(mesh05, profile):
    forms = assemble_nodal_forms(mesh05, profile)
    for mat in (forms.stiffness, forms.mass, forms.jumps):
        scale = abs(mat).max()
        assert abs(mat - mat.T).max() <= 1e-13 * scale


def test_reduced_blocks_symmetric_at_normal_incidence(coarse_mesh, profile):
    forms = assemble_nodal_forms(coarse_mesh, profile)
    dofs = build_dof_map(coarse_mesh, 0.0, "interior")
    for block in (assemble_bp(coarse_mesh, dofs, profile, math.pi, forms=forms),
                  assemble_bq(coarse_mesh, dofs, profile, math.pi, forms=forms),
                  assemble_penalty(coarse_mesh, dofs, 0.001 + 0.001j, forms=forms)):
        assert abs(block - block.T).max() <= 1e-13 * abs(block).max()


def test_reduced_blocks_hermitian_structure(coarse_mesh, profile, wave):
    # quasi-periodic reduction is a congruence P^H A P of the node-level form
    forms = assemble_nodal_forms(coarse_mesh, profile)
    dofs = build_dof_map(coarse_mesh, wave.alpha, "all")
    block = reduce(forms.mass, dofs, dofs)
    direct = dofs.prolongation.conj().T @ forms.mass @ dofs.prolongation
    assert abs(block - direct).max() <= 1e-15


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), eta_re=st.floats(0.0, 1.0), eta_im=st.floats(-1.0, 1.0))
def test_penalty_nonnegative(seed, eta_re, eta_im):
    mesh = _small_mesh()
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(mesh.n_nodes) + 1j * rng.standard_normal(mesh.n_nodes)
    g = complex(eta_re, eta_im) * penalty_structure(mesh)
    assert np.real(np.vdot(v, g @ v)) >= -1e-12 * np.linalg.norm(v) ** 2


_CACHE = {}


def _small_mesh():
    if "m" not in _CACHE:
        from platepml.meshing import CavityShape, CellGeometry, generate_mesh
        _CACHE["m"] = generate_mesh(CellGeometry(1.0, 0.5, -0.5, 0.5, 0.5),
                                    CavityShape("circle", 0.3, (0.5, 0.0)), 0.1)
    return _CACHE["m"]


def test_dof_maps(coarse_mesh, wave):
    full = build_dof_map(coarse_mesh, wave.alpha, "all")
    assert abs(abs(full.phase) - 1.0) <= 1e-15
    assert full.n_dofs == coarse_mesh.n_nodes - len(coarse_mesh.pairs)
    interior = build_dof_map(coarse_mesh, wave.alpha, "interior")
    fixed = coarse_mesh.marked(GAMMA_C | GAMMA1_PML | GAMMA2_PML)
    slaves = np.zeros(coarse_mesh.n_nodes, dtype=bool)
    slaves[coarse_mesh.pairs[:, 1]] = True
    assert interior.n_dofs == int(np.sum(~fixed & ~slaves))
    cavity = build_dof_map(coarse_mesh, wave.alpha, "cavity")
    assert cavity.n_dofs == int(coarse_mesh.marked(GAMMA_C).sum())
    # expansion imposes the Bloch phase on slaves
    x = np.arange(full.n_dofs, dtype=complex) + 1.0
    nodal = full.expand(x)
    l, r = coarse_mesh.pairs.T
    assert np.allclose(nodal[r], full.phase * nodal[l], rtol=0, atol=1e-13)
    assert np.allclose(full.restrict(nodal), x)
    with pytest.raises(ValueError):
        subspace_mask(coarse_mesh, "nowhere")


def test_f1_supported_in_upper_layer(coarse_mesh, profile, wave):
    load = load_F1_nodal(coarse_mesh, wave, profile)
    touched = np.zeros(coarse_mesh.n_nodes, dtype=bool)
    touched[np.unique(coarse_mesh.triangles[coarse_mesh.regions == REGION_UPPER])] = True
    assert np.all(load[~touched] == 0)
    assert np.abs(load[touched]).max() > 0
    # interface nodes see only the part of their hat inside the layer
    assert np.all(coarse_mesh.nodes[touched, 1] >= profile.h1)


def test_f2_matches_adaptive_line_integral(coarse_mesh, profile, wave):
    flux = boundary_flux_nodal(coarse_mesh, wave, profile)
    top = coarse_mesh.marked(GAMMA1_PML)
    assert np.all(flux[~top] == 0)
    y = profile.top
    scale = wave.beta / abs(profile.sigma(y))
    for node in np.flatnonzero(top)[:6]:
        xi = coarse_mesh.nodes[node, 0]
        nbrs = top_edges(coarse_mesh)
        ends = [coarse_mesh.nodes[e[0] if e[1] == node else e[1], 0]
                for e in nbrs if node in e]
        total = 0j
        for xj in ends:
            lo, hi = sorted((xi, xj))

            def hat(x, xj=xj):
                return (x - xj) / (xi - xj)

            def part(x, f):
                return f(hat(x) * wave.dx2(x, y) / profile.sigma(y))

            total += quad(lambda x: part(x, np.real), lo, hi, epsabs=1e-14)[0]
            total += 1j * quad(lambda x: part(x, np.imag), lo, hi, epsabs=1e-14)[0]
        assert abs(flux[node] - total) <= 1e-12 * scale


def test_quadrature_degree_sufficient(mesh05, profile):
    _, m6 = local_matrices(mesh05, profile, 6)
    s6, _ = local_matrices(mesh05, profile, 6)
    s10, m10 = local_matrices(mesh05, profile, 10)
    assert np.abs(m6 - m10).max() <= 1e-9 * np.abs(m10).max()
    assert np.abs(s6 - s10).max() <= 1e-9 * np.abs(s10).max()


def test_sparse_format(coarse_mesh, profile):
    forms = assemble_nodal_forms(coarse_mesh, profile)
    assert sp.isspmatrix_csr(forms.stiffness)
    assert forms.stiffness.shape == (coarse_mesh.n_nodes, coarse_mesh.n_nodes)
