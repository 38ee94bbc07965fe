import numpy as np
import pytest

from platepml.meshing import (GAMMA1, GAMMA1_PML, GAMMA2, GAMMA2_PML, GAMMA_C, GAMMA_L, GAMMA_R,
                              REGION_LOWER, REGION_STRIP, REGION_UPPER, CavityShape, CellGeometry,
                              GeometryError, Mesh, MeshInvariantError, MeshParseError,
                              audit_mesh, classify_edges, export_mesh, generate_mesh,
                              import_mesh, mesh_quality, strip_mesh)


def square_mesh():
    nodes = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    tris = np.array([[0, 1, 2], [1, 3, 2]])
    markers = np.array([GAMMA_L, GAMMA_R, GAMMA_L, GAMMA_R])
    pairs = np.array([[0, 1], [2, 3]])
    return Mesh(nodes, tris, markers, np.zeros(2, dtype=int), pairs, 1.0)


def single(points):
    nodes = np.asarray(points, dtype=float)
    return Mesh(nodes, np.array([[0, 1, 2]]), np.zeros(3, dtype=int), np.zeros(1, dtype=int),
                np.zeros((0, 2), dtype=int), 1.0)


def test_edge_counts_small_meshes():
    e = classify_edges(square_mesh())
    assert len(e.interior) == 1 and len(e.boundary) == 4
    assert e.interior.tolist() == [[1, 2]]
    e1 = classify_edges(single([[0, 0], [1, 0], [0, 1]]))
    assert len(e1.interior) == 0 and len(e1.boundary) == 3


def test_quality_reference_triangles():
    equi = single([[0, 0], [1, 0], [0.5, np.sqrt(3) / 2]])
    q = mesh_quality(equi)
    assert q.min_angle == pytest.approx(60.0, abs=1e-9)
    assert q.max_aspect == pytest.approx(1.0, abs=1e-12)
    right = mesh_quality(single([[0, 0], [1, 0], [0, 1]]))
    assert right.min_angle == pytest.approx(45.0, abs=1e-9)


def test_generated_mesh_invariants(mesh05, cell):
    audit_mesh(mesh05, min_angle=20.0, holes=1)
    assert np.all(mesh05.areas() > 0)
    ne = len(mesh05.edges.interior) + len(mesh05.edges.boundary)
    assert mesh05.n_nodes - ne + mesh05.n_triangles == 0
    # periodic pairs share their height
    l, r = mesh05.pairs.T
    assert np.all(mesh05.nodes[l, 0] == 0) and np.all(mesh05.nodes[r, 0] == cell.lattice)
    assert np.array_equal(mesh05.nodes[l, 1], mesh05.nodes[r, 1])
    for flag, level in ((GAMMA1, cell.h1), (GAMMA2, cell.h2),
                        (GAMMA1_PML, cell.top), (GAMMA2_PML, cell.bottom)):
        assert np.allclose(mesh05.nodes[mesh05.marked(flag), 1], level, atol=1e-12)
    cav = mesh05.nodes[mesh05.marked(GAMMA_C)]
    assert np.allclose(np.hypot(cav[:, 0] - 0.5, cav[:, 1]), 0.3, atol=1e-12)
    y = mesh05.nodes[mesh05.triangles][:, :, 1].mean(axis=1)
    assert np.all(y[mesh05.regions == REGION_UPPER] > cell.h1)
    assert np.all(y[mesh05.regions == REGION_LOWER] < cell.h2)
    strip = y[mesh05.regions == REGION_STRIP]
    assert np.all((strip > cell.h2) & (strip < cell.h1))


def test_node_count_regression(mesh05):
    assert mesh05.n_nodes == pytest.approx(2994, rel=0.02)


def test_fine_mesh_node_count(cell, circle):
    mesh = generate_mesh(cell, circle, 0.02)
    assert abs(mesh.n_nodes - 16090) <= 0.3 * 16090
    assert mesh_quality(mesh).min_angle >= 20.0


def test_kite_mesh(cell):
    mesh = generate_mesh(cell, CavityShape("kite", center=(0.5, 0.0)), 0.05)
    audit_mesh(mesh, min_angle=20.0, holes=1)
    assert mesh.has_cavity


def test_polygon_cavity(cell):
    square = CavityShape("polygon", vertices=((0.3, -0.2), (0.7, -0.2), (0.7, 0.2), (0.3, 0.2)))
    mesh = generate_mesh(cell, square, 0.1)
    audit_mesh(mesh, holes=1)


def test_refinement_increases_nodes(cell, circle, coarse_mesh, mesh05):
    assert coarse_mesh.n_nodes < mesh05.n_nodes
    assert mesh_quality(mesh05).h_max < mesh_quality(coarse_mesh).h_max


def test_determinism(cell, circle, coarse_mesh):
    again = generate_mesh(cell, circle, 0.1)
    assert np.array_equal(again.nodes, coarse_mesh.nodes)
    assert np.array_equal(again.triangles, coarse_mesh.triangles)


def test_strip_identical_across_layer_thickness(circle):
    a = generate_mesh(CellGeometry(1.0, 0.5, -0.5, 0.5, 0.5), circle, 0.1)
    b = generate_mesh(CellGeometry(1.0, 0.5, -0.5, 2.5, 2.5), circle, 0.1)
    na = np.unique(a.triangles[a.regions == REGION_STRIP]).max() + 1
    assert np.array_equal(a.nodes[:na], b.nodes[:na])


def test_round_trip(coarse_mesh):
    text = export_mesh(coarse_mesh)
    back = import_mesh(text)
    assert np.array_equal(back.nodes, coarse_mesh.nodes)
    assert np.array_equal(back.triangles, coarse_mesh.triangles)
    assert np.array_equal(back.markers, coarse_mesh.markers)
    assert np.array_equal(back.regions, coarse_mesh.regions)
    assert np.array_equal(back.pairs, coarse_mesh.pairs)
    assert export_mesh(back) == text


def test_import_rejects_dangling_index(coarse_mesh):
    lines = export_mesh(coarse_mesh).splitlines()
    first_tri = 1 + coarse_mesh.n_nodes
    lines[first_tri] = f"0 1 {coarse_mesh.n_nodes + 5} 0"
    with pytest.raises(MeshParseError, match=f"line {first_tri + 1}"):
        import_mesh("\n".join(lines))


def test_import_rejects_truncated_file(coarse_mesh):
    text = "\n".join(export_mesh(coarse_mesh).splitlines()[:10])
    with pytest.raises(MeshParseError, match="unexpected end"):
        import_mesh(text)


def test_audit_rejects_mismatched_pairs(coarse_mesh):
    bad = Mesh(coarse_mesh.nodes, coarse_mesh.triangles, coarse_mesh.markers,
               coarse_mesh.regions, coarse_mesh.pairs[:, ::-1].copy(), coarse_mesh.lattice)
    with pytest.raises(MeshInvariantError, match="periodic"):
        audit_mesh(bad)


def test_audit_rejects_flipped_triangle(coarse_mesh):
    tris = coarse_mesh.triangles.copy()
    tris[0] = tris[0, [0, 2, 1]]
    bad = Mesh(coarse_mesh.nodes, tris, coarse_mesh.markers, coarse_mesh.regions,
               coarse_mesh.pairs, coarse_mesh.lattice)
    with pytest.raises(MeshInvariantError, match="non-positive area"):
        audit_mesh(bad)


def test_touching_cavity_rejected(cell):
    with pytest.raises(GeometryError):
        generate_mesh(cell, CavityShape("circle", radius=0.5, center=(0.5, 0.0)), 0.05)
    with pytest.raises(GeometryError):
        generate_mesh(cell, CavityShape("circle", radius=0.3, center=(0.5, 0.0)), -0.1)
    with pytest.raises(GeometryError):
        generate_mesh(cell, CavityShape("blob"), 0.1)


def test_empty_strip_mesh(empty_strip):
    audit_mesh(empty_strip, holes=0)
    assert not empty_strip.has_cavity
