"""Triangulations of the periodic cell with a cavity hole and two absorbing layers.

The physical strip ``[0, L] x [h2, h1]`` minus the cavity is meshed by
force-equilibrium smoothing on a signed distance field (DistMesh style) with
anchor nodes fixed on the four sides and on the cavity polygon.  The layers
above and below are row-structured and share the interface nodes, so the
lines ``x2 = h1`` and ``x2 = h2`` are conforming and the left/right boundary
discretisations are exact mirror copies.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np
from matplotlib.path import Path
from scipy.spatial import Delaunay, cKDTree

INTERIOR = 0
GAMMA_C = 1
GAMMA_L = 2
GAMMA_R = 4
GAMMA1_PML = 8
GAMMA2_PML = 16
GAMMA1 = 32
GAMMA2 = 64

REGION_STRIP, REGION_UPPER, REGION_LOWER = 0, 1, 2


class MeshError(ValueError):
    pass


class GeometryError(MeshError):
    pass


class MeshConvergenceError(MeshError):
    pass


class MeshParseError(MeshError):
    pass


class MeshInvariantError(MeshError):
    pass


@dataclass(frozen=True)
class CellGeometry:
    lattice: float = 1.0
    h1: float = 0.5
    h2: float = -0.5
    dh1: float = 2.5
    dh2: float = 2.5

    @property
    def top(self) -> float:
        return self.h1 + self.dh1

    @property
    def bottom(self) -> float:
        return self.h2 - self.dh2


@dataclass(frozen=True)
class CavityShape:
    kind: str = "circle"
    radius: float = 0.3
    center: tuple = (0.5, 0.0)
    vertices: tuple = ()

    def polygon(self, h: float) -> np.ndarray:
        """Counter-clockwise vertex loop with chords no longer than ``h/2``."""
        chord = 0.5 * h
        cx, cy = self.center
        if self.kind == "circle":
            if self.radius <= 0:
                raise GeometryError("circle radius must be positive")
            n = max(8, math.ceil(math.pi / math.asin(min(1.0, chord / (2 * self.radius)))))
            t = 2 * np.pi * np.arange(n) / n
            return np.column_stack([cx + self.radius * np.cos(t), cy + self.radius * np.sin(t)])
        if self.kind == "kite":
            return _sample_curve(self._kite, chord)
        if self.kind == "polygon":
            verts = np.asarray(self.vertices, dtype=float)
            if verts.ndim != 2 or len(verts) < 3:
                raise GeometryError("polygon cavity needs at least three vertices")
            if _signed_area(verts) < 0:
                verts = verts[::-1]
            out = []
            for a, b in zip(verts, np.roll(verts, -1, axis=0)):
                k = max(1, math.ceil(np.linalg.norm(b - a) / chord))
                s = np.arange(k)[:, None] / k
                out.append(a + s * (b - a))
            return np.vstack(out)
        raise GeometryError(f"unknown cavity kind {self.kind!r}")

    def _kite(self, t):
        cx, cy = self.center
        pts = np.column_stack([cx + 0.2 * (np.cos(t) + 0.07 * np.cos(2 * t) - 0.1),
                               cy + 0.06 * np.sin(t)])
        d1 = np.column_stack([-0.2 * (np.sin(t) + 0.14 * np.sin(2 * t)), 0.06 * np.cos(t)])
        d2 = np.column_stack([-0.2 * (np.cos(t) + 0.28 * np.cos(2 * t)), -0.06 * np.sin(t)])
        return pts, d1, d2


def _sample_curve(curve, chord, dense=20000):
    """Arclength sampling with spacing ``min(chord, radius_of_curvature / 2)``."""
    t = 2 * np.pi * np.arange(dense + 1) / dense
    _, d1, d2 = curve(t)
    speed = np.hypot(d1[:, 0], d1[:, 1])
    curv = np.abs(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]) / speed ** 3
    spacing = np.minimum(chord, 0.5 / np.maximum(curv, 1e-12))
    density = speed / spacing
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (density[1:] + density[:-1]) * np.diff(t))])
    n = max(8, math.ceil(cum[-1]))
    ts = np.interp(np.arange(n) * cum[-1] / n, cum, t)
    return curve(ts)[0]


def _signed_area(loop):
    x, y = loop[:, 0], loop[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _segments_intersect(loop):
    n = len(loop)
    a = loop
    b = np.roll(loop, -1, axis=0)
    for i in range(n):
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue
            d1 = _orient(a[i], b[i], a[j])
            d2 = _orient(a[i], b[i], b[j])
            d3 = _orient(a[j], b[j], a[i])
            d4 = _orient(a[j], b[j], b[i])
            if d1 * d2 < 0 and d3 * d4 < 0:
                return True
    return False


def _orient(p, q, r):
    return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])


@dataclass
class EdgeSets:
    interior: np.ndarray        # (Ei, 2) node pairs, sorted
    interior_tris: np.ndarray   # (Ei, 2) adjacent triangles, lower index first
    boundary: np.ndarray        # (Eb, 2)
    boundary_tris: np.ndarray   # (Eb,)


@dataclass
class Mesh:
    nodes: np.ndarray
    triangles: np.ndarray
    markers: np.ndarray
    regions: np.ndarray
    pairs: np.ndarray
    lattice: float
    _edges: EdgeSets | None = field(default=None, repr=False)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def edges(self) -> EdgeSets:
        if self._edges is None:
            self._edges = classify_edges(self)
        return self._edges

    def marked(self, flag: int) -> np.ndarray:
        return (self.markers & flag) != 0

    def areas(self) -> np.ndarray:
        return triangle_areas(self.nodes, self.triangles)

    @property
    def has_cavity(self) -> bool:
        return bool(np.any(self.marked(GAMMA_C)))


def triangle_areas(nodes, tris):
    p = nodes[tris]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def classify_edges(mesh: Mesh) -> EdgeSets:
    tris = np.asarray(mesh.triangles)
    all_edges = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    owner = np.tile(np.arange(len(tris)), 3)
    all_edges = np.sort(all_edges, axis=1)
    uniq, inverse, counts = np.unique(all_edges, axis=0, return_inverse=True,
                                      return_counts=True)
    inverse = inverse.ravel()
    if np.any(counts > 2):
        bad = uniq[counts > 2]
        raise MeshInvariantError(f"non-manifold edges: {bad[:5].tolist()}")
    order = np.lexsort((owner, inverse))
    inv_sorted = inverse[order]
    own_sorted = owner[order]
    starts = np.searchsorted(inv_sorted, np.arange(len(uniq)))
    first = own_sorted[starts]
    interior = counts == 2
    second = own_sorted[np.minimum(starts + 1, len(own_sorted) - 1)]
    return EdgeSets(
        interior=uniq[interior],
        interior_tris=np.column_stack([first[interior], second[interior]]),
        boundary=uniq[~interior],
        boundary_tris=first[~interior],
    )


@dataclass(frozen=True)
class MeshQuality:
    min_angle: float
    max_aspect: float
    h_min: float
    h_max: float


def mesh_quality(mesh: Mesh) -> MeshQuality:
    p = mesh.nodes[mesh.triangles]
    a = np.linalg.norm(p[:, 1] - p[:, 2], axis=1)
    b = np.linalg.norm(p[:, 2] - p[:, 0], axis=1)
    c = np.linalg.norm(p[:, 0] - p[:, 1], axis=1)
    area = np.abs(triangle_areas(mesh.nodes, mesh.triangles))
    if np.any(area <= 0):
        raise MeshInvariantError("degenerate triangle")
    ang = []
    for opp, s1, s2 in ((a, b, c), (b, c, a), (c, a, b)):
        cosv = np.clip((s1 ** 2 + s2 ** 2 - opp ** 2) / (2 * s1 * s2), -1.0, 1.0)
        ang.append(np.degrees(np.arccos(cosv)))
    lengths = np.stack([a, b, c], axis=1)
    aspect = lengths.max(axis=1) * lengths.sum(axis=1) / (4 * math.sqrt(3) * area)
    return MeshQuality(float(np.min(ang)), float(aspect.max()),
                       float(lengths.min()), float(lengths.max()))


# ---------------------------------------------------------------- distances

class _PolygonDistance:
    """Signed distance to a closed polygon (negative inside)."""

    def __init__(self, loop):
        self.loop = np.asarray(loop, dtype=float)
        self.path = Path(np.vstack([self.loop, self.loop[:1]]), closed=True)
        self.tree = cKDTree(self.loop)
        self.a = self.loop
        self.b = np.roll(self.loop, -1, axis=0)
        self.max_gap = float(np.linalg.norm(self.b - self.a, axis=1).max())

    def unsigned(self, p):
        # nearest-vertex distance, refined to segments only near the loop
        dv, idx = self.tree.query(p)
        out = dv.copy()
        near = np.flatnonzero(dv < 2.0 * self.max_gap)
        if near.size:
            n = len(self.loop)
            i = idx[near]
            cand = np.column_stack([i, (i - 1) % n, (i + 1) % n, (i - 2) % n])
            a = self.a[cand]
            ab = self.b[cand] - a
            ap = p[near][:, None, :] - a
            t = np.clip(np.sum(ap * ab, axis=2) / np.sum(ab * ab, axis=2), 0.0, 1.0)
            out[near] = np.linalg.norm(ap - t[..., None] * ab, axis=2).min(axis=1)
        return out

    def __call__(self, p):
        d = self.unsigned(p)
        inside = self.path.contains_points(p)
        return np.where(inside, -d, d)


def _rect_distance(p, x0, x1, y0, y1):
    return -np.minimum(np.minimum(p[:, 0] - x0, x1 - p[:, 0]),
                       np.minimum(p[:, 1] - y0, y1 - p[:, 1]))


# ---------------------------------------------------------------- generation

def _strip_rows(lattice, h):
    nx = max(2, math.ceil(lattice / h - 1e-9))
    return np.linspace(0.0, lattice, nx + 1)


def _side_nodes(y0, y1, h):
    ny = max(1, math.ceil((y1 - y0) / h - 1e-9))
    return np.linspace(y0, y1, ny + 1)


def _layer_rows(y0, depth, h, upward):
    dy = h * math.sqrt(3) / 2
    ny = max(1, math.ceil(depth / dy - 1e-9))
    ys = np.linspace(0.0, depth, ny + 1)
    return y0 + ys if upward else y0 - ys


def _grid_triangles(n_cols, n_rows, index):
    """Right-triangle split of a structured (rows x cols) node array."""
    tris = []
    for j in range(n_rows - 1):
        for i in range(n_cols - 1):
            a, b = index[j, i], index[j, i + 1]
            c, d = index[j + 1, i], index[j + 1, i + 1]
            if (i + j) % 2 == 0:
                tris += [(a, b, d), (a, d, c)]
            else:
                tris += [(a, b, c), (b, d, c)]
    return np.array(tris, dtype=np.int64).reshape(-1, 3)


def _distmesh_strip(fixed, lattice, h1, h2, cavity_loop, h, seed, max_iter=400):
    poly = _PolygonDistance(cavity_loop)

    def sdf(p):
        return np.maximum(_rect_distance(p, 0.0, lattice, h2, h1), -poly(p))

    gaps = np.linalg.norm(np.roll(cavity_loop, -1, axis=0) - cavity_loop, axis=1)
    local = 0.5 * (gaps + np.roll(gaps, 1)) / h

    def size(p):
        dv, idx = poly.tree.query(p)
        return np.minimum(1.0, local[idx] + 0.3 * dv / h)

    geps = 1e-3 * h
    # initial hexagonal lattice at the finest spacing, thinned by the size field
    h0 = min(0.5, local.min()) * h
    yy = np.arange(h2, h1 + h0, h0 * math.sqrt(3) / 2)
    rows = []
    for k, y in enumerate(yy):
        x = np.arange(0.0, lattice + h0, h0) + (0.5 * h0 if k % 2 else 0.0)
        rows.append(np.column_stack([x, np.full_like(x, y)]))
    p = np.vstack(rows)
    p = p[sdf(p) < -0.3 * h0]
    rng = np.random.default_rng(seed)
    r0 = 1.0 / size(p) ** 2
    p = p[rng.random(len(p)) < r0 / r0.max()]
    tree = cKDTree(fixed)
    dist, _ = tree.query(p)
    p = p[dist > 0.4 * h * size(p)]
    nfix = len(fixed)
    p = np.vstack([fixed, p])

    deltat, fscale, dptol, ttol = 0.2, 1.2, 1e-3, 0.1
    pold = np.full_like(p, np.inf)
    for it in range(max_iter):
        if np.max(np.linalg.norm(p - pold, axis=1)) / h > ttol:
            pold = p.copy()
            tri = Delaunay(p).simplices
            centroid = p[tri].mean(axis=1)
            tri = tri[sdf(centroid) < -geps]
            bars = np.sort(np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]]), axis=1)
            bars = np.unique(bars, axis=0)
        vec = p[bars[:, 0]] - p[bars[:, 1]]
        length = np.linalg.norm(vec, axis=1)
        hbars = size(0.5 * (p[bars[:, 0]] + p[bars[:, 1]]))
        target = hbars * fscale * math.sqrt(np.sum(length ** 2) / np.sum(hbars ** 2))
        force = np.maximum(target - length, 0.0)
        fvec = (force / length)[:, None] * vec
        ftot = np.zeros_like(p)
        np.add.at(ftot, bars[:, 0], fvec)
        np.add.at(ftot, bars[:, 1], -fvec)
        ftot[:nfix] = 0.0
        p = p + deltat * ftot
        # keep free nodes a fraction of the local size away from the boundary
        free = np.arange(nfix, len(p))
        margin = 0.35 * h * size(p[free])
        d = sdf(p[free])
        out = d > -margin
        if np.any(out):
            q = p[free][out]
            eps = 1e-7 * h
            dx = (sdf(q + [eps, 0.0]) - d[out]) / eps
            dy = (sdf(q + [0.0, eps]) - d[out]) / eps
            grad = np.column_stack([dx, dy])
            gn = np.maximum(np.sum(grad ** 2, axis=1), 1e-12)
            shift = (d[out] + margin[out]) / gn
            p[free[out]] = q - shift[:, None] * grad
        moved = deltat * np.linalg.norm(ftot[nfix:], axis=1)
        if moved.size and np.max(moved) / h < dptol:
            break

    tri = Delaunay(p).simplices
    centroid = p[tri].mean(axis=1)
    tri = tri[sdf(centroid) < -geps]
    return p, tri, nfix


def generate_mesh(cell: CellGeometry, cavity: CavityShape, h: float, seed: int = 0,
                  min_angle: float = 20.0) -> Mesh:
    """Quasi-uniform mesh of ``[0, L] x [h2 - dh2, h1 + dh1]`` minus the cavity."""
    if h <= 0:
        raise GeometryError("mesh size must be positive")
    if cavity is None:
        raise GeometryError("a cavity is required; use strip_mesh for the empty cell")
    loop = cavity.polygon(h)
    if len(loop) < 3:
        raise GeometryError("cavity polygon is empty")
    if _segments_intersect(loop):
        raise GeometryError("cavity boundary intersects itself")
    lat, h1, h2 = cell.lattice, cell.h1, cell.h2
    clearance = min(loop[:, 0].min(), lat - loop[:, 0].max(),
                    loop[:, 1].min() - h2, h1 - loop[:, 1].max())
    if clearance <= 0.25 * h:
        raise GeometryError("cavity touches or crosses the strip boundary")

    xs = _strip_rows(lat, h)
    ys = _side_nodes(h2, h1, h)
    bottom = np.column_stack([xs, np.full_like(xs, h2)])
    top = np.column_stack([xs, np.full_like(xs, h1)])
    left = np.column_stack([np.zeros(len(ys) - 2), ys[1:-1]])
    right = np.column_stack([np.full(len(ys) - 2, lat), ys[1:-1]])
    fixed = np.vstack([bottom, top, left, right, loop])
    pts, tris, _ = _distmesh_strip(fixed, lat, h1, h2, loop, h, seed)

    nx = len(xs)
    n_bottom = np.arange(nx)
    n_top = nx + np.arange(nx)
    n_cav = np.arange(len(fixed) - len(loop), len(fixed))

    # upper and lower structured layers reuse the interface nodes
    nodes = [pts]
    triangles = [tris]
    regions = [np.full(len(tris), REGION_STRIP)]
    count = len(pts)
    layer_ids = {}
    for region, base, y0, depth, upward in ((REGION_UPPER, n_top, h1, cell.dh1, True),
                                            (REGION_LOWER, n_bottom, h2, cell.dh2, False)):
        yrows = _layer_rows(y0, depth, h, upward)
        index = np.empty((len(yrows), nx), dtype=np.int64)
        index[0] = base
        new = []
        for j, y in enumerate(yrows[1:], start=1):
            index[j] = count + np.arange(nx)
            count += nx
            new.append(np.column_stack([xs, np.full(nx, y)]))
        nodes.append(np.vstack(new))
        t = _grid_triangles(nx, len(yrows), index)
        triangles.append(t)
        regions.append(np.full(len(t), region))
        layer_ids[region] = index

    nodes = np.vstack(nodes)
    tris = np.vstack(triangles)
    regions = np.concatenate(regions)
    tris = _orient_ccw(nodes, tris)

    markers = np.zeros(len(nodes), dtype=np.int64)
    markers[n_cav] |= GAMMA_C
    x1, x2 = nodes[:, 0], nodes[:, 1]
    markers[x1 == 0.0] |= GAMMA_L
    markers[x1 == lat] |= GAMMA_R
    markers[layer_ids[REGION_UPPER][-1]] |= GAMMA1_PML
    markers[layer_ids[REGION_LOWER][-1]] |= GAMMA2_PML
    markers[n_top] |= GAMMA1
    markers[n_bottom] |= GAMMA2
    mesh = Mesh(nodes, tris, markers, regions, _pair_sides(nodes, markers), lat)
    audit_mesh(mesh, min_angle=None, holes=1)
    q = mesh_quality(mesh)
    if q.min_angle < min_angle:
        raise MeshConvergenceError(
            f"smoothing reached min angle {q.min_angle:.2f} deg < floor {min_angle} deg")
    return mesh


def strip_mesh(cell: CellGeometry, h: float) -> Mesh:
    """Structured mesh of the empty cell (no cavity), for verification runs."""
    xs = _strip_rows(cell.lattice, h)
    nx = len(xs)
    ys_mid = _side_nodes(cell.h2, cell.h1, h)
    ys_up = _layer_rows(cell.h1, cell.dh1, h, True)[1:]
    ys_lo = _layer_rows(cell.h2, cell.dh2, h, False)[1:][::-1]
    ys = np.concatenate([ys_lo, ys_mid, ys_up])
    X, Y = np.meshgrid(xs, ys)
    nodes = np.column_stack([X.ravel(), Y.ravel()])
    index = np.arange(len(nodes)).reshape(len(ys), nx)
    tris = _orient_ccw(nodes, _grid_triangles(nx, len(ys), index))
    centroid_y = nodes[tris][:, :, 1].mean(axis=1)
    regions = np.where(centroid_y > cell.h1, REGION_UPPER,
                       np.where(centroid_y < cell.h2, REGION_LOWER, REGION_STRIP))
    markers = np.zeros(len(nodes), dtype=np.int64)
    x1, x2 = nodes[:, 0], nodes[:, 1]
    markers[x1 == 0.0] |= GAMMA_L
    markers[x1 == cell.lattice] |= GAMMA_R
    markers[index[-1]] |= GAMMA1_PML
    markers[index[0]] |= GAMMA2_PML
    markers[x2 == cell.h1] |= GAMMA1
    markers[x2 == cell.h2] |= GAMMA2
    mesh = Mesh(nodes, tris, markers, regions, _pair_sides(nodes, markers), cell.lattice)
    audit_mesh(mesh, holes=0)
    return mesh


def _orient_ccw(nodes, tris):
    tris = np.array(tris, dtype=np.int64)
    flip = triangle_areas(nodes, tris) < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]
    return tris


def _pair_sides(nodes, markers):
    left = np.flatnonzero(markers & GAMMA_L)
    right = np.flatnonzero(markers & GAMMA_R)
    left = left[np.argsort(nodes[left, 1], kind="stable")]
    right = right[np.argsort(nodes[right, 1], kind="stable")]
    if len(left) != len(right):
        raise MeshInvariantError("left and right boundaries carry different node counts")
    return np.column_stack([left, right])


def audit_mesh(mesh: Mesh, min_angle: float | None = None, holes: int | None = None):
    """Raise :class:`MeshInvariantError` listing every violated invariant."""
    problems = []
    nodes, tris = mesh.nodes, mesh.triangles
    if tris.size and (tris.min() < 0 or tris.max() >= len(nodes)):
        problems.append("triangle index out of range")
        raise MeshInvariantError("; ".join(problems))
    area = triangle_areas(nodes, tris)
    if np.any(area <= 0):
        problems.append(f"non-positive area in triangles {np.flatnonzero(area <= 0)[:10].tolist()}")
    try:
        edges = classify_edges(mesh)
        mesh._edges = edges
    except MeshInvariantError as exc:
        problems.append(str(exc))
        edges = None
    lat = mesh.lattice
    pairs = np.asarray(mesh.pairs, dtype=np.int64).reshape(-1, 2)
    if pairs.size:
        l, r = pairs[:, 0], pairs[:, 1]
        bad = np.flatnonzero((nodes[l, 0] != 0.0) | (nodes[r, 0] != lat)
                             | (np.abs(nodes[l, 1] - nodes[r, 1]) > 1e-12))
        if bad.size:
            problems.append(f"mismatched periodic pairs {pairs[bad][:10].tolist()}")
    on_left = np.flatnonzero(nodes[:, 0] == 0.0)
    on_right = np.flatnonzero(nodes[:, 0] == lat)
    if (sorted(pairs[:, 0].tolist()) != on_left.tolist()
            or sorted(pairs[:, 1].tolist()) != on_right.tolist()):
        missing = sorted(set(on_left.tolist()) ^ set(pairs[:, 0].tolist())
                         | set(on_right.tolist()) ^ set(pairs[:, 1].tolist()))
        problems.append(f"periodic pairing is not a bijection; offending nodes {missing[:10]}")
    if edges is not None:
        if holes is None:
            holes = 1 if mesh.has_cavity else 0
        euler = len(nodes) - (len(edges.interior) + len(edges.boundary)) + len(tris)
        if euler != 1 - holes:
            problems.append(f"Euler characteristic {euler} inconsistent with {holes} hole(s)")
    for flag, name in ((GAMMA1, "h1"), (GAMMA2, "h2")):
        ids = np.flatnonzero(mesh.markers & flag)
        if ids.size:
            level = nodes[ids, 1]
            if np.ptp(level) > 1e-12:
                problems.append(f"interface {name} nodes are not level")
                continue
            y = nodes[tris][:, :, 1]
            lo, hi = y.min(axis=1), y.max(axis=1)
            straddle = np.flatnonzero((lo < level[0] - 1e-12) & (hi > level[0] + 1e-12))
            if straddle.size:
                problems.append(f"triangles {straddle[:10].tolist()} straddle x2={level[0]:g}")
    if min_angle is not None and not problems:
        q = mesh_quality(mesh)
        if q.min_angle < min_angle:
            problems.append(f"min angle {q.min_angle:.2f} below floor {min_angle}")
    if problems:
        raise MeshInvariantError("; ".join(problems))


# ---------------------------------------------------------------- text format

def export_mesh(mesh: Mesh) -> str:
    out = io.StringIO()
    out.write(f"nodes {mesh.n_nodes} triangles {mesh.n_triangles}\n")
    for (x, y), m in zip(mesh.nodes, mesh.markers):
        out.write(f"{float(x)!r} {float(y)!r} {int(m)}\n")
    for (i, j, k), r in zip(mesh.triangles, mesh.regions):
        out.write(f"{i} {j} {k} {int(r)}\n")
    out.write(f"pairs {len(mesh.pairs)}\n")
    for l, r in mesh.pairs:
        out.write(f"{l} {r}\n")
    return out.getvalue()


def import_mesh(text: str, min_angle: float | None = None) -> Mesh:
    lines = text.splitlines()
    pos = 0

    def fields(expected, what):
        nonlocal pos
        while pos < len(lines) and not lines[pos].strip():
            pos += 1
        if pos >= len(lines):
            raise MeshParseError(f"line {pos + 1}: unexpected end of file while reading {what}")
        parts = lines[pos].split()
        pos += 1
        if len(parts) != expected:
            raise MeshParseError(f"line {pos}: expected {expected} fields for {what}, "
                                 f"got {len(parts)}")
        return parts

    head = fields(4, "header")
    if head[0] != "nodes" or head[2] != "triangles":
        raise MeshParseError("line 1: header must read 'nodes <V> triangles <T>'")
    try:
        nv, nt = int(head[1]), int(head[3])
    except ValueError:
        raise MeshParseError("line 1: node/triangle counts must be integers") from None
    nodes = np.empty((nv, 2))
    markers = np.empty(nv, dtype=np.int64)
    for i in range(nv):
        parts = fields(3, "node")
        try:
            nodes[i] = float(parts[0]), float(parts[1])
            markers[i] = int(parts[2])
        except ValueError:
            raise MeshParseError(f"line {pos}: malformed node record") from None
    tris = np.empty((nt, 3), dtype=np.int64)
    regions = np.empty(nt, dtype=np.int64)
    for t in range(nt):
        parts = fields(4, "triangle")
        try:
            ids = [int(v) for v in parts]
        except ValueError:
            raise MeshParseError(f"line {pos}: malformed triangle record") from None
        for v in ids[:3]:
            if not 0 <= v < nv:
                raise MeshParseError(f"line {pos}: triangle references node index {v} "
                                     f"outside [0, {nv})")
        tris[t] = ids[:3]
        regions[t] = ids[3]
    head = fields(2, "pairs header")
    if head[0] != "pairs":
        raise MeshParseError(f"line {pos}: expected 'pairs <P>'")
    npairs = int(head[1])
    pairs = np.empty((npairs, 2), dtype=np.int64)
    for k in range(npairs):
        parts = fields(2, "pair")
        a, b = int(parts[0]), int(parts[1])
        for v in (a, b):
            if not 0 <= v < nv:
                raise MeshParseError(f"line {pos}: pair references node index {v} "
                                     f"outside [0, {nv})")
        pairs[k] = a, b
    lattice = float(nodes[:, 0].max()) if nv else 0.0
    mesh = Mesh(nodes, tris, markers, regions, pairs, lattice)
    audit_mesh(mesh, min_angle=min_angle)
    return mesh
