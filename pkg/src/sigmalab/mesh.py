"""Structured triangulations of planar Jordan domains.

Disk and annulus meshes are built from concentric polar rings stitched by an
angular merge, rectangles from split squares. Generation is deterministic:
the same parameters always produce the same mesh, with no external mesher
involved. Meshes are immutable after construction and safe to share between
workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from .errors import MeshError, ResourceLimitError

Point2 = tuple[float, float]

#: default cap on generated vertices; protects the CLI from accidental h=1e-6
DEFAULT_VERTEX_CAP = 1_000_000

# triangles thinner than this fraction of h^2 are rejected: downstream
# gradient formulas divide by the area
DEGENERATE_AREA_FACTOR = 1e-14


@dataclass(frozen=True)
class CircleLoop:
    """Analytic geometry of a circular boundary loop, used for midpoint
    projection under refinement."""

    cx: float
    cy: float
    radius: float

    def project(self, p: np.ndarray) -> np.ndarray:
        c = np.array([self.cx, self.cy])
        v = p - c
        n = math.hypot(v[0], v[1])
        if n == 0.0:
            raise MeshError("cannot project the circle center onto the circle")
        return c + v * (self.radius / n)


class Mesh:
    """Conforming triangulation with ordered boundary loops.

    Parameters
    ----------
    vertices : (nv, 2) float array
    triangles : (nt, 3) int array
        Vertex index triples, counterclockwise.
    h : float
        Nominal mesh size.
    loop_geometry : sequence of CircleLoop or None, optional
        Analytic boundary description per loop, aligned with ``loops``.
        Loops without analytic geometry get None.

    Boundary loops are derived from edge incidence: an edge lies on the
    boundary iff it belongs to exactly one triangle. The outer loop comes
    first and runs counterclockwise; hole loops run clockwise.
    """

    def __init__(self, vertices, triangles, h, loop_geometry=None):
        vertices = np.asarray(vertices, dtype=float)
        triangles = np.asarray(triangles, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] != 2:
            raise MeshError("vertices must be an (nv, 2) array")
        if triangles.ndim != 2 or triangles.shape[1] != 3:
            raise MeshError("triangles must be an (nt, 3) array")
        if len(triangles) == 0:
            raise MeshError("mesh has no triangles")
        if not np.isfinite(vertices).all():
            raise MeshError("non-finite vertex coordinates")
        if triangles.min() < 0 or triangles.max() >= len(vertices):
            raise MeshError("triangle vertex index out of range")
        if not (h > 0 and math.isfinite(h)):
            raise MeshError("mesh size h must be positive and finite")

        self.vertices = vertices
        self.triangles = triangles
        self.h = float(h)

        areas = _signed_areas(vertices, triangles)
        if areas.min() <= DEGENERATE_AREA_FACTOR * h * h:
            t = int(np.argmin(areas))
            raise MeshError(
                f"triangle {t} is degenerate or inverted (signed area {areas[t]:.3e})"
            )
        self._areas = areas

        self.loops = _extract_loops(vertices, triangles)
        if loop_geometry is None:
            loop_geometry = [None] * len(self.loops)
        if len(loop_geometry) != len(self.loops):
            raise MeshError(
                f"loop_geometry has {len(loop_geometry)} entries for "
                f"{len(self.loops)} boundary loops"
            )
        self.loop_geometry = list(loop_geometry)

        self.vertices.setflags(write=False)
        self.triangles.setflags(write=False)

    # -- basic queries ----------------------------------------------------

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_triangles(self) -> int:
        return len(self.triangles)

    @property
    def areas(self) -> np.ndarray:
        """Positive triangle areas."""
        return self._areas

    @cached_property
    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    @cached_property
    def basis_gradients(self) -> np.ndarray:
        """Gradients of the P1 nodal basis, shape (nt, 3, 2)."""
        p = self.vertices[self.triangles]
        x, y = p[..., 0], p[..., 1]
        G = np.empty((self.num_triangles, 3, 2))
        for i in range(3):
            j, k = (i + 1) % 3, (i + 2) % 3
            G[:, i, 0] = (y[:, j] - y[:, k]) / (2.0 * self._areas)
            G[:, i, 1] = (x[:, k] - x[:, j]) / (2.0 * self._areas)
        return G

    @cached_property
    def boundary_vertices(self) -> np.ndarray:
        return np.unique(np.concatenate(self.loops))

    @cached_property
    def interior_vertices(self) -> np.ndarray:
        mask = np.ones(self.num_vertices, dtype=bool)
        mask[self.boundary_vertices] = False
        return np.where(mask)[0]

    @cached_property
    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        """(unique undirected edges (ne, 2), incidence count per edge)."""
        t = self.triangles
        e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        e.sort(axis=1)
        uniq, counts = np.unique(e, axis=0, return_counts=True)
        return uniq, counts

    @cached_property
    def max_edge_length(self) -> float:
        e, _ = self.edges
        d = self.vertices[e[:, 0]] - self.vertices[e[:, 1]]
        return float(np.hypot(d[:, 0], d[:, 1]).max())

    # -- point location ---------------------------------------------------

    @cached_property
    def _vertex_tree(self) -> cKDTree:
        return cKDTree(self.vertices)

    @cached_property
    def _vertex_to_triangles(self) -> list[np.ndarray]:
        lists: list[list[int]] = [[] for _ in range(self.num_vertices)]
        for t, (a, b, c) in enumerate(self.triangles):
            lists[a].append(t)
            lists[b].append(t)
            lists[c].append(t)
        return [np.array(l, dtype=np.int64) for l in lists]

    def locate(self, points) -> tuple[np.ndarray, np.ndarray]:
        """Find containing triangles for an (n, 2) array of points.

        Returns (tri_index, barycentric) where tri_index is -1 for points
        outside the mesh. Candidate triangles come from all vertices within
        one maximal edge length, which always covers the containing triangle.
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        n = len(points)
        tri_idx = np.full(n, -1, dtype=np.int64)
        bary = np.zeros((n, 3))
        radius = self.max_edge_length * (1.0 + 1e-9) + 1e-300
        neighborhoods = self._vertex_tree.query_ball_point(points, r=radius)
        v2t = self._vertex_to_triangles
        verts, tris = self.vertices, self.triangles
        for i, vs in enumerate(neighborhoods):
            if not vs:
                continue
            cand = np.unique(np.concatenate([v2t[v] for v in vs]))
            p = verts[tris[cand]]
            M = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=-1)
            rhs = points[i] - p[:, 0]
            det = M[:, 0, 0] * M[:, 1, 1] - M[:, 0, 1] * M[:, 1, 0]
            l1 = (M[:, 1, 1] * rhs[:, 0] - M[:, 0, 1] * rhs[:, 1]) / det
            l2 = (-M[:, 1, 0] * rhs[:, 0] + M[:, 0, 0] * rhs[:, 1]) / det
            ok = (l1 >= -1e-12) & (l2 >= -1e-12) & (l1 + l2 <= 1.0 + 1e-12)
            hits = np.where(ok)[0]
            if len(hits):
                k = hits[0]
                tri_idx[i] = cand[k]
                bary[i] = (1.0 - l1[k] - l2[k], l1[k], l2[k])
        return tri_idx, bary

    def boundary_distance(self, points) -> np.ndarray:
        """Distance from points to the mesh boundary.

        Circle loops are measured analytically; polygonal loops by distance
        to their segments. Meaningful for points inside the domain.
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        dist = np.full(len(points), np.inf)
        for loop, geom in zip(self.loops, self.loop_geometry):
            if isinstance(geom, CircleLoop):
                r = np.hypot(points[:, 0] - geom.cx, points[:, 1] - geom.cy)
                d = np.abs(r - geom.radius)
            else:
                poly = self.vertices[loop]
                d = _distance_to_polygon(points, poly)
            dist = np.minimum(dist, d)
        return dist


# ---------------------------------------------------------------------------
# low-level helpers


def _signed_areas(vertices, triangles) -> np.ndarray:
    p = vertices[triangles]
    return 0.5 * (
        (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
        - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1])
    )


def _loop_signed_area(points: np.ndarray) -> float:
    x, y = points[:, 0], points[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _extract_loops(vertices, triangles) -> list[np.ndarray]:
    """Chain the directed boundary edges into closed loops.

    Directed edges inherit the (counterclockwise) triangle orientation, so
    the outer loop comes out counterclockwise and holes clockwise. Loops are
    canonicalized to start at their smallest vertex index; the outer loop
    (largest absolute enclosed area) is listed first.
    """
    t = triangles
    edges = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    und = np.sort(edges, axis=1)
    uniq, inverse, counts = np.unique(
        und, axis=0, return_inverse=True, return_counts=True
    )
    if counts.max() > 2:
        bad = uniq[np.argmax(counts)]
        raise MeshError(f"edge {tuple(bad)} belongs to more than two triangles")
    on_boundary = counts[inverse] == 1
    succ: dict[int, int] = {}
    for a, b in edges[on_boundary]:
        if int(a) in succ:
            raise MeshError(
                f"boundary is not a disjoint union of simple loops near vertex {a}"
            )
        succ[int(a)] = int(b)

    loops = []
    visited: set[int] = set()
    for start in sorted(succ):
        if start in visited:
            continue
        loop = [start]
        visited.add(start)
        v = succ[start]
        while v != start:
            if v in visited:
                raise MeshError(f"boundary loop through vertex {v} is not simple")
            loop.append(v)
            visited.add(v)
            v = succ[v]
        if len(loop) < 3:
            raise MeshError("boundary loop with fewer than 3 vertices")
        arr = np.array(loop, dtype=np.int64)
        arr = np.roll(arr, -int(np.argmin(arr)))
        loops.append(arr)

    loops.sort(key=lambda l: int(l.min()))
    areas = [abs(_loop_signed_area(vertices[l])) for l in loops]
    outer = int(np.argmax(areas))
    loops = [loops[outer]] + [l for i, l in enumerate(loops) if i != outer]
    if _loop_signed_area(vertices[loops[0]]) <= 0:
        raise MeshError("outer boundary loop is not counterclockwise")
    for l in loops[1:]:
        if _loop_signed_area(vertices[l]) >= 0:
            raise MeshError("inner boundary loop is not clockwise")
    return loops


def _distance_to_polygon(points, poly) -> np.ndarray:
    a = poly
    b = np.roll(poly, -1, axis=0)
    ab = b - a
    denom = np.einsum("sd,sd->s", ab, ab)
    out = np.full(len(points), np.inf)
    # chunk over points to bound the (n_points, n_segments) temporary
    step = max(1, 2_000_000 // max(1, len(a)))
    for lo in range(0, len(points), step):
        p = points[lo : lo + step]
        ap = p[:, None, :] - a[None, :, :]
        s = np.clip(np.einsum("psd,sd->ps", ap, ab) / denom, 0.0, 1.0)
        closest = a[None, :, :] + s[..., None] * ab[None, :, :]
        d = np.hypot(*(p[:, None, :] - closest).transpose(2, 0, 1)).min(axis=1)
        out[lo : lo + step] = d
    return out


def _stitch_rings(inner_ids, inner_ang, outer_ids, outer_ang) -> list[tuple]:
    """Triangulate the band between two concentric vertex rings.

    Both rings are ordered counterclockwise by angle. The merge advances the
    pointer whose next vertex has the smaller angle, which keeps triangles
    positively oriented and distributes count mismatches evenly.
    """
    m, n = len(inner_ids), len(outer_ids)
    ia = np.append(inner_ang, inner_ang[0] + 2.0 * math.pi)
    oa = np.append(outer_ang, outer_ang[0] + 2.0 * math.pi)
    tris = []
    i = j = 0
    while i < m or j < n:
        if i < m and (j == n or ia[i + 1] <= oa[j + 1]):
            tris.append((inner_ids[i], outer_ids[j % n], inner_ids[(i + 1) % m]))
            i += 1
        else:
            tris.append((inner_ids[i % m], outer_ids[j], outer_ids[(j + 1) % n]))
            j += 1
    return tris


def _check_cap(expected: int, max_vertices: Optional[int]) -> None:
    cap = DEFAULT_VERTEX_CAP if max_vertices is None else max_vertices
    if expected > cap:
        raise ResourceLimitError(
            f"mesh would need about {expected} vertices, above the cap of {cap}; "
            "increase h or raise max_vertices"
        )


def _ring(center, radius, count, start_id):
    ang = 2.0 * math.pi * np.arange(count) / count
    pts = np.column_stack(
        [center[0] + radius * np.cos(ang), center[1] + radius * np.sin(ang)]
    )
    ids = np.arange(start_id, start_id + count)
    return ids, ang, pts


# ---------------------------------------------------------------------------
# generators


def generate_disk(center: Point2, radius: float, h: float, max_vertices=None) -> Mesh:
    """Triangulate a disk with concentric rings of 6i vertices.

    Ring spacing and tangential spacing are both close to h, giving a
    near-equilateral, deterministic mesh whose boundary vertices lie exactly
    on the circle.
    """
    if not (radius > 0):
        raise MeshError("disk radius must be positive")
    if not (0 < h < radius):
        raise MeshError(f"mesh size h={h} must satisfy 0 < h < radius={radius}")
    n = max(1, round(radius / h))
    _check_cap(1 + 3 * n * (n + 1), max_vertices)

    verts = [np.array(center, dtype=float)]
    rings = []
    for i in range(1, n + 1):
        ids, ang, pts = _ring(center, radius * i / n, 6 * i, len(verts))
        verts.extend(pts)
        rings.append((ids, ang))
    tris: list[tuple] = []
    ids1 = rings[0][0]
    for j in range(6):
        tris.append((0, ids1[j], ids1[(j + 1) % 6]))
    for k in range(len(rings) - 1):
        tris.extend(_stitch_rings(*rings[k], *rings[k + 1]))

    geom = [CircleLoop(center[0], center[1], radius)]
    return Mesh(np.array(verts), np.array(tris, dtype=np.int64), h, geom)


def generate_annulus(
    center: Point2, r_in: float, r_out: float, h: float, max_vertices=None
) -> Mesh:
    """Triangulate an annulus; ring vertex counts grow with the radius."""
    if not (0 < r_in < r_out):
        raise MeshError(f"need 0 < r_in < r_out, got r_in={r_in}, r_out={r_out}")
    if not (0 < h < r_out - r_in):
        raise MeshError(f"mesh size h={h} must satisfy 0 < h < r_out - r_in")
    n = max(1, round((r_out - r_in) / h))
    radii = [r_in + (r_out - r_in) * i / n for i in range(n + 1)]
    counts = [max(6, round(2.0 * math.pi * r / h)) for r in radii]
    _check_cap(sum(counts), max_vertices)

    verts: list[np.ndarray] = []
    rings = []
    for r, m in zip(radii, counts):
        ids, ang, pts = _ring(center, r, m, len(verts))
        verts.extend(pts)
        rings.append((ids, ang))
    tris: list[tuple] = []
    for k in range(len(rings) - 1):
        tris.extend(_stitch_rings(*rings[k], *rings[k + 1]))

    geom = [
        CircleLoop(center[0], center[1], r_out),
        CircleLoop(center[0], center[1], r_in),
    ]
    return Mesh(np.array(verts), np.array(tris, dtype=np.int64), h, geom)


def generate_rectangle(
    corner: Point2, width: float, height: float, h: float, max_vertices=None
) -> Mesh:
    """Triangulate an axis-aligned rectangle by splitting grid squares."""
    if not (width > 0 and height > 0):
        raise MeshError("rectangle sides must be positive")
    if not (0 < h <= min(width, height)):
        raise MeshError("mesh size h must satisfy 0 < h <= min(width, height)")
    nx = max(1, round(width / h))
    ny = max(1, round(height / h))
    _check_cap((nx + 1) * (ny + 1), max_vertices)

    xs = corner[0] + width * np.arange(nx + 1) / nx
    ys = corner[1] + height * np.arange(ny + 1) / ny
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    verts = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return j * (nx + 1) + i

    tris = []
    for j in range(ny):
        for i in range(nx):
            a, b = vid(i, j), vid(i + 1, j)
            c, d = vid(i + 1, j + 1), vid(i, j + 1)
            tris.append((a, b, c))
            tris.append((a, c, d))
    return Mesh(verts, np.array(tris, dtype=np.int64), h, [None])


# ---------------------------------------------------------------------------
# refinement and traces


def refine(mesh: Mesh, max_vertices=None) -> Mesh:
    """Split every triangle into 4 by edge midpoints.

    Midpoints of boundary edges are projected onto the analytic boundary for
    loops that carry circle geometry, so disk and annulus meshes converge to
    the true domain. The nominal size h halves.
    """
    _check_cap(mesh.num_vertices + len(mesh.edges[0]), max_vertices)
    uniq, counts = mesh.edges
    edge_count = {(int(a), int(b)): int(c) for (a, b), c in zip(uniq, counts)}

    loop_of_vertex: dict[int, int] = {}
    for li, loop in enumerate(mesh.loops):
        for v in loop:
            loop_of_vertex[int(v)] = li

    verts = list(map(np.asarray, mesh.vertices))
    midpoint: dict[tuple[int, int], int] = {}

    def mid(u: int, v: int) -> int:
        key = (u, v) if u < v else (v, u)
        idx = midpoint.get(key)
        if idx is not None:
            return idx
        p = 0.5 * (mesh.vertices[u] + mesh.vertices[v])
        if edge_count[key] == 1:
            geom = mesh.loop_geometry[loop_of_vertex[u]]
            if isinstance(geom, CircleLoop):
                p = geom.project(p)
        idx = len(verts)
        verts.append(p)
        midpoint[key] = idx
        return idx

    tris = []
    for a, b, c in mesh.triangles:
        a, b, c = int(a), int(b), int(c)
        ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
        tris.extend([(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)])
    return Mesh(
        np.array(verts), np.array(tris, dtype=np.int64), mesh.h / 2.0,
        list(mesh.loop_geometry),
    )


def boundary_trace(mesh: Mesh, loop_index: int) -> list[tuple[int, Point2]]:
    """Cyclic sequence of (vertex index, coordinates) along one loop,
    in loop orientation, each vertex exactly once."""
    if not (0 <= loop_index < len(mesh.loops)):
        raise MeshError(
            f"loop index {loop_index} out of range; mesh has {len(mesh.loops)} loops"
        )
    loop = mesh.loops[loop_index]
    return [(int(v), (float(mesh.vertices[v, 0]), float(mesh.vertices[v, 1]))) for v in loop]


# ---------------------------------------------------------------------------
# plain-text format: "mesh v1"


def mesh_to_text(mesh: Mesh) -> str:
    lines = ["mesh v1", f"vertices {mesh.num_vertices}"]
    for x, y in mesh.vertices:
        lines.append(f"{float(x)!r} {float(y)!r}")
    lines.append(f"triangles {mesh.num_triangles}")
    for a, b, c in mesh.triangles:
        lines.append(f"{a} {b} {c}")
    for loop in mesh.loops:
        lines.append("boundary " + str(len(loop)) + " " + " ".join(map(str, loop)))
    return "\n".join(lines) + "\n"


def mesh_from_text(text: str) -> Mesh:
    lines = text.splitlines()
    pos = 0

    def take() -> str:
        nonlocal pos
        if pos >= len(lines):
            raise MeshError("unexpected end of mesh file")
        line = lines[pos]
        pos += 1
        return line

    if take().strip() != "mesh v1":
        raise MeshError("not a 'mesh v1' file")
    head = take().split()
    if len(head) != 2 or head[0] != "vertices":
        raise MeshError("malformed vertices header")
    nv = int(head[1])
    verts = np.empty((nv, 2))
    for i in range(nv):
        a, b = take().split()
        verts[i] = (float(a), float(b))
    head = take().split()
    if len(head) != 2 or head[0] != "triangles":
        raise MeshError("malformed triangles header")
    nt = int(head[1])
    tris = np.empty((nt, 3), dtype=np.int64)
    for i in range(nt):
        tris[i] = [int(t) for t in take().split()]
    stored_loops = []
    while pos < len(lines) and lines[pos].strip():
        parts = take().split()
        if parts[0] != "boundary":
            raise MeshError("malformed boundary line")
        count = int(parts[1])
        ids = [int(t) for t in parts[2:]]
        if len(ids) != count:
            raise MeshError("boundary loop length mismatch")
        stored_loops.append(np.array(ids, dtype=np.int64))

    # h is not stored in the format; use the maximal edge length as nominal size
    e = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    d = verts[e[:, 0]] - verts[e[:, 1]]
    mesh = Mesh(verts, tris, h=float(np.hypot(d[:, 0], d[:, 1]).max()))
    if len(stored_loops) != len(mesh.loops) or any(
        not np.array_equal(a, b) for a, b in zip(stored_loops, mesh.loops)
    ):
        raise MeshError("stored boundary loops do not match mesh topology")
    return mesh


def write_mesh(mesh: Mesh, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(mesh_to_text(mesh))


def read_mesh(path) -> Mesh:
    with open(path, "r", encoding="utf-8") as f:
        return mesh_from_text(f.read())
