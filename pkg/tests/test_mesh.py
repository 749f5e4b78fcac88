import math

import numpy as np
import pytest

from sigmalab import (
    MeshError,
    ResourceLimitError,
    boundary_trace,
    generate_annulus,
    generate_disk,
    read_mesh,
    refine,
    write_mesh,
)
from sigmalab.mesh import Mesh, mesh_from_text


def loop_signed_area(mesh, loop):
    p = mesh.vertices[loop]
    x, y = p[:, 0], p[:, 1]
    return 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)


def euler_characteristic(mesh):
    edges, _ = mesh.edges
    return mesh.num_vertices - len(edges) + mesh.num_triangles


def test_disk_invariants(disk_mesh):
    assert disk_mesh.areas.min() > 0
    assert len(disk_mesh.loops) == 1
    _, counts = disk_mesh.edges
    assert set(np.unique(counts)) <= {1, 2}


def test_disk_area_close_to_pi():
    m = generate_disk((0, 0), 1.0, 0.1)
    assert abs(m.areas.sum() - math.pi) / math.pi < 0.02


def test_disk_boundary_on_circle(disk_mesh):
    trace = boundary_trace(disk_mesh, 0)
    r = [math.hypot(x, y) for _, (x, y) in trace]
    assert max(abs(v - 1.0) for v in r) < disk_mesh.h**2


def test_disk_rejects_bad_h():
    with pytest.raises(MeshError):
        generate_disk((0, 0), 1.0, 1.5)
    with pytest.raises(MeshError):
        generate_disk((0, 0), -1.0, 0.1)


def test_vertex_cap():
    with pytest.raises(ResourceLimitError):
        generate_disk((0, 0), 1.0, 1e-4, max_vertices=10_000)


def test_annulus_two_loops_and_orientation(annulus_mesh):
    assert len(annulus_mesh.loops) == 2
    assert loop_signed_area(annulus_mesh, annulus_mesh.loops[0]) > 0
    assert loop_signed_area(annulus_mesh, annulus_mesh.loops[1]) < 0


def test_annulus_area():
    m = generate_annulus((0, 0), 0.2, 1.0, 0.1)
    exact = math.pi * (1 - 0.04)
    assert abs(m.areas.sum() - exact) / exact < 0.02


def test_annulus_rejects_inverted_radii():
    with pytest.raises(MeshError):
        generate_annulus((0, 0), 1.0, 0.5, 0.05)


def test_euler_characteristic(disk_mesh, annulus_mesh):
    assert euler_characteristic(disk_mesh) == 1
    assert euler_characteristic(annulus_mesh) == 0


def test_rectangle_basics(rect_mesh):
    assert len(rect_mesh.loops) == 1
    assert abs(rect_mesh.areas.sum() - 1.0) < 1e-12
    assert euler_characteristic(rect_mesh) == 1


def test_refine_quadruples_triangles(disk_mesh):
    fine = refine(disk_mesh)
    assert fine.num_triangles == 4 * disk_mesh.num_triangles
    assert fine.areas.min() > 0


def test_refine_improves_disk_area():
    m = generate_disk((0, 0), 1.0, 0.3)
    before = abs(m.areas.sum() - math.pi)
    after = abs(refine(m).areas.sum() - math.pi)
    assert after < before


def test_refine_twice_quarters_h(disk_mesh):
    twice = refine(refine(disk_mesh))
    assert abs(twice.h - disk_mesh.h / 4) <= 0.1 * disk_mesh.h / 4


def test_refine_preserves_boundary_cyclic_order(disk_mesh):
    orig = [v for v, _ in boundary_trace(disk_mesh, 0)]
    fine = refine(disk_mesh)
    new = [v for v, _ in boundary_trace(fine, 0)]
    filtered = [v for v in new if v in set(orig)]
    # same cyclic order once rotated to the shared starting vertex
    k = filtered.index(orig[0])
    assert filtered[k:] + filtered[:k] == orig


def test_refine_keeps_annulus_orientations(annulus_mesh):
    fine = refine(annulus_mesh)
    assert len(fine.loops) == 2
    assert loop_signed_area(fine, fine.loops[0]) > 0
    assert loop_signed_area(fine, fine.loops[1]) < 0


def test_boundary_trace_bad_loop_index(disk_mesh):
    with pytest.raises(MeshError):
        boundary_trace(disk_mesh, 5)


def test_boundary_trace_covers_each_vertex_once(annulus_mesh):
    for li in range(2):
        trace = boundary_trace(annulus_mesh, li)
        ids = [v for v, _ in trace]
        assert len(ids) == len(set(ids))


def test_mesh_constructor_rejects_degenerate_triangle():
    verts = np.array([[0, 0], [1, 0], [2, 0], [0, 1.0]])
    tris = np.array([[0, 1, 2], [0, 2, 3]])  # first triangle is flat
    with pytest.raises(MeshError):
        Mesh(verts, tris, h=1.0)


def test_mesh_constructor_rejects_bad_index():
    verts = np.array([[0, 0], [1, 0], [0, 1.0]])
    with pytest.raises(MeshError):
        Mesh(verts, np.array([[0, 1, 3]]), h=1.0)


def test_mesh_file_roundtrip_bit_exact(tmp_path, annulus_mesh):
    p1 = tmp_path / "a.txt"
    p2 = tmp_path / "b.txt"
    write_mesh(annulus_mesh, p1)
    back = read_mesh(p1)
    write_mesh(back, p2)
    assert p1.read_bytes() == p2.read_bytes()
    assert np.array_equal(back.vertices, annulus_mesh.vertices)
    assert np.array_equal(back.triangles, annulus_mesh.triangles)


def test_mesh_from_text_rejects_garbage():
    with pytest.raises(MeshError):
        mesh_from_text("not a mesh\n")


def test_locate_points(disk_mesh):
    rng = np.random.default_rng(7)
    pts = rng.uniform(-0.7, 0.7, size=(50, 2))
    tri, bary = disk_mesh.locate(pts)
    assert (tri >= 0).all()
    assert np.allclose(bary.sum(axis=1), 1.0)
    # interpolating an affine function is exact
    vals = np.einsum(
        "pi,pi->p", disk_mesh.vertices[disk_mesh.triangles[tri]][:, :, 0], bary
    )
    assert np.allclose(vals, pts[:, 0], atol=1e-12)
    outside, _ = disk_mesh.locate(np.array([[2.0, 2.0]]))
    assert outside[0] == -1


def test_boundary_distance(disk_mesh, annulus_mesh):
    d = disk_mesh.boundary_distance(np.array([[0.0, 0.0], [0.5, 0.0]]))
    assert np.allclose(d, [1.0, 0.5], atol=1e-12)
    d = annulus_mesh.boundary_distance(np.array([[0.5, 0.0]]))
    assert np.allclose(d, [0.3], atol=1e-12)
