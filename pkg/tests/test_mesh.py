"""Mesh construction, bisection refinement, and partition bookkeeping."""

import xml.etree.ElementTree as ET

import numpy as np
import pytest

from vkmorley.mesh import (
    MeshError,
    build_initial_mesh,
    interior_angles,
    mesh_from_arrays,
    mesh_partition,
    read_mesh,
    refine,
    uniform_refine,
    validate,
    write_mesh,
    write_svg,
)


def assert_conforming(mesh):
    """Brute force: no vertex may lie in the interior of any edge."""
    coords = mesh.coords
    for e in range(mesh.n_edges):
        p, q = mesh.edge_vertices[e]
        a, b = coords[p], coords[q]
        for v in range(mesh.n_vertices):
            if v == p or v == q:
                continue
            c = coords[v]
            cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
            dot = (c[0] - a[0]) * (b[0] - a[0]) + (c[1] - a[1]) * (b[1] - a[1])
            ab2 = (b[0] - a[0]) ** 2 + (b[1] - a[1]) ** 2
            if abs(cross) < 1e-12 * ab2 and 1e-12 < dot / ab2 < 1 - 1e-12:
                raise AssertionError(f"vertex {v} hangs on edge {e}")


def angle_classes(mesh, decimals=9):
    return set(np.round(interior_angles(mesh), decimals).ravel())


# -- initial meshes ----------------------------------------------------------


def test_square_initial_mesh():
    m = build_initial_mesh("square")
    assert m.n_vertices == 4 and m.n_triangles == 2
    assert m.areas.sum() == pytest.approx(1.0, abs=1e-15)
    # both refinement edges are the shared diagonal
    for t in range(2):
        k = m.tri_ref_edge[t]
        i, j = sorted(np.delete(m.tri_vertices[t], k))
        assert {i, j} == {0, 2}
    validate(m)


def test_lshape_initial_mesh():
    m = build_initial_mesh("lshape")
    assert m.n_triangles == 6
    assert m.areas.sum() == pytest.approx(3.0, abs=1e-15)
    # right isoceles triangles, hypotenuses through the corner at (0,0)
    corner = np.nonzero((m.coords[:, 0] == 0.0) & (m.coords[:, 1] == 0.0))[0]
    assert len(corner) == 1
    assert np.all(np.any(m.tri_vertices == corner[0], axis=1))
    validate(m)


def test_unknown_domain_errors():
    with pytest.raises(MeshError):
        build_initial_mesh("pentagon")


def test_file_with_hanging_node_errors(tmp_path):
    # vertex 4 sits mid-hypotenuse of triangle 1 but only triangle 0 uses it
    f = tmp_path / "hanging.morleymesh"
    f.write_text(
        "morleymesh 1\n"
        "vertices 5\n"
        "0 0\n1 0\n1 1\n0 1\n0.5 0.5\n"
        "triangles 3\n"
        "0 1 4 1\n1 2 4 2\n0 2 3 1\n"
    )
    with pytest.raises(MeshError, match="hanging"):
        build_initial_mesh(str(f))


# -- refinement --------------------------------------------------------------


def test_refine_nothing_is_identity():
    m = build_initial_mesh("square")
    r = refine(m, [])
    assert r.equals(m)
    assert r is not m


def test_single_triangle_bisection():
    m = mesh_from_arrays([(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)], [(0, 1, 2)])
    r = refine(m, [0])
    assert r.n_triangles == 2 and r.n_vertices == 4
    mid = r.coords[3]
    # children's refinement edges lie opposite the new midpoint vertex
    for t in range(2):
        k = r.tri_ref_edge[t]
        opposite = np.delete(r.tri_vertices[t], k)
        assert 3 in r.tri_vertices[t]
        assert 3 not in opposite
    assert np.all(r.areas == m.areas[0] / 2.0)
    assert mid[0] + mid[1] == pytest.approx(1.0)
    assert_conforming(r)


def test_completion_bisects_neighbour():
    # both refinement edges default to the diagonal: marking one triangle
    # puts a midpoint on the neighbour's edge, so completion splits it too
    m = build_initial_mesh("square")
    r = refine(m, [0])
    assert r.n_triangles == 4
    assert_conforming(r)
    validate(r)


def test_completion_cascades_through_incompatible_neighbour():
    # neighbour's refinement edge is a boundary leg; resolving the hanging
    # midpoint on the diagonal takes two bisections of the neighbour
    coords = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]
    m = mesh_from_arrays(coords, [(0, 1, 2), (0, 2, 3)], ref_edges=[1, 0])
    r = refine(m, [0])
    assert r.n_triangles == 5
    assert_conforming(r)
    validate(r)


def test_uniform_refine_doubles_compatible_mesh():
    m = build_initial_mesh("square")
    r = uniform_refine(m)
    assert r.n_triangles == 4
    r6 = uniform_refine(build_initial_mesh("lshape"))
    assert r6.n_triangles == 12


def test_uniform_refine_twice_preserves_similarity():
    m = build_initial_mesh("square")
    r = uniform_refine(uniform_refine(m))
    assert r.n_triangles == 8
    ang = np.sort(interior_angles(r), axis=1)
    want = np.array([np.pi / 4, np.pi / 4, np.pi / 2])
    np.testing.assert_allclose(ang, np.broadcast_to(want, ang.shape), atol=1e-12)


def test_child_areas_exactly_halve():
    m = build_initial_mesh("lshape")
    r = uniform_refine(m)
    for t in range(r.n_triangles):
        parent = r.ancestors[t]
        gens = r.tri_generation[t] - m.tri_generation[parent]
        assert r.areas[t] == m.areas[parent] / 2.0**gens


def test_refinement_is_deterministic():
    m = uniform_refine(build_initial_mesh("lshape"))
    assert refine(m, [0, 3, 5]).equals(refine(m, [0, 3, 5]))


def test_marked_out_of_range_errors():
    m = build_initial_mesh("square")
    with pytest.raises(MeshError):
        refine(m, [2])
    with pytest.raises(MeshError):
        refine(m, [-1])


@pytest.mark.parametrize("domain", ["square", "lshape"])
def test_randomized_refinement_stays_conforming(domain):
    rng = np.random.default_rng(7)
    init = build_initial_mesh(domain)
    m = init
    total = init.areas.sum()
    for _ in range(5):
        n = m.n_triangles
        marked = rng.choice(n, size=max(1, n // 4), replace=False)
        m = refine(m, marked)
        validate(m)
        assert m.areas.sum() == pytest.approx(total, rel=1e-14)
    assert_conforming(m)
    assert len(angle_classes(m)) <= 8 * init.n_triangles


def test_angle_rows_sum_to_pi():
    m = uniform_refine(build_initial_mesh("lshape"))
    np.testing.assert_allclose(interior_angles(m).sum(axis=1), np.pi, atol=1e-12)


# -- partition ---------------------------------------------------------------


def test_partition_of_identical_meshes():
    m = uniform_refine(build_initial_mesh("square"))
    common, coarse_only, fine_only, child_map = mesh_partition(m, m)
    assert sorted(common) == list(range(m.n_triangles))
    assert len(coarse_only) == 0 and len(fine_only) == 0


def test_partition_after_uniform_refinement():
    m = build_initial_mesh("square")
    f = uniform_refine(m)
    common, coarse_only, fine_only, child_map = mesh_partition(m, f)
    assert len(common) == 0
    assert sorted(coarse_only) == [0, 1]
    assert len(fine_only) == 4
    assert sorted(child_map) == list(range(f.n_triangles))
    assert {child_map[t] for t in fine_only} == coarse_only


def test_partition_when_completion_refines_everything():
    m = build_initial_mesh("square")
    f = refine(m, [0])
    common, coarse_only, fine_only, _ = mesh_partition(m, f)
    assert len(common) == 0
    assert sorted(coarse_only) == [0, 1]
    assert len(fine_only) == 4


def test_partition_keeps_untouched_triangles():
    m = uniform_refine(uniform_refine(build_initial_mesh("square")))
    f = refine(m, [0])
    common, coarse_only, fine_only, child_map = mesh_partition(m, f)
    assert len(common) + len(coarse_only) == m.n_triangles
    for c in coarse_only:
        kids = [t for t, a in child_map.items() if a == c]
        assert len(kids) >= 2
        assert f.areas[kids].sum() == pytest.approx(m.areas[c], rel=1e-14)


def test_partition_across_two_refinement_steps():
    m = build_initial_mesh("square")
    f = uniform_refine(uniform_refine(m))
    common, coarse_only, fine_only, _ = mesh_partition(m, f)
    assert len(common) == 0
    assert len(fine_only) == 8


def test_partition_requires_descendant():
    a = build_initial_mesh("square")
    b = build_initial_mesh("lshape")
    with pytest.raises(MeshError):
        mesh_partition(a, b)


# -- serialization -----------------------------------------------------------


def test_mesh_file_roundtrip(tmp_path):
    m = refine(uniform_refine(build_initial_mesh("lshape")), [0, 4])
    path = tmp_path / "m.morleymesh"
    write_mesh(m, path)
    back = read_mesh(path)
    assert back.equals(m)


def test_read_mesh_rejects_garbage(tmp_path):
    bad = tmp_path / "bad.morleymesh"
    bad.write_text("not a mesh\n")
    with pytest.raises(MeshError):
        read_mesh(bad)
    bad.write_text("morleymesh 1\nvertices 1\n0 0\ntriangles 1\n0 0 0 5\n")
    with pytest.raises(MeshError):
        read_mesh(bad)


def test_svg_output(tmp_path):
    m = uniform_refine(build_initial_mesh("square"))
    path = tmp_path / "m.svg"
    write_svg(m, path)
    root = ET.parse(path).getroot()
    assert root.tag.endswith("svg")
    paths = [el for el in root.iter() if el.tag.endswith("path")]
    assert len(paths) == m.n_triangles
