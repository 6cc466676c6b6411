import numpy as np
import pytest

from platefsi.mesh import (
    Tag,
    boundary_faces_of,
    build_unit_cube_mesh,
    classify_boundary,
    extract_plate_mesh,
    mesh_to_text,
    renumber_vertices,
    tet_volumes,
    triangle_areas,
    unique_edges,
    validate_mesh3d,
)


@pytest.mark.parametrize("n,expected", [(1, 6), (4, 384), (6, 1296)])
def test_tet_counts(n, expected):
    mesh = build_unit_cube_mesh(n)
    assert mesh.num_tets == expected


def test_single_cube_volume():
    mesh = build_unit_cube_mesh(1)
    vols = tet_volumes(mesh.vertices, mesh.tets)
    assert np.all(vols > 0)
    assert abs(vols.sum() - 1.0) <= 1e-12


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_volume_partition_and_conformity(n):
    mesh = build_unit_cube_mesh(n)
    validate_mesh3d(mesh, expected_volume=1.0)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_boundary_face_count(n):
    mesh = build_unit_cube_mesh(n)
    assert mesh.boundary_faces.shape[0] == 12 * n * n


def test_zero_subdivisions_rejected():
    with pytest.raises(ValueError):
        build_unit_cube_mesh(0)


@pytest.mark.parametrize("n,plate,wall", [(1, 2, 10), (2, 8, 40)])
def test_boundary_tag_counts(n, plate, wall):
    mesh = build_unit_cube_mesh(n)
    tags = mesh.boundary_tags
    assert int(np.sum(tags == Tag.PLATE)) == plate
    assert int(np.sum(tags == Tag.S)) == wall


def test_boundary_faces_lie_on_cube_surface():
    # independent geometric check of the incidence-derived boundary set
    mesh = build_unit_cube_mesh(3)
    for face, tag in zip(mesh.boundary_faces, mesh.boundary_tags):
        pts = mesh.vertices[face]
        on_wall = [
            np.all(np.abs(pts[:, 0] - c) <= 1e-12) for c in (0.0, 1.0)
        ] + [
            np.all(np.abs(pts[:, 1] - c) <= 1e-12) for c in (0.0, 1.0)
        ] + [
            np.all(np.abs(pts[:, 2] - c) <= 1e-12) for c in (-1.0, 0.0)
        ]
        assert any(on_wall)
        is_top = np.all(np.abs(pts[:, 2]) <= 1e-12)
        assert tag == (Tag.PLATE if is_top else Tag.S)


def test_face_with_interior_vertex_is_wall():
    mesh = build_unit_cube_mesh(2)
    for face, tag in zip(mesh.boundary_faces, mesh.boundary_tags):
        if np.any(np.abs(mesh.vertices[face, 2] + 0.5) <= 1e-12):
            assert tag == Tag.S


def test_interior_face_rejected():
    mesh = build_unit_cube_mesh(1)
    counts = {}
    local = ((1, 2, 3), (0, 2, 3), (0, 1, 3), (0, 1, 2))
    for tet in mesh.tets:
        for tri in local:
            key = tuple(sorted(int(tet[i]) for i in tri))
            counts[key] = counts.get(key, 0) + 1
    interior = next(k for k, c in counts.items() if c == 2)
    with pytest.raises(ValueError):
        classify_boundary(mesh, faces=[interior])


@pytest.mark.parametrize("n,ntri", [(1, 2), (4, 32)])
def test_plate_triangle_count(n, ntri):
    mesh = build_unit_cube_mesh(n)
    mesh2d, _ = extract_plate_mesh(mesh)
    assert mesh2d.num_triangles == ntri


def test_plate_mesh_areas_and_boundary():
    mesh2d, _ = extract_plate_mesh(build_unit_cube_mesh(1))
    areas = triangle_areas(mesh2d.vertices, mesh2d.triangles)
    assert np.allclose(areas, 0.5, atol=1e-12)
    mesh2d3, _ = extract_plate_mesh(build_unit_cube_mesh(3))
    areas3 = triangle_areas(mesh2d3.vertices, mesh2d3.triangles)
    assert np.all(areas3 > 0)
    assert abs(areas3.sum() - 1.0) <= 1e-12
    # boundary edges of the n=3 plate mesh: 4 sides of 3 segments each
    assert mesh2d3.boundary_edges.shape[0] == 12


def test_trace_map_vertex_coordinates_match():
    mesh = build_unit_cube_mesh(3)
    mesh2d, trace = extract_plate_mesh(mesh)
    for v2, v3 in enumerate(trace.vertex_to_3d):
        assert np.allclose(mesh2d.vertices[v2], mesh.vertices[v3, :2], atol=1e-12)
        assert trace.vertex_to_2d[v3] == v2


def test_trace_map_round_trip():
    mesh = build_unit_cube_mesh(2)
    mesh2d, trace = extract_plate_mesh(mesh)
    plate_faces = np.nonzero(mesh.boundary_tags == Tag.PLATE)[0]
    assert sorted(trace.face_to_triangle) == sorted(int(i) for i in plate_faces)
    for f, t in trace.face_to_triangle.items():
        assert trace.triangle_to_face[t] == f
        face_verts = set(mesh.boundary_faces[f].tolist())
        tri_verts = {int(trace.vertex_to_3d[v]) for v in mesh2d.triangles[t]}
        assert face_verts == tri_verts


def test_extract_requires_plate_faces():
    mesh = build_unit_cube_mesh(1)
    walls_only = np.nonzero(mesh.boundary_tags == Tag.S)[0]
    from platefsi.mesh import Mesh3D

    stripped = Mesh3D(
        vertices=mesh.vertices,
        tets=mesh.tets,
        boundary_faces=mesh.boundary_faces[walls_only],
        boundary_tags=mesh.boundary_tags[walls_only],
    )
    with pytest.raises(ValueError):
        extract_plate_mesh(stripped)


def test_unique_edges_of_single_tet():
    edges = unique_edges(np.array([[0, 1, 2, 3]]))
    assert edges.shape == (6, 2)
    assert edges.tolist() == [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]]


def test_renumber_round_trip_and_validation():
    mesh = build_unit_cube_mesh(2)
    rng = np.random.default_rng(7)
    perm = rng.permutation(mesh.num_vertices)
    shuffled = renumber_vertices(mesh, perm)
    validate_mesh3d(shuffled, expected_volume=1.0)
    assert shuffled.boundary_faces.shape == mesh.boundary_faces.shape
    with pytest.raises(ValueError):
        renumber_vertices(mesh, np.zeros(mesh.num_vertices, dtype=int))


def test_mesh_dump_format():
    mesh = build_unit_cube_mesh(1)
    text = mesh_to_text(mesh)
    lines = text.strip().split("\n")
    assert lines[0] == f"vertices {mesh.num_vertices} tets {mesh.num_tets}"
    assert len(lines) == 1 + mesh.num_vertices + mesh.num_tets
    first_tet = [int(s) for s in lines[1 + mesh.num_vertices].split()]
    assert first_tet == mesh.tets[0].tolist()


def test_boundary_faces_of_matches_mesh():
    mesh = build_unit_cube_mesh(2)
    derived = boundary_faces_of(mesh.tets)
    assert np.array_equal(derived, mesh.boundary_faces)
