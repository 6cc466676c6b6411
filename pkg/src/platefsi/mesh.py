"""Structured meshes for the cavity/plate geometry.

The fluid occupies the unit cube [0,1] x [0,1] x [-1,0]; the plate occupies
its top face [0,1] x [0,1] x {0}.  The cube is meshed by splitting each of
n^3 subcubes into six tetrahedra that share the subcube's main diagonal
(Kuhn subdivision), which gives 6*n^3 elements and a matching triangulation
of the top face with 2*n^2 triangles.

Boundary faces carry one of two tags: PLATE for faces lying in the plane
x3 = 0, and S for the rest of the cavity wall.  A TraceMap records the
bijection between tagged top faces of the 3D mesh and triangles of the 2D
plate mesh, which every coupling term in the solvers goes through.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

GEOM_TOL = 1e-12

# Axis orders of the six tetrahedra of a Kuhn cube, in a fixed order.
_KUHN_PERMUTATIONS = (
    (0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0),
)


class Tag(IntEnum):
    """Boundary classification: cavity wall (S) or top plate face (PLATE)."""

    S = 0
    PLATE = 1


@dataclass(frozen=True)
class Mesh3D:
    """Conforming tetrahedral mesh of the fluid cavity.

    vertices: (nv, 3) coordinates; tets: (nt, 4) vertex indices with
    positive signed volume; boundary_faces: (nb, 3) vertex triples sorted
    lexicographically; boundary_tags: (nb,) values of ``Tag``.
    """

    vertices: np.ndarray
    tets: np.ndarray
    boundary_faces: np.ndarray
    boundary_tags: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "vertices", np.asarray(self.vertices, dtype=float))
        object.__setattr__(self, "tets", np.asarray(self.tets, dtype=np.int64))
        object.__setattr__(self, "boundary_faces", np.asarray(self.boundary_faces, dtype=np.int64))
        object.__setattr__(self, "boundary_tags", np.asarray(self.boundary_tags, dtype=np.int64))

    @property
    def num_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def num_tets(self) -> int:
        return self.tets.shape[0]


@dataclass(frozen=True)
class Mesh2D:
    """Conforming triangulation of the plate, with positively oriented cells."""

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "vertices", np.asarray(self.vertices, dtype=float))
        object.__setattr__(self, "triangles", np.asarray(self.triangles, dtype=np.int64))
        object.__setattr__(self, "boundary_edges", np.asarray(self.boundary_edges, dtype=np.int64))

    @property
    def num_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def num_triangles(self) -> int:
        return self.triangles.shape[0]


@dataclass(frozen=True)
class TraceMap:
    """Bijections between PLATE entities of a Mesh3D and a plate Mesh2D.

    face_to_triangle maps an index into ``mesh3d.boundary_faces`` to a
    triangle index; vertex_to_2d maps 3D vertex index -> 2D vertex index
    (-1 off the plate); vertex_to_3d is its inverse on plate vertices.
    """

    face_to_triangle: dict[int, int]
    triangle_to_face: dict[int, int]
    vertex_to_2d: np.ndarray
    vertex_to_3d: np.ndarray


def tet_volumes(vertices: np.ndarray, tets: np.ndarray) -> np.ndarray:
    """Signed volumes of tetrahedra under the stored vertex ordering."""
    p = vertices[tets]
    e = p[:, 1:] - p[:, :1]
    return np.linalg.det(e) / 6.0


def triangle_areas(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """Signed areas of triangles under the stored vertex ordering."""
    p = vertices[triangles]
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])


def _face_counts(tets: np.ndarray) -> dict[tuple[int, int, int], int]:
    counts: dict[tuple[int, int, int], int] = {}
    local = ((1, 2, 3), (0, 2, 3), (0, 1, 3), (0, 1, 2))
    for tet in tets:
        for tri in local:
            key = tuple(sorted(int(tet[i]) for i in tri))
            counts[key] = counts.get(key, 0) + 1
    return counts


def boundary_faces_of(tets: np.ndarray) -> np.ndarray:
    """Faces adjacent to exactly one tetrahedron, sorted lexicographically."""
    counts = _face_counts(tets)
    faces = sorted(key for key, c in counts.items() if c == 1)
    return np.array(faces, dtype=np.int64).reshape(-1, 3)


def classify_boundary(mesh: "Mesh3D | None" = None, *, vertices=None, tets=None,
                      faces=None) -> tuple[np.ndarray, np.ndarray]:
    """Tag boundary faces: PLATE when all three vertices lie in x3 = 0, else S.

    With ``faces`` given, every face is checked to be an actual boundary face
    (adjacent to exactly one tet); interior faces are rejected.  Returns
    ``(faces, tags)``.
    """
    if mesh is not None:
        vertices, tets = mesh.vertices, mesh.tets
    counts = _face_counts(np.asarray(tets, dtype=np.int64))
    if faces is None:
        keys = sorted(key for key, c in counts.items() if c == 1)
        faces = np.array(keys, dtype=np.int64).reshape(-1, 3)
    else:
        faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
        for f in faces:
            key = tuple(sorted(int(v) for v in f))
            mult = counts.get(key, 0)
            if mult != 1:
                raise ValueError(
                    f"face {key} is not a boundary face (adjacent to {mult} tets)")
    x3 = np.asarray(vertices)[:, 2]
    on_plate = np.all(np.abs(x3[faces]) <= GEOM_TOL, axis=1)
    tags = np.where(on_plate, int(Tag.PLATE), int(Tag.S)).astype(np.int64)
    return faces, tags


def build_unit_cube_mesh(n: int) -> Mesh3D:
    """Kuhn-subdivided mesh of [0,1]^2 x [-1,0] with n subdivisions per axis.

    Vertices are numbered lexicographically by coordinate; each subcube is
    split into six tetrahedra around its main diagonal, all reoriented to
    positive volume.  Produces 6*n^3 tets and 12*n^2 tagged boundary faces.
    """
    if n < 1:
        raise ValueError(f"subdivision count must be >= 1, got {n}")
    n = int(n)
    ticks = np.arange(n + 1, dtype=float) / n

    def vid(ix, iy, iz):
        return (ix * (n + 1) + iy) * (n + 1) + iz

    grid = np.stack(np.meshgrid(ticks, ticks, ticks - 1.0, indexing="ij"), axis=-1)
    vertices = grid.reshape(-1, 3)

    tets = np.empty((6 * n ** 3, 4), dtype=np.int64)
    k = 0
    unit = np.eye(3, dtype=np.int64)
    for ix in range(n):
        for iy in range(n):
            for iz in range(n):
                base = np.array([ix, iy, iz], dtype=np.int64)
                for perm in _KUHN_PERMUTATIONS:
                    a = base
                    b = a + unit[perm[0]]
                    c = b + unit[perm[1]]
                    d = c + unit[perm[2]]
                    quad = [vid(*a), vid(*b), vid(*c), vid(*d)]
                    # odd axis orders give negative volume; swap to fix
                    parity = (perm[0], perm[1], perm[2]) in ((0, 2, 1), (1, 0, 2), (2, 1, 0))
                    if parity:
                        quad[1], quad[2] = quad[2], quad[1]
                    tets[k] = quad
                    k += 1

    faces, tags = classify_boundary(vertices=vertices, tets=tets)
    return Mesh3D(vertices=vertices, tets=tets, boundary_faces=faces, boundary_tags=tags)


def extract_plate_mesh(mesh: Mesh3D) -> tuple[Mesh2D, TraceMap]:
    """Project the PLATE faces to a 2D mesh and record the correspondence.

    2D vertices are numbered lexicographically by (x1, x2); triangles are
    reordered to positive area.  Rejects meshes whose PLATE faces do not lie
    in the plane x3 = 0.
    """
    plate_idx = np.nonzero(mesh.boundary_tags == int(Tag.PLATE))[0]
    if plate_idx.size == 0:
        raise ValueError("mesh has no PLATE-tagged boundary faces")
    plate_faces = mesh.boundary_faces[plate_idx]
    used = np.unique(plate_faces)
    if np.any(np.abs(mesh.vertices[used, 2]) > GEOM_TOL):
        raise ValueError("PLATE faces are not planar in x3 = 0")

    coords = mesh.vertices[used][:, :2]
    order = np.lexsort((coords[:, 1], coords[:, 0]))
    v3d = used[order]                      # 2D index -> 3D vertex
    vertices2d = mesh.vertices[v3d][:, :2]
    to2d = np.full(mesh.num_vertices, -1, dtype=np.int64)
    to2d[v3d] = np.arange(v3d.size)

    triangles = to2d[plate_faces]
    areas = triangle_areas(vertices2d, triangles)
    flip = areas < 0
    triangles[flip] = triangles[flip][:, [0, 2, 1]]

    edge_counts: dict[tuple[int, int], int] = {}
    for tri in triangles:
        for a, b in ((0, 1), (0, 2), (1, 2)):
            key = (int(min(tri[a], tri[b])), int(max(tri[a], tri[b])))
            edge_counts[key] = edge_counts.get(key, 0) + 1
    boundary_edges = np.array(sorted(k for k, c in edge_counts.items() if c == 1),
                              dtype=np.int64).reshape(-1, 2)

    mesh2d = Mesh2D(vertices=vertices2d, triangles=triangles,
                    boundary_edges=boundary_edges)
    face_to_triangle = {int(f): t for t, f in enumerate(plate_idx)}
    triangle_to_face = {t: int(f) for t, f in enumerate(plate_idx)}
    trace = TraceMap(face_to_triangle=face_to_triangle,
                     triangle_to_face=triangle_to_face,
                     vertex_to_2d=to2d, vertex_to_3d=v3d)
    return mesh2d, trace


def unique_edges(cells: np.ndarray) -> np.ndarray:
    """All vertex pairs (a < b) appearing as cell edges, sorted lexicographically."""
    cells = np.asarray(cells, dtype=np.int64)
    nloc = cells.shape[1]
    pairs = [(i, j) for i in range(nloc) for j in range(i + 1, nloc)]
    edges = np.concatenate([cells[:, p] for p in pairs], axis=0)
    edges.sort(axis=1)
    return np.unique(edges, axis=0)


def renumber_vertices(mesh: Mesh3D, perm: np.ndarray) -> Mesh3D:
    """Relabel vertices so old index i becomes perm[i]; geometry is unchanged."""
    perm = np.asarray(perm, dtype=np.int64)
    if sorted(perm.tolist()) != list(range(mesh.num_vertices)):
        raise ValueError("perm is not a permutation of the vertex indices")
    inv = np.empty_like(perm)
    inv[perm] = np.arange(perm.size)
    vertices = mesh.vertices[inv]
    tets = perm[mesh.tets]
    faces, tags = classify_boundary(vertices=vertices, tets=tets)
    return Mesh3D(vertices=vertices, tets=tets, boundary_faces=faces, boundary_tags=tags)


def mesh_to_text(mesh: Mesh3D) -> str:
    """Debug dump: header line, vertex coordinates, tet connectivity."""
    lines = [f"vertices {mesh.num_vertices} tets {mesh.num_tets}"]
    for v in mesh.vertices:
        lines.append(f"{v[0]:.17g} {v[1]:.17g} {v[2]:.17g}")
    for t in mesh.tets:
        lines.append(f"{t[0]} {t[1]} {t[2]} {t[3]}")
    return "\n".join(lines) + "\n"


def validate_mesh3d(mesh: Mesh3D, expected_volume: float | None = 1.0) -> None:
    """Raise on violated mesh invariants (orientation, volume, conformity)."""
    vols = tet_volumes(mesh.vertices, mesh.tets)
    if np.any(vols <= 0):
        raise ValueError("mesh contains non-positively oriented tets")
    if expected_volume is not None and abs(vols.sum() - expected_volume) > 1e-12:
        raise ValueError(f"tet volumes sum to {vols.sum()}, expected {expected_volume}")
    counts = _face_counts(mesh.tets)
    if any(c > 2 for c in counts.values()):
        raise ValueError("a face is shared by more than two tets")
    derived = {k for k, c in counts.items() if c == 1}
    stored = {tuple(sorted(f)) for f in mesh.boundary_faces.tolist()}
    if derived != stored:
        raise ValueError("stored boundary faces do not match tet incidence")
