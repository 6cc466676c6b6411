"""Reference elements, quadrature, function spaces and assembly primitives.

Element zoo: P1/P2 Lagrange on tetrahedra and triangles, plus the Morley
triangle (quadratic, nonconforming) whose degrees of freedom are vertex
values and normal derivatives at edge midpoints.  Every edge carries one
global normal, oriented by rotating the lower-to-higher vertex-index
tangent, so that adjacent cells share the same normal-derivative
functional.  Morley bases are built per physical cell by inverting the
6x6 matrix of degree-of-freedom functionals applied to the quadratic
monomials; Lagrange bases are pulled back through the affine map.

Quadrature rules are conical (collapsed Gauss-Jacobi) products, which keep
all weights positive at any exactness degree.

Assembly helpers return SciPy sparse matrices over the scalar degrees of
freedom; vector-valued spaces interleave components (component index
fastest), and ``expand_vector``/``divergence_matrix`` lift scalar blocks to
that layout.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.special import roots_jacobi

from .mesh import Mesh2D, Mesh3D, Tag, unique_edges

TET_DEGREE = 4   # exact for P2 x P2 mass terms on affine cells
TRI_DEGREE = 6   # plate loads involve high-degree manufactured residuals


class ElementKind(Enum):
    P1_TET = "P1_TET"
    P2_TET = "P2_TET"
    P1_TRI = "P1_TRI"
    P2_TRI = "P2_TRI"
    MORLEY_TRI = "MORLEY_TRI"


_TET_KINDS = {ElementKind.P1_TET, ElementKind.P2_TET}
_LAGRANGE_KINDS = {ElementKind.P1_TET, ElementKind.P2_TET,
                   ElementKind.P1_TRI, ElementKind.P2_TRI}

# ---------------------------------------------------------------------------
# quadratic monomials in 2D (basis for Morley construction)

_MONO_HESS = np.zeros((6, 2, 2))
_MONO_HESS[3] = [[2.0, 0.0], [0.0, 0.0]]
_MONO_HESS[4] = [[0.0, 1.0], [1.0, 0.0]]
_MONO_HESS[5] = [[0.0, 0.0], [0.0, 2.0]]


def _mono2_values(pts: np.ndarray) -> np.ndarray:
    x, y = pts[..., 0], pts[..., 1]
    one = np.ones_like(x)
    return np.stack([one, x, y, x * x, x * y, y * y], axis=-1)


def _mono2_gradients(pts: np.ndarray) -> np.ndarray:
    x, y = pts[..., 0], pts[..., 1]
    zero = np.zeros_like(x)
    one = np.ones_like(x)
    gx = np.stack([zero, one, zero, 2 * x, y, zero], axis=-1)
    gy = np.stack([zero, zero, one, zero, x, 2 * y], axis=-1)
    return np.stack([gx, gy], axis=-1)


def _morley_dof_matrix(coords: np.ndarray, normals: np.ndarray) -> np.ndarray:
    """Functionals (3 vertex values, 3 edge-midpoint normal derivatives) on monomials."""
    mids = np.array([(coords[0] + coords[1]) / 2,
                     (coords[0] + coords[2]) / 2,
                     (coords[1] + coords[2]) / 2])
    rows_v = _mono2_values(coords)
    grads = _mono2_gradients(mids)                      # (3, 6, 2)
    rows_n = np.einsum("kjd,kd->kj", grads, normals)
    return np.concatenate([rows_v, rows_n], axis=0)


# ---------------------------------------------------------------------------
# reference elements


class ReferenceElement:
    """Basis evaluators on the reference cell, dual to the element's DOFs."""

    def __init__(self, kind: ElementKind):
        self.kind = kind
        if kind in _TET_KINDS:
            self.dim = 3
            self.vertices = np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]])
            self.edges = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))
        else:
            self.dim = 2
            self.vertices = np.array([[0.0, 0], [1, 0], [0, 1]])
            self.edges = ((0, 1), (0, 2), (1, 2))
        if kind in (ElementKind.P1_TET, ElementKind.P1_TRI):
            self.dof_count = self.dim + 1
            self.nodes = self.vertices.copy()
        else:
            mids = np.array([(self.vertices[a] + self.vertices[b]) / 2
                             for a, b in self.edges])
            self.dof_count = len(self.vertices) + len(self.edges)
            self.nodes = np.vstack([self.vertices, mids])
        if kind is ElementKind.MORLEY_TRI:
            # outward unit normals of the reference triangle's edges
            self.normals = np.array([[0.0, -1.0], [-1.0, 0.0],
                                     [1.0 / np.sqrt(2), 1.0 / np.sqrt(2)]])
            self._coeffs = np.linalg.inv(_morley_dof_matrix(self.vertices, self.normals))

    def _bary(self, pts: np.ndarray) -> np.ndarray:
        lam0 = 1.0 - pts.sum(axis=-1, keepdims=True)
        return np.concatenate([lam0, pts], axis=-1)

    def _bary_grads(self) -> np.ndarray:
        g = np.vstack([-np.ones((1, self.dim)), np.eye(self.dim)])
        return g

    def basis_values(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if self.kind is ElementKind.MORLEY_TRI:
            return _mono2_values(pts) @ self._coeffs
        lam = self._bary(pts)
        if self.kind in (ElementKind.P1_TET, ElementKind.P1_TRI):
            return lam
        vert = lam * (2 * lam - 1)
        edge = np.stack([4 * lam[:, a] * lam[:, b] for a, b in self.edges], axis=-1)
        return np.concatenate([vert, edge], axis=-1)

    def basis_gradients(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if self.kind is ElementKind.MORLEY_TRI:
            return np.einsum("pmd,mi->pid", _mono2_gradients(pts), self._coeffs)
        lam = self._bary(pts)
        dlam = self._bary_grads()
        if self.kind in (ElementKind.P1_TET, ElementKind.P1_TRI):
            return np.broadcast_to(dlam, (pts.shape[0],) + dlam.shape).copy()
        vert = (4 * lam - 1)[:, :, None] * dlam[None, :, :]
        edge = np.stack([4 * (lam[:, a, None] * dlam[b] + lam[:, b, None] * dlam[a])
                         for a, b in self.edges], axis=1)
        return np.concatenate([vert, edge], axis=1)

    def basis_hessians(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        npts = pts.shape[0]
        if self.kind is ElementKind.MORLEY_TRI:
            hess = np.einsum("mab,mi->iab", _MONO_HESS, self._coeffs)
            return np.broadcast_to(hess, (npts,) + hess.shape).copy()
        if self.kind in (ElementKind.P1_TET, ElementKind.P1_TRI):
            raise ValueError("Hessians undefined for P1 elements")
        dlam = self._bary_grads()
        vert = 4 * np.einsum("ia,ib->iab", dlam, dlam)
        edge = np.stack([4 * (np.outer(dlam[a], dlam[b]) + np.outer(dlam[b], dlam[a]))
                         for a, b in self.edges])
        hess = np.concatenate([vert, edge], axis=0)
        return np.broadcast_to(hess, (npts,) + hess.shape).copy()

    def dof_matrix(self) -> np.ndarray:
        """Apply this element's DOF functionals to its own basis (identity)."""
        if self.kind is ElementKind.MORLEY_TRI:
            vert = self.basis_values(self.vertices)
            mids = np.array([(self.vertices[a] + self.vertices[b]) / 2
                             for a, b in self.edges])
            grads = self.basis_gradients(mids)
            norm = np.einsum("kid,kd->ki", grads, self.normals)
            return np.concatenate([vert, norm], axis=0)
        return self.basis_values(self.nodes)


@lru_cache(maxsize=None)
def make_element(kind: ElementKind) -> ReferenceElement:
    if not isinstance(kind, ElementKind):
        raise ValueError(f"unknown element kind: {kind!r}")
    return ReferenceElement(kind)


# ---------------------------------------------------------------------------
# quadrature


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray
    degree: int


def _gauss01(m: int):
    x, w = np.polynomial.legendre.leggauss(m)
    return (x + 1) / 2, w / 2


def _jacobi01(m: int, alpha: int):
    x, w = roots_jacobi(m, alpha, 0.0)
    return (x + 1) / 2, w / 2 ** (alpha + 1)


@lru_cache(maxsize=None)
def make_quadrature(cell: str, degree: int) -> QuadratureRule:
    """Conical-product rule on the reference TRI/TET, exact to >= degree."""
    if not 1 <= degree <= 8:
        raise ValueError(f"unsupported quadrature degree {degree}")
    m = (degree + 2) // 2
    if cell == "TRI":
        xa, wa = _gauss01(m)
        xb, wb = _jacobi01(m, 1)
        pts = np.array([(a * (1 - b), b) for b in xb for a in xa])
        wts = np.array([u * v for v in wb for u in wa])
    elif cell == "TET":
        xa, wa = _gauss01(m)
        xb, wb = _jacobi01(m, 1)
        xc, wc = _jacobi01(m, 2)
        pts = np.array([(a * (1 - b) * (1 - c), b * (1 - c), c)
                        for c in xc for b in xb for a in xa])
        wts = np.array([u * v * t for t in wc for v in wb for u in wa])
    else:
        raise ValueError(f"unknown cell type {cell!r}")
    return QuadratureRule(points=pts, weights=wts, degree=2 * m - 1)


# ---------------------------------------------------------------------------
# function spaces


class FunctionSpace:
    """Element kind plus global DOF numbering over a mesh.

    Scalar DOFs are numbered vertices first, then edges in lexicographic
    order.  Vector spaces (ncomp = 3) interleave: global dof = ncomp * scalar
    + component.  Boundary DOF sets are exposed per mesh tag (3D) or for the
    single boundary (2D).
    """

    def __init__(self, mesh, kind: ElementKind, ncomp: int = 1):
        if ncomp not in (1, 3):
            raise ValueError("vector multiplicity must be 1 or 3")
        is_tet = kind in _TET_KINDS
        if is_tet != isinstance(mesh, Mesh3D):
            raise ValueError(f"element kind {kind} does not match mesh dimension")
        if kind is ElementKind.MORLEY_TRI and ncomp != 1:
            raise ValueError("Morley space is scalar")
        self.mesh = mesh
        self.kind = kind
        self.ncomp = ncomp
        self.dim = 3 if is_tet else 2
        self.cells = mesh.tets if is_tet else mesh.triangles
        self.element = make_element(kind)
        nv = mesh.num_vertices

        if kind in (ElementKind.P1_TET, ElementKind.P1_TRI):
            self.edges = np.empty((0, 2), dtype=np.int64)
            self.cell_dofs = self.cells.copy()
            self.dof_points = mesh.vertices.copy()
        else:
            self.edges = unique_edges(self.cells)
            enc = self.edges[:, 0] * nv + self.edges[:, 1]
            local_pairs = self.element.edges
            cell_edges = np.stack(
                [np.sort(self.cells[:, list(p)], axis=1) for p in local_pairs], axis=1)
            ids = np.searchsorted(enc, cell_edges[:, :, 0] * nv + cell_edges[:, :, 1])
            self.cell_dofs = np.concatenate([self.cells, nv + ids], axis=1)
            mids = 0.5 * (mesh.vertices[self.edges[:, 0]] + mesh.vertices[self.edges[:, 1]])
            self.dof_points = np.vstack([mesh.vertices, mids])

        self.ndof_scalar = self.dof_points.shape[0]
        self.ndof = self.ndof_scalar * ncomp
        self._geometry = None
        self._morley_coeffs = None
        if kind is ElementKind.MORLEY_TRI:
            self.edge_normals = self._global_edge_normals()
            self._morley_coeffs = self._build_morley_coeffs()

    # -- topology helpers ---------------------------------------------------

    def _global_edge_normals(self) -> np.ndarray:
        t = self.mesh.vertices[self.edges[:, 1]] - self.mesh.vertices[self.edges[:, 0]]
        t = t / np.linalg.norm(t, axis=1, keepdims=True)
        return np.stack([t[:, 1], -t[:, 0]], axis=1)

    def _build_morley_coeffs(self) -> np.ndarray:
        coords = self.mesh.vertices[self.cells]          # (nc, 3, 2)
        edge_ids = self.cell_dofs[:, 3:] - self.mesh.num_vertices
        normals = self.edge_normals[edge_ids]            # (nc, 3, 2)
        nc = self.cells.shape[0]
        vmat = np.empty((nc, 6, 6))
        for c in range(nc):
            vmat[c] = _morley_dof_matrix(coords[c], normals[c])
        return np.linalg.inv(vmat)

    def geometry(self):
        """Per-cell affine data: v0, jacobian, its inverse transpose, |det|."""
        if self._geometry is None:
            pts = self.mesh.vertices[self.cells[:, : self.dim + 1]]
            v0 = pts[:, 0]
            jac = np.transpose(pts[:, 1:] - pts[:, :1], (0, 2, 1))
            det = np.abs(np.linalg.det(jac))
            inv = np.linalg.inv(jac)
            self._geometry = (v0, jac, np.transpose(inv, (0, 2, 1)), det)
        return self._geometry

    def physical_points(self, rule: QuadratureRule) -> np.ndarray:
        v0, jac, _, _ = self.geometry()
        return v0[:, None, :] + np.einsum("cde,qe->cqd", jac, rule.points)

    def boundary_scalar_dofs(self, tag=None) -> np.ndarray:
        """Sorted scalar DOFs on the tagged boundary (3D) or the boundary (2D)."""
        nv = self.mesh.num_vertices
        has_edge_dofs = self.kind not in (ElementKind.P1_TET, ElementKind.P1_TRI)
        if isinstance(self.mesh, Mesh3D):
            if tag is None:
                raise ValueError("a boundary tag is required on a 3D mesh")
            faces = self.mesh.boundary_faces[self.mesh.boundary_tags == int(tag)]
            dofs = set(np.unique(faces).tolist())
            if has_edge_dofs:
                enc = self.edges[:, 0] * nv + self.edges[:, 1]
                for a, b in ((0, 1), (0, 2), (1, 2)):
                    pairs = np.sort(faces[:, [a, b]], axis=1)
                    ids = np.searchsorted(enc, pairs[:, 0] * nv + pairs[:, 1])
                    dofs.update((nv + ids).tolist())
        else:
            bedges = self.mesh.boundary_edges
            dofs = set(np.unique(bedges).tolist())
            if has_edge_dofs:
                enc = self.edges[:, 0] * nv + self.edges[:, 1]
                ids = np.searchsorted(enc, bedges[:, 0] * nv + bedges[:, 1])
                dofs.update((nv + ids).tolist())
        return np.array(sorted(dofs), dtype=np.int64)

    def vector_dofs(self, scalar_dofs, comp=None) -> np.ndarray:
        """Expand scalar DOF ids to interleaved vector ids (all or one component)."""
        scalar_dofs = np.asarray(scalar_dofs, dtype=np.int64)
        if self.ncomp == 1:
            return scalar_dofs
        if comp is None:
            return (self.ncomp * scalar_dofs[:, None]
                    + np.arange(self.ncomp)[None, :]).ravel()
        return self.ncomp * scalar_dofs + comp

    # -- basis tables -------------------------------------------------------

    def tables(self, rule: QuadratureRule, order: int):
        """Per-cell basis tables at the rule's points.

        order 0: (nc, nq, nloc) values; 1: (nc, nq, nloc, dim) gradients;
        2: (nc, nloc, dim, dim) cell-constant Hessians (quadratic kinds).
        """
        nc = self.cells.shape[0]
        nq = rule.points.shape[0]
        if self.kind is ElementKind.MORLEY_TRI:
            coeffs = self._morley_coeffs
            if order == 0:
                mono = _mono2_values(self.physical_points(rule))
                return np.einsum("cqm,cmi->cqi", mono, coeffs)
            if order == 1:
                mono = _mono2_gradients(self.physical_points(rule))
                return np.einsum("cqmd,cmi->cqid", mono, coeffs)
            return np.einsum("mab,cmi->ciab", _MONO_HESS, coeffs)
        _, _, invjt, _ = self.geometry()
        if order == 0:
            ref = self.element.basis_values(rule.points)
            return np.broadcast_to(ref, (nc,) + ref.shape)
        if order == 1:
            ref = self.element.basis_gradients(rule.points)
            return np.einsum("cda,qia->cqid", invjt, ref)
        ref = self.element.basis_hessians(rule.points)[0]     # constant for P2
        return np.einsum("cda,iab,ceb->cide", invjt, ref, invjt)


@dataclass
class FeField:
    """A function space plus one coefficient per degree of freedom."""

    space: FunctionSpace
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (self.space.ndof,):
            raise ValueError(
                f"coefficient length {self.coeffs.shape} != space dim {self.space.ndof}")

    def cell_coeffs(self) -> np.ndarray:
        """Coefficients gathered per cell: (nc, nloc) or (nc, nloc, ncomp)."""
        if self.space.ncomp == 1:
            return self.coeffs[self.space.cell_dofs]
        per_scalar = self.coeffs.reshape(-1, self.space.ncomp)
        return per_scalar[self.space.cell_dofs]


def interpolate(space: FunctionSpace, value, gradient=None) -> FeField:
    """Nodal interpolation of an analytic field.

    ``value`` maps an (n, dim) point array to (n,) or (n, ncomp) values;
    Morley spaces additionally require ``gradient`` mapping to (n, 2).
    """
    if space.kind is ElementKind.MORLEY_TRI:
        if gradient is None:
            raise ValueError("Morley interpolation requires gradient data")
        nv = space.mesh.num_vertices
        coeffs = np.empty(space.ndof)
        coeffs[:nv] = np.asarray(value(space.mesh.vertices), dtype=float)
        mids = space.dof_points[nv:]
        grads = np.asarray(gradient(mids), dtype=float)
        coeffs[nv:] = np.einsum("ed,ed->e", grads, space.edge_normals)
        return FeField(space, coeffs)
    vals = np.asarray(value(space.dof_points), dtype=float)
    if space.ncomp == 1:
        if vals.shape != (space.ndof_scalar,):
            raise ValueError("value must return one scalar per DOF point")
        return FeField(space, vals)
    if vals.shape != (space.ndof_scalar, space.ncomp):
        raise ValueError("value must return one ncomp-vector per DOF point")
    return FeField(space, vals.reshape(-1))


def locate_cell(space: FunctionSpace, point, tol: float = 1e-10):
    """First cell containing the point, and the point's reference coordinates."""
    point = np.asarray(point, dtype=float)
    v0, _, invjt, _ = space.geometry()
    ref = np.einsum("cad,cd->ca", np.transpose(invjt, (0, 2, 1)), point - v0)
    lam0 = 1.0 - ref.sum(axis=1)
    inside = (ref.min(axis=1) >= -tol) & (lam0 >= -tol)
    hits = np.nonzero(inside)[0]
    if hits.size == 0:
        raise ValueError(f"point {point} lies outside the mesh")
    return int(hits[0]), ref[hits[0]]


def evaluate(field: FeField, point, order: int = 0):
    """Value (0), gradient (1) or Hessian (2) of a field at a physical point."""
    space = field.space
    cell, ref = locate_cell(space, point)
    dofs = space.cell_dofs[cell]
    if space.ncomp == 1:
        coeffs = field.coeffs[dofs]
    else:
        coeffs = field.coeffs.reshape(-1, space.ncomp)[dofs]
    if space.kind is ElementKind.MORLEY_TRI:
        pt = np.asarray(point, dtype=float)[None, :]
        cmat = space._morley_coeffs[cell]
        if order == 0:
            table = _mono2_values(pt) @ cmat
        elif order == 1:
            table = np.einsum("pmd,mi->pid", _mono2_gradients(pt), cmat)
        elif order == 2:
            table = np.einsum("mab,mi->iab", _MONO_HESS, cmat)[None]
        else:
            raise ValueError(f"derivative order must be 0, 1 or 2, got {order}")
        return np.einsum("i...,i->...", table[0], coeffs)
    elem = space.element
    _, _, invjt, _ = space.geometry()
    jt = invjt[cell]
    if order == 0:
        table = elem.basis_values(ref[None, :])[0]
    elif order == 1:
        table = elem.basis_gradients(ref[None, :])[0] @ jt.T
    elif order == 2:
        href = elem.basis_hessians(ref[None, :])[0]
        table = np.einsum("da,iab,eb->ide", jt, href, jt)
    else:
        raise ValueError(f"derivative order must be 0, 1 or 2, got {order}")
    return np.einsum("i...,i->...", table, coeffs) if space.ncomp == 1 else \
        np.einsum("i...,ik->k...", table, coeffs)


# ---------------------------------------------------------------------------
# assembly primitives (scalar spaces; see expand_vector for vector layout)


def _default_rule(space: FunctionSpace, degree=None) -> QuadratureRule:
    if degree is None:
        degree = TET_DEGREE if space.dim == 3 else TRI_DEGREE
    return make_quadrature("TET" if space.dim == 3 else "TRI", degree)


def _scatter(rows_dofs, cols_dofs, local, shape) -> sp.csr_matrix:
    nloc_r = rows_dofs.shape[1]
    nloc_c = cols_dofs.shape[1]
    rows = np.repeat(rows_dofs, nloc_c, axis=1).ravel()
    cols = np.tile(cols_dofs, (1, nloc_r)).ravel()
    mat = sp.coo_matrix((local.ravel(), (rows, cols)), shape=shape).tocsr()
    mat.sum_duplicates()
    mat.sort_indices()
    return mat


def assemble_mass(space: FunctionSpace, degree=None) -> sp.csr_matrix:
    """Scalar mass matrix (v, w)."""
    rule = _default_rule(space, degree)
    vals = space.tables(rule, 0)
    _, _, _, det = space.geometry()
    wdet = rule.weights[None, :] * det[:, None]
    local = np.einsum("cqi,cqj,cq->cij", vals, vals, wdet)
    n = space.ndof_scalar
    return _scatter(space.cell_dofs, space.cell_dofs, local, (n, n))


def assemble_stiffness(space: FunctionSpace, degree=None) -> sp.csr_matrix:
    """Scalar stiffness matrix (grad v, grad w)."""
    rule = _default_rule(space, degree)
    grads = space.tables(rule, 1)
    _, _, _, det = space.geometry()
    wdet = rule.weights[None, :] * det[:, None]
    local = np.einsum("cqid,cqjd,cq->cij", grads, grads, wdet)
    n = space.ndof_scalar
    return _scatter(space.cell_dofs, space.cell_dofs, local, (n, n))


def assemble_hessian_form(space: FunctionSpace) -> sp.csr_matrix:
    """Elementwise full-Hessian inner product; exact (Hessians are constant)."""
    hess = space.tables(make_quadrature("TRI" if space.dim == 2 else "TET", 2), 2)
    _, _, _, det = space.geometry()
    measure = det * (0.5 if space.dim == 2 else 1.0 / 6.0)
    local = np.einsum("ciab,cjab,c->cij", hess, hess, measure)
    n = space.ndof_scalar
    return _scatter(space.cell_dofs, space.cell_dofs, local, (n, n))


def assemble_mixed_mass(row_space: FunctionSpace, col_space: FunctionSpace,
                        degree=None) -> sp.csr_matrix:
    """Cross mass matrix (v_row, w_col) for two scalar spaces on one mesh."""
    if row_space.mesh is not col_space.mesh:
        raise ValueError("mixed mass requires spaces over the same mesh")
    rule = _default_rule(row_space, degree)
    rvals = row_space.tables(rule, 0)
    cvals = col_space.tables(rule, 0)
    _, _, _, det = row_space.geometry()
    wdet = rule.weights[None, :] * det[:, None]
    local = np.einsum("cqi,cqj,cq->cij", rvals, cvals, wdet)
    return _scatter(row_space.cell_dofs, col_space.cell_dofs, local,
                    (row_space.ndof_scalar, col_space.ndof_scalar))


def assemble_divergence(pressure_space: FunctionSpace,
                        velocity_space: FunctionSpace, degree=None) -> list[sp.csr_matrix]:
    """Blocks D_c with (D_c)[l, s] = (psi_l, d_c phi_s), one per component."""
    if pressure_space.mesh is not velocity_space.mesh:
        raise ValueError("divergence blocks require spaces over the same mesh")
    rule = _default_rule(pressure_space, degree)
    pvals = pressure_space.tables(rule, 0)
    vgrads = velocity_space.tables(rule, 1)
    _, _, _, det = pressure_space.geometry()
    wdet = rule.weights[None, :] * det[:, None]
    shape = (pressure_space.ndof_scalar, velocity_space.ndof_scalar)
    blocks = []
    for comp in range(velocity_space.dim):
        local = np.einsum("cql,cqs,cq->cls", pvals, vgrads[..., comp], wdet)
        blocks.append(_scatter(pressure_space.cell_dofs, velocity_space.cell_dofs,
                               local, shape))
    return blocks


def assemble_load(space: FunctionSpace, value, degree=None) -> np.ndarray:
    """Load vector (f, phi_i); vector spaces expect (n, ncomp) values."""
    rule = _default_rule(space, degree)
    vals = space.tables(rule, 0)
    _, _, _, det = space.geometry()
    wdet = rule.weights[None, :] * det[:, None]
    pts = space.physical_points(rule)
    nc, nq = wdet.shape
    fvals = np.asarray(value(pts.reshape(-1, space.dim)), dtype=float)
    out = np.zeros(space.ndof)
    if space.ncomp == 1:
        local = np.einsum("cqi,cq,cq->ci", vals, fvals.reshape(nc, nq), wdet)
        np.add.at(out, space.cell_dofs, local)
        return out
    fvals = fvals.reshape(nc, nq, space.ncomp)
    for comp in range(space.ncomp):
        local = np.einsum("cqi,cq,cq->ci", vals, fvals[..., comp], wdet)
        np.add.at(out, space.ncomp * space.cell_dofs + comp, local)
    return out


def integral_vector(space: FunctionSpace, degree=None) -> np.ndarray:
    """Integrals of the scalar basis functions (the 'mean value' functional)."""
    rule = _default_rule(space, degree)
    vals = space.tables(rule, 0)
    _, _, _, det = space.geometry()
    wdet = rule.weights[None, :] * det[:, None]
    out = np.zeros(space.ndof_scalar)
    np.add.at(out, space.cell_dofs, np.einsum("cqi,cq->ci", vals, wdet))
    return out


def expand_vector(scalar_mat: sp.spmatrix, ncomp: int) -> sp.csr_matrix:
    """Lift a scalar bilinear form to the interleaved vector layout."""
    return sp.kron(scalar_mat, sp.eye(ncomp), format="csr")


def divergence_matrix(blocks: list[sp.csr_matrix]) -> sp.csr_matrix:
    """Combine per-component divergence blocks into (l, div v) over vector DOFs."""
    ncomp = len(blocks)
    parts = []
    for comp, block in enumerate(blocks):
        sel = sp.csr_matrix(([1.0], ([0], [comp])), shape=(1, ncomp))
        parts.append(sp.kron(block, sel, format="csr"))
    total = parts[0]
    for part in parts[1:]:
        total = total + part
    return total.tocsr()


def plate_trace_scalar_map(space3d: FunctionSpace, space2d: FunctionSpace,
                           trace) -> np.ndarray:
    """For each scalar DOF of the 2D plate space, its scalar DOF in the 3D space.

    Vertex DOFs map through the trace vertex bijection; edge DOFs (P2) map
    through the induced edge bijection.  Raises if a plate DOF has no image.
    """
    nv3 = space3d.mesh.num_vertices
    nv2 = space2d.mesh.num_vertices
    out = np.empty(space2d.ndof_scalar, dtype=np.int64)
    out[:nv2] = trace.vertex_to_3d
    if space2d.ndof_scalar > nv2:
        if space3d.kind is ElementKind.P1_TET:
            raise ValueError("3D space has no edge DOFs to carry the 2D edge DOFs")
        pairs3 = np.sort(trace.vertex_to_3d[space2d.edges], axis=1)
        enc3 = space3d.edges[:, 0] * nv3 + space3d.edges[:, 1]
        want = pairs3[:, 0] * nv3 + pairs3[:, 1]
        ids = np.searchsorted(enc3, want)
        if np.any(ids >= enc3.size) or np.any(enc3[np.minimum(ids, enc3.size - 1)] != want):
            raise ValueError("a plate edge DOF has no matching 3D edge")
        out[nv2:] = nv3 + ids
    return out
