"""Structured quadrilateral meshes on the unit square with Q2 and P0 spaces.

Meshes are periodic in x (optionally) and carry Dirichlet data on the y-edges.
All cells are axis-aligned rectangles of size ``1/nx`` by ``1/ny``, so every
reference-to-physical map is a pure scaling and shape-function tables are shared
by all cells.
"""
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class Mesh:
    nx: int
    ny: int
    periodic_x: bool = True
    level: int = 0

    @property
    def hx(self):
        return 1.0 / self.nx

    @property
    def hy(self):
        return 1.0 / self.ny

    @property
    def n_cells(self):
        return self.nx * self.ny

    @property
    def cell_area(self):
        return self.hx * self.hy

    def vertices(self):
        """Vertex coordinates, shape ``((nx+1)*(ny+1), 2)``, x fastest."""
        x = np.arange(self.nx + 1) / self.nx
        y = np.arange(self.ny + 1) / self.ny
        X, Y = np.meshgrid(x, y)
        return np.column_stack([X.ravel(), Y.ravel()])

    def cell_origins(self):
        """Lower-left corner of every cell in lexicographic (x fastest) order."""
        cx, cy = np.meshgrid(np.arange(self.nx), np.arange(self.ny))
        return np.column_stack([cx.ravel() * self.hx, cy.ravel() * self.hy])

    def parent_cells(self):
        """Index of the parent cell (on the mesh one level coarser) of each cell."""
        if self.nx % 2 or self.ny % 2:
            raise ValueError("mesh is not the refinement of a coarser mesh")
        cx, cy = np.meshgrid(np.arange(self.nx), np.arange(self.ny))
        return ((cy // 2) * (self.nx // 2) + cx // 2).ravel()


def build_mesh(nx, ny, periodic_x=True):
    if nx < 1 or ny < 1:
        raise ValueError(f"cell counts must be positive, got ({nx}, {ny})")
    return Mesh(int(nx), int(ny), bool(periodic_x), 0)


def refine(mesh):
    """Uniform refinement: every cell is split into four children."""
    return Mesh(2 * mesh.nx, 2 * mesh.ny, mesh.periodic_x, mesh.level + 1)


def mesh_hierarchy(coarse_n, levels, periodic_x=True):
    meshes = [build_mesh(coarse_n, coarse_n, periodic_x)]
    for _ in range(levels - 1):
        meshes.append(refine(meshes[-1]))
    return meshes


# ---------------------------------------------------------------------------
# quadrature and reference basis


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray  # (nq, 2) on the unit reference cell
    weights: np.ndarray  # (nq,)
    degree: int

    def __hash__(self):
        return hash((self.degree, len(self.weights)))

    def __eq__(self, other):
        return isinstance(other, QuadratureRule) and self.degree == other.degree


@lru_cache(maxsize=None)
def quadrature(order=5):
    """Tensor Gauss rule on [0, 1]^2 exact for polynomials of degree ``order``
    in each variable."""
    if order < 1:
        raise ValueError("quadrature order must be >= 1")
    npts = (order + 2) // 2
    t, w = np.polynomial.legendre.leggauss(npts)
    t = 0.5 * (t + 1.0)
    w = 0.5 * w
    X, Y = np.meshgrid(t, t)
    WX, WY = np.meshgrid(w, w)
    pts = np.column_stack([X.ravel(), Y.ravel()])
    pts.setflags(write=False)
    wts = (WX * WY).ravel()
    wts.setflags(write=False)
    return QuadratureRule(pts, wts, 2 * npts - 1)


DEFAULT_QUADRATURE = 5


def _lagrange_1d(t):
    t = np.asarray(t, dtype=float)
    vals = np.stack([2 * (t - 0.5) * (t - 1), -4 * t * (t - 1), 2 * t * (t - 0.5)], -1)
    ders = np.stack([4 * t - 3, -8 * t + 4, 4 * t - 1], -1)
    return vals, ders


def q2_basis(xi, eta):
    """Q2 shape functions and reference derivatives at points (xi, eta).

    Local node ``3*b + a`` sits at ``(a/2, b/2)``. Returns arrays of shape
    ``(..., 9)`` for values, d/dxi and d/deta.
    """
    lx, dx = _lagrange_1d(xi)
    ly, dy = _lagrange_1d(eta)
    val = (ly[..., :, None] * lx[..., None, :]).reshape(*lx.shape[:-1], 9)
    dxi = (ly[..., :, None] * dx[..., None, :]).reshape(*lx.shape[:-1], 9)
    deta = (dy[..., :, None] * lx[..., None, :]).reshape(*lx.shape[:-1], 9)
    return val, dxi, deta


# ---------------------------------------------------------------------------
# finite element spaces


class FESpace:
    """Q2 (scalar or vector) or P0 space on a :class:`Mesh`.

    Q2 DOFs are numbered node-major: ``dof = node * ncomp + comp``. Nodes are
    ordered x fastest on the ``(2nx [+1]) x (2ny + 1)`` lattice; with periodic x
    the column at x=1 aliases the column at x=0.
    """

    def __init__(self, mesh, family="Q2", ncomp=1):
        if family not in ("Q2", "P0"):
            raise ValueError(f"unknown family {family!r}")
        self.mesh = mesh
        self.family = family
        self.ncomp = ncomp

    def __repr__(self):
        return f"FESpace({self.mesh.nx}x{self.mesh.ny}, {self.family}, ncomp={self.ncomp})"

    def __eq__(self, other):
        return (isinstance(other, FESpace) and self.mesh == other.mesh
                and self.family == other.family and self.ncomp == other.ncomp)

    def __hash__(self):
        return hash((self.mesh, self.family, self.ncomp))

    @property
    def nodes_x(self):
        m = self.mesh
        return 2 * m.nx if m.periodic_x else 2 * m.nx + 1

    @property
    def nodes_y(self):
        return 2 * self.mesh.ny + 1

    @property
    def n_nodes(self):
        if self.family == "P0":
            return self.mesh.n_cells
        return self.nodes_x * self.nodes_y

    @property
    def dof_count(self):
        return self.n_nodes * self.ncomp

    @cached_property
    def node_coords(self):
        m = self.mesh
        if self.family == "P0":
            return m.cell_origins() + 0.5 * np.array([m.hx, m.hy])
        x = np.arange(self.nodes_x) / (2 * m.nx)
        y = np.arange(self.nodes_y) / (2 * m.ny)
        X, Y = np.meshgrid(x, y)
        return np.column_stack([X.ravel(), Y.ravel()])

    @cached_property
    def cell_nodes(self):
        """Global node index of each local node, shape ``(n_cells, 9)`` (Q2) or
        ``(n_cells, 1)`` (P0)."""
        m = self.mesh
        if self.family == "P0":
            return np.arange(m.n_cells)[:, None]
        cx, cy = np.meshgrid(np.arange(m.nx), np.arange(m.ny))
        cx, cy = cx.ravel(), cy.ravel()
        a = np.tile(np.arange(3), 3)
        b = np.repeat(np.arange(3), 3)
        i = 2 * cx[:, None] + a[None, :]
        j = 2 * cy[:, None] + b[None, :]
        if m.periodic_x:
            i = i % self.nodes_x
        return j * self.nodes_x + i

    @cached_property
    def boundary_nodes(self):
        """Mask of Dirichlet nodes: the y-edges, plus the x-edges when the mesh
        is not periodic."""
        if self.family == "P0":
            return np.zeros(self.n_nodes, dtype=bool)
        xy = self.node_coords
        mask = (xy[:, 1] == 0.0) | (xy[:, 1] == 1.0)
        if not self.mesh.periodic_x:
            mask |= (xy[:, 0] == 0.0) | (xy[:, 0] == 1.0)
        return mask

    @cached_property
    def boundary_dofs(self):
        return np.repeat(self.boundary_nodes, self.ncomp)

    def evaluate(self, coeffs, points):
        """Evaluate the FE function at physical points, shape ``(npts, ncomp)``."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        m = self.mesh
        U = np.asarray(coeffs, dtype=float).reshape(self.n_nodes, self.ncomp)
        x = pts[:, 0] % 1.0 if m.periodic_x else pts[:, 0]
        cx = np.clip(np.floor(x * m.nx).astype(int), 0, m.nx - 1)
        cy = np.clip(np.floor(pts[:, 1] * m.ny).astype(int), 0, m.ny - 1)
        cells = cy * m.nx + cx
        if self.family == "P0":
            return U[cells]
        xi = x * m.nx - cx
        eta = pts[:, 1] * m.ny - cy
        val, _, _ = q2_basis(xi, eta)
        return np.einsum("pa,pac->pc", val, U[self.cell_nodes[cells]])

    def interpolate_function(self, func):
        """Nodal interpolant of ``func(x, y) -> (..., ncomp)`` as a flat vector."""
        xy = self.node_coords
        vals = np.asarray(func(xy[:, 0], xy[:, 1]), dtype=float)
        return vals.reshape(self.n_nodes, self.ncomp).ravel()


@dataclass
class QuadratureData:
    """Shape-function tables at quadrature points, shared by all cells."""
    N: np.ndarray  # (nq, 9)
    dNx: np.ndarray  # (nq, 9) physical x-derivative
    dNy: np.ndarray  # (nq, 9)
    w: np.ndarray  # (nq,) physical weights (include cell area)
    rule: QuadratureRule


@lru_cache(maxsize=None)
def quadrature_data(mesh, order=DEFAULT_QUADRATURE):
    rule = quadrature(order)
    N, dxi, deta = q2_basis(rule.points[:, 0], rule.points[:, 1])
    return QuadratureData(N, dxi / mesh.hx, deta / mesh.hy, rule.weights * mesh.cell_area, rule)


def quadrature_points(mesh, order=DEFAULT_QUADRATURE):
    """Physical coordinates of all quadrature points, shape ``(n_cells, nq, 2)``."""
    rule = quadrature(order)
    org = mesh.cell_origins()
    return org[:, None, :] + rule.points[None, :, :] * np.array([mesh.hx, mesh.hy])


def values_at_quadrature(space, coeffs, order=DEFAULT_QUADRATURE):
    """Values and physical gradients of a Q2 field at every quadrature point.

    Returns ``(u, ux, uy)`` each of shape ``(n_cells, nq, ncomp)``.
    """
    qd = quadrature_data(space.mesh, order)
    U = np.asarray(coeffs, dtype=float).reshape(space.n_nodes, space.ncomp)[space.cell_nodes]
    u = np.einsum("qa,eac->eqc", qd.N, U)
    ux = np.einsum("qa,eac->eqc", qd.dNx, U)
    uy = np.einsum("qa,eac->eqc", qd.dNy, U)
    return u, ux, uy


# ---------------------------------------------------------------------------
# inter-level transfer


def _check_pair(coarse, fine):
    if coarse.family != fine.family or coarse.ncomp != fine.ncomp:
        raise ValueError("coarse and fine spaces must share family and components")
    cm, fm = coarse.mesh, fine.mesh
    if (fm.nx, fm.ny) != (2 * cm.nx, 2 * cm.ny) or cm.periodic_x != fm.periodic_x:
        raise ValueError("fine space must live on the uniform refinement of the coarse mesh")


@lru_cache(maxsize=None)
def interpolation_matrix(coarse, fine):
    """Sparse matrix mapping coarse coefficients to fine coefficients.

    Q2 spaces are nested under uniform refinement, so the fine interpolant of a
    coarse function reproduces it exactly. P0 uses injection (child <- parent).
    """
    _check_pair(coarse, fine)
    if fine.family == "P0":
        parents = fine.mesh.parent_cells()
        P = sp.csr_matrix((np.ones(len(parents)), (np.arange(len(parents)), parents)),
                          shape=(fine.n_nodes, coarse.n_nodes))
    else:
        cm = coarse.mesh
        xy = fine.node_coords
        cx = np.minimum(np.floor(xy[:, 0] * cm.nx).astype(int), cm.nx - 1)
        cy = np.minimum(np.floor(xy[:, 1] * cm.ny).astype(int), cm.ny - 1)
        xi = xy[:, 0] * cm.nx - cx
        eta = xy[:, 1] * cm.ny - cy
        val, _, _ = q2_basis(xi, eta)
        cols = coarse.cell_nodes[cy * cm.nx + cx]
        rows = np.repeat(np.arange(len(xy)), 9)
        val = np.where(np.abs(val) < 1e-14, 0.0, val)
        P = sp.csr_matrix((val.ravel(), (rows, cols.ravel())), shape=(fine.n_nodes, coarse.n_nodes))
        P.eliminate_zeros()
    if fine.ncomp > 1:
        P = sp.kron(P, sp.identity(fine.ncomp), format="csr")
    return P


def interpolate(coarse_field, coarse, fine):
    """Transfer a coefficient vector from ``coarse`` to its refinement ``fine``."""
    return interpolation_matrix(coarse, fine) @ np.asarray(coarse_field, dtype=float).ravel()
