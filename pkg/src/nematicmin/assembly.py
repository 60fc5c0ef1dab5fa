"""Gradients and Newton systems for the penalty, Lagrangian and flexoelectric
formulations.

Everything is assembled from a per-quadrature-point kernel. At each point the
local state is the vector

    q = (n1, n2, n3, c1, c2, c3, d[, phi_x, phi_y])

with ``c = curl n`` and ``d = div n``. A linear operator ``B`` (identical on
every cell of a structured mesh) maps the local element coefficients to ``q``.
A bilinear form is then a ``q``-space matrix ``H`` with ``a(du, v) = qv^T H qdu``
and the element matrix is ``sum_q w_q B^T H B``.

Dirichlet DOFs are eliminated: systems live on the free DOFs only, ordered
node-major for the director (and potential), followed by one multiplier per
cell.
"""
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
import scipy.sparse as sp

from .mesh import DEFAULT_QUADRATURE, FESpace, quadrature_data

# slots in the local state vector
N_ = slice(0, 3)
C_ = slice(3, 6)
D_ = 6
G_ = slice(7, 9)

CHUNK = 8192


def _skew(a):
    """S(a) with S(a) b = a x b, for stacked vectors."""
    S = np.zeros(a.shape + (3,))
    S[..., 0, 1], S[..., 0, 2] = -a[..., 2], a[..., 1]
    S[..., 1, 0], S[..., 1, 2] = a[..., 2], -a[..., 0]
    S[..., 2, 0], S[..., 2, 1] = -a[..., 1], a[..., 0]
    return S


class DofMap:
    """Element-to-global DOF maps and a fixed sparsity pattern for one mesh.

    ``ncomp`` is 3 (director) or 4 (director and potential collocated per node).
    """

    def __init__(self, mesh, ncomp=3, order=DEFAULT_QUADRATURE):
        self.mesh = mesh
        self.ncomp = ncomp
        self.order = order
        self.space = FESpace(mesh, "Q2", ncomp)

    @cached_property
    def qd(self):
        return quadrature_data(self.mesh, self.order)

    @property
    def nquant(self):
        return 9 if self.ncomp == 4 else 7

    @cached_property
    def B(self):
        """Map from local coefficients to the local state, ``(nq, nquant, 9*ncomp)``."""
        qd, nc = self.qd, self.ncomp
        nq = len(qd.w)
        B = np.zeros((nq, self.nquant, 9 * nc))
        for a in range(9):
            for i in range(3):
                B[:, i, a * nc + i] = qd.N[:, a]
            B[:, 3, a * nc + 2] = qd.dNy[:, a]
            B[:, 4, a * nc + 2] = -qd.dNx[:, a]
            B[:, 5, a * nc + 1] = qd.dNx[:, a]
            B[:, 5, a * nc + 0] = -qd.dNy[:, a]
            B[:, 6, a * nc + 0] = qd.dNx[:, a]
            B[:, 6, a * nc + 1] = qd.dNy[:, a]
            if nc == 4:
                B[:, 7, a * nc + 3] = qd.dNx[:, a]
                B[:, 8, a * nc + 3] = qd.dNy[:, a]
        return B

    @cached_property
    def elem_dofs(self):
        cn = self.space.cell_nodes
        return (cn[:, :, None] * self.ncomp + np.arange(self.ncomp)).reshape(len(cn), -1)

    @cached_property
    def free(self):
        """Global indices of free (non-Dirichlet) u-DOFs."""
        return np.flatnonzero(~self.space.boundary_dofs)

    @cached_property
    def free_index(self):
        """Global u-DOF -> position among free DOFs (-1 if constrained)."""
        idx = -np.ones(self.space.dof_count, dtype=np.int64)
        idx[self.free] = np.arange(len(self.free))
        return idx

    @property
    def n_free(self):
        return len(self.free)

    @property
    def n_lambda(self):
        return self.mesh.n_cells

    @cached_property
    def _uu_pattern(self):
        fe = self.free_index[self.elem_dofs]
        L = fe.shape[1]
        rows = np.repeat(fe, L, axis=1).ravel()
        cols = np.tile(fe, (1, L)).ravel()
        keep = (rows >= 0) & (cols >= 0)
        nf = self.n_free
        keys = rows[keep] * nf + cols[keep]
        ukeys, pos = np.unique(keys, return_inverse=True)
        indptr = np.searchsorted(ukeys // nf, np.arange(nf + 1))
        return keep, pos, ukeys % nf, indptr, len(ukeys)

    def scatter_matrix(self, Ke):
        """Sum element matrices ``(E, L, L)`` into a free-DOF CSR matrix."""
        keep, pos, indices, indptr, nnz = self._uu_pattern
        data = np.bincount(pos, weights=Ke.reshape(-1)[keep], minlength=nnz)
        return sp.csr_matrix((data, indices.copy(), indptr.copy()), shape=(self.n_free, self.n_free))

    def scatter_vector(self, Fe):
        """Sum element vectors ``(E, L)`` into a full-length u vector."""
        return np.bincount(self.elem_dofs.ravel(), weights=Fe.ravel(), minlength=self.space.dof_count)

    def coupling_matrix(self, Be):
        """u-lambda block from per-cell vectors ``(E, L)`` (free rows only)."""
        fe = self.free_index[self.elem_dofs]
        cells = np.repeat(np.arange(self.mesh.n_cells), fe.shape[1])
        rows = fe.ravel()
        keep = rows >= 0
        return sp.csr_matrix((Be.ravel()[keep], (rows[keep], cells[keep])),
                             shape=(self.n_free, self.n_lambda))

    def local_state(self, u_full, cells=slice(None)):
        """Local state q at every quadrature point of the given cells."""
        Ue = np.asarray(u_full)[self.elem_dofs[cells]]
        return np.einsum("qkl,el->eqk", self.B, Ue)

    def director_values(self, u_full, cells=slice(None)):
        Ue = np.asarray(u_full)[self.elem_dofs[cells]]
        nc = self.ncomp
        Ue = Ue.reshape(len(Ue), 9, nc)[:, :, :3]
        return np.einsum("qa,eai->eqi", self.qd.N, Ue)


@lru_cache(maxsize=32)
def dof_map(mesh, ncomp=3, order=DEFAULT_QUADRATURE):
    return DofMap(mesh, ncomp, order)


# ---------------------------------------------------------------------------
# pointwise kernels


@dataclass(frozen=True)
class Formulation:
    """Which terms enter the minimized functional.

    ``zeta`` adds the penalty, ``multiplier`` adds the Lagrange term and
    ``ec`` adds the electric/flexoelectric coupling (requires ncomp=4).
    """
    fc: object
    zeta: float = 0.0
    multiplier: bool = False
    ec: object = None

    @property
    def ncomp(self):
        return 4 if self.ec is not None else 3


def pointwise_gradient(q, form, lam=None):
    """Derivative of the integrand with respect to the local state."""
    fc = form.fc
    n, c, d = q[..., N_], q[..., C_], q[..., D_]
    s = np.einsum("...i,...i->...", n, c)
    G = np.zeros_like(q)
    # 2K3 Z c = 2K3 c + 2(K2 - K3) (n.c) n
    G[..., C_] = 2 * fc.K3 * c + 2 * (fc.K2 - fc.K3) * s[..., None] * n
    G[..., N_] = 2 * (fc.K2 - fc.K3) * s[..., None] * c
    G[..., D_] = 2 * fc.K1 * d
    if form.zeta:
        nn = np.einsum("...i,...i->...", n, n)
        G[..., N_] += 4 * form.zeta * (nn - 1.0)[..., None] * n
    if lam is not None:
        G[..., N_] += 2 * lam[..., None] * n
    if form.ec is not None:
        ec = form.ec
        g = np.zeros(q.shape[:-1] + (3,))
        g[..., :2] = q[..., G_]
        ng = np.einsum("...i,...i->...", n, g)
        G[..., N_] += (-2 * ec.eps0 * ec.eps_a * ng[..., None] * g
                       + 2 * ec.e_s * d[..., None] * g + 2 * ec.e_b * np.cross(c, g))
        G[..., C_] += 2 * ec.e_b * np.cross(g, n)
        G[..., D_] += 2 * ec.e_s * ng
        Gg = (-2 * ec.eps0 * ec.eps_perp * g - 2 * ec.eps0 * ec.eps_a * ng[..., None] * n
              + 2 * ec.e_s * d[..., None] * n + 2 * ec.e_b * np.cross(n, c))
        G[..., G_] = Gg[..., :2]
    return G


def pointwise_hessian(q, form, lam=None):
    """Second derivative of the integrand in the local state, ``(..., K, K)``.

    Rows index the test-function side, columns the update side. The elastic and
    penalty parts follow the printed penalty linearization term by term.
    """
    fc = form.fc
    n, c = q[..., N_], q[..., C_]
    K = q.shape[-1]
    H = np.zeros(q.shape + (K,))
    eye = np.eye(3)
    s = np.einsum("...i,...i->...", n, c)[..., None, None]
    nc = n[..., :, None] * c[..., None, :]
    # 2K1 (div du, div v)
    H[..., D_, D_] = 2 * fc.K1
    # 2K3 (Z(n) curl du, curl v)
    H[..., C_, C_] = 2 * fc.K3 * (eye - (1 - fc.kappa) * n[..., :, None] * n[..., None, :])
    k23 = 2 * (fc.K2 - fc.K3)
    # (du . curl v)(n . curl n) + (n . curl v)(du . curl n)
    H[..., C_, N_] = k23 * (s * eye + nc)
    # (n . curl n)(v . curl du) + (n . curl du)(v . curl n)
    H[..., N_, C_] = k23 * (s * eye + np.swapaxes(nc, -1, -2))
    # (du . curl n)(v . curl n)
    H[..., N_, N_] = k23 * c[..., :, None] * c[..., None, :]
    if form.zeta:
        nn = np.einsum("...i,...i->...", n, n)[..., None, None]
        H[..., N_, N_] += 4 * form.zeta * ((nn - 1.0) * eye + 2 * n[..., :, None] * n[..., None, :])
    if lam is not None:
        H[..., N_, N_] += 2 * lam[..., None, None] * eye
    if form.ec is not None:
        ec = form.ec
        d = q[..., D_]
        g = np.zeros(q.shape[:-1] + (3,))
        g[..., :2] = q[..., G_]
        ng = np.einsum("...i,...i->...", n, g)[..., None, None]
        Hng = (-2 * ec.eps0 * ec.eps_a * (g[..., :, None] * n[..., None, :] + ng * eye)
               + 2 * ec.e_s * d[..., None, None] * eye + 2 * ec.e_b * _skew(c))[..., :, :2]
        Hnc = -2 * ec.e_b * _skew(g)
        Hcg = (-2 * ec.e_b * _skew(n))[..., :, :2]
        Hnd = 2 * ec.e_s * g
        Hdg = 2 * ec.e_s * n[..., :2]
        Hgg = (-2 * ec.eps0 * ec.eps_perp * eye
               - 2 * ec.eps0 * ec.eps_a * n[..., :, None] * n[..., None, :])[..., :2, :2]
        H[..., N_, N_] += -2 * ec.eps0 * ec.eps_a * g[..., :, None] * g[..., None, :]
        H[..., N_, G_] += Hng
        H[..., G_, N_] += np.swapaxes(Hng, -1, -2)
        H[..., N_, C_] += Hnc
        H[..., C_, N_] += np.swapaxes(Hnc, -1, -2)
        H[..., C_, G_] += Hcg
        H[..., G_, C_] += np.swapaxes(Hcg, -1, -2)
        H[..., N_, D_] += Hnd
        H[..., D_, N_] += Hnd
        H[..., D_, G_] += Hdg
        H[..., G_, D_] += Hdg
        H[..., G_, G_] += Hgg
    return H


# ---------------------------------------------------------------------------
# global assembly


def _lam_at_quadrature(lam, cells, nq):
    if lam is None:
        return None
    return np.repeat(np.asarray(lam)[cells][:, None], nq, axis=1)


def assemble_gradient(form, dm, u_full, lam=None):
    """Full-length derivative of the functional (Dirichlet rows included) and,
    when ``lam`` is given, the multiplier residual ``(gamma, n.n - 1)`` per cell."""
    E = dm.mesh.n_cells
    nq = len(dm.qd.w)
    BW = dm.B * dm.qd.w[:, None, None]
    Fe = np.empty((E, dm.B.shape[2]))
    for start in range(0, E, CHUNK):
        cells = slice(start, min(start + CHUNK, E))
        q = dm.local_state(u_full, cells)
        G = pointwise_gradient(q, form, _lam_at_quadrature(lam, cells, nq))
        Fe[cells] = np.einsum("qkl,eqk->el", BW, G)
    grad = dm.scatter_vector(Fe)
    if lam is None:
        return grad, None
    n = dm.director_values(u_full)
    c_res = np.einsum("eq,q->e", np.einsum("eqi,eqi->eq", n, n) - 1.0, dm.qd.w)
    return grad, c_res


def assemble_hessian_matrix(form, dm, u_full, lam=None):
    """Free-DOF matrix of the second derivative in u (director and potential)."""
    E = dm.mesh.n_cells
    nq, K, L = dm.B.shape
    BWt = (dm.B * dm.qd.w[:, None, None]).transpose(2, 0, 1).reshape(L, nq * K)
    Ke = np.empty((E, L, L))
    for start in range(0, E, CHUNK):
        cells = slice(start, min(start + CHUNK, E))
        q = dm.local_state(u_full, cells)
        H = pointwise_hessian(q, form, _lam_at_quadrature(lam, cells, nq))
        T = np.matmul(H, dm.B[None])  # (e, nq, K, L)
        Ke[cells] = np.matmul(BWt[None], T.reshape(len(T), nq * K, L))
    return dm.scatter_matrix(Ke)


def assemble_multiplier_coupling(dm, u_full):
    """B2 block: entry (v, gamma) = 2 (gamma, n . v) with P0 gamma."""
    n = dm.director_values(u_full)
    nc = dm.ncomp
    E = dm.mesh.n_cells
    Be = np.zeros((E, 9, nc))
    Be[:, :, :3] = 2 * np.einsum("q,qa,eqi->eai", dm.qd.w, dm.qd.N, n)
    return dm.coupling_matrix(Be.reshape(E, -1))


@dataclass
class BlockSystem:
    """A Newton system on the free DOFs.

    The unknown is ordered ``[u_free, lambda]`` where ``u_free`` holds the free
    director DOFs (3 per node) or director+potential DOFs (4 per node),
    node-major. ``rhs`` is minus the gradient of the Lagrangian (or penalty
    functional).
    """
    matrix: sp.csr_matrix
    rhs: np.ndarray
    dofmap: DofMap
    n_lambda: int

    @property
    def n_u(self):
        return self.dofmap.n_free

    @property
    def ncomp(self):
        return self.dofmap.ncomp

    @property
    def shape(self):
        return self.matrix.shape

    @property
    def nnz(self):
        return self.matrix.nnz

    @cached_property
    def _comp(self):
        return self.dofmap.free % self.ncomp

    @property
    def director_idx(self):
        return np.flatnonzero(self._comp < 3)

    @property
    def potential_idx(self):
        return np.flatnonzero(self._comp == 3)

    @property
    def lambda_idx(self):
        return self.n_u + np.arange(self.n_lambda)

    def _block(self, rows, cols):
        return self.matrix[rows][:, cols]

    @property
    def A_hat(self):
        return self._block(np.arange(self.n_u), np.arange(self.n_u))

    @property
    def B_hat(self):
        return self._block(np.arange(self.n_u), self.lambda_idx)

    @property
    def A(self):
        return self._block(self.director_idx, self.director_idx)

    @property
    def B1(self):
        return self._block(self.director_idx, self.potential_idx)

    @property
    def B2(self):
        return self._block(self.director_idx, self.lambda_idx)

    @property
    def D(self):
        """Potential block, stored positive; it enters the system as -D."""
        return -self._block(self.potential_idx, self.potential_idx)

    @property
    def f_n(self):
        return self.rhs[self.director_idx]

    @property
    def f_phi(self):
        return self.rhs[self.potential_idx]

    @property
    def f_lambda(self):
        return self.rhs[self.n_u:]

    def split(self, x):
        """Scatter a system-sized vector into (full-length u update, lambda update)."""
        du = np.zeros(self.dofmap.space.dof_count)
        du[self.dofmap.free] = x[:self.n_u]
        return du, x[self.n_u:]


def assemble_saddle(form, dm, u_full, lam):
    Kuu = assemble_hessian_matrix(form, dm, u_full, lam)
    B = assemble_multiplier_coupling(dm, u_full)
    grad, c_res = assemble_gradient(form, dm, u_full, lam)
    M = sp.bmat([[Kuu, B], [B.T, None]], format="csr")
    rhs = -np.concatenate([grad[dm.free], c_res])
    return BlockSystem(M, rhs, dm, dm.n_lambda)


# ---------------------------------------------------------------------------
# public operations on director fields


def _penalty_form(fc, pc):
    zeta = pc if isinstance(pc, (int, float)) else pc.zeta
    return Formulation(fc, zeta=float(zeta))


def assemble_penalty_gradient(n, fc, pc, space):
    """Derivative of the penalty functional, full length, zero at Dirichlet DOFs."""
    dm = dof_map(space.mesh, 3)
    grad, _ = assemble_gradient(_penalty_form(fc, pc), dm, np.ravel(n))
    grad[space.boundary_dofs] = 0.0
    return grad


def assemble_penalty_hessian(n, fc, pc, space):
    """Penalty Hessian on the free DOFs; ``pc`` may be a PenaltyConfig or a
    float (0 gives the elastic-only Hessian)."""
    dm = dof_map(space.mesh, 3)
    return assemble_hessian_matrix(_penalty_form(fc, pc), dm, np.ravel(n))


def assemble_lagrangian_system(n, lam, fc, space):
    dm = dof_map(space.mesh, 3)
    return assemble_saddle(Formulation(fc, multiplier=True), dm, np.ravel(n), np.asarray(lam, float))


def pack_flexo(n, phi):
    """Interleave a director (nodes, 3) and potential (nodes,) into 4 DOFs per node."""
    n = np.asarray(n, float).reshape(-1, 3)
    phi = np.asarray(phi, float).reshape(-1)
    if len(n) != len(phi):
        raise ValueError("director and potential must live on the same Q2 nodes")
    return np.column_stack([n, phi]).ravel()


def unpack_flexo(u):
    u = np.asarray(u).reshape(-1, 4)
    return u[:, :3].ravel(), u[:, 3].copy()


def assemble_flexo_system(n, phi, lam, fc, ec, nspace, pspace):
    if nspace.mesh != pspace.mesh:
        raise ValueError("director and potential spaces must share a mesh")
    dm = dof_map(nspace.mesh, 4)
    form = Formulation(fc, multiplier=True, ec=ec)
    return assemble_saddle(form, dm, pack_flexo(n, phi), np.asarray(lam, float))


def fd_gradient(functional, x, eps=1e-6, idx=None):
    """Central-difference gradient of ``functional`` at ``x`` (test oracle)."""
    x = np.array(x, dtype=float)
    idx = range(len(x)) if idx is None else idx
    g = np.zeros(len(x))
    for i in idx:
        old = x[i]
        x[i] = old + eps
        fp = functional(x)
        x[i] = old - eps
        fm = functional(x)
        x[i] = old
        g[i] = (fp - fm) / (2 * eps)
    return g


def write_coo(matrix, path):
    """Dump a sparse matrix as ``row col value`` lines."""
    m = sp.coo_matrix(matrix)
    np.savetxt(path, np.column_stack([m.row, m.col, m.data]), fmt=["%d", "%d", "%.17g"])
