"""Linear solvers for the Newton systems.

Two backends are provided: a sparse LU factorization (UMFPACK through a small
ctypes binding when the system library works, SuperLU otherwise) and a
geometric multigrid for the saddle-point systems that uses Braess-Sarazin
relaxation as its smoother.

The saddle-point systems have the form::

    [ A_hat  B_hat ] [u]   [f_u]
    [ B_hat^T  0   ] [l] = [f_l]

where ``A_hat`` holds the director block (and, for the flexoelectric problem,
the director/potential coupling and the ``-D`` potential block) and ``B_hat``
couples the free u-DOFs to the cellwise multipliers.
"""
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import _umfpack
from .assembly import BlockSystem, dof_map
from .mesh import FESpace, interpolation_matrix


class LinearSolverError(RuntimeError):
    """A factorization or iterative solve broke down."""


# ---------------------------------------------------------------------------
# direct factorization


class _SuperLU:
    def __init__(self, A):
        try:
            self._lu = spla.splu(sp.csc_matrix(A), permc_spec="COLAMD")
        except RuntimeError as exc:
            raise LinearSolverError(str(exc)) from exc

    def solve(self, b):
        return self._lu.solve(np.asarray(b, dtype=float))


def factorize(A):
    """Sparse LU factorization of a square matrix; returns an object with
    ``solve(b)``. Raises :class:`LinearSolverError` on singular input."""
    A = sp.csc_matrix(A)
    if A.shape[0] != A.shape[1]:
        raise LinearSolverError(f"matrix must be square, got {A.shape}")
    if not np.all(np.isfinite(A.data)):
        raise LinearSolverError("matrix has non-finite entries")
    if _umfpack.available:
        try:
            return _umfpack.UmfpackLU(A)
        except RuntimeError as exc:
            raise LinearSolverError(str(exc)) from exc
    return _SuperLU(A)


def direct_solve(system, rhs=None, refine=1):
    """Solve ``system x = rhs`` by sparse LU.

    ``system`` is a :class:`BlockSystem` (its own rhs is used when ``rhs`` is
    omitted) or any square sparse/dense matrix. ``refine`` steps of iterative
    refinement polish the solution of badly scaled systems.
    """
    if isinstance(system, BlockSystem):
        A = system.matrix
        b = system.rhs if rhs is None else rhs
    else:
        A = sp.csr_matrix(system)
        if rhs is None:
            raise ValueError("rhs is required when passing a bare matrix")
        b = rhs
    b = np.asarray(b, dtype=float)
    lu = factorize(A)
    x = lu.solve(b)
    for _ in range(refine):
        x = x + lu.solve(b - A @ x)
    if not np.all(np.isfinite(x)):
        raise LinearSolverError("direct solve produced non-finite values")
    return x


# ---------------------------------------------------------------------------
# collocation preconditioner and Braess-Sarazin relaxation


class CollocationPreconditioner:
    """Block-diagonal part of ``A_hat`` made of the ``ncomp x ncomp`` blocks
    of DOFs collocated at one node (node-major layout)."""

    def __init__(self, blocks):
        self.blocks = np.asarray(blocks, dtype=float)
        try:
            self.inv_blocks = np.linalg.inv(self.blocks)
        except np.linalg.LinAlgError as exc:
            raise LinearSolverError("singular nodal block in collocation preconditioner") from exc

    @property
    def ncomp(self):
        return self.blocks.shape[1]

    def _bsr(self, blocks):
        m = len(blocks)
        return sp.bsr_matrix((blocks, np.arange(m), np.arange(m + 1)),
                             shape=(m * self.ncomp, m * self.ncomp)).tocsr()

    @cached_property
    def matrix(self):
        return self._bsr(self.blocks)

    @cached_property
    def inv_matrix(self):
        return self._bsr(self.inv_blocks)

    def solve(self, v):
        v = np.asarray(v, dtype=float)
        nc = self.ncomp
        if v.ndim == 1:
            return np.einsum("mij,mj->mi", self.inv_blocks, v.reshape(-1, nc)).ravel()
        return self.inv_matrix @ v


def build_collocation_preconditioner(A_hat, ncomp):
    """Extract the per-node ``ncomp x ncomp`` diagonal blocks of ``A_hat``.

    ``A_hat`` must use the node-major layout with all components of a node
    contiguous (3 for the director, 4 with the potential).
    """
    A = sp.csr_matrix(A_hat)
    n = A.shape[0]
    if A.shape[0] != A.shape[1] or n % ncomp:
        raise ValueError(f"matrix of shape {A.shape} does not match a {ncomp}-DOF nodal layout")
    m = n // ncomp
    blocks = np.empty((m, ncomp, ncomp))
    for a in range(ncomp):
        rows = A[a::ncomp]
        for b in range(ncomp):
            blocks[:, a, b] = rows[:, b::ncomp].diagonal()
    return CollocationPreconditioner(blocks)


class ExactBlock:
    """Use a full matrix as the relaxation block (exactly inverted)."""

    def __init__(self, A):
        self.matrix = sp.csr_matrix(A)
        self._lu = factorize(self.matrix)

    def solve(self, v):
        v = np.asarray(v, dtype=float)
        if v.ndim == 1:
            return self._lu.solve(v)
        return np.column_stack([self._lu.solve(col) for col in v.T])


class SaddleLevel:
    """One level of a saddle-point problem with its relaxation data."""

    def __init__(self, K, n_u, ncomp, R=None):
        self.K = sp.csr_matrix(K)
        self.n_u = int(n_u)
        self.ncomp = ncomp
        self.A = self.K[:n_u, :n_u].tocsr()
        self.B = self.K[:n_u, n_u:].tocsr()
        self.R = build_collocation_preconditioner(self.A, ncomp) if R is None else R

    @classmethod
    def from_system(cls, system, R=None):
        return cls(system.matrix, system.n_u, system.ncomp, R)

    @property
    def n_lambda(self):
        return self.K.shape[0] - self.n_u

    @cached_property
    def schur(self):
        """``B^T R^{-1} B``; the relaxation uses this divided by gamma_b."""
        if hasattr(self.R, "inv_matrix"):
            return sp.csr_matrix(self.B.T @ (self.R.inv_matrix @ self.B))
        return sp.csr_matrix(self.B.T @ self.R.solve(self.B.toarray()))

    @cached_property
    def schur_diag(self):
        d = self.schur.diagonal().copy()
        if np.any(d == 0):
            raise LinearSolverError("Schur complement has a zero diagonal entry")
        return d

    @cached_property
    def schur_lu(self):
        return factorize(self.schur)


def _inner_schur(level, g, gamma_b, inner, sweeps):
    """Approximately solve ``(S1 / gamma_b) y = g``."""
    if inner == "exact":
        return gamma_b * level.schur_lu.solve(g)
    if inner != "jacobi":
        raise ValueError(f"unknown inner solver {inner!r}")
    S, d = level.schur, level.schur_diag
    y = gamma_b * g / d
    for _ in range(sweeps - 1):
        y = y + gamma_b * (g - S @ y / gamma_b) / d
    return y


def braess_sarazin_relax(level, x, rhs, gamma_b=1.2, inner="jacobi", inner_sweeps=2):
    """One Braess-Sarazin update ``x + [[gamma_b R, B], [B^T, 0]]^{-1} (rhs - K x)``.

    The inner saddle problem is reduced to the multiplier Schur system
    ``B^T (gamma_b R)^{-1} B dl = B^T (gamma_b R)^{-1} r_u - r_l``, solved
    exactly (``inner="exact"``) or with ``inner_sweeps`` Jacobi sweeps, and
    the director update is recovered by back-substitution.
    """
    if not isinstance(level, SaddleLevel):
        level = SaddleLevel.from_system(level)
    x = np.asarray(x, dtype=float)
    r = rhs - level.K @ x
    nu = level.n_u
    r_u, r_l = r[:nu], r[nu:]
    Rr = level.R.solve(r_u) / gamma_b
    dl = _inner_schur(level, level.B.T @ Rr - r_l, gamma_b, inner, inner_sweeps)
    du = Rr - level.R.solve(level.B @ dl) / gamma_b
    if not (np.all(np.isfinite(du)) and np.all(np.isfinite(dl))):
        raise LinearSolverError("Braess-Sarazin relaxation broke down")
    return x + np.concatenate([du, dl])


# ---------------------------------------------------------------------------
# multigrid


@dataclass(frozen=True)
class MGConfig:
    """Settings for :func:`mg_solve`.

    Two pre- and two post-smoothing sweeps per level are used by default;
    with a single sweep the cycle count grows quickly for ``gamma_b`` above
    its optimum.
    """
    gamma_b: float = 1.2
    pre_smooth: int = 2
    post_smooth: int = 2
    tolerance: float = 1e-6
    max_cycles: int = 100
    inner: str = "jacobi"
    inner_sweeps: int = 2

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.gamma_b <= 0:
            raise ValueError("gamma_b must be positive")


def saddle_prolongation(coarse_mesh, fine_mesh, ncomp):
    """Block-diagonal transfer for ``[u_free, lambda]``: Q2 interpolation on
    the free DOFs and injection for the cellwise multipliers."""
    cdm, fdm = dof_map(coarse_mesh, ncomp), dof_map(fine_mesh, ncomp)
    Pu = interpolation_matrix(FESpace(coarse_mesh, "Q2", ncomp), FESpace(fine_mesh, "Q2", ncomp))
    Pu = Pu[fdm.free][:, cdm.free]
    Pl = interpolation_matrix(FESpace(coarse_mesh, "P0"), FESpace(fine_mesh, "P0"))
    return sp.block_diag([Pu, Pl], format="csr"), Pu.shape[1]


class MGHierarchy:
    """Galerkin hierarchy ``K_{l-1} = P_l^T K_l P_l`` built from a fine system.

    ``levels[0]`` is the coarsest; ``prolongations[l]`` maps level ``l-1`` to
    level ``l`` (``prolongations[0]`` is ``None``).
    """

    def __init__(self, levels, prolongations):
        self.levels = levels
        self.prolongations = prolongations

    @cached_property
    def coarse_lu(self):
        return factorize(self.levels[0].K)

    @property
    def depth(self):
        return len(self.levels)


def build_hierarchy(finest, meshes):
    """Galerkin hierarchy for a saddle system on ``meshes[-1]``.

    ``finest`` is a :class:`BlockSystem`; ``meshes`` lists the meshes from
    coarsest to finest, each the uniform refinement of the previous one. A
    single mesh gives a one-level hierarchy (direct solve).
    """
    if finest.dofmap.mesh != meshes[-1]:
        raise ValueError("finest system does not live on the last mesh")
    ncomp = finest.ncomp
    levels = [SaddleLevel.from_system(finest)]
    prolongations = [None]
    for coarse, fine in zip(meshes[-2::-1], meshes[:0:-1]):
        P, n_u = saddle_prolongation(coarse, fine, ncomp)
        Kc = sp.csr_matrix(P.T @ levels[0].K @ P)
        levels.insert(0, SaddleLevel(Kc, n_u, ncomp))
        prolongations.insert(1, P)
    return MGHierarchy(levels, prolongations)


def _vcycle(h, l, x, b, cfg):
    if l == 0:
        return h.coarse_lu.solve(b)
    level = h.levels[l]
    for _ in range(cfg.pre_smooth):
        x = braess_sarazin_relax(level, x, b, cfg.gamma_b, cfg.inner, cfg.inner_sweeps)
    P = h.prolongations[l]
    rc = P.T @ (b - level.K @ x)
    x = x + P @ _vcycle(h, l - 1, np.zeros(len(rc)), rc, cfg)
    for _ in range(cfg.post_smooth):
        x = braess_sarazin_relax(level, x, b, cfg.gamma_b, cfg.inner, cfg.inner_sweeps)
    return x


@dataclass
class MGResult:
    x: np.ndarray
    cycles: int
    converged: bool
    residuals: list


def mg_solve(h, rhs, cfg=MGConfig(), x0=None):
    """V-cycles until ``||rhs - K x|| < tolerance * ||rhs||``.

    Returns an :class:`MGResult`; running out of cycles sets
    ``converged=False`` instead of raising.
    """
    K = h.levels[-1].K
    b = np.asarray(rhs, dtype=float)
    x = np.zeros(K.shape[0]) if x0 is None else np.array(x0, dtype=float)
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return MGResult(np.zeros_like(b), 0, True, [0.0])
    res = [np.linalg.norm(b - K @ x) / bnorm]
    cycles = 0
    while res[-1] >= cfg.tolerance and cycles < cfg.max_cycles:
        x = _vcycle(h, h.depth - 1, x, b, cfg)
        cycles += 1
        res.append(np.linalg.norm(b - K @ x) / bnorm)
        if not np.isfinite(res[-1]):
            raise LinearSolverError("multigrid iteration diverged")
    return MGResult(x, cycles, res[-1] < cfg.tolerance, res)
