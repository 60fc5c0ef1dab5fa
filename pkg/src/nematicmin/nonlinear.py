"""Newton iterations with damping or trust regions, renormalization, nested
iteration and work-unit accounting.

Three constraint treatments are supported:

``lagrangian``
    Newton on the saddle system of the Lagrangian with one multiplier per
    cell. Steps are damped by a fixed factor or scaled by a residual-based
    trust region.
``penalty``
    Newton on the penalized energy. Steps are damped, or chosen inside a
    trust region along the Newton line (``tr_simple``) or in the plane spanned
    by the gradient and the Newton direction (``tr_2d``).
``penalty_renorm``
    As ``penalty``, but every accepted iterate is projected back to unit
    length at the nodes, and the iteration stops when the relative energy
    change falls below the tolerance.
"""
import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
from numpy.polynomial import polynomial as P

from .assembly import (Formulation, assemble_gradient, assemble_hessian_matrix, assemble_saddle,
                       dof_map, pack_flexo, unpack_flexo)
from .energy import PenaltyConfig, deviation_stats, flexo_energy, frank_energy, penalty_energy
from .linear import LinearSolverError, MGConfig, build_hierarchy, factorize, mg_solve
from .mesh import FESpace, interpolate, mesh_hierarchy

METHODS = ("lagrangian", "penalty", "penalty_renorm")
STEPPINGS = ("damped", "tr_simple", "tr_2d")


# ---------------------------------------------------------------------------
# parameters


@dataclass(frozen=True)
class TRPenaltyParams:
    """Radius-based trust region for the penalty formulation."""
    eta1: float = 0.25
    eta2: float = 0.75
    eta3: float = 0.125
    C1: float = 0.5
    C3: float = 1.3
    delta_init: float = 0.3
    delta_inc: float = 0.3
    delta_max: float = 100.0

    def __post_init__(self):
        if not 0 < self.eta3 < self.eta1 < self.eta2:
            raise ValueError("need 0 < eta3 < eta1 < eta2")
        if not 0 < self.C1 < 1 < self.C3:
            raise ValueError("need 0 < C1 < 1 < C3")
        if not 0 < self.delta_init <= self.delta_max:
            raise ValueError("need 0 < delta_init <= delta_max")

    def radius_for_level(self, level):
        return min(self.delta_init + level * self.delta_inc, self.delta_max)


@dataclass(frozen=True)
class TRLagrangianParams:
    """Step-scaling trust region for the Lagrangian formulation."""
    eta1: float = 0.5
    eta2: float = 0.25
    w_inc: float = 0.1
    w_dec: float = 0.1
    w_lev: float = 0.1
    w_min: float = 0.1
    w_init: float = 0.2

    def __post_init__(self):
        if not 0 < self.eta2 < self.eta1:
            raise ValueError("need 0 < eta2 < eta1")
        if not 0 < self.w_min <= self.w_init <= 1:
            raise ValueError("need 0 < w_min <= w_init <= 1")

    def scale_for_level(self, level):
        return min(self.w_init + level * self.w_lev, 1.0)


@dataclass(frozen=True)
class NewtonConfig:
    """Settings for :func:`newton_solve` and :func:`nested_iteration`.

    Every level takes at least ``min_iters`` Newton steps before the stopping
    test is applied, so an interpolated coarse solution is always corrected
    once on the finer mesh.

    ``solver`` is ``"direct"`` or ``"mg"`` (multigrid needs the multiplier
    formulation). Damped steps use ``omega0 + level * omega_inc`` capped at 1.
    """
    method: str = "lagrangian"
    stepping: str = "damped"
    zeta: Optional[float] = None
    tolerance: float = 1e-4
    max_iters: int = 200
    min_iters: int = 1
    omega0: float = 0.2
    omega_inc: float = 0.2
    divergence_factor: float = 1e4
    tr_penalty: TRPenaltyParams = field(default_factory=TRPenaltyParams)
    tr_lagrangian: TRLagrangianParams = field(default_factory=TRLagrangianParams)
    solver: str = "direct"
    mg: MGConfig = field(default_factory=MGConfig)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if self.stepping not in STEPPINGS:
            raise ValueError(f"stepping must be one of {STEPPINGS}")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.method != "lagrangian":
            if self.zeta is None or not self.zeta > 0:
                raise ValueError("penalty methods need a positive zeta")
        if self.solver not in ("direct", "mg"):
            raise ValueError("solver must be 'direct' or 'mg'")
        if self.solver == "mg" and self.method != "lagrangian":
            raise ValueError("the multigrid solver needs the multiplier formulation")

    def omega_for_level(self, level):
        return min(self.omega0 + level * self.omega_inc, 1.0)


# ---------------------------------------------------------------------------
# reports


@dataclass
class LevelReport:
    level: int
    nx: int
    iterations: int = 0
    accepted: int = 0
    rejected: int = 0
    nnz: int = 0
    mg_cycles: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    energies: list = field(default_factory=list)
    converged: bool = False
    diverged: bool = False
    time_s: float = 0.0


@dataclass
class FieldState:
    """Fields on one mesh: director ``n`` (Q2, 3 per node), multipliers
    ``lam`` (one per cell, or ``None``) and potential ``phi`` (Q2 scalar, or
    ``None``)."""
    mesh: object
    n: np.ndarray
    lam: Optional[np.ndarray] = None
    phi: Optional[np.ndarray] = None

    @property
    def space(self):
        return FESpace(self.mesh, "Q2", 3)

    @property
    def potential_space(self):
        return FESpace(self.mesh, "Q2", 1)


@dataclass
class SolveReport:
    problem: str
    config: NewtonConfig
    levels: list
    state: FieldState
    energy: float = math.nan
    min_dev: float = math.nan
    max_dev: float = math.nan
    functional: float = math.nan
    wu: float = math.nan
    time_s: float = 0.0

    @property
    def converged(self):
        return bool(self.levels) and self.levels[-1].converged and not self.diverged

    @property
    def diverged(self):
        return any(lv.diverged for lv in self.levels)

    @property
    def iterations(self):
        return [lv.iterations for lv in self.levels]

    @property
    def final_residual(self):
        res = self.levels[-1].residuals if self.levels else []
        return res[-1] if res else math.nan


def work_units(report):
    """Sum of ``nnz * iterations`` over levels divided by the finest ``nnz``.

    Accepts a :class:`SolveReport` or a list of :class:`LevelReport`.
    """
    levels = report.levels if isinstance(report, SolveReport) else list(report)
    finest = next((lv.nnz for lv in reversed(levels) if lv.nnz), 0)
    if finest == 0:
        return 0.0
    return float(sum(lv.nnz * lv.iterations for lv in levels) / finest)


# ---------------------------------------------------------------------------
# penalty trust-region steps


def quadratic_model(P_k, f_k, U_k, delta_n):
    """``P_k + f_k . d + 0.5 d . U_k d``."""
    d = np.asarray(delta_n, dtype=float)
    return float(P_k + f_k @ d + 0.5 * d @ (U_k @ d))


def _newton_direction(U, f, newton_dir):
    if newton_dir is not None:
        return np.asarray(newton_dir, dtype=float)
    if sp.issparse(U):
        return factorize(U).solve(f)
    try:
        return np.linalg.solve(U, f)
    except np.linalg.LinAlgError as exc:
        raise LinearSolverError("singular model Hessian") from exc


def tr_simple_step(U_k, f_k, delta, newton_dir=None):
    """Minimize the quadratic model on the line through ``U^{-1} f`` inside
    the ball of radius ``delta``.

    Candidates are the full Newton step ``-U^{-1} f`` (when inside) and the two
    boundary points ``+-(delta/|p|) p`` with ``p = U^{-1} f``. ``newton_dir``
    may pass a precomputed ``p``.
    """
    f = np.asarray(f_k, dtype=float)
    p = _newton_direction(U_k, f, newton_dir)
    pn = np.linalg.norm(p)
    if pn == 0:
        return np.zeros_like(f)
    fp = f @ p
    # along s = a p the model change is a fp + a^2 fp / 2 since U p = f
    alphas = [delta / pn, -delta / pn]
    if pn <= delta:
        alphas.insert(0, -1.0)
    values = [a * fp + 0.5 * a * a * fp for a in alphas]
    return alphas[int(np.argmin(values))] * p


def _boundary_stationary_angles(g, H, delta):
    """Angles t where the model restricted to the circle ``delta (cos t, sin t)``
    is stationary, from the quartic in ``u = tan(t/2)``."""
    c_poly = np.array([1.0, 0.0, -1.0])  # (1 - u^2), times (1+u^2)^-1
    s_poly = np.array([0.0, 2.0])        # 2u, times (1+u^2)^-1
    lin = P.polymul(P.polysub(g[1] * c_poly, g[0] * s_poly), [1.0, 0.0, 1.0])
    quad = P.polyadd((H[1, 1] - H[0, 0]) * P.polymul(c_poly, s_poly),
                     H[0, 1] * P.polysub(P.polymul(c_poly, c_poly), P.polymul(s_poly, s_poly)))
    poly = P.polytrim(P.polyadd(lin, delta * quad), tol=0.0)
    angles = [0.0, np.pi]
    if len(poly) > 1 and np.any(poly != 0):
        roots = P.polyroots(poly)
        real = roots[np.abs(roots.imag) < 1e-10].real
        angles.extend(2 * np.arctan(real))
    return np.array(angles)


def tr_2d_step(U_k, f_k, delta, newton_dir=None):
    """Minimize the quadratic model over ``span{f, U^{-1} f}`` inside the ball.

    The interior solution is the reduced 2x2 Newton step; boundary candidates
    come from the real roots of a quartic. The simple-step candidates are
    included, so the result never has a larger model value than
    :func:`tr_simple_step`. A degenerate subspace (``f`` parallel to
    ``U^{-1} f``) falls back to :func:`tr_simple_step`.
    """
    f = np.asarray(f_k, dtype=float)
    p = _newton_direction(U_k, f, newton_dir)
    if np.linalg.norm(f) == 0:
        return np.zeros_like(f)
    V, Rq = np.linalg.qr(np.column_stack([f, p]))
    if abs(Rq[1, 1]) <= 1e-10 * max(abs(Rq[0, 1]), np.linalg.norm(p), 1e-300):
        return tr_simple_step(U_k, f, delta, newton_dir=p)
    UV = np.column_stack([U_k @ V[:, 0], U_k @ V[:, 1]])
    H = V.T @ UV
    H = 0.5 * (H + H.T)
    g = V.T @ f

    def model(a):
        return g @ a + 0.5 * a @ H @ a

    candidates = []
    try:
        a_int = -np.linalg.solve(H, g)
        if np.linalg.norm(a_int) <= delta:
            candidates.append(a_int)
    except np.linalg.LinAlgError:
        pass
    for t in _boundary_stationary_angles(g, H, delta):
        candidates.append(delta * np.array([np.cos(t), np.sin(t)]))
    best = min(candidates, key=model)
    step = V @ best
    simple = tr_simple_step(U_k, f, delta, newton_dir=p)
    if quadratic_model(0.0, f, U_k, simple) < quadratic_model(0.0, f, U_k, step):
        return simple
    return step


def rho_penalty(P, n_k, delta_n, model):
    """Actual over predicted reduction of the penalty functional.

    ``P`` evaluates the functional, ``model = (P_k, f_k, U_k)`` defines the
    quadratic model in the same coordinates as ``n_k`` and ``delta_n``. A zero
    predicted reduction returns ``inf``, which callers treat as a request to
    apply the step regardless of the ratio.
    """
    P_k, f_k, U_k = model
    pred = P_k - quadratic_model(P_k, f_k, U_k, delta_n)
    if pred == 0:
        return math.inf
    n_k = np.asarray(n_k, dtype=float)
    return (P(n_k) - P(n_k + delta_n)) / pred


def tr_accept_adjust(rho, delta, step_norm, params=TRPenaltyParams()):
    """Acceptance test and radius update for the penalty trust region.

    Returns ``(accept, new_delta)``.
    """
    accept = rho > params.eta3
    if rho < params.eta1:
        new_delta = params.C1 * delta
    elif rho > params.eta2 and abs(step_norm - delta) <= 1e-12 * max(delta, 1.0):
        new_delta = min(params.C3 * delta, params.delta_max)
    else:
        new_delta = delta
    return accept, new_delta


def lagrangian_tr_step(x, dx, w, params, residual_norm_fn, r0=None):
    """One scaled trial step ``x + w dx`` for the Lagrangian trust region.

    ``residual_norm_fn(x)`` returns the l2 norm of the optimality residual.
    Returns ``(accept, w_next, x_next, rho)``; a rejected step leaves
    ``x_next`` equal to ``x``. A zero starting residual takes no step.
    """
    r0 = residual_norm_fn(x) if r0 is None else r0
    if r0 == 0:
        return False, w, x, math.nan
    trial = x + w * dx
    r1 = residual_norm_fn(trial)
    rho = (r0 - r1) / (w * r0) if np.isfinite(r1) else -math.inf
    at_floor = abs(w - params.w_min) <= 1e-12
    accept = rho > params.eta2 or at_floor
    if rho < params.eta2:
        w_next = max(params.w_min, w - params.w_dec)
    elif rho < params.eta1:
        w_next = w
    else:
        w_next = min(w + params.w_inc, 1.0)
    return accept, w_next, (trial if accept else x), rho


def renormalize(n):
    """Scale every nodal 3-vector of a director coefficient vector to unit length."""
    v = np.array(n, dtype=float).reshape(-1, 3)
    norms = np.linalg.norm(v, axis=1)
    if np.any(norms < 1e-14):
        raise ValueError("cannot renormalize a node with (near) zero director")
    return (v / norms[:, None]).ravel()


# ---------------------------------------------------------------------------
# Newton iterations on one level


def _check_divergence(report, r, rmin, factor):
    if not np.isfinite(r) or r > factor * rmin:
        report.diverged = True
        return True
    return False


def pattern_nnz(mesh, ncomp=3, multiplier=True):
    """Nonzero count of the Newton matrix on ``mesh`` (fixed sparsity pattern)."""
    dm = dof_map(mesh, ncomp)
    nnz = dm._uu_pattern[4]
    if multiplier:
        nnz += 2 * int(np.count_nonzero(dm.free_index[dm.elem_dofs] >= 0))
    return int(nnz)


def _linear_solve(system, config, meshes):
    if config.solver == "direct":
        lu = factorize(system.matrix)
        x = lu.solve(system.rhs)
        return x + lu.solve(system.rhs - system.matrix @ x), None
    h = build_hierarchy(system, meshes)
    res = mg_solve(h, system.rhs, config.mg)
    if not res.converged:
        raise LinearSolverError(f"multigrid did not converge in {res.cycles} cycles")
    return res.x, res.cycles


def _solve_saddle(problem, state, config, level, meshes, report):
    fc, ec = problem.fc, problem.ec
    form = Formulation(fc, multiplier=True, ec=ec)
    mesh = state.mesh
    dm = dof_map(mesh, form.ncomp)
    flexo = ec is not None
    u = pack_flexo(state.n, state.phi) if flexo else np.array(state.n, dtype=float)
    nu_full = len(u)
    x = np.concatenate([u, state.lam])

    def residual_norm(xv):
        grad, c = assemble_gradient(form, dm, xv[:nu_full], xv[nu_full:])
        return float(np.linalg.norm(np.concatenate([grad[dm.free], c])))

    tr = config.tr_lagrangian
    w = tr.scale_for_level(level)
    omega = config.omega_for_level(level)
    r = residual_norm(x)
    rmin = r
    for it in range(config.max_iters + 1):
        report.residuals.append(r)
        if _check_divergence(report, r, rmin, config.divergence_factor):
            break
        if r < config.tolerance and it >= config.min_iters:
            report.converged = True
            break
        if it == config.max_iters:
            break
        system = assemble_saddle(form, dm, x[:nu_full], x[nu_full:])
        sol, cycles = _linear_solve(system, config, meshes)
        report.iterations += 1
        if cycles is not None:
            report.mg_cycles.append(cycles)
        du, dl = system.split(sol)
        dx = np.concatenate([du, dl])
        if config.stepping == "damped":
            x = x + omega * dx
            r = residual_norm(x)
            report.accepted += 1
        else:
            while True:
                accept, w_next, x_new, _ = lagrangian_tr_step(x, dx, w, tr, residual_norm, r0=r)
                w = w_next
                if accept:
                    x = x_new
                    r = residual_norm(x)
                    report.accepted += 1
                    break
                report.rejected += 1
        rmin = min(rmin, r)
    if flexo:
        n, phi = unpack_flexo(x[:nu_full])
    else:
        n, phi = x[:nu_full], None
    return FieldState(mesh, n, x[nu_full:].copy(), phi)


def _solve_penalty(problem, state, config, level, report):
    fc = problem.fc
    zeta = float(config.zeta)
    pc = PenaltyConfig(zeta)
    form = Formulation(fc, zeta=zeta)
    mesh = state.mesh
    space = FESpace(mesh, "Q2", 3)
    dm = dof_map(mesh, 3)
    free = dm.free
    renorm = config.method == "penalty_renorm"
    u = np.array(state.n, dtype=float)
    if renorm:
        u = renormalize(u)

    def functional(full):
        return penalty_energy(full, fc, pc, space)

    def gradient(full):
        return assemble_gradient(form, dm, full)[0][free]

    def with_free(xf):
        full = u.copy()
        full[free] = xf
        return full

    tr = config.tr_penalty
    delta = tr.radius_for_level(level)
    omega = config.omega_for_level(level)
    energy = functional(u)
    report.energies.append(energy)
    f = gradient(u)
    r = float(np.linalg.norm(f))
    rmin = r
    prev_energy = None
    for it in range(config.max_iters + 1):
        report.residuals.append(r)
        if _check_divergence(report, r, rmin, config.divergence_factor) or not np.isfinite(energy):
            report.diverged = True
            break
        if renorm:
            if prev_energy is not None and abs(prev_energy / energy - 1.0) < config.tolerance:
                report.converged = True
                break
        elif r < config.tolerance and it >= config.min_iters:
            report.converged = True
            break
        if it == config.max_iters:
            break
        U = assemble_hessian_matrix(form, dm, u)
        try:
            p = factorize(U).solve(f)
        except LinearSolverError:
            report.diverged = True
            break
        report.iterations += 1
        if config.stepping == "damped":
            step = -omega * p
        else:
            step_fn = tr_simple_step if config.stepping == "tr_simple" else tr_2d_step
            interior_newton = np.linalg.norm(p)
            while True:
                step = step_fn(U, f, delta, newton_dir=p)
                snorm = np.linalg.norm(step)
                pred = -(f @ step + 0.5 * step @ (U @ step))
                if abs(pred) < 1e-12 * (1 + abs(energy)) and interior_newton < delta:
                    break
                rho = rho_penalty(lambda xf: functional(with_free(xf)), u[free], step,
                                  (energy, f, U))
                accept, delta = tr_accept_adjust(rho, delta, snorm, tr)
                if accept:
                    break
                report.rejected += 1
                if delta < 1e-14:
                    step = None
                    break
            if step is None:
                break
        u = with_free(u[free] + step)
        if renorm:
            u = renormalize(u)
        report.accepted += 1
        prev_energy = energy
        energy = functional(u)
        report.energies.append(energy)
        f = gradient(u)
        r = float(np.linalg.norm(f))
        rmin = min(rmin, r)
    return FieldState(mesh, u)


def newton_solve(problem, state, config, level=0, meshes=None):
    """Iterate Newton steps on ``state.mesh`` until the stopping rule holds.

    ``level`` selects the damping factor and trust-region starting size.
    ``meshes`` (coarsest to finest, ending with ``state.mesh``) is needed only
    by the multigrid solver. Returns ``(new_state, LevelReport)``.
    """
    t0 = time.perf_counter()
    report = LevelReport(level, state.mesh.nx)
    ncomp = 4 if problem.ec is not None else 3
    report.nnz = pattern_nnz(state.mesh, ncomp, config.method == "lagrangian")
    if config.method == "lagrangian":
        if meshes is None:
            meshes = [state.mesh]
        new = _solve_saddle(problem, state, config, level, meshes, report)
    else:
        if problem.ec is not None:
            raise ValueError("the flexoelectric problem needs the lagrangian method")
        new = _solve_penalty(problem, state, config, level, report)
    report.time_s = time.perf_counter() - t0
    return new, report


# ---------------------------------------------------------------------------
# nested iteration


def initial_state(problem, mesh, config, perturb=0.0):
    """Starting fields on ``mesh``: blended, renormalized director, zero
    multipliers and zero potential."""
    space = FESpace(mesh, "Q2", 3)
    n = problem.initial_director(space, perturb)
    lam = np.zeros(mesh.n_cells) if config.method == "lagrangian" else None
    phi = np.zeros(space.n_nodes) if problem.ec is not None else None
    return FieldState(mesh, n, lam, phi)


def prolong_state(problem, state, fine_mesh, config):
    """Interpolate all fields to the refinement of their mesh and reset the
    director's boundary values to the exact traces."""
    cm = state.mesh
    fine_space = FESpace(fine_mesh, "Q2", 3)
    n = interpolate(state.n, FESpace(cm, "Q2", 3), fine_space)
    n = problem.apply_dirichlet(n, fine_space)
    if config.method == "penalty_renorm":
        n = renormalize(n)
    lam = None if state.lam is None else interpolate(state.lam, FESpace(cm, "P0"), FESpace(fine_mesh, "P0"))
    phi = None if state.phi is None else interpolate(state.phi, FESpace(cm, "Q2"), FESpace(fine_mesh, "Q2"))
    return FieldState(fine_mesh, n, lam, phi)


def summarize(problem, config, levels, state, elapsed):
    """Build a :class:`SolveReport` with energies and deviations of ``state``."""
    space = state.space
    rep = SolveReport(problem.name, config, levels, state, time_s=elapsed)
    rep.wu = work_units(levels)
    if rep.diverged:
        return rep
    rep.energy = frank_energy(state.n, problem.fc, space)
    rep.min_dev, rep.max_dev = deviation_stats(state.n, space)
    if problem.ec is not None:
        rep.functional = flexo_energy(state.n, state.phi, problem.fc, problem.ec, space,
                                      state.potential_space)
    elif config.method == "lagrangian":
        rep.functional = 2 * rep.energy
    else:
        rep.functional = penalty_energy(state.n, problem.fc, PenaltyConfig(config.zeta), space)
    return rep


def nested_iteration(problem, levels, config, coarse_n=8, nested=True, perturb=0.0):
    """Solve on a coarse mesh and on ``levels - 1`` successive refinements.

    With ``nested=False`` only the finest mesh is solved, starting from the
    initial guess and with the coarsest-level damping and trust-region
    settings. Stops early if a level diverges.
    """
    if levels < 1:
        raise ValueError("levels must be at least 1")
    t0 = time.perf_counter()
    meshes = mesh_hierarchy(coarse_n, levels, problem.periodic_x)
    reports = []
    if not nested:
        state = initial_state(problem, meshes[-1], config, perturb)
        state, rep = newton_solve(problem, state, config, 0, meshes)
        reports.append(rep)
    else:
        state = initial_state(problem, meshes[0], config, perturb)
        for lvl, mesh in enumerate(meshes):
            if lvl > 0:
                state = prolong_state(problem, state, mesh, config)
            state, rep = newton_solve(problem, state, config, lvl, meshes[:lvl + 1])
            reports.append(rep)
            if rep.diverged:
                break
    return summarize(problem, config, reports, state, time.perf_counter() - t0)
