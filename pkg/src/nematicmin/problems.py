"""Benchmark equilibrium problems on the unit square.

Each problem is periodic in x with Dirichlet data for the director on the
edges y=0 and y=1. The flexoelectric problem additionally carries an electric
potential, held at zero on the same edges.
"""
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .energy import ElectricConstants, FrankConstants
from .mesh import DEFAULT_QUADRATURE, quadrature_data, quadrature_points, values_at_quadrature


def _planar_twist_trace(theta):
    def trace(x):
        x = np.asarray(x, dtype=float)
        return np.column_stack([np.full_like(x, np.cos(theta)), np.zeros_like(x),
                                np.full_like(x, np.sin(theta))])
    return trace


def nano_angle(x, r=0.25, s=0.95):
    """Polar angle of the nano-patterned anchoring at position ``x``."""
    x = np.asarray(x, dtype=float)
    sn = -s * np.sin(2 * np.pi * (x + r))
    cs = s * np.cos(2 * np.pi * (x + r))
    Xm = sn / (-cs - 1.0)
    Xp = sn / (-cs + 1.0)
    return r * (np.pi + 2 * np.arctan(Xm) - 2 * np.arctan(Xp))


def nano_trace(x, r=0.25, s=0.95):
    """Director ``(0, cos a, sin a)`` of the nano pattern at ``x``, shape ``(len(x), 3)``."""
    a = nano_angle(x, r, s)
    return np.column_stack([np.zeros_like(a), np.cos(a), np.sin(a)])


def doubled_nano_trace(x, r=0.25, s=0.95):
    """Nano pattern repeated twice across the period: ``nano_trace(2x mod 1)``."""
    return nano_trace(np.mod(2 * np.asarray(x, dtype=float), 1.0), r, s)


@dataclass(frozen=True)
class ProblemSpec:
    """A benchmark: constants, Dirichlet traces and optional references.

    ``bottom`` and ``top`` map an array of x positions to unit 3-vectors.
    ``analytic`` (if known) maps arrays ``x, y`` to the exact director with a
    trailing axis of length 3.
    """
    name: str
    fc: FrankConstants
    bottom: Callable
    top: Callable
    ec: Optional[ElectricConstants] = None
    analytic: Optional[Callable] = None
    reference_energy: Optional[float] = None
    reference_approximate: bool = False
    periodic_x: bool = True

    @property
    def has_potential(self):
        return self.ec is not None

    def initial_director(self, space, perturb=0.0):
        """Nodal coefficients of the starting guess on ``space`` (Q2, 3 comps).

        The two traces are blended linearly in y and renormalized at every
        node. ``perturb`` adds ``perturb * sin(pi y)`` to the second
        component before renormalizing, which tilts the field out of the
        xz-plane while leaving the boundary values untouched.
        """
        xy = space.node_coords
        x, y = xy[:, 0], xy[:, 1]
        n = (1 - y)[:, None] * self.bottom(x) + y[:, None] * self.top(x)
        n[:, 1] += perturb * np.sin(np.pi * y)
        norm = np.linalg.norm(n, axis=1)
        if np.any(norm < 1e-12):
            raise ValueError("linear blend of the boundary traces vanishes at a node")
        n /= norm[:, None]
        return self.apply_dirichlet(n.ravel(), space)

    def apply_dirichlet(self, n, space):
        """Copy of director coefficients ``n`` with the traces written into
        the nodes on y=0 and y=1."""
        xy = space.node_coords
        v = np.array(n, dtype=float).reshape(-1, 3)
        for edge, trace in ((0.0, self.bottom), (1.0, self.top)):
            idx = np.flatnonzero(xy[:, 1] == edge)
            v[idx] = trace(xy[idx, 0])
        return v.ravel()


def twist_problem(theta0=np.pi / 8):
    """Planar twist between anchoring angles -theta0 and theta0 (exact solution known)."""
    fc = FrankConstants(1.0, 1.2, 1.0)

    def analytic(x, y):
        t = theta0 * (2 * np.asarray(y, dtype=float) - 1)
        x = np.broadcast_to(x, t.shape)
        return np.stack([np.cos(t), np.zeros_like(x), np.sin(t)], axis=-1)

    return ProblemSpec("twist", fc, _planar_twist_trace(-theta0), _planar_twist_trace(theta0),
                       analytic=analytic, reference_energy=0.37011)


def tilt_twist_problem(theta0=np.pi / 4):
    """Twist boundary data with constants for which a tilted solution has lower energy
    than the planar twist."""
    fc = FrankConstants(1.0, 3.0, 1.2)
    return ProblemSpec("tilt-twist", fc, _planar_twist_trace(-theta0), _planar_twist_trace(theta0),
                       reference_energy=3.59294)


def nano_problem():
    """Nano-patterned anchoring on both plates."""
    fc = FrankConstants(1.0, 0.62903, 1.32258)
    return ProblemSpec("nano", fc, nano_trace, nano_trace, reference_energy=3.89001)


def flexo_problem():
    """Doubled nano pattern with flexoelectric coupling to an electric potential.

    The reference value is approximate: the geometry of the doubled pattern
    is one reading of a loosely specified setup.
    """
    fc = FrankConstants(1.0, 4.0, 1.0)
    ec = ElectricConstants(eps0=1.42809, eps_par=7.0, eps_perp=7.0, e_s=1.5, e_b=-1.5)
    return ProblemSpec("flexo", fc, doubled_nano_trace, doubled_nano_trace, ec=ec,
                       reference_energy=16.413, reference_approximate=True)


PROBLEMS = {
    "twist": twist_problem,
    "tilt-twist": tilt_twist_problem,
    "nano": nano_problem,
    "flexo": flexo_problem,
}


def get_problem(name):
    try:
        return PROBLEMS[name]()
    except KeyError:
        raise ValueError(f"unknown problem {name!r}; choose from {sorted(PROBLEMS)}") from None


def l2_error(n, analytic, space, order=DEFAULT_QUADRATURE):
    """L2 norm of ``n_h - analytic`` computed by quadrature."""
    if analytic is None:
        raise ValueError("no analytic solution available for this problem")
    u, _, _ = values_at_quadrature(space, n, order)
    pts = quadrature_points(space.mesh, order)
    diff = u - analytic(pts[..., 0], pts[..., 1])
    w = quadrature_data(space.mesh, order).w
    return float(np.sqrt(np.einsum("eqi,eqi,q->", diff, diff, w)))
