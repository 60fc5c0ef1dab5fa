"""Frank-Oseen, penalty, constraint and flexoelectric energies.

Fields are 3-component directors on a 2D slab (no z-dependence), so

    div n  = dn1/dx + dn2/dy
    curl n = (dn3/dy, -dn3/dx, dn2/dx - dn1/dy).

Two energy scales appear below. ``frank_energy`` is the free elastic energy
with the 1/2 factors (the quantity reported everywhere); the minimized
functionals (``elastic_functional``, ``penalty_energy``, ``flexo_energy``) are
twice that, with no 1/2 factors.
"""
from dataclasses import dataclass, field

import numpy as np

from .mesh import DEFAULT_QUADRATURE, quadrature_data, values_at_quadrature


@dataclass(frozen=True)
class FrankConstants:
    K1: float
    K2: float
    K3: float

    def __post_init__(self):
        if self.K2 <= 0 or self.K3 <= 0:
            raise ValueError("K2 and K3 must be positive")
        if self.K1 < 0:
            raise ValueError("K1 must be nonnegative")

    @property
    def kappa(self):
        return self.K2 / self.K3


@dataclass(frozen=True)
class ElectricConstants:
    eps0: float
    eps_par: float
    eps_perp: float
    e_s: float = 0.0
    e_b: float = 0.0
    eps_a: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "eps_a", self.eps_par - self.eps_perp)


@dataclass(frozen=True)
class PenaltyConfig:
    zeta: float

    def __post_init__(self):
        if not self.zeta > 0:
            raise ValueError("penalty weight must be positive")


def z_tensor(n, kappa):
    """Z = I - (1 - kappa) n n^T for one vector or a stack of vectors."""
    n = np.asarray(n, dtype=float)
    return np.eye(3) - (1.0 - kappa) * n[..., :, None] * n[..., None, :]


def div_curl(ux, uy):
    """Divergence and curl of a slab director from its x/y derivatives."""
    div = ux[..., 0] + uy[..., 1]
    curl = np.stack([uy[..., 2], -ux[..., 2], ux[..., 1] - uy[..., 0]], axis=-1)
    return div, curl


def _director_at_quadrature(n, space, order):
    u, ux, uy = values_at_quadrature(space, n, order)
    div, curl = div_curl(ux, uy)
    return u, div, curl


def elastic_density(u, div, curl, fc):
    """Integrand of the elastic functional (no 1/2 factors)."""
    s = np.einsum("...i,...i->...", u, curl)
    cc = np.einsum("...i,...i->...", curl, curl)
    # (Z c, c) = |c|^2 - (1 - kappa) (n . c)^2
    return fc.K1 * div**2 + fc.K3 * (cc - (1.0 - fc.kappa) * s**2)


def _integrate(density, mesh, order):
    qd = quadrature_data(mesh, order)
    return float(np.einsum("eq,q->", density, qd.w))


def elastic_functional(n, fc, space, order=DEFAULT_QUADRATURE):
    """K1 ||div n||^2 + K3 (Z curl n, curl n)."""
    u, div, curl = _director_at_quadrature(n, space, order)
    return _integrate(elastic_density(u, div, curl, fc), space.mesh, order)


def frank_energy(n, fc, space, order=DEFAULT_QUADRATURE):
    """Free elastic energy: integral of w_F, half the elastic functional."""
    return 0.5 * elastic_functional(n, fc, space, order)


def constraint_value(n, space, order=DEFAULT_QUADRATURE):
    """c(n) = integral of (n.n - 1)^2."""
    u, _, _ = values_at_quadrature(space, n, order)
    g = np.einsum("eqi,eqi->eq", u, u) - 1.0
    return _integrate(g**2, space.mesh, order)


def penalty_energy(n, fc, pc, space, order=DEFAULT_QUADRATURE):
    """Elastic functional plus zeta * ||n.n - 1||^2, from one quadrature pass."""
    u, div, curl = _director_at_quadrature(n, space, order)
    g = np.einsum("eqi,eqi->eq", u, u) - 1.0
    dens = elastic_density(u, div, curl, fc) + pc.zeta * g**2
    return _integrate(dens, space.mesh, order)


def deviation_stats(n, space, order=DEFAULT_QUADRATURE):
    """Minimum and maximum of n.n - 1 over all quadrature points."""
    u, _, _ = values_at_quadrature(space, n, order)
    g = np.einsum("eqi,eqi->eq", u, u) - 1.0
    return float(g.min()), float(g.max())


def flexo_terms(n, phi, fc, ec, nspace, pspace, order=DEFAULT_QUADRATURE):
    """Integrals of each term of the flexoelectric functional.

    Keys: ``elastic`` (functional scale), ``dielectric_perp``,
    ``dielectric_aniso``, ``splay_flexo``, ``bend_flexo``.
    """
    u, div, curl = _director_at_quadrature(n, nspace, order)
    _, px, py = values_at_quadrature(pspace, phi, order)
    g = np.concatenate([px, py, np.zeros_like(px)], axis=-1)
    ng = np.einsum("eqi,eqi->eq", u, g)
    ncc = np.cross(u, curl)
    mesh = nspace.mesh
    return {
        "elastic": _integrate(elastic_density(u, div, curl, fc), mesh, order),
        "dielectric_perp": _integrate(-ec.eps0 * ec.eps_perp * np.einsum("eqi,eqi->eq", g, g), mesh, order),
        "dielectric_aniso": _integrate(-ec.eps0 * ec.eps_a * ng**2, mesh, order),
        "splay_flexo": _integrate(2 * ec.e_s * div * ng, mesh, order),
        "bend_flexo": _integrate(2 * ec.e_b * np.einsum("eqi,eqi->eq", ncc, g), mesh, order),
    }


def flexo_energy(n, phi, fc, ec, nspace, pspace, order=DEFAULT_QUADRATURE):
    """The full flexoelectric functional (elastic part without 1/2 factors)."""
    return sum(flexo_terms(n, phi, fc, ec, nspace, pspace, order).values())
