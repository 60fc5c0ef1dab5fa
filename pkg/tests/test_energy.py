import numpy as np
import pytest
from scipy.integrate import quad

from conftest import director_space, random_director
from nematicmin.energy import (ElectricConstants, FrankConstants, PenaltyConfig, constraint_value,
                               deviation_stats, elastic_functional, flexo_energy, flexo_terms,
                               frank_energy, penalty_energy, z_tensor)
from nematicmin.mesh import FESpace, build_mesh
from nematicmin.problems import twist_problem

TWIST_K = FrankConstants(1.0, 1.2, 1.0)


def constant_field(space, v):
    return np.tile(np.asarray(v, float), space.n_nodes)


def test_z_tensor_axis():
    assert np.allclose(z_tensor([0, 0, 1], 0.3), np.diag([1, 1, 0.3]))


def test_z_tensor_identity_for_kappa_one(rng):
    assert np.allclose(z_tensor(rng.standard_normal(3), 1.0), np.eye(3))


def test_z_tensor_diagonal_direction():
    n = np.ones(3) / np.sqrt(3)
    Z = z_tensor(n, 0.5)
    assert np.allclose(Z, np.eye(3) - np.ones((3, 3)) / 6)
    assert np.allclose(Z, Z.T)
    assert np.allclose(np.sort(np.linalg.eigvalsh(Z)), [0.5, 1, 1])


def test_z_tensor_eigenvalues(rng):
    n = 1.3 * rng.standard_normal(3)
    kappa = 0.4
    ev = np.sort(np.linalg.eigvalsh(z_tensor(n, kappa)))
    expected = np.sort([1, 1, 1 - (1 - kappa) * n @ n])
    assert np.allclose(ev, expected)


def test_frank_constants_validation():
    with pytest.raises(ValueError):
        FrankConstants(1, 0, 1)
    with pytest.raises(ValueError):
        FrankConstants(-1, 1, 1)
    assert FrankConstants(1.0, 3.0, 1.2).kappa == pytest.approx(2.5)


def test_electric_constants_anisotropy():
    ec = ElectricConstants(1.42809, 7.0, 5.5)
    assert ec.eps_a == 1.5


def test_zero_energy_for_constant_field():
    V = director_space(4)
    assert frank_energy(constant_field(V, [0, 0, 1]), TWIST_K, V) == pytest.approx(0, abs=1e-25)


def test_twist_analytic_energy():
    prob = twist_problem()
    V = director_space(32)
    n = V.interpolate_function(prob.analytic)
    theta0 = np.pi / 8
    assert frank_energy(n, TWIST_K, V) == pytest.approx(2 * 1.2 * theta0**2, abs=2e-8)
    assert round(2 * 1.2 * theta0**2, 5) == 0.37011


def _one_d_field(rng):
    a = rng.standard_normal(3) * 0.4

    def g(y):
        return a[0] * y + a[1] * np.sin(np.pi * y) + a[2] * y**2

    def dg(y):
        return a[0] + a[1] * np.pi * np.cos(np.pi * y) + 2 * a[2] * y

    def field(x, y):
        return np.stack([0 * y, np.sin(g(y)), np.cos(g(y))], -1)

    return field, dg


def test_one_dimensional_reduction_discrete(rng):
    """For an x-independent field with one elastic constant the energy is
    1/2 int |n_h'(y)|^2 dy of the piecewise quadratic nodal interpolant."""
    field, _ = _one_d_field(rng)
    N = 16
    V = director_space(N)
    n = V.interpolate_function(field)
    fc = FrankConstants(1.0, 1.0, 1.0)
    # 1D piecewise quadratic in y through the same nodal values
    y = np.linspace(0, 1, 2 * N + 1)
    vals = field(0 * y, y)
    t, w = np.polynomial.legendre.leggauss(4)
    t, w = 0.5 * (t + 1), 0.5 * w
    dphi = np.stack([4 * t - 3, -8 * t + 4, 4 * t - 1], -1) * N
    oracle = 0.0
    for c in range(N):
        d = dphi @ vals[2 * c:2 * c + 3]
        oracle += 0.5 * np.dot(w / N, np.sum(d**2, axis=1))
    assert frank_energy(n, fc, V) == pytest.approx(oracle, rel=1e-12)


def test_one_dimensional_reduction_continuum(rng):
    field, dg = _one_d_field(rng)
    exact = 0.5 * quad(lambda y: dg(y) ** 2, 0, 1, epsabs=1e-14)[0]
    fc = FrankConstants(1.0, 1.0, 1.0)
    errs = []
    for N in (32, 64):
        V = director_space(N)
        errs.append(abs(frank_energy(V.interpolate_function(field), fc, V) - exact) / exact)
    # the interpolant's energy converges at fourth order
    assert 12 < errs[0] / errs[1] < 20
    assert errs[1] < 2e-8


def test_penalty_energy_examples():
    V = director_space(4)
    fc = FrankConstants(1.3, 0.7, 2.0)
    assert penalty_energy(constant_field(V, [1, 0, 0]), fc, PenaltyConfig(10.0), V) == pytest.approx(0, abs=1e-14)
    assert penalty_energy(constant_field(V, [0, 0, 2]), fc, PenaltyConfig(3.0), V) == pytest.approx(27.0)
    prob = twist_problem()
    W = director_space(32)
    n = W.interpolate_function(prob.analytic)
    # the nodal interpolant is unit length only at nodes; the penalty term is tiny
    assert penalty_energy(n, TWIST_K, PenaltyConfig(1e3), W) == pytest.approx(0.74022, abs=1e-5)


def test_penalty_zeta_validation():
    with pytest.raises(ValueError):
        PenaltyConfig(0.0)


def test_constraint_value_examples():
    V = director_space(4)
    assert constraint_value(constant_field(V, [0, 1, 0]), V) == pytest.approx(0, abs=1e-15)
    assert constraint_value(constant_field(V, [0, 0, 2]), V) == pytest.approx(9.0)
    eps = 0.01
    n = constant_field(V, [np.sqrt(1 + eps), 0, 0])
    assert constraint_value(n, V) == pytest.approx(eps**2, rel=1e-10)


def test_deviation_stats_examples():
    V = director_space(4)
    assert deviation_stats(constant_field(V, [0, 1, 0]), V) == pytest.approx((0, 0), abs=1e-15)
    assert deviation_stats(constant_field(V, [0, 0, 2]), V) == pytest.approx((3, 3))


def test_penalty_minus_elastic_is_constraint(rng):
    V = director_space(8)
    n = random_director(V, rng)
    fc = FrankConstants(1.0, 0.62903, 1.32258)
    zeta = 37.0
    diff = penalty_energy(n, fc, PenaltyConfig(zeta), V) - 2 * frank_energy(n, fc, V)
    assert diff == pytest.approx(zeta * constraint_value(n, V), abs=1e-12 * max(1, abs(diff)))


def test_head_tail_symmetry(rng):
    V = director_space(8)
    n = random_director(V, rng)
    fc = FrankConstants(1.0, 3.0, 1.2)
    assert frank_energy(-n, fc, V) == pytest.approx(frank_energy(n, fc, V), rel=1e-13)


def test_x_translation_invariance():
    """Shifting a periodic field by one cell width only permutes its nodes."""
    V = director_space(8)
    fc = FrankConstants(1.0, 0.5, 1.0)

    def field(shift):
        def f(x, y):
            t = 0.4 * np.sin(2 * np.pi * (x + shift)) * np.sin(np.pi * y) + y
            return np.stack([np.cos(t), 0.3 * np.sin(2 * np.pi * (x + shift)), np.sin(t)], -1)
        return V.interpolate_function(f)

    e0 = frank_energy(field(0.0), fc, V)
    assert frank_energy(field(1 / 8), fc, V) == pytest.approx(e0, rel=1e-12)
    assert frank_energy(field(3 / 8), fc, V) == pytest.approx(e0, rel=1e-12)


def test_frank_energy_nonnegative_for_small_kappa(rng):
    V = director_space(6)
    fc = FrankConstants(1.0, 0.5, 1.0)
    n = random_director(V, rng, 0.05)
    n = (n.reshape(-1, 3) / np.linalg.norm(n.reshape(-1, 3), axis=1)[:, None]).ravel()
    assert frank_energy(n, fc, V) >= 0


# flexoelectric functional ----------------------------------------------------

def _flexo_spaces(n=4):
    m = build_mesh(n, n)
    return FESpace(m, "Q2", 3), FESpace(m, "Q2", 1)


def test_flexo_reduces_to_elastic(rng):
    nV, pV = _flexo_spaces()
    n = random_director(nV, rng)
    fc = FrankConstants(1.0, 4.0, 1.0)
    ec = ElectricConstants(1.42809, 7.0, 7.0, 0.0, 0.0)
    val = flexo_energy(n, np.zeros(pV.dof_count), fc, ec, nV, pV)
    assert val == pytest.approx(2 * frank_energy(n, fc, nV), rel=1e-13)


def test_flexo_dielectric_closed_form():
    nV, pV = _flexo_spaces()
    n = constant_field(nV, [0, 0, 1])
    phi = pV.interpolate_function(lambda x, y: y)
    ec = ElectricConstants(2.0, 3.0, 3.0)
    terms = flexo_terms(n, phi, FrankConstants(1, 1, 1), ec, nV, pV)
    assert terms["dielectric_perp"] == pytest.approx(-6.0)
    assert terms["elastic"] == pytest.approx(0, abs=1e-25)
    assert flexo_energy(n, phi, FrankConstants(1, 1, 1), ec, nV, pV) == pytest.approx(-6.0)


def test_elastic_functional_is_twice_frank(rng):
    V = director_space(4)
    n = random_director(V, rng)
    assert elastic_functional(n, TWIST_K, V) == pytest.approx(2 * frank_energy(n, TWIST_K, V))
