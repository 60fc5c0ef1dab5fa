import numpy as np
import pytest

from nematicmin.energy import FrankConstants
from nematicmin.mesh import FESpace, build_mesh
from nematicmin.problems import (PROBLEMS, doubled_nano_trace, flexo_problem, get_problem,
                                 l2_error, nano_angle, nano_problem, tilt_twist_problem,
                                 twist_problem)


def test_twist_problem():
    p = twist_problem()
    assert np.allclose(p.bottom(np.array([0.3])), [[0.92388, 0, -0.38268]], atol=1e-5)
    assert p.reference_energy == 0.37011
    assert p.fc == FrankConstants(1.0, 1.2, 1.0)
    x, y = np.meshgrid(np.linspace(0, 1, 7), np.linspace(0, 1, 9))
    assert np.allclose(np.linalg.norm(p.analytic(x, y), axis=-1), 1.0, atol=1e-15)
    # the analytic field matches both traces
    assert np.allclose(p.analytic(0.2, 0.0), p.bottom(np.array([0.2]))[0])
    assert np.allclose(p.analytic(0.2, 1.0), p.top(np.array([0.2]))[0])


def test_tilt_twist_problem():
    p = tilt_twist_problem()
    assert np.allclose(p.top(np.array([0.7])), [[np.cos(np.pi / 4), 0, np.sin(np.pi / 4)]])
    assert p.reference_energy == 3.59294
    assert p.fc.kappa == pytest.approx(2.5)
    assert p.analytic is None


def test_nano_trace_at_origin():
    p = nano_problem()
    a = 0.25 * (np.pi + 4 * np.arctan(0.95))
    assert nano_angle(np.array([0.0]))[0] == pytest.approx(a, abs=1e-14)
    assert np.allclose(p.bottom(np.array([0.0])), [[0, np.cos(a), np.sin(a)]], atol=1e-14)
    assert p.reference_energy == 3.89001


def test_nano_trace_unit_length():
    x = np.linspace(0, 1, 100)
    for trace in (nano_problem().bottom, doubled_nano_trace):
        assert np.abs(np.linalg.norm(trace(x), axis=1) - 1).max() < 1e-14


def test_nano_trace_periodic():
    x = np.linspace(0, 1, 13)
    assert np.allclose(nano_problem().bottom(x), nano_problem().bottom(x + 1.0), atol=1e-12)


def test_flexo_problem():
    p = flexo_problem()
    x = np.linspace(0, 0.5, 31)
    assert np.allclose(p.bottom(x), p.bottom(x + 0.5), atol=1e-12)
    assert p.has_potential and p.reference_approximate
    assert p.reference_energy == 16.413
    assert (p.ec.e_s, p.ec.e_b) == (1.5, -1.5)
    assert p.fc == FrankConstants(1.0, 4.0, 1.0)


def test_initial_director_unit_and_dirichlet():
    for name in PROBLEMS:
        p = get_problem(name)
        V = FESpace(build_mesh(4, 4), "Q2", 3)
        n = p.initial_director(V, perturb=0.01).reshape(-1, 3)
        assert np.abs(np.linalg.norm(n, axis=1) - 1).max() < 1e-14
        xy = V.node_coords
        bottom = xy[:, 1] == 0
        assert np.allclose(n[bottom], p.bottom(xy[bottom, 0]))


def test_perturbation_tilts_out_of_plane():
    p = tilt_twist_problem()
    V = FESpace(build_mesh(4, 4), "Q2", 3)
    assert np.all(p.initial_director(V).reshape(-1, 3)[:, 1] == 0)
    assert np.abs(p.initial_director(V, 0.1).reshape(-1, 3)[:, 1]).max() > 0.05


def test_get_problem_unknown():
    with pytest.raises(ValueError):
        get_problem("cholesteric")


def test_l2_error_interpolant_convergence():
    p = twist_problem()
    errs = []
    for N in (16, 32, 64):
        V = FESpace(build_mesh(N, N), "Q2", 3)
        errs.append(l2_error(V.interpolate_function(p.analytic), p.analytic, V))
    assert errs[-1] < 1e-5
    for a, b in zip(errs, errs[1:]):
        assert 6 < a / b < 10


def test_l2_error_constant_offset():
    p = twist_problem()
    V = FESpace(build_mesh(16, 16), "Q2", 3)
    n = V.interpolate_function(lambda x, y: p.analytic(x, y) + np.array([0.1, 0, 0]))
    assert l2_error(n, p.analytic, V) == pytest.approx(0.1, abs=1e-5)


def test_l2_error_identical_and_missing():
    V = FESpace(build_mesh(4, 4), "Q2", 3)

    def const(x, y):
        return np.broadcast_to(np.array([0.0, 0, 1]), np.shape(x) + (3,))

    assert l2_error(V.interpolate_function(const), const, V) == pytest.approx(0, abs=1e-15)
    with pytest.raises(ValueError):
        l2_error(np.zeros(V.dof_count), None, V)
