import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nematicmin.mesh import (FESpace, build_mesh, interpolate, mesh_hierarchy, quadrature,
                             quadrature_data, quadrature_points, refine)


def test_smallest_mesh():
    m = build_mesh(1, 1, periodic_x=False)
    assert m.n_cells == 1
    v = m.vertices()
    assert sorted(map(tuple, v)) == [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)]


def test_dof_counts_8x8():
    assert FESpace(build_mesh(8, 8, True), "Q2").dof_count == 16 * 17 == 272
    assert FESpace(build_mesh(8, 8, False), "Q2").dof_count == 17 * 17 == 289
    assert FESpace(build_mesh(8, 8, True), "P0").dof_count == 64
    assert FESpace(build_mesh(8, 8, True), "Q2", 3).dof_count == 3 * 272


@pytest.mark.parametrize("periodic", [True, False])
def test_dof_count_formula(periodic):
    for nx in range(1, 17):
        for ny in range(1, 17, 5):
            V = FESpace(build_mesh(nx, ny, periodic), "Q2")
            expected = (2 * nx if periodic else 2 * nx + 1) * (2 * ny + 1)
            assert V.dof_count == expected
            # explicit enumeration of the distinct nodes referenced by cells
            assert len(np.unique(V.cell_nodes)) == expected


def test_zero_cells_rejected():
    with pytest.raises(ValueError):
        build_mesh(0, 4)


def test_refine():
    m = refine(build_mesh(8, 8))
    assert (m.nx, m.ny, m.level) == (16, 16, 1)
    assert refine(refine(build_mesh(8, 8))).nx == 32
    fine = refine(build_mesh(1, 1))
    assert np.all(fine.parent_cells() == 0)
    assert len(fine.parent_cells()) == 4


def test_hierarchy_sizes():
    assert [m.nx for m in mesh_hierarchy(8, 4)] == [8, 16, 32, 64]


def test_quadrature_rule():
    q = quadrature(5)
    assert len(q.weights) == 9
    assert q.weights.sum() == pytest.approx(1.0, abs=1e-15)
    x, y = q.points.T
    assert np.dot(q.weights, x**2 * y**2) == pytest.approx(1 / 9, abs=1e-15)
    # degree-5 exactness in each variable
    assert np.dot(q.weights, x**5 * y**4) == pytest.approx(1 / 30, abs=1e-15)


def test_composite_quadrature_cos():
    m = build_mesh(8, 8)
    qd = quadrature_data(m)
    pts = quadrature_points(m)
    val = np.einsum("eq,q->", np.cos(pts[..., 0]), qd.w)
    assert abs(val - np.sin(1.0)) < 1e-10


def test_domain_measure():
    for m in (build_mesh(3, 5), build_mesh(8, 8, False)):
        qd = quadrature_data(m)
        assert qd.w.sum() * m.n_cells == pytest.approx(1.0, abs=1e-13)


def test_interpolate_constant_and_quadratic():
    c, f = FESpace(build_mesh(4, 4, False), "Q2"), FESpace(build_mesh(8, 8, False), "Q2")
    const = np.full(c.dof_count, 2.5)
    assert np.allclose(interpolate(const, c, f), 2.5, atol=1e-14)
    sq = c.interpolate_function(lambda x, y: x**2)
    assert np.allclose(interpolate(sq, c, f), f.interpolate_function(lambda x, y: x**2), atol=1e-14)


def test_interpolate_p0_copies_parent():
    cm = build_mesh(4, 4)
    c, f = FESpace(cm, "P0"), FESpace(refine(cm), "P0")
    vals = np.arange(16.0)
    assert np.array_equal(interpolate(vals, c, f), vals[refine(cm).parent_cells()])


def test_interpolate_mismatch():
    c = FESpace(build_mesh(4, 4), "Q2")
    with pytest.raises(ValueError):
        interpolate(np.zeros(c.dof_count), c, FESpace(build_mesh(16, 16), "Q2"))
    with pytest.raises(ValueError):
        interpolate(np.zeros(c.dof_count), c, FESpace(build_mesh(8, 8), "P0"))


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), periodic=st.booleans(), ncomp=st.sampled_from([1, 3]))
def test_interpolation_reproduces_coarse_function(seed, periodic, ncomp):
    rng = np.random.default_rng(seed)
    cm = build_mesh(3, 2, periodic)
    c, f = FESpace(cm, "Q2", ncomp), FESpace(refine(cm), "Q2", ncomp)
    u = rng.standard_normal(c.dof_count)
    pts = rng.random((20, 2))
    assert np.allclose(c.evaluate(u, pts), f.evaluate(interpolate(u, c, f), pts), atol=1e-13)


def test_periodic_aliasing():
    V = FESpace(build_mesh(4, 2, True), "Q2")
    u = V.interpolate_function(lambda x, y: np.sin(2 * np.pi * x) + y)
    left = V.evaluate(u, [[0.0, 0.3]])
    right = V.evaluate(u, [[1.0, 0.3]])
    assert np.allclose(left, right, atol=1e-14)


def test_boundary_dofs_cover_y_edges():
    V = FESpace(build_mesh(4, 4), "Q2", 3)
    y = V.node_coords[V.boundary_nodes, 1]
    assert set(np.unique(y)) == {0.0, 1.0}
    assert V.boundary_dofs.sum() == 3 * 2 * 8
