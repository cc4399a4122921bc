import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pstokes.assembly import assembler
from pstokes.manufactured import ManufacturedCase, exact_velocity
from pstokes.mesh import build_square_mesh
from pstokes.nfunction import PowerLawParams
from pstokes.spaces import BCMode, build_fe_system, eval_basis


def test_dimensions_n1(fe_cache):
    weak = fe_cache(1, "weak")
    assert (weak.n_v, weak.n_q, weak.n_lam) == (18, 4, 8)
    assert weak.bc_mode is BCMode.WEAK
    assert weak.constrained == []
    strong = fe_cache(1, "strong")
    assert strong.n_lam == 0
    # 4 boundary midpoints with one normal each, 4 corners with two
    assert len(strong.constrained) == 12
    assert len(strong.free_dofs) == 6


@pytest.mark.parametrize("n", [2, 3, 5])
def test_dimension_formula(n, fe_cache):
    fe = fe_cache(n, "weak")
    m = fe.mesh
    assert fe.n_v == 2 * (m.n_vertices + m.n_edges)
    assert fe.n_q == m.n_vertices
    assert fe.n_lam == 2 * m.n_facets
    assert len(np.unique(fe.facet_lam)) == fe.n_lam
    strong = fe_cache(n, "strong")
    boundary_nodes = m.n_facets * 2
    assert len(strong.constrained_dofs) == boundary_nodes + 4
    assert len(np.unique(strong.constrained_dofs)) == len(strong.constrained_dofs)


def test_p1_barycenter():
    values, grads = eval_basis("P1", [1 / 3, 1 / 3])
    np.testing.assert_allclose(values, 1 / 3, atol=1e-15)
    np.testing.assert_allclose(grads.sum(axis=1), 0, atol=1e-15)


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1))
def test_p2_partition_of_unity(a, b):
    x, y = a * (1 - b), b * (1 - a) * 0.999
    values, grads = eval_basis("P2", [x, y])
    assert values.sum() == pytest.approx(1.0, abs=1e-13)
    np.testing.assert_allclose(grads.sum(axis=1), 0, atol=1e-12)


def test_p2_nodal_property():
    nodes = np.array([[0, 0], [1, 0], [0, 1], [0.5, 0.5], [0, 0.5], [0.5, 0]])
    values, _ = eval_basis("P2", nodes)
    np.testing.assert_allclose(values, np.eye(6), atol=1e-15)


def test_outside_reference_triangle():
    with pytest.raises(ValueError):
        eval_basis("P2", [0.8, 0.3])
    with pytest.raises(ValueError):
        eval_basis("P1", [-1e-9, 0.2])


def test_interpolation_exactness(rng, fe_cache):
    fe = fe_cache(3, "strong")
    asm = assembler(fe)
    c = rng.standard_normal(12)

    def quad(x):
        X, Y = x[:, 0], x[:, 1]
        return np.stack([c[0] + c[1] * X + c[2] * Y + c[3] * X * X + c[4] * X * Y + c[5] * Y * Y,
                         c[6] + c[7] * X + c[8] * Y + c[9] * X * X + c[10] * X * Y + c[11] * Y * Y],
                        axis=1)

    values, _ = asm.velocity_at(fe.interpolate(quad))
    np.testing.assert_allclose(values, quad(asm.points), atol=1e-12)
    q = asm.pressure_at(fe.interpolate_scalar(lambda x: 1 + 2 * x[:, 0] - 3 * x[:, 1]))
    np.testing.assert_allclose(q, 1 + 2 * asm.points[:, 0] - 3 * asm.points[:, 1], atol=1e-12)


def test_strong_constraint_values_reproduce_normal_data():
    case = ManufacturedCase(PowerLawParams(1.0, 1e-5, 1.5), 1.0)
    fe = build_fe_system(build_square_mesh(3), "strong", case.normal_data, inhomogeneous=True)
    t = 0.07
    v = fe.interpolate(lambda x: exact_velocity(case, t, x))
    vals = fe.constrained_values(t)
    np.testing.assert_allclose(v[fe.constrained_dofs], vals, atol=1e-15)
    g = case.normal_data(t, fe.nodes[fe.constrained_nodes], fe.constrained_normals)
    comp = fe.constrained_dofs // fe.n_nodes
    nc = fe.constrained_normals[np.arange(len(comp)), comp]
    np.testing.assert_allclose(vals * nc, g, atol=1e-15)


def test_strong_inhomogeneous_requires_data():
    with pytest.raises(ValueError):
        build_fe_system(build_square_mesh(1), "strong", None, inhomogeneous=True)
