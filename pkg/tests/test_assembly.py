import numpy as np
import pytest
from scipy import integrate

from pstokes.assembly import (
    Assembler,
    assemble_divergence,
    assemble_mass,
    assemble_normal_trace,
    assemble_rhs,
    assemble_stress,
    assembler,
)
from pstokes.manufactured import ManufacturedCase, rhs_functional
from pstokes.nfunction import PowerLawParams
from pstokes.spaces import eval_basis


def test_mass_basic(fe_cache):
    fe = fe_cache(1, "weak")
    M = assemble_mass(fe)
    assert M.shape == (18, 18)
    assert M.sum() == pytest.approx(2.0, abs=1e-14)
    assert abs(M - M.T).max() <= 1e-14
    assert np.linalg.eigvalsh(M.toarray()).min() > 0


def test_mass_quadrature_degree_invariance(fe_cache):
    fe = fe_cache(3, "weak")
    M6 = Assembler(fe, degree=6).mass()
    M8 = Assembler(fe, degree=8).mass()
    assert abs(M6 - M8).max() <= 1e-12 * abs(M6).max()
    B6 = Assembler(fe, degree=6).divergence()
    B8 = Assembler(fe, degree=8).divergence()
    assert abs(B6 - B8).max() <= 1e-12 * abs(B6).max()


def test_assembly_deterministic(fe_cache, rng):
    fe = fe_cache(3, "strong")
    v = rng.standard_normal(fe.n_v)
    prm = PowerLawParams(1.0, 1e-5, 1.5)
    r1, J1 = Assembler(fe).stress(prm, v)
    r2, J2 = Assembler(fe).stress(prm, v)
    np.testing.assert_array_equal(r1, r2)
    assert (J1 != J2).nnz == 0


def test_stress_zero_velocity(fe_cache):
    fe = fe_cache(2, "strong")
    res, _ = assemble_stress(fe, PowerLawParams(1.0, 1e-5, 1.5), np.zeros(fe.n_v))
    assert np.all(res == 0)


def test_linear_jacobian_is_stiffness(fe_cache, rng):
    fe = fe_cache(2, "weak")
    K = assembler(fe).symmetric_gradient_stiffness()
    prm = PowerLawParams(1.0, 0.0, 2.0)
    for _ in range(3):
        v = rng.standard_normal(fe.n_v)
        res, J = assemble_stress(fe, prm, v)
        assert abs(J - K).max() <= 1e-13 * abs(K).max()
        np.testing.assert_allclose(res, K @ v, atol=1e-12)


@pytest.mark.parametrize("p", [1.5, 2.5])
def test_jacobian_finite_differences(p, fe_cache, rng):
    fe = fe_cache(1, "weak")
    prm = PowerLawParams(1.0, 1e-5, p)
    v = rng.standard_normal(fe.n_v)
    res, J = assemble_stress(fe, prm, v)
    J = J.toarray()
    step = 1e-6
    fd = np.empty_like(J)
    for j in range(fe.n_v):
        e = np.zeros(fe.n_v)
        e[j] = step
        fd[:, j] = (assemble_stress(fe, prm, v + e)[0] - assemble_stress(fe, prm, v - e)[0]) / (2 * step)
    assert np.abs(fd - J).max() / np.abs(J).max() <= 1e-5


def test_divergence_kills_constants_and_rotation(fe_cache):
    fe = fe_cache(3, "weak")
    B = assemble_divergence(fe)
    assert B.shape == (fe.n_q, fe.n_v)
    const = fe.interpolate(lambda x: np.tile([0.3, -1.2], (len(x), 1)))
    rot = fe.interpolate(lambda x: np.stack([x[:, 1], -x[:, 0]], axis=1))
    assert np.abs(B @ const).max() <= 1e-14
    assert np.abs(B @ rot).max() <= 1e-14


def test_divergence_theorem_row(fe_cache, rng):
    fe = fe_cache(2, "strong")
    B = assemble_divergence(fe)
    v = rng.standard_normal(fe.n_v)
    v[fe.constrained_dofs] = 0.0
    assert abs(np.ones(fe.n_q) @ (B @ v)) <= 1e-12


def test_normal_trace_strong_mode_empty(fe_cache):
    fe = fe_cache(2, "strong")
    assert assemble_normal_trace(fe).shape == (0, fe.n_v)


def test_normal_trace_tangential_columns(fe_cache):
    fe = fe_cache(3, "weak")
    T = assemble_normal_trace(fe).tocsc()
    m = fe.mesh
    boundary_nodes = np.unique(fe.facet_nodes)
    interior = np.setdiff1d(np.arange(fe.n_nodes), boundary_nodes)
    for node in interior:
        assert T[:, node].nnz == 0 or abs(T[:, node]).max() == 0
    # x-component on the bottom edge (away from corners) is tangential
    bottom = [k for k in boundary_nodes if fe.nodes[k, 1] == 0 and 0 < fe.nodes[k, 0] < 1]
    assert bottom
    for node in bottom:
        assert abs(T[:, node]).max() <= 1e-16
    assert m.n_facets == 12


def test_normal_trace_rotation_moments(fe_cache):
    fe = fe_cache(2, "weak")
    m = fe.mesh
    T = assemble_normal_trace(fe)
    v = fe.interpolate(lambda x: np.stack([x[:, 1], -x[:, 0]], axis=1))
    got = T @ v
    ends = m.vertices[m.facet_vertices]
    length = np.linalg.norm(ends[:, 1] - ends[:, 0], axis=1)
    ga = np.einsum("fi,fi->f", np.stack([ends[:, 0, 1], -ends[:, 0, 0]], axis=1), m.facet_normals)
    gb = np.einsum("fi,fi->f", np.stack([ends[:, 1, 1], -ends[:, 1, 0]], axis=1), m.facet_normals)
    want = np.zeros(fe.n_lam)
    want[fe.facet_lam[:, 0]] = length * (ga / 3 + gb / 6)
    want[fe.facet_lam[:, 1]] = length * (ga / 6 + gb / 3)
    np.testing.assert_allclose(got, want, atol=1e-15)


def test_normal_trace_row_sums(fe_cache):
    fe = fe_cache(2, "weak")
    m = fe.mesh
    T = assemble_normal_trace(fe).toarray()
    ends = m.vertices[m.facet_vertices]
    length = np.linalg.norm(ends[:, 1] - ends[:, 0], axis=1)
    for f in range(m.n_facets):
        row = T[fe.facet_lam[f, 0]] + T[fe.facet_lam[f, 1]]
        want = np.zeros(fe.n_v)
        a, b, mid = fe.facet_nodes[f]
        for c in range(2):
            nc = m.facet_normals[f, c]
            want[a + c * fe.n_nodes] += length[f] * nc / 6
            want[b + c * fe.n_nodes] += length[f] * nc / 6
            want[mid + c * fe.n_nodes] += 2 * length[f] * nc / 3
        np.testing.assert_allclose(row, want, atol=1e-15)


def _basis_at(fe, k, j, x):
    """Value and gradient of global velocity basis function ``j`` at ``x`` in triangle ``k``."""
    tri = fe.mesh.vertices[fe.mesh.triangles[k]]
    jac = np.column_stack([tri[1] - tri[0], tri[2] - tri[0]])
    ref = np.linalg.solve(jac, np.asarray(x) - tri[0])
    ref = np.clip(ref, 0, 1)
    phi, dref = eval_basis("P2", ref)
    dphys = dref[0] @ np.linalg.inv(jac)
    local = (fe.elem_vdofs[k] == j).reshape(2, 6).astype(float)
    return local @ phi[0], local @ dphys


def test_rhs_against_independent_quadrature(fe_cache):
    # p = 2, c_q = 0: the functional is affine in t, so its time mean is the midpoint value
    fe = fe_cache(1, "weak")
    case = ManufacturedCase(PowerLawParams(1.0, 1e-5, 2.0), 1.0, c_q=0.0)
    t0, t1 = 0.025, 0.05
    load = assemble_rhs(fe, case, (t0, t1))
    tm = 0.5 * (t0 + t1)
    for j in (4, 7, 13, 16):
        def integrand(y, x, k):
            xi, dxi = _basis_at(fe, k, j, [x, y])
            return float(rhs_functional(case, tm, np.array([x, y]), xi, dxi))

        # triangle 0 lies below the diagonal, triangle 1 above
        lower = integrate.dblquad(integrand, 0, 1, 0, lambda x: x, args=(_which(fe, 0),),
                                  epsabs=1e-13, epsrel=1e-11)[0]
        upper = integrate.dblquad(integrand, 0, 1, lambda x: x, 1, args=(_which(fe, 1),),
                                  epsabs=1e-13, epsrel=1e-11)[0]
        assert load[j] == pytest.approx(lower + upper, rel=1e-8, abs=1e-12)


def _which(fe, side):
    c = fe.mesh.centroids()
    below = c[:, 1] < c[:, 0]
    return int(np.flatnonzero(below if side == 0 else ~below)[0])


def test_rhs_affine_in_pressure_scale(fe_cache):
    fe = fe_cache(2, "weak")
    prm = PowerLawParams(1.0, 1e-5, 2.0)
    loads = [assemble_rhs(fe, ManufacturedCase(prm, 1.0, c_q=c), (0.0, 0.025)) for c in (0.0, 1.0, 2.0)]
    np.testing.assert_allclose(loads[2] - loads[0], 2 * (loads[1] - loads[0]), atol=1e-13)
    assert np.abs(loads[1] - loads[0]).max() > 1e-6
