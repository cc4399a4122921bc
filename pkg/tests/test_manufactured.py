import warnings

import numpy as np
import pytest
from scipy import integrate

from pstokes.assembly import assembler
from pstokes.manufactured import (
    ManufacturedCase,
    SingularPointError,
    default_c_q,
    exact_normal_data,
    exact_pressure,
    exact_velocity,
    exact_velocity_gradient,
    radial_power_mean,
    rhs_functional,
)
from pstokes.harness.study import level_mesh
from pstokes.nfunction import PowerLawParams
from pstokes.spaces import build_fe_system

CASES = [(1.5, 1.0), (1.5, 0.5), (2.5, 1.0), (2.5, 0.5)]


def _case(p, alpha, **kw):
    return ManufacturedCase(PowerLawParams(1.0, 1e-5, p), alpha, **kw)


@pytest.mark.parametrize("p,alpha", CASES)
def test_exponents(p, alpha):
    c = _case(p, alpha)
    pc = p / (p - 1)
    assert abs(c.beta_v - (2 * (alpha - 1) / p + 0.01)) <= 1e-14
    assert abs(c.beta_q - (alpha - 2 / pc + 0.01)) <= 1e-14
    assert c.c_q == default_c_q(p) == (1e-3 if p == 1.5 else 1e3)
    assert c.T == 0.1


def test_beta_q_value():
    assert _case(1.5, 1.0).beta_q == pytest.approx(1 - 2 / 3 + 0.01, abs=1e-15)
    assert round(_case(1.5, 1.0).beta_q, 4) == 0.3433


@pytest.mark.parametrize("p,alpha", CASES)
def test_divergence_free(p, alpha, rng):
    c = _case(p, alpha)
    x = rng.uniform(0, 1, (1000, 2))
    G = exact_velocity_gradient(c, 0.07, x)
    assert np.abs(np.trace(G, axis1=1, axis2=2)).max() <= 1e-12 * max(1, np.abs(G).max())


@pytest.mark.parametrize("p,alpha", CASES)
def test_time_scaling(p, alpha, rng):
    c = _case(p, alpha)
    x = rng.uniform(0, 1, (50, 2))
    np.testing.assert_array_equal(exact_velocity(c, 0.0, x), 0.0)
    np.testing.assert_array_equal(exact_pressure(c, 0.0, x), 0.0)
    np.testing.assert_allclose(exact_velocity(c, 0.08, x), 2 * exact_velocity(c, 0.04, x), rtol=1e-15)
    np.testing.assert_allclose(exact_pressure(c, 0.08, x), 2 * exact_pressure(c, 0.04, x), rtol=1e-14)


def test_gradient_closed_form():
    # alpha=1, p=2: beta = 0.01, at x=(1,0), t=1
    c = ManufacturedCase(PowerLawParams(1.0, 1e-5, 2.0), 1.0)
    b = c.beta_v
    want = np.array([[0.0, 1.0], [-1.0 - b, 0.0]])
    np.testing.assert_allclose(exact_velocity_gradient(c, 1.0, np.array([1.0, 0.0])), want, atol=1e-15)


def test_gradient_finite_differences(rng):
    c = _case(1.5, 0.5)
    x = rng.uniform(0.1, 0.9, (20, 2))
    h = 1e-6
    G = exact_velocity_gradient(c, 0.05, x)
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        fd = (exact_velocity(c, 0.05, x + e) - exact_velocity(c, 0.05, x - e)) / (2 * h)
        np.testing.assert_allclose(G[:, :, j], fd, rtol=1e-7, atol=1e-9)


def test_singular_point():
    c = _case(1.5, 0.5)
    np.testing.assert_array_equal(exact_velocity(c, 0.1, np.zeros(2)), 0.0)
    with pytest.raises(SingularPointError):
        exact_velocity_gradient(c, 0.1, np.zeros(2))


@pytest.mark.parametrize("beta", [0.3433, -0.1567, 1.0])
def test_radial_mean_oracle(beta):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        ref = 2 * integrate.quad(lambda th: np.cos(th) ** -(beta + 2) / (beta + 2), 0, np.pi / 4,
                                 epsabs=1e-15, epsrel=1e-14)[0]
    assert radial_power_mean(beta) == pytest.approx(ref, rel=1e-10)


def test_harness_quadrature_matches_mean():
    c = _case(1.5, 1.0)
    asm = assembler(build_fe_system(level_mesh(2), "strong"))
    r = np.hypot(*asm.points.T)
    assert abs(asm.weights @ r**c.beta_q - c.q_mean) <= 1e-8


@pytest.mark.parametrize("p,alpha", CASES)
def test_pressure_zero_mean(p, alpha):
    # polar coordinates over the half square below the diagonal, doubled by symmetry
    c = _case(p, alpha)

    def radial(th):
        rmax = 1 / np.cos(th)
        return integrate.quad(lambda r: r * exact_pressure(c, c.T, np.array([r * np.cos(th), r * np.sin(th)])),
                              0, rmax, epsabs=1e-12 * c.c_q, epsrel=1e-12)[0]

    total = 2 * integrate.quad(radial, 0, np.pi / 4, epsabs=1e-12 * c.c_q, epsrel=1e-12)[0]
    assert abs(total) <= 1e-9 * c.c_q * c.T


@pytest.mark.parametrize("p,alpha", CASES)
def test_pressure_mean_harness_quadrature(p, alpha):
    c = _case(p, alpha)
    asm = assembler(build_fe_system(level_mesh(3), "strong"))
    q = exact_pressure(c, c.T, asm.points)
    assert abs(asm.weights @ q) <= 1e-6 * c.c_q * c.T


def test_normal_data():
    c = _case(1.5, 1.0)
    x1 = np.linspace(0.1, 1, 7)
    pts = np.stack([x1, np.zeros_like(x1)], axis=1)
    n = np.tile([0.0, -1.0], (7, 1))
    np.testing.assert_allclose(exact_normal_data(c, 0.06, pts, n), 0.06 * x1 ** (c.beta_v + 1), rtol=1e-14)
    assert exact_normal_data(c, 0.06, np.zeros(2), np.array([0.0, -1.0])) == 0.0
    np.testing.assert_array_equal(exact_normal_data(c, 0.0, pts, n), 0.0)


def test_rhs_functional_properties(rng):
    c = _case(2.5, 1.0)
    x = rng.uniform(0.05, 1, (30, 2))
    # rigid rotation test field: eps(xi) = 0, div xi = 0
    xi = np.stack([x[:, 1], -x[:, 0]], axis=1)
    grad = np.broadcast_to(np.array([[0.0, 1.0], [-1.0, 0.0]]), (30, 2, 2))
    dv = exact_velocity(c, 1.0, x)
    np.testing.assert_allclose(rhs_functional(c, 0.04, x, xi, grad), np.sum(dv * xi, axis=1), rtol=1e-13)
    # without the stress part the functional is linear in t
    xi = rng.standard_normal((30, 2))
    grad = rng.standard_normal((30, 2, 2))

    def no_stress(t):
        S = c.load_data(t, x)[1]
        return rhs_functional(c, t, x, xi, grad) - np.sum(S * 0.5 * (grad + grad.transpose(0, 2, 1)),
                                                          axis=(1, 2))

    a, b = no_stress(0.03), no_stress(0.06)
    dvxi = np.sum(dv * xi, axis=1)
    np.testing.assert_allclose(b - dvxi, 2 * (a - dvxi), rtol=1e-12, atol=1e-12)
