from math import factorial

import numpy as np
import pytest
from scipy import integrate

from pstokes.mesh import build_square_mesh, refine_uniform
from pstokes.quadrature import element_quadrature, gauss_interval, graded_triangle_rule, triangle_rule


def _monomial_exact(i, j):
    # int over the reference triangle of x^i y^j
    return factorial(i) * factorial(j) / factorial(i + j + 2)


@pytest.mark.parametrize("rule", [triangle_rule(6), triangle_rule(8), graded_triangle_rule()],
                         ids=["deg6", "deg8", "graded"])
def test_triangle_rules_exact_to_degree_6(rule):
    assert np.all(rule.weights > 0)
    assert abs(rule.weights.sum() - 0.5) <= 1e-14
    x, y = rule.points.T
    for i in range(7):
        for j in range(7 - i):
            assert abs(rule.weights @ (x**i * y**j) - _monomial_exact(i, j)) <= 1e-14


def test_gauss_interval():
    g = gauss_interval(3)
    assert len(g) == 3
    assert abs(g.weights.sum() - 1.0) <= 1e-15
    for k in range(6):
        assert g.weights @ g.points**k == pytest.approx(1.0 / (k + 1), abs=1e-15)


@pytest.mark.parametrize("n", [1, 3])
def test_element_quadrature_polynomials(n):
    q = element_quadrature(build_square_mesh(n))
    x, y = q.points.T
    assert q.integrate(np.ones_like(x)) == pytest.approx(1.0, abs=1e-14)
    assert q.integrate(x**3 * y**3) == pytest.approx(1 / 16, abs=1e-14)
    assert q.integrate(x**2 + y**4) == pytest.approx(1 / 3 + 1 / 5, abs=1e-14)


def test_singular_radial_integrand():
    # int_(0,1)^2 |x|^b by polar coordinates; integrable singularity at the origin
    beta = -0.69
    exact = 2 * integrate.quad(lambda th: np.cos(th) ** -(beta + 2) / (beta + 2), 0, np.pi / 4,
                               epsabs=1e-15)[0]
    m = refine_uniform(refine_uniform(build_square_mesh(1)))
    q = element_quadrature(m)
    assert q.integrate(np.hypot(*q.points.T) ** beta) == pytest.approx(exact, rel=1e-6)
