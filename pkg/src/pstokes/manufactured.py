"""Radially singular exact solution family on the unit square.

    v(t, x) = t |x|^bv (x2, -x1),        bv = 2 (alpha - 1) / p + 0.01
    q(t, x) = t c_q (|x|^bq - mean),     bq = alpha - 2 / p' + 0.01

The forcing is the weak residual of the exact pair,

    L(t)(xi) = (d_t v, xi) + (S(eps(v)), eps(xi)) - (q, div xi),

so the exact boundary multiplier vanishes.  ``v . n`` is nonzero on the
square and is prescribed as inhomogeneous impermeability data.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from . import nfunction
from .nfunction import PowerLawParams

__all__ = [
    "SingularPointError",
    "ManufacturedCase",
    "radial_power_mean",
    "exact_velocity",
    "exact_velocity_gradient",
    "exact_pressure",
    "exact_normal_data",
    "rhs_functional",
    "default_c_q",
]

FINAL_TIME = 0.1
EXPONENT_OFFSET = 1.0e-2


class SingularPointError(ArithmeticError):
    """Evaluation requested at the singular point x = 0."""


def radial_power_mean(beta: float, rtol: float = 1e-10) -> float:
    """``int_{(0,1)^2} |x|^beta dx`` for ``beta > -2``.

    In polar coordinates the radial integral is explicit, leaving
    ``2 int_0^{pi/4} sec(theta)^(beta+2) / (beta+2) dtheta``.
    """
    if beta <= -2:
        raise ValueError("|x|^beta is not integrable near the origin for beta <= -2")
    value, _ = quad(
        lambda th: np.cos(th) ** (-(beta + 2.0)) / (beta + 2.0),
        0.0,
        np.pi / 4,
        epsabs=0.0,
        epsrel=rtol,
        limit=200,
    )
    return 2.0 * value


def default_c_q(p: float) -> float:
    return 1.0e-3 if p < 2 else 1.0e3


@dataclass(frozen=True)
class ManufacturedCase:
    params: PowerLawParams
    alpha: float = 1.0
    c_q: float = None
    T: float = FINAL_TIME
    beta_v: float = field(init=False)
    beta_q: float = field(init=False)
    q_mean: float = field(init=False)

    def __post_init__(self):
        p = self.params.p
        if self.c_q is None:
            object.__setattr__(self, "c_q", default_c_q(p))
        object.__setattr__(self, "beta_v", 2.0 * (self.alpha - 1.0) / p + EXPONENT_OFFSET)
        object.__setattr__(
            self, "beta_q", self.alpha - 2.0 / self.params.p_conj + EXPONENT_OFFSET
        )
        object.__setattr__(self, "q_mean", radial_power_mean(self.beta_q))

    # point data used by assembly ------------------------------------------
    def load_data(self, t, x):
        """Point values ``(d_t v, S(eps(v)), q)`` of the forcing functional."""
        dv = exact_velocity(self, 1.0, x)
        S = nfunction.stress(self.params, exact_velocity_gradient(self, t, x))
        return dv, S, exact_pressure(self, t, x)

    def normal_data(self, t, x, n):
        return exact_normal_data(self, t, x, n)


def _radius(x):
    x = np.asarray(x, dtype=float)
    return np.hypot(x[..., 0], x[..., 1])


def exact_velocity(case: ManufacturedCase, t, x):
    x = np.asarray(x, dtype=float)
    r = _radius(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        radial = np.where(r > 0, np.power(np.where(r > 0, r, 1.0), case.beta_v), 0.0)
    return t * radial[..., None] * np.stack([x[..., 1], -x[..., 0]], axis=-1)


def exact_velocity_gradient(case: ManufacturedCase, t, x):
    """``[..., i, j] = d_j v_i``."""
    x = np.asarray(x, dtype=float)
    r = _radius(x)
    b = case.beta_v
    if b < 1 and np.any(r == 0):
        raise SingularPointError("velocity gradient requested at the origin")
    safe = np.where(r > 0, r, 1.0)
    rb = np.where(r > 0, safe**b, 0.0)
    rb2 = np.where(r > 0, b * safe ** (b - 2), 0.0)
    w = np.stack([x[..., 1], -x[..., 0]], axis=-1)
    grad = rb2[..., None, None] * w[..., :, None] * x[..., None, :]
    grad[..., 0, 1] += rb
    grad[..., 1, 0] -= rb
    return t * grad


def exact_pressure(case: ManufacturedCase, t, x):
    r = _radius(x)
    return t * case.c_q * (r**case.beta_q - case.q_mean)


def exact_normal_data(case: ManufacturedCase, t, x, n):
    """``v(t, x) . n`` at boundary points ``x`` with unit normals ``n``."""
    v = exact_velocity(case, t, x)
    return np.sum(v * np.asarray(n, dtype=float), axis=-1)


def rhs_functional(case: ManufacturedCase, t, x, xi, grad_xi, div_xi=None):
    """Pointwise integrand of ``L(t)(xi)`` for a test field given by its value,
    gradient and (optionally) divergence at ``x``."""
    grad_xi = np.asarray(grad_xi, dtype=float)
    if div_xi is None:
        div_xi = np.trace(grad_xi, axis1=-2, axis2=-1)
    dv, S, q = case.load_data(t, x)
    eps_xi = nfunction.sym(grad_xi)
    return (
        np.sum(dv * np.asarray(xi, dtype=float), axis=-1)
        + np.sum(S * eps_xi, axis=(-2, -1))
        - q * div_xi
    )
