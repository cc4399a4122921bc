"""Power-law extra stress and the associated shifted N-functions.

All tensor routines act on arrays of shape ``(..., 2, 2)`` and use the
Frobenius norm for ``|A^sym|``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "PowerLawParams",
    "NonsmoothPointError",
    "sym",
    "frobenius",
    "stress",
    "stress_derivative",
    "stress_tangent_coefficients",
    "f_map",
    "phi",
    "phi_prime",
    "phi_conjugate",
    "modular",
]


class NonsmoothPointError(ArithmeticError):
    """The stress law is not differentiable at the requested point."""


@dataclass(frozen=True)
class PowerLawParams:
    """Constants of ``S(A) = nu0 (delta + |A^sym|)^(p-2) A^sym``."""

    nu0: float = 1.0
    delta: float = 1e-5
    p: float = 2.0

    def __post_init__(self):
        if not self.nu0 > 0:
            raise ValueError(f"nu0 must be positive, got {self.nu0}")
        if not self.delta >= 0:
            raise ValueError(f"delta must be nonnegative, got {self.delta}")
        if not 1 < self.p < np.inf:
            raise ValueError(f"p must lie in (1, inf), got {self.p}")

    @property
    def p_conj(self) -> float:
        return self.p / (self.p - 1.0)


def sym(A):
    A = np.asarray(A, dtype=float)
    return 0.5 * (A + np.swapaxes(A, -1, -2))


def frobenius(A):
    A = np.asarray(A, dtype=float)
    return np.sqrt(np.sum(A * A, axis=(-2, -1)))


def _power_prefactor(shift, base, exponent):
    """``(shift + base)**exponent`` with the zero-limit rule at a zero base."""
    total = shift + base
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(total > 0, np.power(np.where(total > 0, total, 1.0), exponent), 0.0)
    return out


def stress(params: PowerLawParams, A):
    E = sym(A)
    prefactor = params.nu0 * _power_prefactor(params.delta, frobenius(E), params.p - 2)
    return prefactor[..., None, None] * E


def stress_tangent_coefficients(params: PowerLawParams, E):
    """Coefficients ``(a, b)`` with ``DS(E)[B] = a B^sym + b (E:B^sym) E``.

    ``E`` must already be symmetric.  ``b`` is set to zero where ``|E| = 0``.
    """
    norm = frobenius(E)
    if params.delta == 0 and params.p < 2 and np.any(norm == 0):
        raise NonsmoothPointError("stress law not differentiable at A^sym = 0 for p < 2, delta = 0")
    base = params.delta + norm
    with np.errstate(divide="ignore", invalid="ignore"):
        a = params.nu0 * np.where(base > 0, np.power(np.where(base > 0, base, 1.0), params.p - 2), 0.0)
        b = np.where(
            norm > 0,
            params.nu0 * (params.p - 2) * np.power(np.where(base > 0, base, 1.0), params.p - 3)
            / np.where(norm > 0, norm, 1.0),
            0.0,
        )
    return a, b


def stress_derivative(params: PowerLawParams, A, B):
    """Gateaux derivative of :func:`stress` at ``A`` in direction ``B``."""
    E = sym(A)
    Bs = sym(B)
    a, b = stress_tangent_coefficients(params, E)
    contraction = np.sum(E * Bs, axis=(-2, -1))
    return a[..., None, None] * Bs + (b * contraction)[..., None, None] * E


def f_map(params: PowerLawParams, A):
    E = sym(A)
    prefactor = _power_prefactor(params.delta, frobenius(E), 0.5 * (params.p - 2))
    return prefactor[..., None, None] * E


def phi_prime(params: PowerLawParams, a, t):
    """Derivative of the shifted N-function, ``(delta + a + t)^(p-2) t``."""
    return _dphi(params.delta + np.asarray(a, dtype=float), np.asarray(t, dtype=float), params.p)


_SERIES_CUTOFF = 0.25
_SERIES_TERMS = 40


def phi(params: PowerLawParams, a, t):
    """Shifted N-function ``phi_a(t) = int_0^t (c + s)^(p-2) s ds``, ``c = delta + a``.

    Closed form ``((c+t)^p - c^p)/p - c((c+t)^(p-1) - c^(p-1))/(p-1)``; for
    ``t < c/4`` the binomial series in ``t/c`` is used instead to avoid
    cancellation.
    """
    p = params.p
    c, t = np.broadcast_arrays(params.delta + np.asarray(a, dtype=float), np.asarray(t, dtype=float))
    c = c.astype(float)
    t = t.astype(float)
    if np.any(t < 0) or np.any(c < 0):
        raise ValueError("phi requires nonnegative shift and argument")
    out = np.empty_like(t)

    with np.errstate(divide="ignore", invalid="ignore"):
        x = np.where(c > 0, t / np.where(c > 0, c, 1.0), np.inf)
    series = x < _SERIES_CUTOFF
    if np.any(series):
        xs = x[series]
        cs = c[series]
        acc = np.zeros_like(xs)
        coeff = 1.0
        power = xs * xs
        for k in range(_SERIES_TERMS):
            acc += coeff * power / (k + 2)
            coeff *= (p - 2 - k) / (k + 1)
            power = power * xs
        out[series] = cs**p * acc
    closed = ~series
    if np.any(closed):
        cc = c[closed]
        tc = t[closed]
        u = cc + tc
        out[closed] = (u**p - cc**p) / p - cc * (u ** (p - 1) - cc ** (p - 1)) / (p - 1)
    return out if out.ndim else float(out)


def _dphi(c, t, p):
    base = c + t
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(base > 0, np.power(np.where(base > 0, base, 1.0), p - 2), 0.0) * t


def phi_conjugate(params: PowerLawParams, a, s, rtol: float = 1e-15, max_iter: int = 200):
    """Fenchel conjugate ``sup_t {s t - phi_a(t)}``.

    The maximiser solves ``phi_a'(t) = s``; it is bracketed and found by
    Newton's method safeguarded with bisection, elementwise.
    """
    p = params.p
    a = np.asarray(a, dtype=float)
    s = np.asarray(s, dtype=float)
    shape = np.broadcast(a, s).shape
    a, s = (x.astype(float).ravel() for x in np.broadcast_arrays(a, s))
    if np.any(s < 0) or np.any(a < 0):
        raise ValueError("phi_conjugate requires nonnegative shift and argument")
    c = params.delta + a

    lo = np.zeros_like(s)
    # phi_a'(t) >= 2^(p-2) t^(p-1) for t >= c when p < 2, and >= t^(p-1) when p >= 2
    hi = np.maximum(c, (s * 2.0 ** abs(2.0 - p)) ** (1.0 / (p - 1.0)))
    while True:
        short = _dphi(c, hi, p) < s
        if not np.any(short):
            break
        hi[short] *= 2.0
    t = 0.5 * (lo + hi)
    for _ in range(max_iter):
        g = _dphi(c, t, p) - s
        lo = np.where(g < 0, t, lo)
        hi = np.where(g > 0, t, hi)
        base = c + t
        with np.errstate(divide="ignore", invalid="ignore"):
            slope = np.where(base > 0, base ** (p - 3) * (c + (p - 1) * t), np.inf)
            newton = t - g / slope
        inside = (newton > lo) & (newton < hi) & np.isfinite(newton)
        t_new = np.where(inside, newton, 0.5 * (lo + hi))
        t_new = np.where(g == 0, t, t_new)
        done = np.abs(t_new - t) <= rtol * np.maximum(t_new, np.finfo(float).tiny)
        t = t_new
        if np.all(done | (hi - lo <= rtol * hi)):
            break
    out = np.maximum(s * t - phi(params, a, t), 0.0).reshape(shape)
    return out if out.ndim else float(out)


def modular(params: PowerLawParams, a_field, v_field, weights):
    """Quadrature value of ``int phi_{a(x)}(|v(x)|) dx``.

    ``v_field`` may hold scalars, vectors ``(N, 2)`` or tensors ``(N, 2, 2)``;
    its magnitude is taken over the trailing axes.
    """
    weights = np.asarray(weights, dtype=float)
    v = np.asarray(v_field, dtype=float)
    if v.shape[:1] != weights.shape or (np.ndim(a_field) and np.shape(a_field) != weights.shape):
        raise ValueError(
            f"sample counts differ: field {v.shape}, shift {np.shape(a_field)}, weights {weights.shape}"
        )
    a = np.broadcast_to(np.asarray(a_field, dtype=float), weights.shape)
    magnitude = np.sqrt(np.sum(v.reshape(len(weights), -1) ** 2, axis=1))
    return float(np.dot(weights, phi(params, a, magnitude)))
