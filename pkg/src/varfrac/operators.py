"""Variable-order fractional integrals and derivatives on the Bernoulli basis.

The left Riemann-Liouville integral of order ``alpha(t)`` maps ``t^nu`` to
``Gamma(nu + 1) / Gamma(nu + 1 + alpha(t)) * t^(nu + alpha(t))``. Applied to
the monomial vector ``T(t)`` this is a diagonal scaling ``S``, so on the
Bernoulli basis the integral acts as ``P = Q S Q^-1``.

:func:`caputo_oracle` evaluates Caputo derivatives by direct quadrature. It
shares nothing with the matrix route and is used to check it.
"""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy import integrate

from .basis import BasisSpec, basis_vector
from .special import gamma

__all__ = [
    "INTEGER_ORDER_TOL",
    "OperationalMatrix",
    "OrderFunction",
    "apply_rl_to_basis",
    "caputo_oracle",
    "ceil_order",
    "operational_matrix",
    "order_value",
    "rl_integral_power",
    "s_matrix",
]

#: orders closer than this to an integer are treated as that integer
INTEGER_ORDER_TOL = 1e-12

_VALIDATION_POINTS = 10_000


def ceil_order(a: float) -> int:
    """Ceiling of an order, snapping values within tolerance of an integer."""
    r = round(a)
    if abs(a - r) <= INTEGER_ORDER_TOL:
        return int(r)
    return math.ceil(a)


def _sample(func: Callable, ts: np.ndarray) -> np.ndarray:
    try:
        vals = np.asarray(func(ts), dtype=float)
        if vals.shape == ts.shape:
            return vals
        if vals.ndim == 0:
            return np.full_like(ts, float(vals))
    except (TypeError, ValueError):
        pass
    return np.array([float(func(t)) for t in ts])


@dataclass(frozen=True, eq=False)
class OrderFunction:
    """A time-dependent order ``alpha(t)`` with ``0 < alpha(t) <= n_bound`` on (0, 1].

    ``n_bound`` is the smallest integer bounding the order. When omitted it
    is inferred from a 10^4-point sample; when given it is checked against
    that sample and a mismatch raises :class:`ValueError`.
    """

    func: Callable[[float], float]
    n_bound: int | None = None
    label: str = ""
    _grid_values: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        ts = np.arange(1, _VALIDATION_POINTS + 1) / _VALIDATION_POINTS
        vals = _sample(self.func, ts)
        name = self.label or "order"
        if not np.all(np.isfinite(vals)):
            bad = ts[~np.isfinite(vals)][0]
            raise ValueError(f"{name}: alpha({bad:g}) is not finite")
        if np.any(vals <= 0.0):
            i = int(np.argmax(vals <= 0.0))
            raise ValueError(f"{name}: alpha({ts[i]:g}) = {float(vals[i])!r} is not positive")
        n = max(ceil_order(v) for v in (vals.min(), vals.max()))
        if self.n_bound is None:
            object.__setattr__(self, "n_bound", n)
        elif self.n_bound != n:
            raise ValueError(
                f"{name}: declared n = {self.n_bound} but max ceil(alpha(t)) on (0, 1] is {n}"
            )
        object.__setattr__(self, "_grid_values", vals)

    @classmethod
    def constant(cls, value: float, label: str = "") -> OrderFunction:
        return cls(lambda t: value + 0.0 * np.asarray(t), label=label or repr(value))

    def __call__(self, t):
        return self.func(t)

    def grid_max(self) -> float:
        return float(self._grid_values.max())


Order = Union[OrderFunction, Callable[[float], float], float]


def order_value(alpha: Order, t: float) -> float:
    """Value of an order at ``t``; accepts an order function, callable, or number."""
    if callable(alpha):
        return float(alpha(t))
    return float(alpha)


def rl_integral_power(alpha: Order, nu: float, t: float) -> float:
    """Riemann-Liouville integral of ``t^nu`` of order ``alpha(t)``, at ``t``."""
    if nu <= -1:
        raise ValueError(f"power rule needs nu > -1, got {nu!r}")
    a = order_value(alpha, t)
    if a < 0:
        raise ValueError(f"order must be non-negative, got {a!r} at t={t!r}")
    return gamma(nu + 1) / gamma(nu + 1 + a) * t ** (nu + a)


def _s_diagonal(a: float, t: float, M: int) -> np.ndarray:
    if a == 0.0:
        return np.ones(M + 1)
    if t == 0.0:
        return np.zeros(M + 1)
    ta = t**a
    return np.array([gamma(k + 1) / gamma(k + 1 + a) * ta for k in range(M + 1)])


def s_matrix(alpha: Order, t: float, M: int) -> np.ndarray:
    """Diagonal matrix mapping ``T(t)`` to its order-``alpha(t)`` integral."""
    return np.diag(_s_diagonal(order_value(alpha, t), t, M))


@dataclass(frozen=True)
class OperationalMatrix:
    P: np.ndarray
    order_at_t: float
    t: float


def operational_matrix(spec: BasisSpec, alpha: Order, t: float) -> OperationalMatrix:
    """``P_t^alpha = Q S Q^-1``, so that ``I^alpha B(t) = P B(t)``.

    At ``t = 0`` a positive order gives the zero matrix (every entry carries
    a factor ``t^alpha``).
    """
    a = order_value(alpha, t)
    if a < 0:
        raise ValueError(f"order must be non-negative, got {a!r} at t={t!r}")
    d = _s_diagonal(a, t, spec.M)
    P = (spec.Q * d) @ spec.Qinv
    return OperationalMatrix(P=P, order_at_t=a, t=t)


def apply_rl_to_basis(spec: BasisSpec, alpha: Order, t: float) -> np.ndarray:
    """``I^alpha(t) B(t)`` evaluated through the operational matrix."""
    return operational_matrix(spec, alpha, t).P @ basis_vector(spec, t)


def caputo_oracle(
    f: Callable[[float, int], float],
    alpha: Order,
    t: float,
    *,
    tol: float = 1e-9,
) -> float:
    r"""Caputo derivative of order ``alpha(t)`` at ``t`` by adaptive quadrature.

    ``f(s, k)`` must return the ``k``-th derivative of the function at ``s``.
    With ``n = ceil(alpha(t))`` and ``beta = n - alpha(t)`` the weakly singular
    integral is rewritten via ``w = (t - s)^beta``:

    .. math::

        \frac{1}{\Gamma(\beta)} \int_0^t (t - s)^{\beta - 1} f^{(n)}(s)\, ds
        = \frac{1}{\Gamma(\beta + 1)} \int_0^{t^\beta} f^{(n)}(t - w^{1/\beta})\, dw,

    whose integrand is bounded. Integer orders return ``f^{(n)}(t)``.
    """
    a = order_value(alpha, t)
    if a < 0:
        raise ValueError(f"order must be non-negative, got {a!r}")
    n = ceil_order(a)
    if abs(a - n) <= INTEGER_ORDER_TOL:
        return float(f(t, n))
    if t <= 0:
        raise ValueError(f"Caputo derivative is evaluated on t > 0, got {t!r}")
    beta = n - a
    inv = 1.0 / beta

    def integrand(w: float) -> float:
        return f(t - w**inv, n)

    val, err = integrate.quad(integrand, 0.0, t**beta, epsabs=tol * 1e-3, epsrel=1e-12, limit=400)
    if not math.isfinite(val) or err > tol:
        raise ArithmeticError(
            f"Caputo quadrature did not converge at t={t!r}, alpha={a!r} (error estimate {err:.2e})"
        )
    return val / gamma(beta + 1)
