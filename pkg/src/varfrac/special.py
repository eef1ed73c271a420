"""Scalar special functions: gamma, binomials, Bernoulli numbers.

Everything here is a pure function of its arguments. Bernoulli numbers are
kept as exact :class:`fractions.Fraction` values; callers convert to float
once, after all the exact arithmetic is done.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache

__all__ = [
    "bernoulli_numbers",
    "binomial",
    "gamma",
    "gammainc_upper",
]

# Lanczos approximation, g = 607/128, 15 terms (Godfrey's coefficient set).
_LANCZOS_G = 607.0 / 128.0
_LANCZOS_COEF = (
    0.99999999999999709182,
    57.156235665862923517,
    -59.597960355475491248,
    14.136097974741747174,
    -0.49191381609762019978,
    0.33994649984811888699e-4,
    0.46523628927048575665e-4,
    -0.98374475304879564677e-4,
    0.15808870322491248884e-3,
    -0.21026444172410488319e-3,
    0.21743961811521264320e-3,
    -0.16431810653676389022e-3,
    0.84418223983852743293e-4,
    -0.26190838401581408670e-4,
    0.36899182659531622704e-5,
)
_SQRT_2PI = 2.5066282746310005024

# Largest x with a finite double gamma(x).
GAMMA_MAX_ARG = 171.6243769563027


def gamma(x: float) -> float:
    """Euler gamma function for real ``x > 0``.

    Integer arguments up to 171 return the exact factorial (rounded once);
    everything else goes through the Lanczos sum, shifting arguments below
    one half up by the recurrence ``gamma(x) = gamma(x + 1) / x``.

    Raises :class:`ValueError` for ``x <= 0`` and :class:`OverflowError`
    when the result is not representable.
    """
    x = float(x)
    if math.isnan(x) or x <= 0.0:
        raise ValueError(f"gamma is only defined here for x > 0, got {x!r}")
    if x > GAMMA_MAX_ARG:
        raise OverflowError(f"gamma({x!r}) overflows a double")
    if x == math.floor(x):
        return float(math.factorial(int(x) - 1))
    if x < 0.5:
        return _lanczos(x + 1.0) / x
    return _lanczos(x)


def _lanczos(x: float) -> float:
    z = x - 1.0
    acc = _LANCZOS_COEF[0]
    for k in range(1, len(_LANCZOS_COEF)):
        acc += _LANCZOS_COEF[k] / (z + k)
    base = z + _LANCZOS_G + 0.5
    # split the power so base**(z + 0.5) cannot overflow before exp(-base)
    half = base ** (0.5 * (z + 0.5))
    return _SQRT_2PI * half * (half * math.exp(-base)) * acc


def binomial(m: int, i: int) -> int:
    """Exact binomial coefficient ``C(m, i)`` for ``0 <= i <= m``."""
    if m < 0 or i < 0 or i > m:
        raise ValueError(f"binomial index out of range: C({m}, {i})")
    return math.comb(m, i)


@lru_cache(maxsize=None)
def bernoulli_numbers(M: int) -> tuple[Fraction, ...]:
    """Bernoulli numbers ``b_0 .. b_M`` as exact fractions (``b_1 = -1/2``).

    Uses the recurrence ``sum_{j=0}^{m} C(m+1, j) b_j = 0`` for ``m >= 1``,
    which is exact in rational arithmetic and hopeless in floating point.
    """
    if M < 0:
        raise ValueError(f"M must be non-negative, got {M}")
    b = [Fraction(1)]
    for m in range(1, M + 1):
        if m > 1 and m % 2 == 1:
            b.append(Fraction(0))
            continue
        s = sum(math.comb(m + 1, j) * b[j] for j in range(m))
        b.append(-s / (m + 1))
    return tuple(b)


def gammainc_upper(a: float, x: float) -> float:
    r"""Upper incomplete gamma :math:`\Gamma(a, x) = \int_x^\infty s^{a-1} e^{-s} ds`.

    Non-normalized. For ``x < a + 1`` the lower function is summed from its
    power series and subtracted from ``gamma(a)``; otherwise the continued
    fraction for the upper tail is evaluated directly (modified Lentz).
    Both converge to full double precision for ``a > 0, x >= 0``.
    """
    a = float(a)
    x = float(x)
    if not a > 0.0:
        raise ValueError(f"gammainc_upper requires a > 0, got a={a!r}")
    if not x >= 0.0:
        raise ValueError(f"gammainc_upper requires x >= 0, got x={x!r}")
    if x == 0.0:
        return gamma(a)
    if math.isinf(x):
        return 0.0
    if math.isinf(a):
        raise OverflowError("gammainc_upper: a is infinite")
    if x < a + 1.0:
        return gamma(a) - _lower_series(a, x)
    return _upper_cfrac(a, x)


def _lower_series(a: float, x: float) -> float:
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(500):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * 1e-17:
            break
    else:
        raise ArithmeticError(f"incomplete gamma series did not converge (a={a}, x={x})")
    return total * math.exp(-x + a * math.log(x))


def _upper_cfrac(a: float, x: float) -> float:
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 500):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    else:
        raise ArithmeticError(f"incomplete gamma fraction did not converge (a={a}, x={x})")
    return math.exp(-x + a * math.log(x)) * h
