"""Special functions used by the model constants and the whitening kernel.

Only what the rest of the package needs: log-gamma, beta, digamma, the
standard normal density/distribution, and Gauss's 2F1 on the negative real
axis.
Array inputs are accepted wherever the callers pass grids.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special as _sp

__all__ = [
    "ln_gamma",
    "gamma",
    "beta",
    "gauss_2f1",
    "digamma",
    "signed_gamma",
    "std_normal_pdf",
    "std_normal_cdf",
    "DomainError",
    "ConvergenceError",
]

_SQRT_2PI = math.sqrt(2.0 * math.pi)
_LN_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)

# Lanczos approximation, g = 607/128, 15 terms (P. Godfrey's coefficient set,
# the one used by Numerical Recipes 3rd ed. and Boost's "lanczos_g607_128").
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


class DomainError(ValueError):
    """Argument outside the supported domain of a function."""


class ConvergenceError(ArithmeticError):
    """A series failed to converge within its term budget."""


def _lanczos_ln_gamma(x: float) -> float:
    # ln Gamma(x) for x >= 0.5
    z = x - 1.0
    acc = _LANCZOS_COEF[0]
    for k in range(1, len(_LANCZOS_COEF)):
        acc += _LANCZOS_COEF[k] / (z + k)
    tmp = z + _LANCZOS_G + 0.5
    return _LN_SQRT_2PI + (z + 0.5) * math.log(tmp) - tmp + math.log(acc)


def ln_gamma(x: float) -> float:
    """Natural log of the gamma function for x > 0."""
    x = float(x)
    if not x > 0.0:
        raise DomainError(f"ln_gamma requires x > 0, got {x!r}")
    if x == 1.0 or x == 2.0:
        return 0.0
    if x < 0.5:
        return _lanczos_ln_gamma(x + 1.0) - math.log(x)
    return _lanczos_ln_gamma(x)


def gamma(x: float) -> float:
    """Gamma function for x > 0 (via :func:`ln_gamma`)."""
    return math.exp(ln_gamma(x))


def beta(x: float, y: float) -> float:
    """Euler beta function B(x, y) = Gamma(x) Gamma(y) / Gamma(x + y)."""
    x, y = float(x), float(y)
    if not (x > 0.0 and y > 0.0):
        raise DomainError(f"beta requires positive arguments, got ({x!r}, {y!r})")
    # summed in a fixed order so that beta(x, y) == beta(y, x) bitwise
    lo, hi = (x, y) if x <= y else (y, x)
    return math.exp(ln_gamma(lo) + ln_gamma(hi) - ln_gamma(lo + hi))


def digamma(x: float) -> float:
    """Digamma function psi(x) for real x that is not a non-positive integer."""
    x = float(x)
    if x <= 0.0 and x.is_integer():
        raise DomainError(f"digamma has a pole at {x!r}")
    if x < 0.0:
        # psi(1 - x) - psi(x) = pi cot(pi x)
        return digamma(1.0 - x) - math.pi / math.tan(math.pi * x)
    acc = 0.0
    while x < 10.0:
        acc -= 1.0 / x
        x += 1.0
    inv2 = 1.0 / (x * x)
    # asymptotic series with Bernoulli numbers B2..B12
    tail = inv2 * (1.0 / 12 - inv2 * (1.0 / 120 - inv2 * (1.0 / 252 - inv2 * (
        1.0 / 240 - inv2 * (1.0 / 132 - inv2 * 691.0 / 32760)))))
    return acc + math.log(x) - 0.5 / x - tail


def signed_gamma(x: float) -> float:
    """Gamma function on the whole real line except the poles 0, -1, -2, ..."""
    x = float(x)
    if x > 0.0:
        return gamma(x)
    if x.is_integer():
        raise DomainError(f"gamma has a pole at {x!r}")
    return math.pi / (math.sin(math.pi * x) * gamma(1.0 - x))


def _series_2f1(a, b, c, z, tol, max_terms):
    z = np.asarray(z, dtype=float)
    term = np.ones_like(z)
    total = np.ones_like(z)
    for k in range(max_terms):
        term = term * ((a + k) * (b + k) / ((c + k) * (k + 1.0))) * z
        total = total + term
        if np.all(np.abs(term) <= tol * np.abs(total)):
            return total
    raise ConvergenceError(
        f"2F1({a}, {b}; {c}; z) series did not converge in {max_terms} terms"
    )


def _log_case_2f1(a, b, v, tol, max_terms):
    # 2F1(a, b; a + b; 1 - v) for small v (Abramowitz & Stegun 15.3.10):
    #   G(a+b)/(G(a)G(b)) sum_n (a)_n (b)_n / n!^2
    #       [2 psi(n+1) - psi(a+n) - psi(b+n) - ln v] v^n
    v = np.asarray(v, dtype=float)
    log_v = np.log(v)
    pref = signed_gamma(a + b) / (signed_gamma(a) * signed_gamma(b))
    coef = 1.0
    psi_1, psi_a, psi_b = digamma(1.0), digamma(a), digamma(b)
    vn = np.ones_like(v)
    total = coef * (2.0 * psi_1 - psi_a - psi_b - log_v)
    for n in range(max_terms):
        coef *= (a + n) * (b + n) / ((n + 1.0) ** 2)
        psi_1 += 1.0 / (n + 1.0)
        psi_a += 1.0 / (a + n)
        psi_b += 1.0 / (b + n)
        vn = vn * v
        term = coef * vn * (2.0 * psi_1 - psi_a - psi_b - log_v)
        total = total + term
        if np.all(np.abs(term) <= tol * np.abs(total)):
            return pref * total
    raise ConvergenceError(
        f"2F1({a}, {b}; {a + b}; 1 - v) log series did not converge in {max_terms} terms"
    )


def gauss_2f1(a: float, b: float, c: float, z, *, tol: float = 1e-16,
              max_terms: int = 2000):
    """Gauss hypergeometric function 2F1(a, b; c; z) for real z <= 0.

    Evaluation:

    * ``|z| <= 1/2``: the power series;
    * ``-1 <= z < -1/2``: Pfaff, ``(1-z)^(-a) 2F1(a, c-b; c; w)`` with
      ``w = z/(z-1)`` in (1/3, 1/2];
    * ``z < -1``: Pfaff followed by the logarithmic expansion around
      ``w = 1``. Implemented only when ``a + (c - b) == c``, i.e. ``a == b``,
      which is the case for the whitening kernel.

    Args:
        a, b, c: real parameters; c must not be a non-positive integer.
        z: scalar or array with all entries <= 0.

    Returns:
        float for scalar ``z``, otherwise an array of the same shape.
    """
    if c <= 0 and float(c).is_integer():
        raise DomainError(f"c must not be a non-positive integer, got {c!r}")
    scalar = np.ndim(z) == 0
    z = np.asarray(z, dtype=float)
    if np.any(~np.isfinite(z)) or np.any(z > 0.0):
        raise DomainError("gauss_2f1 supports only finite z <= 0")
    if a == 0.0 or b == 0.0:
        out = np.ones_like(z)
        return float(out) if scalar else out
    if np.any(z < -1.0) and a != b:
        raise DomainError("gauss_2f1 supports z < -1 only for a == b")

    out = np.empty_like(z)
    near = z >= -0.5
    if np.any(near):
        out[near] = _series_2f1(a, b, c, z[near], tol, max_terms)
    mid = (z < -0.5) & (z >= -1.0)
    if np.any(mid):
        zm = z[mid]
        out[mid] = (1.0 - zm) ** (-a) * _series_2f1(a, c - b, c, zm / (zm - 1.0),
                                                   tol, max_terms)
    far = z < -1.0
    if np.any(far):
        zf = z[far]
        # 1 - z/(z-1) == 1/(1-z), formed directly to keep the digits
        out[far] = (1.0 - zf) ** (-a) * _log_case_2f1(a, c - b, 1.0 / (1.0 - zf),
                                                     tol, max_terms)
    return float(out) if scalar else out


def std_normal_pdf(x):
    """Standard normal density."""
    if np.ndim(x) == 0:
        x = float(x)
        return math.exp(-0.5 * x * x) / _SQRT_2PI
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * x * x) / _SQRT_2PI


def std_normal_cdf(x):
    """Standard normal distribution function.

    Evaluated as ``erfc(-x / sqrt 2) / 2`` so the lower tail keeps full
    relative accuracy; the upper tail is within one ulp of 1.
    """
    if np.ndim(x) == 0:
        return 0.5 * math.erfc(-float(x) / math.sqrt(2.0))
    return 0.5 * _sp.erfc(-np.asarray(x, dtype=float) / math.sqrt(2.0))
