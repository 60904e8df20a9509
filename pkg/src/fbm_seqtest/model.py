"""Model parameters, derived constants, observation cost and time change.

The drift ``theta`` of the observed process ``Z_t = theta t + B^H_t`` has a
N(mu, sigma^2) prior. After whitening and the time change ``t(r)``, the
testing problem becomes optimal stopping of a Brownian motion on r in [0, 1)
with running cost ``cost(r) = M (r / (1 - r))^gamma``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .specfun import DomainError, beta, ln_gamma, std_normal_cdf, std_normal_pdf

__all__ = [
    "ContractError",
    "ModelParams",
    "DerivedConstants",
    "derive_constants",
    "cost",
    "cost_rate",
    "time_change",
    "inverse_time_change",
    "bayes_payoff",
    "regularized_payoff",
    "initial_regularized_payoff",
]


class ContractError(ValueError):
    """Inputs violate a precondition of an operation (not a numeric failure)."""


@dataclass(frozen=True)
class DerivedConstants:
    """Constants fixed by (sigma, H).

    Attributes:
        c_h: normalising constant of the whitening kernel.
        l_h: drift constant of the whitened process.
        gamma_exp: 1 / (2 - 2H).
        t0: left end of the interval where the boundary is characterised.
        m_const: scale of the transformed observation cost.
    """

    c_h: float
    l_h: float
    gamma_exp: float
    t0: float
    m_const: float


def derive_constants(sigma: float, hurst: float) -> DerivedConstants:
    h = float(hurst)
    ln_ch2 = (ln_gamma(2.0 - 2.0 * h)
              - math.log(2.0 * h) - ln_gamma(0.5 + h) - 3.0 * ln_gamma(1.5 - h))
    c_h = math.exp(0.5 * ln_ch2)
    l_h = (2.0 * h * (1.5 - h) * beta(0.5 + h, 2.0 - 2.0 * h)) ** -0.5
    g = 1.0 / (2.0 - 2.0 * h)
    t0 = max(0.0, (1.0 - 2.0 * h) / (4.0 * (1.0 - h)))
    m = (2.0 / sigma) * ((2.0 - 2.0 * h) / (sigma * sigma * l_h * l_h)) ** g
    return DerivedConstants(c_h=c_h, l_h=l_h, gamma_exp=g, t0=t0, m_const=m)


@dataclass(frozen=True)
class ModelParams:
    """Prior mean ``mu``, prior standard deviation ``sigma``, Hurst index ``hurst``.

    The derived constants are computed once at construction and exposed as
    ``consts``.
    """

    mu: float
    sigma: float
    hurst: float
    consts: DerivedConstants = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        for name in ("mu", "sigma", "hurst"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v!r}")
            object.__setattr__(self, name, v)
        if not self.sigma > 0.0:
            raise ValueError(f"sigma must be positive, got {self.sigma!r}")
        if not 0.0 < self.hurst < 1.0:
            raise ValueError(f"hurst must lie in (0, 1), got {self.hurst!r}")
        object.__setattr__(self, "consts", derive_constants(self.sigma, self.hurst))

    @property
    def start(self) -> float:
        """Starting point mu / sigma of the transformed Brownian problem."""
        return self.mu / self.sigma


def _as_float_or_array(x):
    return float(x) if np.ndim(x) == 0 else np.asarray(x, dtype=float)


def cost(t, consts: DerivedConstants):
    """Transformed observation cost ``M (t / (1 - t))^gamma`` on [0, 1)."""
    t = _as_float_or_array(t)
    if np.any(np.asarray(t) < 0.0) or np.any(np.asarray(t) >= 1.0):
        raise DomainError("cost is defined for t in [0, 1)")
    if np.ndim(t) == 0:
        if t == 0.0:
            return 0.0
        return consts.m_const * math.exp(consts.gamma_exp * math.log(t / (1.0 - t)))
    out = np.zeros_like(t)
    pos = t > 0.0
    out[pos] = consts.m_const * np.exp(consts.gamma_exp * np.log(t[pos] / (1.0 - t[pos])))
    return out


def cost_rate(t, consts: DerivedConstants):
    """Derivative of :func:`cost`: ``M gamma t^(gamma-1) (1-t)^(-gamma-1)``.

    At t = 0 the rate is 0 for gamma > 1, M for gamma = 1 and infinite for
    gamma < 1; the latter raises.
    """
    g, m = consts.gamma_exp, consts.m_const
    t = _as_float_or_array(t)
    ta = np.asarray(t)
    if np.any(ta < 0.0) or np.any(ta >= 1.0):
        raise DomainError("cost_rate is defined for t in [0, 1)")
    if np.any(ta == 0.0) and g < 1.0:
        raise DomainError("cost_rate diverges at t = 0 when hurst < 1/2")
    with np.errstate(divide="ignore", invalid="ignore"):
        out = m * g * np.exp((g - 1.0) * np.log(ta) - (g + 1.0) * np.log1p(-ta))
    if g == 1.0:
        out = np.where(ta == 0.0, m, out)
    elif g > 1.0:
        out = np.where(ta == 0.0, 0.0, out)
    return float(out) if np.ndim(t) == 0 else out


def time_change(r, params: ModelParams):
    """Original time t(r) corresponding to transformed time r in [0, 1)."""
    c = params.consts
    h = params.hurst
    r = _as_float_or_array(r)
    ra = np.asarray(r)
    if np.any(ra < 0.0) or np.any(ra >= 1.0):
        raise DomainError("time_change requires r in [0, 1)")
    scale = (2.0 - 2.0 * h) / (params.sigma ** 2 * c.l_h ** 2)
    with np.errstate(divide="ignore"):
        out = np.where(ra > 0.0,
                       np.exp(c.gamma_exp * (np.log(scale * ra) - np.log1p(-ra))),
                       0.0)
    return float(out) if np.ndim(r) == 0 else out


def inverse_time_change(t, params: ModelParams):
    """Transformed time r(t) = 1 - (1 + sigma^2 L^2 t^(2-2H) / (2-2H))^(-1)."""
    c = params.consts
    h = params.hurst
    t = _as_float_or_array(t)
    ta = np.asarray(t)
    if np.any(ta < 0.0) or np.any(~np.isfinite(ta)):
        raise DomainError("inverse_time_change requires finite t >= 0")
    q = params.sigma ** 2 * c.l_h ** 2 * ta ** (2.0 - 2.0 * h) / (2.0 - 2.0 * h)
    # q / (1 + q) == 1 - 1/(1 + q), without the cancellation for small q
    out = q / (1.0 + q)
    return float(out) if np.ndim(t) == 0 else out


def bayes_payoff(a, b):
    """Posterior expected loss of the better decision, min(E xi^+, E xi^-).

    ``xi ~ N(a/b, 1/b)`` is the posterior law of the drift.
    """
    if np.any(np.asarray(b) <= 0.0):
        raise DomainError("bayes_payoff requires b > 0")
    if np.ndim(a) == 0 and np.ndim(b) == 0:
        a, b = float(a), float(b)
        sb = math.sqrt(b)
        return std_normal_pdf(a / sb) / sb - abs(a) / b * std_normal_cdf(-abs(a) / sb)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    sb = np.sqrt(b)
    return std_normal_pdf(a / sb) / sb - np.abs(a) / b * std_normal_cdf(-np.abs(a) / sb)


def regularized_payoff(a, b):
    """``bayes_payoff(a, b) + |a| / (2b)``; a martingale along the posterior."""
    if np.ndim(a) == 0 and np.ndim(b) == 0:
        return bayes_payoff(a, b) + abs(float(a)) / (2.0 * float(b))
    return bayes_payoff(a, b) + np.abs(a) / (2.0 * np.asarray(b, dtype=float))


def initial_regularized_payoff(params: ModelParams) -> float:
    """Closed form of the regularized payoff at the prior (t = 0)."""
    mu, s = params.mu, params.sigma
    return s * std_normal_pdf(mu / s) + abs(mu) * (0.5 - std_normal_cdf(-abs(mu) / s))
