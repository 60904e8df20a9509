"""From the fractional observation to Brownian coordinates.

Three linear steps on a uniform grid:

* ``Z -> X``: ``X_t = C_H int_0^t K_H(t, s) dZ_s``, a Brownian motion with
  drift ``theta L_H t^(3/2-H) / (3/2-H)``;
* ``X -> (a, b)``: posterior of the drift is ``N(a_t / b_t, 1 / b_t)``;
* ``(a, b) -> (r, W)``: ``W_r = a_t / (sigma b_t) - mu / sigma`` with
  ``r = r(t)`` is a standard Brownian motion on [0, 1).

Both stochastic integrals use the midpoint of each grid cell, which never
touches the integrable singularities at ``s = t`` (kernel) and ``s = 0``
(``s^(1/2-H)``). The whitening matrix is cached per grid.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from .fbm_sim import PathKind, SamplePath
from .model import ModelParams, inverse_time_change
from .specfun import gauss_2f1

__all__ = [
    "PosteriorTrajectory",
    "kernel",
    "whitening_matrix",
    "whiten",
    "whiten_batch",
    "posterior_trajectory",
    "posterior_batch",
    "whitened_drift",
    "GridError",
]


class GridError(ValueError):
    """The path grid is not the uniform grid the discretisation assumes."""


@dataclass(frozen=True)
class PosteriorTrajectory:
    """Posterior statistics along a path and their Brownian-coordinate image.

    ``Law(theta | data up to times[i]) = N(a[i] / b[i], 1 / b[i])`` and
    ``w[i] = W_{r[i]}``.
    """

    times: np.ndarray
    a: np.ndarray
    b: np.ndarray
    r: np.ndarray
    w: np.ndarray

    def posterior_mean(self) -> np.ndarray:
        return self.a / self.b

    def posterior_var(self) -> np.ndarray:
        return 1.0 / self.b


def kernel(t, s, hurst: float):
    """K_H(t, s) = (t-s)^(1/2-H) 2F1(1/2-H, 1/2-H; 3/2-H; (s-t)/s), 0 < s < t.

    The hypergeometric argument is divided by ``s``: this is the form whose
    integral ``C_H int_0^t K_H(t, s) ds`` equals ``L_H t^(3/2-H) / (3/2-H)``.
    """
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    a = 0.5 - hurst
    z = (s - t) / s
    return (t - s) ** a * gauss_2f1(a, a, 1.5 - hurst, z)


def _grid_step(times: np.ndarray) -> float:
    n = times.size - 1
    h = times[-1] / n
    if times[0] != 0.0 or np.max(np.abs(np.diff(times) - h)) > 1e-9 * max(h, 1.0):
        raise GridError("whitening requires a uniform grid starting at 0")
    return h


@functools.lru_cache(maxsize=16)
def _whitening_matrix(n: int, horizon: float, hurst: float) -> np.ndarray:
    from .model import derive_constants

    c_h = derive_constants(1.0, hurst).c_h
    h = horizon / n
    t = h * np.arange(1, n + 1)
    mid = h * (np.arange(n) + 0.5)
    ii, jj = np.tril_indices(n)
    mat = np.zeros((n, n))
    mat[ii, jj] = c_h * kernel(t[ii], mid[jj], hurst)
    mat.setflags(write=False)
    return mat


def whitening_matrix(n: int, horizon: float, hurst: float) -> np.ndarray:
    """Lower-triangular map from the n increments of Z to X at t_1..t_n.

    Row ``i`` holds ``C_H K_H(t_{i+1}, m_j)`` for the cell midpoints
    ``m_j``, ``j <= i``.
    """
    return _whitening_matrix(int(n), float(horizon), float(hurst))


def whiten_batch(times: np.ndarray, values: np.ndarray, hurst: float) -> np.ndarray:
    """Whiten one path (1-d) or a stack of paths (rows) sharing ``times``."""
    times = np.asarray(times, dtype=float)
    h = _grid_step(times)
    n = times.size - 1
    values = np.asarray(values, dtype=float)
    if hurst == 0.5:
        return values - values[..., :1]
    mat = whitening_matrix(n, h * n, hurst)
    dz = np.diff(values, axis=-1)
    out = np.zeros_like(values)
    out[..., 1:] = dz @ mat.T
    return out


def whiten(z: SamplePath, params: ModelParams) -> SamplePath:
    """Whitened process X on the grid of ``z``."""
    try:
        x = whiten_batch(z.times, z.values, params.hurst)
    except GridError as exc:
        raise GridError(f"cannot whiten: {exc}") from None
    return SamplePath(z.times, x, PathKind.WHITENED)


def whitened_drift(t, params: ModelParams, theta: float = 1.0):
    """Exact drift of X: ``theta L_H t^(3/2-H) / (3/2-H)``."""
    e = 1.5 - params.hurst
    return theta * params.consts.l_h * np.asarray(t, dtype=float) ** e / e


def posterior_batch(times: np.ndarray, x: np.ndarray, params: ModelParams):
    """Posterior statistics for one whitened path or a stack of them.

    Returns ``(a, b, r, w)``; ``b`` and ``r`` are 1-d (deterministic), ``a`` and
    ``w`` follow the shape of ``x``.
    """
    times = np.asarray(times, dtype=float)
    h = _grid_step(times)
    c = params.consts
    s2 = params.sigma ** 2
    e = 0.5 - params.hurst
    mid = h * (np.arange(times.size - 1) + 0.5)
    weights = c.l_h * mid ** e
    dx = np.diff(np.asarray(x, dtype=float), axis=-1)
    a = np.empty_like(np.asarray(x, dtype=float))
    a[..., 0] = params.mu / s2
    np.cumsum(dx * weights, axis=-1, out=a[..., 1:])
    a[..., 1:] += params.mu / s2
    b = 1.0 / s2 + c.l_h ** 2 * times ** (2.0 - 2.0 * params.hurst) / (2.0 - 2.0 * params.hurst)
    r = inverse_time_change(times, params)
    w = a / (params.sigma * b) - params.start
    return a, b, r, w


def posterior_trajectory(x: SamplePath, params: ModelParams) -> PosteriorTrajectory:
    """Posterior statistics (a_t, b_t) and Brownian coordinates (r, W_r) along X."""
    a, b, r, w = posterior_batch(x.times, x.values, params)
    return PosteriorTrajectory(times=x.times, a=a, b=b, r=r, w=w)
