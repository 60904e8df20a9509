"""Exact simulation of fractional Brownian motion and of the observed process.

Paths live on a uniform grid ``{0, h, ..., T}``, ``h = T / n``. Increments
are drawn from their exact joint Gaussian law via a Cholesky factor of the
fractional Gaussian noise covariance; the factor is cached per (n, T, H).

Seeding: a scenario seed feeds a :class:`numpy.random.SeedSequence` whose two
spawned children drive the prior draw of ``theta`` and the path noise
respectively, so a fixed-drift and a prior-drawn scenario with the same seed
share the same fBm path.
"""

from __future__ import annotations

import enum
import functools
from dataclasses import dataclass

import numpy as np

from .model import ModelParams

__all__ = [
    "PathKind",
    "SamplePath",
    "DrawnScenario",
    "ThetaMode",
    "PRIOR_DRAW",
    "fixed_theta",
    "fbm_covariance",
    "increment_cholesky",
    "sample_fbm",
    "sample_observation",
    "path_seeds",
    "draw_observation_batch",
    "CholeskyError",
]


class CholeskyError(np.linalg.LinAlgError):
    """Increment covariance was not numerically positive definite."""


class PathKind(enum.Enum):
    FBM = "fbm"
    OBSERVATION = "observation"
    WHITENED = "whitened"


@dataclass(frozen=True)
class SamplePath:
    times: np.ndarray
    values: np.ndarray
    kind: PathKind = PathKind.FBM

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if times.ndim != 1 or times.shape != values.shape:
            raise ValueError("times and values must be 1-d arrays of equal length")
        if times.size < 2 or times[0] != 0.0 or values[0] != 0.0:
            raise ValueError("a path starts at time 0 with value 0")
        if np.any(np.diff(times) <= 0.0):
            raise ValueError("times must be strictly increasing")
        times.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @property
    def n_steps(self) -> int:
        return self.times.size - 1

    @property
    def step(self) -> float:
        """Grid spacing; raises if the grid is not uniform."""
        d = np.diff(self.times)
        h = self.times[-1] / self.n_steps
        if np.max(np.abs(d - h)) > 1e-9 * max(h, 1.0):
            raise ValueError("path grid is not uniform")
        return h


@dataclass(frozen=True)
class ThetaMode:
    """How the drift is chosen: ``value is None`` means a prior draw."""

    value: float | None = None

    @property
    def is_prior(self) -> bool:
        return self.value is None


PRIOR_DRAW = ThetaMode()


def fixed_theta(value: float) -> ThetaMode:
    return ThetaMode(float(value))


@dataclass(frozen=True)
class DrawnScenario:
    theta: float
    path: SamplePath
    seed: int


def fbm_covariance(s, t, hurst: float):
    """Cov(B^H_s, B^H_t) = (s^2H + t^2H - |t - s|^2H) / 2."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    h2 = 2.0 * hurst
    out = 0.5 * (s ** h2 + t ** h2 - np.abs(t - s) ** h2)
    return float(out) if out.ndim == 0 else out


def uniform_grid(n: int, horizon: float) -> np.ndarray:
    if n < 2:
        raise ValueError(f"need at least 2 steps, got n={n}")
    if not horizon > 0.0:
        raise ValueError(f"horizon must be positive, got {horizon!r}")
    return horizon * np.arange(n + 1) / n


@functools.lru_cache(maxsize=32)
def increment_cholesky(n: int, horizon: float, hurst: float) -> np.ndarray:
    """Lower Cholesky factor of the covariance of the n fBm increments.

    The returned array is read-only and shared between callers.
    """
    h = horizon / n
    k = np.arange(n, dtype=float)
    h2 = 2.0 * hurst
    # autocovariance of fractional Gaussian noise at lag k, scaled to step h
    acf = 0.5 * (np.abs(k + 1.0) ** h2 - 2.0 * k ** h2 + np.abs(k - 1.0) ** h2)
    acf *= h ** h2
    idx = np.arange(n)
    cov = acf[np.abs(idx[:, None] - idx[None, :])]
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        jitter = 10.0 * np.finfo(float).eps * acf[0] * n
        raise CholeskyError(
            f"fGn covariance (n={n}, T={horizon}, H={hurst}) is not numerically "
            f"positive definite; try adding a diagonal jitter of about {jitter:.1e}"
        ) from exc
    chol.setflags(write=False)
    return chol


def _streams(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    theta_seq, path_seq = np.random.SeedSequence(int(seed)).spawn(2)
    return np.random.default_rng(theta_seq), np.random.default_rng(path_seq)


def _fbm_from_normals(normals: np.ndarray, n: int, horizon: float, hurst: float):
    chol = increment_cholesky(n, float(horizon), float(hurst))
    incs = normals @ chol.T
    shape = incs.shape[:-1] + (n + 1,)
    out = np.zeros(shape)
    np.cumsum(incs, axis=-1, out=out[..., 1:])
    return out


def sample_fbm(n: int, horizon: float, hurst: float, seed: int, *,
               negate: bool = False) -> SamplePath:
    """Draw one fBm path on the uniform grid with ``n`` steps up to ``horizon``.

    ``negate`` flips the sign of every underlying Gaussian draw (antithetic
    path with the same seed).
    """
    times = uniform_grid(n, horizon)
    _, rng = _streams(seed)
    z = rng.standard_normal(n)
    if negate:
        z = -z
    return SamplePath(times, _fbm_from_normals(z, n, horizon, hurst), PathKind.FBM)


def sample_observation(params: ModelParams, theta_mode: ThetaMode, n: int,
                       horizon: float, seed: int, *,
                       negate: bool = False) -> DrawnScenario:
    """Draw ``Z_t = theta t + B^H_t`` on the uniform grid.

    With :data:`PRIOR_DRAW` the drift is ``mu + sigma * xi`` for a standard
    normal ``xi`` from the drift substream; ``negate`` flips the sign of
    ``xi`` and of all path noise.
    """
    times = uniform_grid(n, horizon)
    theta_rng, path_rng = _streams(seed)
    xi = theta_rng.standard_normal()
    z = path_rng.standard_normal(n)
    if negate:
        xi, z = -xi, -z
    theta = params.mu + params.sigma * xi if theta_mode.is_prior else theta_mode.value
    values = theta * times + _fbm_from_normals(z, n, horizon, params.hurst)
    return DrawnScenario(float(theta), SamplePath(times, values, PathKind.OBSERVATION),
                         int(seed))


def path_seeds(seed: int, n_paths: int) -> np.ndarray:
    """Per-path 63-bit seeds derived from a run seed.

    Path ``i`` of a Monte Carlo run is exactly reproducible with
    ``sample_observation(..., seed=path_seeds(seed, n)[i])``.
    """
    state = np.random.SeedSequence(int(seed)).generate_state(2 * n_paths, np.uint32)
    hi = state[0::2].astype(np.uint64) & np.uint64(0x7FFFFFFF)
    return (hi << np.uint64(32)) | state[1::2].astype(np.uint64)


def draw_observation_batch(params: ModelParams, theta_mode: ThetaMode, n: int,
                           horizon: float, seeds, *, negate: bool = False):
    """Vectorised :func:`sample_observation` over many seeds.

    Returns ``(times, thetas, values)`` with ``values`` of shape
    ``(len(seeds), n + 1)``; row ``i`` is the path drawn by
    ``sample_observation`` with ``seeds[i]``, up to BLAS summation order.
    """
    times = uniform_grid(n, horizon)
    seeds = np.asarray(seeds, dtype=np.uint64)
    xis = np.empty(seeds.size)
    normals = np.empty((seeds.size, n))
    for i, s in enumerate(seeds):
        theta_rng, path_rng = _streams(int(s))
        xis[i] = theta_rng.standard_normal()
        normals[i] = path_rng.standard_normal(n)
    if negate:
        xis, normals = -xis, -normals
    if theta_mode.is_prior:
        thetas = params.mu + params.sigma * xis
    else:
        thetas = np.full(seeds.size, theta_mode.value)
    values = thetas[:, None] * times[None, :] + _fbm_from_normals(normals, n, horizon,
                                                                   params.hurst)
    return times, thetas, values
