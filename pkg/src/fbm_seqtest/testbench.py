"""Running the sequential test on simulated data and estimating its Bayes risk.

The test observes ``Z`` on a uniform grid, tracks the posterior through the
whitening map, and stops at the first grid time where the Brownian
coordinate leaves the continuation region, ``|W_r + mu/sigma| >= A(r)``.
The decision is ``+1`` iff the posterior mean is positive.

Risk is estimated in two ways that must agree:

* original coordinates: average ``tau + |theta| 1{d != sgn theta}`` over
  prior draws of ``theta`` and fBm paths (:func:`estimate_risk`);
* transformed coordinates: simulate ``W`` directly on the r-grid and average
  ``(sigma/2)(cost(rho) - |W_rho + mu/sigma|) + h0`` where ``h0`` is the
  regularized payoff at the prior (:func:`risk_via_value`).

The identity behind the second estimator holds for any stopping rule, so by
default both monitor the same r-grid (the image of the observation grid)
and estimate the risk of the same discretely monitored rule.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .boundary import BoundaryTable, boundary_at
from .fbm_sim import DrawnScenario, PRIOR_DRAW, draw_observation_batch, path_seeds, uniform_grid
from .model import (ContractError, ModelParams, bayes_payoff, cost, initial_regularized_payoff,
                    inverse_time_change, time_change)
from .specfun import std_normal_cdf
from .whitening import PosteriorTrajectory, posterior_batch, whiten_batch

__all__ = [
    "TestOutcome",
    "RiskReport",
    "PathOutcomes",
    "ValueRisk",
    "run_test",
    "estimate_risk",
    "risk_via_value",
    "perturbation_study",
    "observation_r_grid",
    "immediate_stop_risk",
]

log = logging.getLogger(__name__)

DEFAULT_HORIZON_R = 0.999
DEFAULT_N_STEPS = 512
_CHUNK = 1000
_HORIZON_WARN_FRACTION = 0.01
_COARSE_WARN_R = 0.05
# third child of a path seed's SeedSequence; the first two drive theta and
# the fBm noise
_VALUE_STREAM = 2


@dataclass(frozen=True)
class TestOutcome:
    """Result of one run of the test.

    ``index`` is the grid index at which the test stopped.
    """

    __test__ = False  # not a pytest class

    tau: float
    rho: float
    decision: int
    stopped_by_horizon: bool
    index: int
    trajectory: PosteriorTrajectory | None = None


@dataclass(frozen=True)
class PathOutcomes:
    """Per-path results of a Monte Carlo run (columns of the outcome CSV)."""

    seeds: np.ndarray
    theta: np.ndarray
    tau: np.ndarray
    rho: np.ndarray
    decision: np.ndarray
    loss: np.ndarray
    stopped_by_horizon: np.ndarray


@dataclass(frozen=True)
class RiskReport:
    """Monte Carlo estimate of the Bayes risk of a stopping rule.

    ``components`` splits ``mean_risk`` into the mean observation cost and the
    mean decision loss; ``comparison`` (optional) holds the immediate-stop
    risk and, when requested, the estimate in the other coordinate system.
    """

    mean_risk: float
    std_error: float
    n_paths: int
    mean_tau: float
    error_rate: float
    components: dict
    comparison: dict | None = None
    horizon_fraction: float = 0.0
    warnings: tuple = ()
    config: dict = field(default_factory=dict)
    outcomes: PathOutcomes | None = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        """JSON-ready view (per-path outcomes are exported separately)."""
        return {
            "mean_risk": self.mean_risk,
            "std_error": self.std_error,
            "n_paths": self.n_paths,
            "mean_tau": self.mean_tau,
            "error_rate": self.error_rate,
            "components": dict(self.components),
            "comparison": None if self.comparison is None else dict(self.comparison),
            "horizon_fraction": self.horizon_fraction,
            "warnings": list(self.warnings),
            "config": dict(self.config),
        }


class ValueRisk(NamedTuple):
    """Risk estimated in transformed coordinates."""

    mean: float
    std_error: float
    n_paths: int
    horizon_fraction: float


def immediate_stop_risk(params: ModelParams) -> float:
    """Risk of deciding at time 0 without observing: ``h(mu/sigma^2, 1/sigma^2)``."""
    s2 = params.sigma ** 2
    return float(bayes_payoff(params.mu / s2, 1.0 / s2))


def observation_r_grid(params: ModelParams, n_steps: int, horizon_r: float) -> np.ndarray:
    """Image in r-time of the uniform observation grid ending at ``t(horizon_r)``."""
    _check_horizon(horizon_r)
    return inverse_time_change(uniform_grid(n_steps, time_change(horizon_r, params)), params)


def _check_horizon(horizon_r: float) -> None:
    if not 0.0 < horizon_r < 1.0:
        raise ContractError(f"horizon_r must lie in (0, 1), got {horizon_r!r}")


def _horizon_index(r: np.ndarray, horizon_r: float) -> int:
    # last node not beyond the horizon; the slack absorbs the rounding of
    # r(t(horizon_r))
    return int(np.searchsorted(r, horizon_r * (1.0 + 1e-12), side="right")) - 1


def _thresholds(table: BoundaryTable, r: np.ndarray, i_hor: int) -> np.ndarray:
    # A(r_i) where the rule may stop, +inf elsewhere (before the table's range
    # and after the horizon)
    thr = np.full(r.size, np.inf)
    live = (r >= table.grid[0]) & (np.arange(r.size) <= i_hor)
    thr[live] = boundary_at(table, r[live])
    return thr


def _first_crossing(dist: np.ndarray, thr: np.ndarray, i_hor: int):
    # dist: (P, m) values of |W + mu/sigma|
    hit = dist >= thr
    crossed = hit.any(axis=-1)
    idx = np.where(crossed, hit.argmax(axis=-1), i_hor)
    return idx, ~crossed


def _sign(x: np.ndarray) -> np.ndarray:
    # sgn with sgn(0) = -1
    return np.where(x > 0.0, 1, -1)


def _stop_batch(times, values, params: ModelParams, table: BoundaryTable, horizon_r: float):
    a, _, r, w = posterior_batch(times, whiten_batch(times, values, params.hurst), params)
    i_hor = _horizon_index(r, horizon_r)
    if i_hor < 1:
        raise ContractError("observation grid is too coarse: no node before the horizon")
    thr = _thresholds(table, r, i_hor)
    idx, by_hor = _first_crossing(np.abs(w + params.start), thr, i_hor)
    rows = np.arange(idx.size)
    decision = _sign(a[rows, idx])
    return idx, times[idx], r[idx], decision, by_hor, (a, r, w, a[rows, idx])


def _validate(params: ModelParams, table: BoundaryTable, horizon_r: float) -> None:
    _check_horizon(horizon_r)
    table.check_params(params)


def run_test(scenario: DrawnScenario, table: BoundaryTable, params: ModelParams,
             horizon_r: float = DEFAULT_HORIZON_R, *,
             keep_trajectory: bool = False) -> TestOutcome:
    """Run the test on one observed path.

    Grid nodes before the table's first node are monitored but never stop
    the test (the boundary is not defined there); a table covering ``r = 0``
    can stop at time 0. Paths that have not crossed by ``horizon_r`` stop at
    the last node before it with ``stopped_by_horizon`` set.

    Raises:
        ContractError: table solved for other (sigma, H), bad horizon, or a
            path grid that ends before ``time_change(horizon_r)``.
    """
    _validate(params, table, horizon_r)
    path = scenario.path
    t_h = time_change(horizon_r, params)
    if path.times[-1] < t_h * (1.0 - 1e-12):
        raise ContractError(
            f"path ends at t={path.times[-1]:.6g} before the horizon t(r)={t_h:.6g}")
    idx, tau, rho, dec, by_hor, (a, r, w, _) = _stop_batch(
        path.times, path.values[None, :], params, table, horizon_r)
    traj = None
    if keep_trajectory:
        b = 1.0 / params.sigma ** 2 + params.consts.l_h ** 2 * path.times ** (
            2.0 - 2.0 * params.hurst) / (2.0 - 2.0 * params.hurst)
        traj = PosteriorTrajectory(times=path.times, a=a[0], b=b, r=r, w=w[0])
    return TestOutcome(tau=float(tau[0]), rho=float(rho[0]), decision=int(dec[0]),
                       stopped_by_horizon=bool(by_hor[0]), index=int(idx[0]),
                       trajectory=traj)


def _summary(x: np.ndarray) -> tuple[float, float]:
    return float(np.mean(x)), float(np.std(x, ddof=1) / math.sqrt(x.size))


def _warnings(frac: float, horizon_r: float, r: np.ndarray) -> tuple:
    out = []
    if frac > _HORIZON_WARN_FRACTION:
        out.append(f"{100 * frac:.2f}% of paths reached the horizon r={horizon_r}; "
                   "the observation cost is biased low")
    if r[1] > _COARSE_WARN_R:
        out.append(f"first monitoring node after 0 is at r={r[1]:.3g}; the grid is too "
                   "coarse to resolve early stopping (lower horizon_r or raise n_grid)")
    for msg in out:
        log.warning(msg)
    return tuple(out)


def estimate_risk(params: ModelParams, table: BoundaryTable, n_paths: int,
                  n_grid: int = DEFAULT_N_STEPS, horizon_r: float = DEFAULT_HORIZON_R,
                  seed: int = 0, *, compare: bool = False, keep_paths: bool = False,
                  estimator: str = "realized") -> RiskReport:
    """Bayes risk of the boundary rule by simulation in original coordinates.

    Args:
        n_paths: number of prior draws of (theta, path), at least 100.
        n_grid: number of steps of the uniform observation grid on
            ``[0, time_change(horizon_r)]``.
        seed: run seed; path ``i`` uses ``path_seeds(seed, n_paths)[i]``.
        compare: also run :func:`risk_via_value` on the same r-grid and
            store it in ``comparison``.
        keep_paths: attach per-path :class:`PathOutcomes`.
        estimator: ``"realized"`` averages the realised loss
            ``tau + |theta| 1{d != sgn theta}``; ``"conditional"`` replaces the
            decision loss by its posterior mean ``h(a_tau, b_tau)`` and
            ``error_rate`` by the mean posterior probability of a wrong
            decision. The conditional form has much smaller variance but
            treats the discretised ``a_tau`` as the exact posterior statistic,
            so for H != 1/2 it carries the whitening discretisation bias
            (about +0.01 at H = 0.7, n_grid = 512); the realised form does not.
    """
    if estimator not in ("realized", "conditional"):
        raise ContractError(f"unknown estimator {estimator!r}")
    if n_paths < 100:
        raise ContractError(f"n_paths must be at least 100, got {n_paths}")
    _validate(params, table, horizon_r)
    horizon_t = time_change(horizon_r, params)
    seeds = path_seeds(seed, n_paths)
    cols = {k: [] for k in ("theta", "tau", "rho", "decision", "by_hor", "a_stop")}
    for lo in range(0, n_paths, _CHUNK):
        times, thetas, values = draw_observation_batch(
            params, PRIOR_DRAW, n_grid, horizon_t, seeds[lo:lo + _CHUNK])
        _, tau, rho, dec, by_hor, extra = _stop_batch(times, values, params, table, horizon_r)
        for k, v in zip(cols, (thetas, tau, rho, dec, by_hor, extra[3])):
            cols[k].append(v)
    theta, tau, rho, dec, by_hor, a_stop = (np.concatenate(cols[k]) for k in cols)
    wrong = dec != _sign(theta)
    if estimator == "realized":
        dloss = np.abs(theta) * wrong
        err = wrong.astype(float)
    else:
        b_stop = 1.0 / (params.sigma ** 2 * (1.0 - rho))
        dloss = bayes_payoff(a_stop, b_stop)
        err = std_normal_cdf(-np.abs(a_stop) / np.sqrt(b_stop))
    loss = tau + dloss
    mean, se = _summary(loss)
    frac = float(np.mean(by_hor))
    comparison = {"immediate_stop_risk": immediate_stop_risk(params)}
    if compare:
        v = risk_via_value(params, table, n_paths, seed, n_grid=n_grid, horizon_r=horizon_r)
        comparison.update(transformed_risk=v.mean, transformed_std_error=v.std_error)
    outcomes = None
    if keep_paths:
        outcomes = PathOutcomes(seeds=seeds, theta=theta, tau=tau, rho=rho, decision=dec,
                                loss=loss, stopped_by_horizon=by_hor)
    return RiskReport(
        mean_risk=mean, std_error=se, n_paths=int(n_paths), mean_tau=float(np.mean(tau)),
        error_rate=float(np.mean(err)),
        components={"observation_cost": float(np.mean(tau)),
                    "decision_loss": float(np.mean(dloss))},
        comparison=comparison, horizon_fraction=frac,
        warnings=_warnings(frac, horizon_r, observation_r_grid(params, n_grid, horizon_r)),
        config={"coordinates": "original", "estimator": estimator, "seed": int(seed),
                "n_grid": int(n_grid),
                "horizon_r": float(horizon_r), "mu": params.mu, "sigma": params.sigma,
                "hurst": params.hurst, "table_scale": float(table.meta.get("scale", 1.0))},
        outcomes=outcomes,
    )


def _brownian_paths(seed: int, n_paths: int, r: np.ndarray) -> np.ndarray:
    # standard Brownian motion on the nodes r (r[0] = 0), one stream per path
    seeds = path_seeds(seed, n_paths)
    sd = np.sqrt(np.diff(r))
    out = np.zeros((n_paths, r.size))
    for i, s in enumerate(seeds):
        ss = np.random.SeedSequence(int(s), spawn_key=(_VALUE_STREAM,))
        np.cumsum(np.random.default_rng(ss).standard_normal(r.size - 1) * sd,
                  out=out[i, 1:])
    return out


def _resolve_r_grid(params: ModelParams, table: BoundaryTable, r_grid, n_grid: int,
                    horizon_r: float) -> np.ndarray:
    if r_grid is None:
        return observation_r_grid(params, n_grid, horizon_r)
    if isinstance(r_grid, str):
        if r_grid != "table":
            raise ContractError(f"unknown r_grid {r_grid!r}")
        g = table.grid[table.grid <= horizon_r]
        return np.concatenate([[0.0], g[g > 0.0]])
    r = np.asarray(r_grid, dtype=float)
    if r.ndim != 1 or r.size < 2 or r[0] != 0.0 or np.any(np.diff(r) <= 0.0) or r[-1] >= 1.0:
        raise ContractError("r_grid must increase strictly from 0 and stay below 1")
    return r


def _value_losses(params: ModelParams, table: BoundaryTable, w: np.ndarray, r: np.ndarray,
                  horizon_r: float):
    i_hor = _horizon_index(r, horizon_r)
    if i_hor < 1:
        raise ContractError("r-grid has no node before the horizon")
    thr = _thresholds(table, r, i_hor)
    dist = np.abs(w + params.start)
    idx, by_hor = _first_crossing(dist, thr, i_hor)
    rho = r[idx]
    d_rho = dist[np.arange(idx.size), idx]
    half = 0.5 * params.sigma
    h0 = initial_regularized_payoff(params)
    value = half * (cost(rho, params.consts) - d_rho) + h0
    return value, rho, d_rho, by_hor


def risk_via_value(params: ModelParams, table: BoundaryTable, n_paths: int, seed: int = 0,
                   *, n_grid: int = DEFAULT_N_STEPS, horizon_r: float = DEFAULT_HORIZON_R,
                   r_grid=None) -> ValueRisk:
    """Bayes risk from the value identity, simulating ``W`` in r-time.

    The r-grid defaults to the image of the observation grid used by
    :func:`estimate_risk` with the same ``n_grid`` and ``horizon_r``; pass
    ``r_grid="table"`` to monitor at the table's nodes instead, or an explicit
    increasing array starting at 0.
    """
    if n_paths < 100:
        raise ContractError(f"n_paths must be at least 100, got {n_paths}")
    _validate(params, table, horizon_r)
    r = _resolve_r_grid(params, table, r_grid, n_grid, horizon_r)
    w = _brownian_paths(seed, n_paths, r)
    value, _, _, by_hor = _value_losses(params, table, w, r, horizon_r)
    mean, se = _summary(value)
    return ValueRisk(mean, se, int(n_paths), float(np.mean(by_hor)))


def perturbation_study(params: ModelParams, table: BoundaryTable, scales, n_paths: int,
                       seed: int = 0, *, n_grid: int = DEFAULT_N_STEPS,
                       horizon_r: float = DEFAULT_HORIZON_R, r_grid=None) -> dict:
    """Risk of the rules with boundary ``c A`` for each scale ``c``.

    All scales see the same Brownian paths (common random numbers), the ones
    :func:`risk_via_value` draws for ``seed``, so scale 1.0 reproduces it
    exactly. Each report splits the risk into ``E tau`` and the expected
    posterior decision loss; ``error_rate`` is the mean posterior probability
    of a wrong decision.
    """
    scales = [float(c) for c in scales]
    if 1.0 not in scales:
        raise ContractError("scales must include 1.0")
    if any(not c > 0.0 for c in scales):
        raise ContractError("scales must be positive")
    if n_paths < 100:
        raise ContractError(f"n_paths must be at least 100, got {n_paths}")
    _validate(params, table, horizon_r)
    r = _resolve_r_grid(params, table, r_grid, n_grid, horizon_r)
    w = _brownian_paths(seed, n_paths, r)
    h0 = initial_regularized_payoff(params)
    out = {}
    for c in scales:
        tab = table if c == 1.0 else table.scaled(c)
        value, rho, d_rho, by_hor = _value_losses(params, tab, w, r, horizon_r)
        mean, se = _summary(value)
        tau = time_change(rho, params)
        frac = float(np.mean(by_hor))
        # b_rho = 1 / (sigma^2 (1 - rho)), so a / sqrt(b) = d_rho / sqrt(1 - rho)
        p_wrong = std_normal_cdf(-d_rho / np.sqrt(1.0 - rho))
        out[c] = RiskReport(
            mean_risk=mean, std_error=se, n_paths=int(n_paths), mean_tau=float(np.mean(tau)),
            error_rate=float(np.mean(p_wrong)),
            components={"observation_cost": float(np.mean(tau)),
                        "decision_loss": float(np.mean(h0 - 0.5 * params.sigma * d_rho))},
            comparison={"immediate_stop_risk": immediate_stop_risk(params)},
            horizon_fraction=frac, warnings=_warnings(frac, horizon_r, r),
            config={"coordinates": "transformed", "seed": int(seed), "n_grid": int(n_grid),
                    "horizon_r": float(horizon_r), "mu": params.mu, "sigma": params.sigma,
                    "hurst": params.hurst, "table_scale": c},
        )
    return out
