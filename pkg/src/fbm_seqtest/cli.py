"""Command-line front end.

Commands::

    boundary   solve the stopping boundary, write the table (JSON or CSV t,A)
    simulate   draw observation paths Z, write them (JSON or long CSV)
    run        run the test on freshly drawn paths, write per-path outcomes
    risk       Monte Carlo Bayes risk, write the report (JSON) or outcomes (CSV)
    check      solve or load a table and run the invariant checks

Exit status: 0 on success, 1 on numeric failure or a failed check, 2 on a
usage error (bad flags or parameters, unreadable or mismatched table).
"""

from __future__ import annotations

import argparse
import logging
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import artifacts
from .boundary import (BoundaryTable, FingerprintError, RangeError, SolverError, SolverOptions,
                       check_table, residual, solve_boundary)
from .fbm_sim import PRIOR_DRAW, fixed_theta, path_seeds, sample_observation, uniform_grid
from .model import ContractError, ModelParams, time_change
from .testbench import (DEFAULT_HORIZON_R, DEFAULT_N_STEPS, PathOutcomes, estimate_risk,
                        run_test)

__all__ = ["RunConfig", "UsageError", "build_parser", "dispatch", "main"]

log = logging.getLogger("fbm_seqtest")

COMMANDS = ("boundary", "simulate", "run", "risk", "check")
FORMATS = ("json", "csv")


class UsageError(ValueError):
    """Invalid command-line configuration."""


@dataclass(frozen=True)
class RunConfig:
    command: str
    params: ModelParams
    n_grid: int = 500
    n_paths: int = 1
    n_time_steps: int = DEFAULT_N_STEPS
    horizon_r: float = DEFAULT_HORIZON_R
    seed: int | None = None
    tolerance: float = 5e-3
    output: str | None = None
    fmt: str = "json"
    boundary: str | None = None
    theta: float | None = None
    extend_below_t0: bool = False
    trajectory: str | None = None
    compare: bool = False
    estimator: str = "realized"

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")
        if self.fmt not in FORMATS:
            raise UsageError(f"unknown format {self.fmt!r}; use one of {FORMATS}")
        for name in ("n_grid", "n_paths", "n_time_steps"):
            if getattr(self, name) <= 0:
                raise UsageError(f"--{name.replace('_', '-')} must be positive")
        if not self.tolerance > 0.0:
            raise UsageError("--tolerance must be positive")
        if not 0.0 < self.horizon_r < 1.0:
            raise UsageError("--horizon-r must lie in (0, 1)")
        if self.seed is not None and not 0 <= self.seed < 2 ** 63:
            raise UsageError("--seed must be a non-negative 63-bit integer")


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v <= 0:
        raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fbm-seqtest",
                                description="Sequential test for the sign of an fBm drift.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, *, randomized=False, table=False, paths=False):
        sp.add_argument("--mu", type=float, default=0.0, help="prior mean of the drift")
        sp.add_argument("--sigma", type=float, default=1.0, help="prior std of the drift")
        sp.add_argument("--hurst", type=float, default=0.5, help="Hurst index H in (0, 1)")
        sp.add_argument("--output", "-o", default=None, help="output file (default stdout)")
        sp.add_argument("--format", dest="fmt", choices=FORMATS, default="json")
        if table:
            sp.add_argument("--n-grid", type=_positive_int, default=500,
                            help="boundary grid size when solving")
            sp.add_argument("--extend-below-t0", action="store_true",
                            help="solve the formal boundary below t0 (H < 1/2)")
            sp.add_argument("--boundary", default=None,
                            help="use this JSON table instead of solving")
        if randomized:
            sp.add_argument("--seed", type=int, default=None,
                            help="run seed (generated and recorded if omitted)")
        if paths:
            sp.add_argument("--n-paths", type=_positive_int, default=1)
            sp.add_argument("--n-time-steps", type=_positive_int, default=DEFAULT_N_STEPS)
            sp.add_argument("--horizon-r", type=float, default=DEFAULT_HORIZON_R,
                            help="horizon in transformed time r")

    sp = sub.add_parser("boundary", help="solve and write the stopping boundary")
    common(sp, table=True)
    sp.add_argument("--tolerance", type=float, default=5e-3, help="residual tolerance")

    sp = sub.add_parser("simulate", help="draw observation paths")
    common(sp, randomized=True, paths=True)
    sp.add_argument("--theta", type=float, default=None,
                    help="fixed drift (default: drawn from the prior)")

    sp = sub.add_parser("run", help="run the test on simulated paths")
    common(sp, randomized=True, table=True, paths=True)
    sp.add_argument("--theta", type=float, default=None,
                    help="fixed drift (default: drawn from the prior)")
    sp.add_argument("--trajectory", default=None,
                    help="also write the posterior trajectory (t, r, a, b, w) of the "
                         "first path to this CSV file")

    sp = sub.add_parser("risk", help="Monte Carlo Bayes risk")
    common(sp, randomized=True, table=True, paths=True)
    sp.set_defaults(n_paths=1000)
    sp.add_argument("--compare", action="store_true",
                    help="also estimate the risk in transformed coordinates")
    sp.add_argument("--estimator", choices=("realized", "conditional"), default="realized")

    sp = sub.add_parser("check", help="invariant checks of a solved or loaded table")
    common(sp, table=True)
    sp.set_defaults(n_grid=250)
    sp.add_argument("--tolerance", type=float, default=5e-3, help="residual tolerance")
    return p


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    try:
        params = ModelParams(ns.mu, ns.sigma, ns.hurst)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    kw = {k: getattr(ns, k) for k in ("n_grid", "n_paths", "n_time_steps", "horizon_r", "seed",
                                       "tolerance", "boundary", "theta", "extend_below_t0",
                                       "trajectory", "compare", "estimator") if hasattr(ns, k)}
    return RunConfig(command=ns.command, params=params, output=ns.output, fmt=ns.fmt, **kw)


def _emit(cfg: RunConfig, text: str) -> None:
    if cfg.output is None or cfg.output == "-":
        sys.stdout.write(text)
    else:
        artifacts.atomic_write_text(cfg.output, text)


def _seed(cfg: RunConfig) -> int:
    if cfg.seed is not None:
        return int(cfg.seed)
    seed = int(np.random.SeedSequence().entropy % (2 ** 63))
    log.info("no --seed given; using %d (recorded in the output)", seed)
    return seed


def _params_dict(params: ModelParams) -> dict:
    return {"mu": params.mu, "sigma": params.sigma, "hurst": params.hurst}


def _table(cfg: RunConfig) -> BoundaryTable:
    if cfg.boundary is not None:
        return artifacts.load_boundary(cfg.boundary, cfg.params)
    opts = SolverOptions(residual_tol=cfg.tolerance, extend_below_t0=cfg.extend_below_t0)
    log.info("solving the boundary on %d nodes", cfg.n_grid)
    return solve_boundary(cfg.params, cfg.n_grid, opts)


def _cmd_boundary(cfg: RunConfig) -> int:
    table = _table(cfg)
    if cfg.fmt == "json":
        _emit(cfg, artifacts.dumps_json(artifacts.boundary_to_dict(table)))
    else:
        _emit(cfg, artifacts.boundary_csv(table))
    return 0


def _theta_mode(cfg: RunConfig):
    return PRIOR_DRAW if cfg.theta is None else fixed_theta(cfg.theta)


def _cmd_simulate(cfg: RunConfig) -> int:
    seed = _seed(cfg)
    horizon_t = time_change(cfg.horizon_r, cfg.params)
    seeds = path_seeds(seed, cfg.n_paths)
    draws = [sample_observation(cfg.params, _theta_mode(cfg), cfg.n_time_steps, horizon_t, int(s))
             for s in seeds]
    times = uniform_grid(cfg.n_time_steps, horizon_t)
    if cfg.fmt == "csv":
        _emit(cfg, artifacts.paths_csv(seeds, [d.theta for d in draws], times,
                                       np.array([d.path.values for d in draws])))
        return 0
    doc = {"config": {**_params_dict(cfg.params), "seed": seed, "n_paths": cfg.n_paths,
                      "n_time_steps": cfg.n_time_steps, "horizon_r": cfg.horizon_r,
                      "theta": cfg.theta},
           "t": times,
           "paths": [{"seed": int(d.seed), "theta": d.theta, "z": d.path.values} for d in draws]}
    _emit(cfg, artifacts.dumps_json(doc))
    return 0


def _cmd_run(cfg: RunConfig) -> int:
    table = _table(cfg)
    seed = _seed(cfg)
    horizon_t = time_change(cfg.horizon_r, cfg.params)
    seeds = path_seeds(seed, cfg.n_paths)
    rows = []
    for k, s in enumerate(seeds):
        sc = sample_observation(cfg.params, _theta_mode(cfg), cfg.n_time_steps, horizon_t, int(s))
        keep = k == 0 and cfg.trajectory is not None
        out = run_test(sc, table, cfg.params, cfg.horizon_r, keep_trajectory=keep)
        if keep:
            artifacts.atomic_write_text(cfg.trajectory, artifacts.trajectory_csv(out.trajectory))
        wrong = out.decision != (1 if sc.theta > 0.0 else -1)
        rows.append({"seed": int(s), "theta": sc.theta, "tau": out.tau, "rho": out.rho,
                     "decision": out.decision, "loss": out.tau + abs(sc.theta) * wrong,
                     "stopped_by_horizon": out.stopped_by_horizon})
    if cfg.fmt == "csv":
        cols = {k: np.array([r[k] for r in rows]) for k in rows[0]}
        po = PathOutcomes(seeds=cols["seed"], theta=cols["theta"], tau=cols["tau"],
                          rho=cols["rho"], decision=cols["decision"], loss=cols["loss"],
                          stopped_by_horizon=cols["stopped_by_horizon"])
        _emit(cfg, artifacts.outcomes_csv(po))
        return 0
    doc = {"config": {**_params_dict(cfg.params), "seed": seed, "n_paths": cfg.n_paths,
                      "n_time_steps": cfg.n_time_steps, "horizon_r": cfg.horizon_r,
                      "theta": cfg.theta},
           "outcomes": rows}
    _emit(cfg, artifacts.dumps_json(doc))
    return 0


def _cmd_risk(cfg: RunConfig) -> int:
    table = _table(cfg)
    seed = _seed(cfg)
    report = estimate_risk(cfg.params, table, cfg.n_paths, cfg.n_time_steps, cfg.horizon_r, seed,
                           compare=cfg.compare, keep_paths=cfg.fmt == "csv",
                           estimator=cfg.estimator)
    for msg in report.warnings:
        print(f"warning: {msg}", file=sys.stderr)
    if cfg.fmt == "csv":
        _emit(cfg, artifacts.outcomes_csv(report.outcomes))
    else:
        _emit(cfg, artifacts.dumps_json(report.to_dict()))
    return 0


def run_checks(table: BoundaryTable, params: ModelParams, tolerance: float) -> dict:
    """Invariant suite for one table: structure, residual and round trips."""
    results = {name: (ok, "") for name, ok in check_table(table).items()}
    res = residual(table)
    results["residual"] = (res <= tolerance, f"max residual {res:.3e} (tolerance {tolerance:g})")
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "table.json"
        artifacts.save_boundary(table, path)
        again = artifacts.load_boundary(path, params)
        results["json_round_trip"] = (again == table, "")
        artifacts.save_boundary(again, Path(tmp) / "again.json")
        same_bytes = path.read_bytes() == (Path(tmp) / "again.json").read_bytes()
        results["json_bytes_stable"] = (same_bytes, "")
        other = ModelParams(params.mu, params.sigma * 1.5, params.hurst)
        try:
            artifacts.load_boundary(path, other)
            results["fingerprint_guard"] = (False, "table accepted for different sigma")
        except FingerprintError:
            results["fingerprint_guard"] = (True, "")
    lines = artifacts.boundary_csv(table).splitlines()
    results["csv_format"] = (lines[0] == "t,A" and len(lines) == table.grid.size + 1, "")
    return results


def _cmd_check(cfg: RunConfig) -> int:
    table = _table(cfg)
    results = run_checks(table, cfg.params, cfg.tolerance)
    for name, (ok, detail) in results.items():
        print(f"{'PASS' if ok else 'FAIL'} {name}{': ' + detail if detail else ''}",
              file=sys.stderr)
    if cfg.output is not None:
        doc = {"params": _params_dict(cfg.params), "n_grid": int(table.grid.size),
               "checks": {k: {"ok": ok, "detail": d} for k, (ok, d) in results.items()}}
        _emit(cfg, artifacts.dumps_json(doc))
    return 0 if all(ok for ok, _ in results.values()) else 1


_HANDLERS = {"boundary": _cmd_boundary, "simulate": _cmd_simulate, "run": _cmd_run,
             "risk": _cmd_risk, "check": _cmd_check}


def dispatch(cfg: RunConfig) -> int:
    """Execute one command; returns the exit status."""
    return _HANDLERS[cfg.command](cfg)


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)  # exits with status 2 on bad flags
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(ns)
        return dispatch(cfg)
    except (UsageError, ContractError, artifacts.ParseError, FileNotFoundError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (SolverError, RangeError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
