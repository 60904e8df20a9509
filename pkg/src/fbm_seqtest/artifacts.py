"""Reading and writing boundary tables, reports, paths and per-path outcomes.

Floats are written with ``repr``, the shortest decimal string that parses
back to the same double, so JSON round trips are bit-exact. Every writer
goes through a temporary file in the target directory followed by an atomic
rename, and nothing time- or host-dependent is written, so the same inputs
give byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .boundary import BoundaryTable, FingerprintError
from .model import ModelParams, derive_constants
from .testbench import PathOutcomes, RiskReport

__all__ = [
    "ParseError",
    "atomic_write_text",
    "dumps_json",
    "boundary_to_dict",
    "boundary_from_dict",
    "save_boundary",
    "load_boundary",
    "boundary_csv",
    "save_report",
    "outcomes_csv",
    "paths_csv",
    "trajectory_csv",
]

_BOUNDARY_KEYS = ("sigma", "hurst", "gamma", "m_const", "t0", "grid", "a", "meta")
_FINGERPRINT_RTOL = 1e-12


class ParseError(ValueError):
    """A file does not hold a well-formed artifact."""


def atomic_write_text(path, text: str) -> None:
    """Write ``text`` to ``path`` via a temporary file and ``os.replace``."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _plain(obj):
    # numpy scalars/arrays to built-in types; json then writes floats by repr
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if not math.isfinite(v):
            raise ValueError(f"cannot serialise non-finite value {v!r}")
        return v
    return obj


def dumps_json(obj) -> str:
    return json.dumps(_plain(obj), indent=1, allow_nan=False) + "\n"


def boundary_to_dict(table: BoundaryTable) -> dict:
    return {
        "sigma": table.sigma,
        "hurst": table.hurst,
        "gamma": table.gamma_exp,
        "m_const": table.m_const,
        "t0": table.t0,
        "grid": table.grid,
        "a": table.a_values,
        "meta": table.meta,
    }


def _close(x: float, y: float) -> bool:
    return x == y or abs(x - y) <= _FINGERPRINT_RTOL * max(abs(x), abs(y))


def boundary_from_dict(data, params: ModelParams | None = None) -> BoundaryTable:
    """Rebuild a table and validate its fingerprint.

    The stored (gamma, m_const, t0) must be the constants of the stored
    (sigma, H); if ``params`` is given, (sigma, H) must match it too.
    """
    if not isinstance(data, dict) or set(data) != set(_BOUNDARY_KEYS):
        got = sorted(data) if isinstance(data, dict) else type(data).__name__
        raise ParseError(f"boundary JSON must have exactly the keys {list(_BOUNDARY_KEYS)}, "
                         f"got {got}")
    try:
        sigma, hurst = float(data["sigma"]), float(data["hurst"])
        stored = (float(data["gamma"]), float(data["m_const"]), float(data["t0"]))
        grid = np.asarray(data["grid"], dtype=float)
        vals = np.asarray(data["a"], dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"malformed boundary table: {exc}") from None
    if not isinstance(data["meta"], dict):
        raise ParseError("boundary 'meta' must be an object")
    try:
        c = derive_constants(sigma, hurst)
    except (ValueError, ArithmeticError) as exc:
        raise ParseError(f"invalid (sigma, hurst) = ({sigma}, {hurst}): {exc}") from None
    if not all(_close(x, y) for x, y in zip(stored, (c.gamma_exp, c.m_const, c.t0))):
        raise FingerprintError(
            f"stored constants {stored} do not belong to sigma={sigma}, H={hurst}")
    try:
        table = BoundaryTable(sigma=sigma, hurst=hurst, gamma_exp=stored[0],
                              m_const=stored[1], t0=stored[2], grid=grid, a_values=vals,
                              meta=dict(data["meta"]))
    except ValueError as exc:
        raise ParseError(f"invalid boundary table: {exc}") from None
    if params is not None:
        table.check_params(params)
    return table


def boundary_csv(table: BoundaryTable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "A"])
    for t, a in zip(table.grid.tolist(), table.a_values.tolist()):
        w.writerow([repr(t), repr(a)])
    return buf.getvalue()


def save_boundary(table: BoundaryTable, path, fmt: str = "json") -> None:
    """Write a table as JSON (full, reloadable) or CSV (columns t, A)."""
    if fmt == "json":
        atomic_write_text(path, dumps_json(boundary_to_dict(table)))
    elif fmt == "csv":
        atomic_write_text(path, boundary_csv(table))
    else:
        raise ValueError(f"unknown format {fmt!r}")


def load_boundary(path, params: ModelParams | None = None) -> BoundaryTable:
    """Load a JSON table written by :func:`save_boundary`.

    Raises:
        ParseError: not JSON or not a boundary table.
        FingerprintError: constants inconsistent, or (sigma, H) differ from
            ``params``.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
        data = json.loads(text)
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParseError(f"{path}: not a JSON boundary table ({exc})") from None
    return boundary_from_dict(data, params)


def save_report(report: RiskReport, path) -> None:
    atomic_write_text(path, dumps_json(report.to_dict()))


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def outcomes_csv(out: PathOutcomes) -> str:
    """Per-path outcomes: seed, theta, tau, rho, decision, loss."""
    rows = zip((int(s) for s in out.seeds), map(repr, out.theta.tolist()),
               map(repr, out.tau.tolist()), map(repr, out.rho.tolist()),
               (int(d) for d in out.decision), map(repr, out.loss.tolist()))
    return _csv(["seed", "theta", "tau", "rho", "decision", "loss"], rows)


def paths_csv(seeds, thetas, times, values) -> str:
    """Observation paths as CSV.

    A single path gives columns ``t, value``; several give the long format
    ``seed, theta, t, value`` with one row per (path, node).
    """
    values = np.atleast_2d(values)
    t_list = [repr(t) for t in np.asarray(times).tolist()]
    if values.shape[0] == 1:
        return _csv(["t", "value"], zip(t_list, map(repr, values[0].tolist())))
    rows = []
    for s, th, zs in zip(seeds, thetas, values):
        rows.extend((int(s), repr(float(th)), t, repr(z)) for t, z in zip(t_list, zs.tolist()))
    return _csv(["seed", "theta", "t", "value"], rows)


def trajectory_csv(traj) -> str:
    """Posterior trajectory: t, r, a, b, w."""
    cols = [np.asarray(c).tolist() for c in (traj.times, traj.r, traj.a, traj.b, traj.w)]
    return _csv(["t", "r", "a", "b", "w"], ([repr(v) for v in row] for row in zip(*cols)))
