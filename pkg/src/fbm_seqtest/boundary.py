"""Stopping boundary of the transformed problem.

For a Brownian motion started at ``(t, x)`` on the time interval [0, 1] the
optimal rule stops as soon as ``|W| >= A(t)``. The boundary solves

    G(t, A(t)) = int_t^1 F(t, A(t), s, A(s)) ds,

    G(t, x) = E|zeta sqrt(1-t) + x| - x,
    F(t, x, s, y) = cost_rate(s) P(|zeta sqrt(s-t) + x| <= y),

and is computed by backward induction from ``A(1) = 0`` on a grid graded
towards ``t = 1``, where ``cost_rate`` blows up and ``A`` vanishes.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .model import ContractError, DerivedConstants, ModelParams, cost_rate
from .specfun import DomainError, std_normal_cdf, std_normal_pdf

__all__ = [
    "BoundaryTable",
    "SolverOptions",
    "SolverError",
    "FingerprintError",
    "RangeError",
    "g_func",
    "f_func",
    "boundary_grid",
    "boundary_cap",
    "solve_boundary",
    "residual",
    "residuals",
    "boundary_at",
    "check_table",
]

log = logging.getLogger(__name__)

_BRACKET = 2.0


class SolverError(RuntimeError):
    """Backward induction could not bracket a root."""


class FingerprintError(ContractError):
    """A table is used with parameters it was not solved for."""


class RangeError(ValueError):
    """Evaluation point outside the range covered by a table."""


@dataclass(frozen=True)
class SolverOptions:
    """Numerical settings of :func:`solve_boundary`.

    Attributes:
        grading: exponent p of the mesh ``1 - t_k = (1 - t_min)(1 - k/(n-1))^p``;
            p > 1 clusters nodes near ``t = 1``.
        eps: offset of the first node above ``t0``.
        bisection_tol: absolute tolerance on A at each node.
        residual_tol: residual above which the solve is flagged in ``meta``.
        extend_below_t0: start the grid at ``eps`` instead of ``t0 + eps``
            (H < 1/2 only). The boundary there is a formal solution of the
            equation, not a proven optimal rule, and need not be monotone.
    """

    grading: float = 3.0
    eps: float = 1e-4
    bisection_tol: float = 1e-10
    residual_tol: float = 5e-3
    extend_below_t0: bool = False


@dataclass(frozen=True, eq=False)
class BoundaryTable:
    """Boundary values on a grid of transformed time ending at 1."""

    sigma: float
    hurst: float
    gamma_exp: float
    m_const: float
    t0: float
    grid: np.ndarray
    a_values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        grid = np.array(self.grid, dtype=float)
        vals = np.array(self.a_values, dtype=float)
        if grid.ndim != 1 or grid.shape != vals.shape or grid.size < 2:
            raise ValueError("grid and a_values must be 1-d of equal length >= 2")
        if np.any(np.diff(grid) <= 0.0) or grid[-1] != 1.0 or grid[0] < 0.0:
            raise ValueError("grid must increase strictly to 1 from a point >= 0")
        if np.any(vals < 0.0) or not np.all(np.isfinite(vals)):
            raise ValueError("boundary values must be finite and non-negative")
        grid.setflags(write=False)
        vals.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "a_values", vals)

    @classmethod
    def for_params(cls, params: ModelParams, grid, a_values, meta=None) -> BoundaryTable:
        c = params.consts
        return cls(sigma=params.sigma, hurst=params.hurst, gamma_exp=c.gamma_exp,
                   m_const=c.m_const, t0=c.t0, grid=grid, a_values=a_values,
                   meta=dict(meta or {}))

    @classmethod
    def constant(cls, params: ModelParams, value: float = 0.0, grid=None) -> BoundaryTable:
        """A flat table ``A = value`` on ``[0, 1)`` with ``A(1) = 0``.

        Used as a reference rule: with ``value = 0`` it stops at once.
        """
        if grid is None:
            grid = np.linspace(0.0, 1.0, 1001)
        vals = np.full(len(grid), float(value))
        vals[-1] = 0.0
        return cls.for_params(params, grid, vals, {"kind": "constant"})

    def scaled(self, factor: float) -> BoundaryTable:
        """Copy with every boundary value multiplied by ``factor``."""
        meta = dict(self.meta)
        meta["scale"] = meta.get("scale", 1.0) * float(factor)
        return BoundaryTable(self.sigma, self.hurst, self.gamma_exp, self.m_const, self.t0,
                             self.grid, self.a_values * float(factor), meta)

    @property
    def consts(self) -> DerivedConstants:
        """The constants used by the boundary equation (C_H, L_H are not stored)."""
        return DerivedConstants(c_h=math.nan, l_h=math.nan, gamma_exp=self.gamma_exp,
                                t0=self.t0, m_const=self.m_const)

    def check_params(self, params: ModelParams) -> None:
        """Raise :class:`FingerprintError` unless ``params`` match (sigma, H)."""
        c = params.consts
        same = (params.sigma == self.sigma and params.hurst == self.hurst
                and c.gamma_exp == self.gamma_exp and c.m_const == self.m_const
                and c.t0 == self.t0)
        if not same:
            raise FingerprintError(
                f"table solved for sigma={self.sigma}, H={self.hurst}; "
                f"got sigma={params.sigma}, H={params.hurst}"
            )

    def __eq__(self, other):
        if not isinstance(other, BoundaryTable):
            return NotImplemented
        return (self.sigma == other.sigma and self.hurst == other.hurst
                and self.gamma_exp == other.gamma_exp and self.m_const == other.m_const
                and self.t0 == other.t0 and np.array_equal(self.grid, other.grid)
                and np.array_equal(self.a_values, other.a_values)
                and self.meta == other.meta)

    __hash__ = None


def g_func(t, x):
    """G(t, x) = E|zeta sqrt(1-t) + x| - x for 0 <= t <= 1."""
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    if np.any(t < 0.0) or np.any(t > 1.0):
        raise DomainError("g_func requires t in [0, 1]")
    sd = np.sqrt(1.0 - t)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(sd > 0.0, x / np.where(sd > 0.0, sd, 1.0), 0.0)
        out = np.where(sd > 0.0,
                       2.0 * sd * std_normal_pdf(z) - 2.0 * x * std_normal_cdf(-z),
                       np.abs(x) - x)
    return float(out) if out.ndim == 0 else out


_GL8_X, _GL8_W = np.polynomial.legendre.leggauss(8)


def _normal_mass(lo, hi):
    """Phi(hi) - Phi(lo) for lo <= hi without cancellation.

    Intervals over which the density changes by less than about one e-fold
    integrate it by 8-point Gauss-Legendre (near machine precision); on the
    others the two tail masses differ enough that subtracting them, on the
    side away from the mode, keeps the digits.
    """
    lo, hi = np.broadcast_arrays(np.asarray(lo, float), np.asarray(hi, float))
    width = hi - lo
    out = np.empty(lo.shape)
    narrow = width * (1.0 + np.maximum(np.abs(lo), np.abs(hi))) < 1.0
    if np.any(narrow):
        l, w = lo[narrow], width[narrow]
        nodes = l[:, None] + 0.5 * w[:, None] * (_GL8_X + 1.0)
        out[narrow] = 0.5 * w * (std_normal_pdf(nodes) @ _GL8_W)
    wide = ~narrow
    if np.any(wide):
        l, h = lo[wide], hi[wide]
        upper = l > 0.0
        out[wide] = np.where(upper, std_normal_cdf(-l) - std_normal_cdf(-h),
                             std_normal_cdf(h) - std_normal_cdf(l))
    return out


def _interval_prob(x, y, sd):
    # P(|zeta sd + x| <= y)
    return _normal_mass((-y - x) / sd, (y - x) / sd)


def f_func(t, x, s, y, consts: DerivedConstants):
    """F(t, x, s, y) = cost_rate(s) P(|zeta sqrt(s-t) + x| <= y), t < s < 1."""
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    if np.any(s <= t) or np.any(s >= 1.0):
        raise DomainError("f_func requires t < s < 1")
    sd = np.sqrt(s - t)
    out = cost_rate(s, consts) * _interval_prob(np.asarray(x, float), np.asarray(y, float), sd)
    return float(out) if np.ndim(out) == 0 else out


def boundary_cap(t, consts: DerivedConstants):
    """Upper bound on A(t) used to bracket the root.

    ``(1-t)^gamma / (2 M t^(gamma-1))`` for t > 2 t0, otherwise (H < 1/2) the
    constant ``1 / (2 cost_rate(t0))``: the rate is smallest at ``t0``, so no
    later cost rate is below it.
    """
    g, m, t0 = consts.gamma_exp, consts.m_const, consts.t0
    t = float(t)
    if t <= 0.0:
        raise DomainError("boundary_cap requires t > 0")
    if t > 2.0 * t0:
        return (1.0 - t) ** g / (2.0 * m * t ** (g - 1.0))
    return 1.0 / (2.0 * cost_rate(t0, consts))


def boundary_grid(params: ModelParams, n_grid: int, options: SolverOptions) -> np.ndarray:
    t0 = params.consts.t0
    if options.extend_below_t0 and t0 > 0.0:
        t_min = options.eps
    else:
        t_min = t0 + options.eps
    k = np.arange(n_grid) / (n_grid - 1)
    grid = 1.0 - (1.0 - t_min) * (1.0 - k) ** options.grading
    grid[0] = t_min
    grid[-1] = 1.0
    if np.any(np.diff(grid) <= 0.0):
        raise ValueError("grid collapsed; use fewer nodes or a smaller grading exponent")
    return grid


def _trapezoid_weights(s: np.ndarray) -> np.ndarray:
    d = np.diff(s)
    w = np.zeros_like(s)
    w[:-1] += 0.5 * d
    w[1:] += 0.5 * d
    return w


def solve_boundary(params: ModelParams, n_grid: int = 500,
                   options: SolverOptions | None = None) -> BoundaryTable:
    """Solve the boundary equation by backward induction.

    At node ``t_i`` the integral is split in three. On the first cell
    ``[t_i, t_{i+1}]`` (A linear between the unknown ``a`` and ``A(t_{i+1})``)
    the integrand is resolved by Gauss-Legendre in ``u = sqrt(s - t_i)`` on a
    dyadic partition. The next few cells use Gauss-Legendre in ``u`` per cell
    with A interpolated linearly; beyond them a trapezoid sum over the solved
    nodes, with the node ``s = 1`` carrying 0 since ``A(1) = 0``. The scalar
    equation is solved by bisection on ``[0, 2 boundary_cap(t_i)]``, keeping
    the smallest root; the factor 2 leaves room for discretisation error where
    the cap is nearly attained.
    """
    if n_grid < 50:
        raise ValueError(f"n_grid must be at least 50, got {n_grid}")
    options = options or SolverOptions()
    consts = params.consts
    grid = boundary_grid(params, n_grid, options)
    rates = np.zeros(n_grid)
    rates[:-1] = cost_rate(grid[:-1], consts)
    vals = np.zeros(n_grid)
    for i in range(n_grid - 2, -1, -1):
        t = grid[i]
        # near field in u = sqrt(s - t); the probability varies on the scale A^2
        reach = t + _NEAR_WIDTH * vals[i + 1] ** 2
        j_far = max(i + _NEAR_CELLS, int(np.searchsorted(grid, reach)))
        j_far = min(j_far, n_grid - 1)
        u_near, w_near = _near_nodes(grid, i, j_far)
        s_near = t + u_near * u_near
        om_near = (1.0 - t) - u_near * u_near
        a_near = np.interp(s_near, grid, vals)
        tail = s_near > grid[-2]
        if np.any(tail):
            # cell ending at 1: same power-law decay as in _cell_edge
            a_near[tail] = vals[-2] * (om_near[tail] / (1.0 - grid[-2])) ** (
                consts.gamma_exp + 1.0)
        w_near = w_near * 2.0 * u_near * _rate(s_near, om_near, consts)
        # far field: trapezoid over [t_far, 1] with the s = 1 node carrying 0
        s = grid[j_far:]
        wts = _trapezoid_weights(s)
        sd = np.sqrt(s[:-1] - t)
        later = vals[j_far:-1]
        wr = wts[:-1] * rates[j_far:-1]
        dt = grid[i + 1] - t
        a_next = vals[i + 1]
        last = i == n_grid - 2
        sd1 = math.sqrt(1.0 - t)

        def defect(a):
            lhs = 2.0 * sd1 * std_normal_pdf(a / sd1) - 2.0 * a * std_normal_cdf(-a / sd1)
            rhs = (_first_cell(t, dt, a, a_next, consts, last)
                   + float(np.dot(w_near, _interval_prob(a, a_near, u_near)))
                   + float(np.dot(wr, _interval_prob(a, later, sd))))
            return lhs - rhs

        # the cap is sharp as t -> t0 when A << 1 (small sigma), so discretisation
        # error can put the root just above it; search twice as far
        vals[i] = _bisect(defect, 0.0, _BRACKET * boundary_cap(t, consts),
                          options.bisection_tol, t)

    table = BoundaryTable.for_params(params, grid, vals)
    check = _default_check_points(table)
    res = residual(table, check)
    meta = {
        "n_grid": int(n_grid),
        "grading": float(options.grading),
        "eps": float(options.eps),
        "t_min": float(grid[0]),
        "bisection_tol": float(options.bisection_tol),
        "residual_tol": float(options.residual_tol),
        "extend_below_t0": bool(options.extend_below_t0 and consts.t0 > 0.0),
        "max_residual": float(res),
        "converged": bool(res <= options.residual_tol),
    }
    if res > options.residual_tol:
        log.warning("boundary residual %.3g exceeds tolerance %.3g", res, options.residual_tol)
    return BoundaryTable.for_params(params, grid, vals, meta)


_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)
# near field: at least this many cells after the first, and out to
# s - t = _NEAR_WIDTH * A(t_{i+1})^2, where P(|zeta sqrt(s-t) + a| <= A) has
# mostly settled
_NEAR_CELLS = 8
_NEAR_WIDTH = 400.0


def _near_nodes(grid: np.ndarray, i: int, j_far: int):
    # Gauss-Legendre nodes/weights in u = sqrt(s - t_i) on the cells
    # [t_{i+1}, t_{i+2}], ..., [t_{j_far - 1}, t_{j_far}]
    if j_far <= i + 1:
        return np.zeros(0), np.zeros(0)
    t = grid[i]
    lo = np.sqrt(grid[i + 1:j_far] - t)[:, None]
    hi = np.sqrt(grid[i + 2:j_far + 1] - t)[:, None]
    u = (0.5 * (hi - lo) * _GL_X + 0.5 * (hi + lo)).ravel()
    w = (0.5 * (hi - lo) * _GL_W).ravel()
    return u, w


def _dyadic_panels(length: float, scale: float, max_levels: int = 48) -> np.ndarray:
    # breakpoints length * 2^-k down to below `scale` / 8, then 0
    if scale <= 0.0 or scale >= length:
        levels = 1
    else:
        levels = min(max_levels, int(math.ceil(math.log2(8.0 * length / scale))) + 1)
    pts = length * 2.0 ** -np.arange(levels)
    return np.concatenate([[0.0], pts[::-1]])


def _rate(s: np.ndarray, one_minus_s: np.ndarray, consts: DerivedConstants) -> np.ndarray:
    # cost_rate with 1 - s supplied separately (no cancellation next to s = 1)
    g = consts.gamma_exp
    return consts.m_const * g * np.exp((g - 1.0) * np.log(s) - (g + 1.0) * np.log(one_minus_s))


def _cell_edge(a: float, a_next: float, t: float, dt: float, u2: np.ndarray,
               gamma_exp: float, last: bool) -> np.ndarray:
    # A on [t, t + dt]: linear, except on the cell ending at 1 where it decays
    # like (1 - s)^(gamma + 1), the local behaviour of the boundary
    if last:
        return a * ((dt - u2) / dt) ** (gamma_exp + 1.0)
    return a + (a_next - a) * u2 / dt


def _first_cell(t: float, dt: float, a: float, a_next: float,
                consts: DerivedConstants, last: bool = False) -> float:
    """int_t^{t+dt} cost_rate(s) P(|zeta sqrt(s-t) + a| <= A(s)) ds."""
    root = math.sqrt(dt)
    slope = (a if last else abs(a_next - a)) / dt
    scale = min(a if a > 0.0 else root, 1.0 / slope if slope > 0.0 else root)
    br = _dyadic_panels(root, scale)
    lo, hi = br[:-1, None], br[1:, None]
    u = (0.5 * (hi - lo) * _GL_X + 0.5 * (hi + lo)).ravel()
    w = (0.5 * (hi - lo) * _GL_W).ravel()
    u2 = u * u
    edge = _cell_edge(a, a_next, t, dt, u2, consts.gamma_exp, last)
    prob = _interval_prob(a, edge, u)
    one_minus = (1.0 - t) - u2
    return float(np.dot(w, 2.0 * u * _rate(t + u2, one_minus, consts) * prob))


def _bisect(fun, lo: float, hi: float, tol: float, t: float, *, n_scan: int = 64,
            rel_tol: float = 1e-10, max_iter: int = 400) -> float:
    """Smallest a in [lo, hi] where ``fun`` turns non-positive.

    Above the boundary the defect is zero up to discretisation error and can
    change sign again, so the sign at ``hi`` proves nothing; a scan locates
    the first sign change and bisection refines it. The relative stop matters
    next to t = 1, where A is many decades below ``tol``.
    """
    f_lo = fun(lo)
    if not f_lo > 0.0:
        return lo
    pts = lo + (hi - lo) * np.arange(1, n_scan + 1) / n_scan
    for p in pts:
        if fun(p) > 0.0:
            lo = p
        else:
            hi = p
            break
    else:
        raise SolverError(f"no sign change of the boundary equation at t={t:.6g} "
                          f"on [0, {hi:.6g}]")
    for _ in range(max_iter):
        if hi - lo <= min(tol, rel_tol * hi):
            break
        mid = 0.5 * (lo + hi)
        if fun(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def boundary_at(table: BoundaryTable, t):
    """Linear interpolation of the table; exact at nodes, 0 at t = 1."""
    ta = np.asarray(t, dtype=float)
    if np.any(ta < table.grid[0]) or np.any(ta > 1.0):
        raise RangeError(f"t outside the table range [{table.grid[0]:.6g}, 1]")
    out = np.interp(ta, table.grid, table.a_values)
    return float(out) if out.ndim == 0 else out


def _first_cell_adaptive(table: BoundaryTable, t: float, x: float, s1: float) -> float:
    # adaptive quadrature in u = sqrt(s - t), independent of the solver's rule
    consts = table.consts
    a1 = boundary_at(table, s1)
    dt = s1 - t
    last = s1 == 1.0
    root = math.sqrt(dt)

    def integrand(u):
        if u == 0.0:
            return 0.0
        u2 = u * u
        one_minus = (1.0 - t) - u2
        if one_minus <= 0.0:
            return 0.0
        edge = float(_cell_edge(x, a1, t, dt, np.float64(u2), consts.gamma_exp, last))
        prob = float(_interval_prob(x, edge, u))
        return 2.0 * u * float(_rate(np.float64(t + u2), np.float64(one_minus), consts)) * prob

    slope = (x if last else abs(a1 - x)) / dt
    pts = [p for p in (x, 2.0 * x, 1.0 / slope if slope > 0.0 else 0.0) if 0.0 < p < root]
    val, _ = integrate.quad(integrand, 0.0, root, points=pts or None,
                            epsabs=1e-13, epsrel=1e-10, limit=200)
    return float(val)


def residual_at(table: BoundaryTable, t: float) -> float:
    """Absolute defect of the boundary equation at ``t``.

    The cell from ``t`` to the next node is integrated adaptively in
    ``u = sqrt(s - t)``; the remaining nodes use composite Simpson on the
    doubled grid (cell midpoints added, A interpolated linearly) with the
    ``s = 1`` value taken as 0.
    """
    consts = table.consts
    x = boundary_at(table, t)
    nodes = table.grid[table.grid > t]
    head = _first_cell_adaptive(table, t, x, float(nodes[0]))
    mids = 0.5 * (nodes[:-1] + nodes[1:])
    s = np.empty(2 * nodes.size - 1)
    s[0::2] = nodes
    s[1::2] = mids
    f = np.zeros_like(s)
    inner = s[:-1]
    f[:-1] = cost_rate(inner, consts) * _interval_prob(
        x, boundary_at(table, inner), np.sqrt(inner - t))
    h = np.diff(nodes)
    tail = float(np.sum(h / 6.0 * (f[0:-1:2] + 4.0 * f[1::2] + f[2::2])))
    return abs(g_func(t, x) - head - tail)


def residuals(table: BoundaryTable, check_points) -> np.ndarray:
    return np.array([residual_at(table, float(t)) for t in check_points])


def residual(table: BoundaryTable, check_points=None) -> float:
    """Largest absolute defect of the boundary equation over ``check_points``.

    Defaults to every interior node of the table.
    """
    if check_points is None:
        check_points = _default_check_points(table)
    pts = np.asarray(check_points, dtype=float)
    if np.any(pts <= table.grid[0]) or np.any(pts >= 1.0):
        raise RangeError("check points must lie strictly inside the table range")
    return float(np.max(residuals(table, pts)))


def _default_check_points(table: BoundaryTable) -> np.ndarray:
    return table.grid[1:-1]


def check_table(table: BoundaryTable) -> dict:
    """Structural checks: monotone, positive before 1, zero at 1, upper bound.

    Returns a mapping from check name to a boolean. Monotonicity is only
    checked on nodes >= t0 (the formal extension below t0 is exempt).
    """
    consts = table.consts
    g, vals = table.grid, table.a_values
    above = g >= consts.t0
    va = vals[above]
    bound_nodes = (g > 2.0 * consts.t0) & (g > 0.0)
    caps = np.array([boundary_cap(t, consts) for t in g[bound_nodes]])
    return {
        "non_increasing": bool(np.all(np.diff(va) <= 0.0)),
        "positive_before_1": bool(np.all(vals[:-1] > 0.0)),
        "zero_at_1": bool(vals[-1] == 0.0),
        "upper_bound": bool(np.all(vals[bound_nodes] <= caps)),
    }
