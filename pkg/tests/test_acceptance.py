"""Acceptance criteria 1-8 at their stated tolerances.

Each test prints one ``PASS``/``FAIL`` line (plus indented ``info`` lines
with the numbers behind it) straight to the terminal.

Monte Carlo runs monitor the observation grid up to ``horizon_r = 0.7``:
with n = 512 steps and the default 0.999 the first node after 0 sits near
r = 0.66, far too late to resolve the early part of the boundary. For
H = 0.3 the risk runs use the table extended below t0; the default table
starts at t0 and forces observation until then.
"""

import json
import math
import subprocess
import sys
import time

import numpy as np
import pytest

from fbm_seqtest import specfun
from fbm_seqtest.boundary import SolverOptions, check_table, residual, solve_boundary
from fbm_seqtest.fbm_sim import PRIOR_DRAW, draw_observation_batch, fixed_theta, path_seeds
from fbm_seqtest.model import ModelParams, derive_constants
from fbm_seqtest.testbench import estimate_risk, perturbation_study, risk_via_value
from fbm_seqtest.whitening import posterior_batch, whiten_batch

pytestmark = pytest.mark.slow

PHI0 = 1 / math.sqrt(2 * math.pi)
HORIZON = 0.7
N_STEPS = 512
SEED = 1
_tables: dict = {}


@pytest.fixture
def report(capsys):
    def emit(label, ok, lines=()):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {label}")
            for line in lines:
                print(f"    info: {line}")
    return emit


def table(h, n, extend=False):
    key = (h, n, extend)
    if key not in _tables:
        t = time.perf_counter()
        tab = solve_boundary(ModelParams(0, 1, h), n, SolverOptions(extend_below_t0=extend))
        _tables[key] = (tab, time.perf_counter() - t)
    return _tables[key]


def test_1_constant_reductions(report):
    c = derive_constants(1.0, 0.5)
    ok = all(abs(v - w) <= 1e-12 for v, w in
             ((c.c_h, 1), (c.l_h, 1), (c.gamma_exp, 1), (c.t0, 0)))
    ms = {s: derive_constants(s, 0.5).m_const for s in (0.5, 1.0, 2.0)}
    ok &= all(abs(m - 2 / s ** 3) <= 1e-12 * (2 / s ** 3) for s, m in ms.items())
    report("1 (constants at H = 1/2)", ok,
           [f"C={c.c_h!r} L={c.l_h!r} gamma={c.gamma_exp!r} t0={c.t0!r}",
            "M: " + ", ".join(f"sigma={s}: {m!r}" for s, m in ms.items())])
    assert ok


def test_2_special_functions(report):
    f = specfun.gauss_2f1
    errs = [abs(f(0, 0.7, 1.3, -0.4) - 1), abs(f(0.3, 0.7, 1.3, 0.0) - 1)]
    errs += [abs(f(1, 1, 2, z) + math.log1p(-z) / z) for z in (-0.9, -0.5, -0.1)]
    fd = max(abs((specfun.std_normal_cdf(x + 1e-4) - specfun.std_normal_cdf(x - 1e-4)) / 2e-4
                 - specfun.std_normal_pdf(x)) for x in np.linspace(-6, 6, 121))
    sym = max(abs(specfun.std_normal_cdf(x) + specfun.std_normal_cdf(-x) - 1)
              for x in (0.5, 1.0, 3.0))
    ok = max(errs) <= 1e-9 and fd <= 1e-6 and sym <= 1e-14
    report("2 (special functions)", ok,
           [f"max 2F1 identity error {max(errs):.2e}",
            f"max |dPhi - phi| {fd:.2e}, max symmetry error {sym:.2e}"])
    assert ok


@pytest.mark.parametrize("h", [0.3, 0.5, 0.7])
def test_3_boundary_structure(report, h):
    tab, secs = table(h, 500)
    checks = check_table(tab)
    ok = all(checks.values()) and secs < 60
    report(f"3 (boundary structure, H={h})", ok,
           [f"{k}={v}" for k, v in checks.items()] + [f"solve time {secs:.1f} s (< 60 s)"])
    assert ok


@pytest.mark.parametrize("h", [0.5, 0.3, 0.7])
def test_4_residual_refinement(report, h):
    t = time.perf_counter()
    coarse, _ = table(h, 500)
    fine, _ = table(h, 1000)
    r500, r1000 = residual(coarse), residual(fine)
    secs = time.perf_counter() - t
    ok = r500 <= 5e-3 and r1000 <= r500
    report(f"4 (residual, H={h})", ok,
           [f"max residual n=500: {r500:.3e}, n=1000: {r1000:.3e} "
            f"(factor {r500 / r1000:.2f})",
            "checker: adaptive quadrature on the first cell, Simpson on the doubled grid",
            f"time {secs:.1f} s"])
    assert ok


def _within(samples, target):
    se = samples.std(ddof=1) / math.sqrt(samples.size)
    return abs(samples.mean() - target) / se


@pytest.mark.parametrize("h", [0.3, 0.7])
def test_5_whitening(report, h):
    t0 = time.perf_counter()
    p = ModelParams(0, 1, h)
    seeds = path_seeds(SEED, 2000)
    t, _, z = draw_observation_batch(p, fixed_theta(0.0), N_STEPS, 1.0, seeds)
    x = whiten_batch(t, z, h)
    zx = {tc: _within(x[:, round(tc * N_STEPS)] ** 2, tc) for tc in (0.25, 0.5, 1.0)}
    # W is a Brownian motion under the Bayesian law of (theta, Z), so the
    # increment check draws theta from the prior
    t, _, z = draw_observation_batch(p, PRIOR_DRAW, N_STEPS, 1.0, seeds)
    _, _, r, w = posterior_batch(t, whiten_batch(t, z, h), p)
    pairs = ((128, 0), (256, 128), (512, 256))
    zw = {(i, j): _within((w[:, i] - w[:, j]) ** 2, r[i] - r[j]) for i, j in pairs}
    ok = max(zx.values()) < 3 and max(zw.values()) < 3
    report(f"5 (whitening, H={h})", ok,
           ["Var X_t: " + ", ".join(f"t={k}: {v:.2f} se" for k, v in zx.items()),
            "W increments: " + ", ".join(f"r{i}-r{j}: {v:.2f} se" for (i, j), v in zw.items()),
            f"time {time.perf_counter() - t0:.1f} s"])
    assert ok


@pytest.mark.parametrize("h", [0.3, 0.5, 0.7])
def test_6_coordinate_consistency(report, h):
    t0 = time.perf_counter()
    p = ModelParams(0, 1, h)
    tab, _ = table(h, 500, extend=h < 0.5)
    rep = estimate_risk(p, tab, 10000, N_STEPS, HORIZON, SEED, compare=True)
    val, val_se = rep.comparison["transformed_risk"], rep.comparison["transformed_std_error"]
    gap = abs(rep.mean_risk - val) / math.hypot(rep.std_error, val_se)
    z_orig = (PHI0 - rep.mean_risk) / rep.std_error
    z_val = (PHI0 - val) / val_se
    ok = gap <= 3 and z_orig > 3 and z_val > 3
    cond = estimate_risk(p, tab, 10000, N_STEPS, HORIZON, SEED, estimator="conditional")
    report(f"6 (risk in both coordinates, H={h})", ok, [
        f"table {'extended below t0' if h < 0.5 else 'default'}, n=500; "
        f"horizon_r={HORIZON}, n={N_STEPS}, 10000 paths, seed {SEED}",
        f"estimate_risk {rep.mean_risk:.5f} +- {rep.std_error:.5f} "
        f"({z_orig:.2f} se below {PHI0:.5f})",
        f"risk_via_value {val:.5f} +- {val_se:.5f} ({z_val:.2f} se below)",
        f"difference {gap:.2f} combined se; horizon stops {rep.horizon_fraction:.4f}",
        f"(conditional-loss estimator, not used for the verdict: "
        f"{cond.mean_risk:.5f} +- {cond.std_error:.5f})",
        f"time {time.perf_counter() - t0:.1f} s"])
    assert ok


def test_7_perturbation(report):
    t0 = time.perf_counter()
    p = ModelParams(0, 1, 0.5)
    tab, _ = table(0.5, 500)
    scales = [0.7, 0.85, 1.0, 1.15, 1.3]
    study = perturbation_study(p, tab, scales, 10000, SEED, n_grid=N_STEPS, horizon_r=HORIZON)
    one = study[1.0]
    margins = {c: (one.mean_risk - rep.mean_risk) / math.hypot(one.std_error, rep.std_error)
               for c, rep in study.items() if c != 1.0}
    ok = all(m <= 3 for m in margins.values())
    best = min(study, key=lambda c: study[c].mean_risk)
    report("7 (optimality by perturbation, H=0.5)", ok, [
        ", ".join(f"{c}: {r.mean_risk:.5f}+-{r.std_error:.5f}" for c, r in study.items()),
        "risk(1.0) - risk(c) in combined se: "
        + ", ".join(f"{c}: {m:+.2f}" for c, m in margins.items()),
        f"lowest estimate at scale {best}; time {time.perf_counter() - t0:.1f} s"])
    assert ok


def test_8_determinism(report, tmp_path):
    def cli(*args):
        subprocess.run([sys.executable, "-m", "fbm_seqtest", *map(str, args)], check=True,
                       capture_output=True)

    same = {}
    for name, args in {
        "boundary": ("boundary", "--hurst", 0.7, "--n-grid", 100),
        "risk": ("risk", "--hurst", 0.3, "--n-grid", 60, "--extend-below-t0", "--seed", 5,
                 "--n-paths", 500, "--horizon-r", HORIZON, "--compare"),
        "check": ("check", "--hurst", 0.7, "--n-grid", 60),
    }.items():
        for k in (1, 2):
            cli(*args, "-o", tmp_path / f"{name}{k}.json")
        a, b = ((tmp_path / f"{name}{k}.json").read_bytes() for k in (1, 2))
        json.loads(a)
        same[name] = a == b
    ok = all(same.values())
    report("8 (byte-identical JSON)", ok, [f"{k}: {'identical' if v else 'DIFFERENT'}"
                                           for k, v in same.items()])
    assert ok
