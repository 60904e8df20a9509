"""Residual of the boundary equation under grid refinement.

For each Hurst index, solves on n = 250, 500, 1000 nodes and reports the
maximum residual measured by the independent checker, the factor gained per
doubling and the largest change of A between consecutive refinements.

    python3 scripts/refinement_study.py --hurst 0.3 0.5 0.7
"""

import argparse
import csv
import time
from pathlib import Path

import numpy as np

from fbm_seqtest import ModelParams, SolverOptions, boundary_at, check_table, solve_boundary


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--hurst", type=float, nargs="+", default=[0.3, 0.5, 0.7])
    ap.add_argument("--sigma", type=float, default=1.0)
    ap.add_argument("--n-grid", type=int, nargs="+", default=[250, 500, 1000])
    ap.add_argument("--extend-below-t0", action="store_true")
    ap.add_argument("--out", type=Path, default=Path("results/refinement.csv"))
    args = ap.parse_args()
    args.out.parent.mkdir(parents=True, exist_ok=True)

    rows = []
    for h in args.hurst:
        p = ModelParams(0.0, args.sigma, h)
        prev = None
        for n in args.n_grid:
            start = time.perf_counter()
            tab = solve_boundary(p, n, SolverOptions(extend_below_t0=args.extend_below_t0))
            secs = time.perf_counter() - start
            res = tab.meta["max_residual"]
            factor = prev[1] / res if prev else float("nan")
            change = float("nan")
            if prev:
                # away from t=0, where A is steep for H > 1/2 and the coarse
                # table's first cell is too wide to interpolate
                pts = np.linspace(max(tab.grid[0], prev[0].grid[0], 0.01), 0.999, 500)
                change = float(np.max(np.abs(boundary_at(tab, pts) - boundary_at(prev[0], pts))))
            ok = all(check_table(tab).values())
            rows.append([h, n, res, factor, change, ok, round(secs, 2)])
            print(f"H={h} n={n:5d} residual={res:.3e} factor={factor:5.2f} "
                  f"max|dA|[t>=0.01]={change:.2e} checks={'ok' if ok else 'FAILED'} {secs:6.1f} s")
            prev = (tab, res)

    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["hurst", "n_grid", "max_residual", "factor", "max_change_t_ge_0.01", "checks_ok",
                    "seconds"])
        w.writerows(rows)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
