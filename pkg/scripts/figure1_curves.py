"""Boundary curves A(t) for several Hurst indices at sigma = 1, as CSV.

Writes one ``boundary_H<h>.csv`` (columns t, A) per Hurst index plus a
``boundary_curves.csv`` that lines all curves up on a common t-grid, ready
for plotting. For H < 1/2 the table is extended below t0 with
``--extend-below-t0`` (formal solution there).

    python3 scripts/figure1_curves.py --out results/figure1
"""

import argparse
import csv
import time
from pathlib import Path

import numpy as np

from fbm_seqtest import ModelParams, SolverOptions, boundary_at, check_table, solve_boundary
from fbm_seqtest.artifacts import save_boundary


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--hurst", type=float, nargs="+", default=[0.3, 0.5, 0.7])
    ap.add_argument("--sigma", type=float, default=1.0)
    ap.add_argument("--n-grid", type=int, default=500)
    ap.add_argument("--extend-below-t0", action="store_true")
    ap.add_argument("--points", type=int, default=201, help="size of the common t-grid")
    ap.add_argument("--out", type=Path, default=Path("results/figure1"))
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    tables = {}
    for h in args.hurst:
        start = time.perf_counter()
        opts = SolverOptions(extend_below_t0=args.extend_below_t0)
        tab = solve_boundary(ModelParams(0.0, args.sigma, h), args.n_grid, opts)
        tables[h] = tab
        save_boundary(tab, args.out / f"boundary_H{h}.csv", "csv")
        save_boundary(tab, args.out / f"boundary_H{h}.json")
        ok = all(check_table(tab).values())
        print(f"H={h}: t0={tab.t0:.4f} A(t_min)={tab.a_values[0]:.4f} "
              f"residual={tab.meta['max_residual']:.2e} checks={'ok' if ok else 'FAILED'} "
              f"({time.perf_counter() - start:.1f} s)")

    t = np.linspace(0.0, 1.0, args.points)
    with open(args.out / "boundary_curves.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"A_H{h}" for h in args.hurst])
        for ti in t:
            row = [repr(float(ti))]
            for h in args.hurst:
                tab = tables[h]
                row.append(repr(boundary_at(tab, ti)) if ti >= tab.grid[0] else "")
            w.writerow(row)
    print(f"wrote {args.out}/boundary_curves.csv")


if __name__ == "__main__":
    main()
