"""Flexible vs inflexible values and the VOI in regime 0 across the penalty P."""

import argparse

import numpy as np
from _common import write_table

from rsharvest.setups import CI_GRID, FULL_GRID, ci_problem, full_problem
from rsharvest.solver import solve_flexible, solve_inflexible


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--full", action="store_true", help="41 regimes at N = 401 (slow)")
    ap.add_argument("--P", type=float, nargs="+", default=[5.0, 50.0, 200.0, 500.0])
    args = ap.parse_args()
    make, grid = (full_problem, FULL_GRID) if args.full else (ci_problem, CI_GRID)

    curves, warm_f, warm_i = [], None, None
    for P in args.P:
        problem = make(P=P)
        f = solve_flexible(problem, grid, psi0=warm_f)
        i = solve_inflexible(problem, grid, psi0=warm_i if warm_i is not None else
                             np.stack([f.psi[0], f.psi[0], f.psi[1], f.psi[1]]))
        warm_f, warm_i = f.psi, i.psi
        v = i.phi - f.phi
        dips = np.diff(v[0])
        print(f"P={P:6g}  min V {v.min():+.2e}  max V(0,.) {v[0].max():.4f}  "
              f"min step in x {dips.min():+.2e}  residuals {f.residual:.1e}/{i.residual:.1e}")
        curves.append(v[0])
    x = f.x
    write_table("voi_sweep.csv", ["x"] + [f"V[P={P:g}]" for P in args.P], np.column_stack([x, *curves]))


if __name__ == "__main__":
    main()
