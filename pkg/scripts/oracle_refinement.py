"""Reduced two-regime model: numeric slopes against the exact ones under refinement."""

import time

from _common import write_table

from rsharvest.closed_form import closed_form_coefficients, oracle_error, reduced_numeric_config
from rsharvest.setups import REDUCED_EXAMPLE
from rsharvest.solver import solve_flexible


def main():
    exact = closed_form_coefficients(REDUCED_EXAMPLE)
    print(f"exact slopes C0 = {exact.C0:.12f}, C1 = {exact.C1:.12f}")
    rows = []
    for N in (101, 201, 401, 801):
        problem, grid = reduced_numeric_config(REDUCED_EXAMPLE, N=N)
        t0 = time.perf_counter()
        sol = solve_flexible(problem, grid)
        err = oracle_error(sol.phi, sol.x, exact)
        wall = time.perf_counter() - t0
        print(f"N={N:4d}  rel err {err:.3e}  residual {sol.residual:.1e}  {wall:.1f}s")
        rows.append((N, err, sol.residual, wall))
    write_table("oracle_refinement.csv", ["N", "rel_err", "residual", "wall_s"], rows)


if __name__ == "__main__":
    main()
