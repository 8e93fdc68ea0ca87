"""Monte Carlo value of the optimal policy and two heuristics against Phi."""

import argparse

import numpy as np
from _common import write_table

from rsharvest.setups import CI_GRID, ci_problem
from rsharvest.simulator import (
    ALWAYS_HARVEST_HIGH,
    NEVER_HARVEST_LOW,
    SimConfig,
    estimate_performance,
    policy_from_solution,
)
from rsharvest.solver import solve_flexible


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--paths", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    sol = solve_flexible(ci_problem(), CI_GRID)
    policies = {"optimal": policy_from_solution(sol), "never/low": NEVER_HARVEST_LOW,
                "always/high": ALWAYS_HARVEST_HIGH}
    rows = []
    for x0 in (0.1, 0.25, 0.5, 0.75, 0.9):
        phi = float(np.interp(x0, sol.x, sol.phi[0]))
        line = [x0, phi]
        text = f"x0={x0:<5g} Phi {phi:.4f}"
        for name, pol in policies.items():
            est = estimate_performance(sol.problem, pol, SimConfig(x0=x0, n_paths=args.paths, seed=args.seed))
            line += [est.mean, est.se]
            text += f"  {name} {est.mean:.4f}+-{est.se:.4f}"
        print(text)
        rows.append(line)
    header = ["x0", "Phi"] + [f"{n}_{s}" for n in policies for s in ("mean", "se")]
    write_table("mc_validation.csv", header, rows)


if __name__ == "__main__":
    main()
