"""Batch command-line front end.

    rsharvest init --out run.cfg
    rsharvest solve --config run.cfg --out results/
    rsharvest voi | simulate | estimate-chain | oracle-check | sweep ...

Exit status: 0 success, 1 a check reported failure (oracle-check), 2 invalid
input, 3 solver divergence. Diagnostics go to standard error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import platform
import sys
import time

import numpy as np

from . import __version__
from . import config as cfgmod
from .closed_form import closed_form_coefficients, oracle_error, reduced_numeric_config
from .config import ConfigError, RunConfig
from .model import ControlProblem, ModelError
from .regimes import entropy, estimate_chain, read_discharge_file, write_chain
from .simulator import (
    ALWAYS_HARVEST_HIGH,
    NEVER_HARVEST_LOW,
    estimate_performance,
    policy_from_solution,
    simulate_path,
    write_event_log,
)
from .solver import DivergenceError, extract_policy, solve_flexible, solve_inflexible, voi

log = logging.getLogger("rsharvest")

EXIT_OK, EXIT_CHECK_FAILED, EXIT_INVALID, EXIT_DIVERGED = 0, 1, 2, 3
ORACLE_TOL = 0.02


class Run:
    """Output directory, config hash and the manifest being assembled."""

    def __init__(self, cfg: RunConfig, out: str):
        self.cfg = cfg
        self.out = out
        self.hash = cfg.digest()
        self.files = []
        self.results = {}
        os.makedirs(out, exist_ok=True)

    def table(self, name, columns, rows, notes=()):
        """Comma-separated table with '#' header lines naming the config hash."""
        path = os.path.join(self.out, name)
        with open(path, "w") as fh:
            fh.write(f"# config_hash: {self.hash}\n")
            for line in notes:
                fh.write(f"# {line}\n")
            fh.write("# " + ", ".join(columns) + "\n")
            for row in rows:
                fh.write(",".join(_cell(v) for v in row) + "\n")
        self.files.append(name)
        return path

    def manifest(self, wall):
        import numba

        data = {
            "mode": self.cfg.run.mode,
            "config_hash": self.hash,
            "config": self.cfg.to_flat(),
            "seed": self.cfg.run.seed,
            "versions": {
                "rsharvest": __version__,
                "python": platform.python_version(),
                "numpy": np.__version__,
                "numba": numba.__version__,
            },
            "results": self.results,
            "files": self.files,
            "wall_time_s": wall,
            "finished": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        }
        with open(os.path.join(self.out, "manifest.json"), "w") as fh:
            json.dump(data, fh, indent=2, default=_jsonable)
            fh.write("\n")


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def _jsonable(v):
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    return str(v)


# -- shared pieces ------------------------------------------------------------------


def _problem(cfg: RunConfig, **model_overrides) -> ControlProblem:
    chain = cfg.chain.build()
    params = dataclasses.replace(cfg.model, **model_overrides) if model_overrides else cfg.model
    params.check_chain(chain)
    return ControlProblem.build(chain, params, label=cfg.run.mode)


def _solve(kind, problem, cfg, psi0=None):
    fn = solve_flexible if kind == "flexible" else solve_inflexible
    sol = fn(problem, cfg.grid, psi0=psi0)
    if not sol.converged:
        log.warning("%s solve stopped at T=%.4g with residual %.3e (tol %.1e)",
                    kind, sol.t_final, sol.residual, cfg.grid.tol_ss)
    return sol


def _write_solution(run: Run, sol, name):
    pol = extract_policy(sol)
    if sol.kind == "flexible":
        cols = ["i", "x", "Phi", "Psi_lo", "Psi_hi", "zstar", "lamstar"]
    else:
        cols = ["i", "x", "Phi", "Psi_lo_0", "Psi_lo_z", "Psi_hi_0", "Psi_hi_z", "zstar", "lamstar"]
    rows = []
    for i in range(sol.phi.shape[0]):
        for j, xj in enumerate(sol.x):
            rows.append([i, xj, sol.phi[i, j], *sol.psi[:, i, j], pol.zstar[i, j], pol.lamstar[i, j]])
    run.table(name, cols, rows, notes=[f"{sol.kind} solution"])
    run.results[sol.kind] = sol.diagnostics()


def _voi_rows(sol_f, sol_i):
    v = voi(sol_i.phi, sol_f.phi)
    rows = []
    for i in range(v.shape[0]):
        for j, xj in enumerate(sol_f.x):
            rows.append([i, xj, sol_f.phi[i, j], sol_i.phi[i, j], v[i, j]])
    return v, rows


VOI_COLUMNS = ["i", "x", "Phi_F", "Phi_I", "V"]


def _inflexible_start(sol_f):
    """Flexible fields reused as the inflexible initial guess."""
    lo, hi = sol_f.psi
    return np.stack([lo, lo, hi, hi])


# -- modes --------------------------------------------------------------------------


def cmd_solve(run: Run, kind: str):
    cfg = run.cfg
    problem = _problem(cfg)
    sol = _solve(kind, problem, cfg)
    _write_solution(run, sol, f"solution_{kind}.csv")
    return EXIT_OK


def cmd_voi(run: Run):
    problem = _problem(run.cfg)
    sol_f = _solve("flexible", problem, run.cfg)
    sol_i = _solve("inflexible", problem, run.cfg, psi0=_inflexible_start(sol_f))
    _write_solution(run, sol_f, "solution_flexible.csv")
    _write_solution(run, sol_i, "solution_inflexible.csv")
    v, rows = _voi_rows(sol_f, sol_i)
    run.table("voi.csv", VOI_COLUMNS, rows)
    run.results["voi"] = {"min": float(v.min()), "max": float(v.max())}
    return EXIT_OK


def cmd_simulate(run: Run):
    cfg = run.cfg
    problem = _problem(cfg)
    name = cfg.sim.policy
    if name == "never-harvest-low":
        policy = NEVER_HARVEST_LOW
    elif name == "always-harvest-high":
        policy = ALWAYS_HARVEST_HIGH
    else:
        kind = "flexible" if name == "optimal-flexible" else "inflexible"
        sol = _solve(kind, problem, cfg)
        policy = policy_from_solution(sol)
        run.results[kind] = sol.diagnostics()
        phi_ref = float(np.interp(cfg.sim.x0, sol.x, sol.phi[cfg.sim.i0]))
        run.results["phi_at_start"] = phi_ref
    sc = cfg.sim_config()
    t0 = time.perf_counter()
    est = estimate_performance(problem, policy, sc)
    wall = time.perf_counter() - t0
    run.results["estimate"] = est.as_dict() | {"wall_time_s": wall}
    run.table(
        "estimate.csv",
        ["policy", "i0", "x0", "n_paths", "mean", "se", "disutility", "observation", "harvest"],
        [[name, sc.i0, sc.x0, est.n_paths, est.mean, est.se, est.disutility, est.observation, est.harvest]],
        notes=[f"seed {sc.seed}; path k uses seed + k; horizon {sc.horizon(problem.delta)} days"],
    )
    if cfg.sim.event_log:
        path = simulate_path(problem, policy, sc)
        write_event_log(os.path.join(run.out, "events.csv"), path.events)
        run.files.append("events.csv")
    return EXIT_OK


def cmd_estimate_chain(run: Run):
    cfg = run.cfg
    series = read_discharge_file(cfg.estimate.input, dt=cfg.estimate.dt)
    est = estimate_chain(series, cfg.chain.spec)
    H = entropy(est)
    write_chain(os.path.join(run.out, "chain.txt"), est, {"config_hash": run.hash})
    run.files.append("chain.txt")
    n = est.rates.shape[0]
    rows = [[i, j, est.transition[i, j], est.rates[i, j]]
            for i in range(n) for j in range(n) if est.counts[i, j] > 0]
    run.table("transitions.csv", ["i", "j", "p", "w"], rows, notes=[f"entropy_nats: {H!r}"])
    run.table("occupancy.csv", ["i", "Q", "occupancy", "unvisited"],
              [[i, q, est.occupancy[i], int(est.unvisited[i])] for i, q in enumerate(cfg.chain.spec.discharges)])
    run.results["entropy_nats"] = H
    run.results["samples"] = len(series)
    run.results["usable_pairs"] = int(series.pair_mask().sum())
    run.results["unvisited_regimes"] = np.nonzero(est.unvisited)[0].tolist()
    return EXIT_OK


def cmd_oracle_check(run: Run):
    cfg = run.cfg
    p = cfg.reduced_params()
    exact = closed_form_coefficients(p)
    run.results["closed_form"] = {
        "C0": exact.C0, "C1": exact.C1, "pattern_valid": exact.pattern_valid,
        "conditions": exact.conditions,
    }
    if not exact.pattern_valid:
        raise ConfigError("reduced", "harvest-in-regime-0-only pattern is not optimal for these parameters")
    N = int(cfg.reduced.get("N", 401))
    problem, grid = reduced_numeric_config(p, N=N)
    sol = solve_flexible(problem, grid)
    err = oracle_error(sol.phi, sol.x, exact)
    ok = err <= ORACLE_TOL
    run.results["oracle"] = {"N": N, "max_rel_error": err, "tolerance": ORACLE_TOL, "pass": ok,
                             **sol.diagnostics()}
    run.table("oracle.csv", ["N", "C0", "C1", "max_rel_error", "tolerance", "pass"],
              [[N, exact.C0, exact.C1, err, ORACLE_TOL, int(ok)]],
              notes=["relative error of Phi(i, x)/x against C_i on x in [0.05, 0.5]"])
    log.info("oracle-check: max relative error %.3e (%s)", err, "pass" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def cmd_sweep(run: Run):
    cfg = run.cfg
    axis, kind = cfg.sweep.axis, cfg.sweep.kind
    curves = []
    warm_f = warm_i = None
    summary = []
    for value in cfg.sweep.values:
        value = int(value) if axis == "L" else float(value)
        problem = _problem(cfg, **{axis: value})
        tag = f"{axis}_{_cell(value)}"
        entry = {axis: value}
        if kind in ("voi", "flexible"):
            sol_f = _solve("flexible", problem, cfg, psi0=warm_f)
            warm_f = sol_f.psi
            entry["flexible"] = sol_f.diagnostics()
        if kind in ("voi", "inflexible"):
            start = warm_i if warm_i is not None else (_inflexible_start(sol_f) if kind == "voi" else None)
            sol_i = _solve("inflexible", problem, cfg, psi0=start)
            warm_i = sol_i.psi
            entry["inflexible"] = sol_i.diagnostics()
        if kind == "voi":
            v, rows = _voi_rows(sol_f, sol_i)
            run.table(f"voi_{tag}.csv", VOI_COLUMNS, rows)
            curves.append(v[0])
            entry["voi_min"], entry["voi_max"] = float(v.min()), float(v.max())
        else:
            sol = sol_f if kind == "flexible" else sol_i
            _write_solution(run, sol, f"solution_{kind}_{tag}.csv")
            curves.append(sol.phi[0])
        summary.append(entry)
    name = "V" if kind == "voi" else "Phi"
    cols = ["x"] + [f"{name}[{axis}={_cell(v)}]" for v in cfg.sweep.values]
    rows = [[xj, *(c[j] for c in curves)] for j, xj in enumerate(cfg.grid.x)]
    run.table(f"sweep_{axis}_regime0.csv", cols, rows, notes=[f"regime 0 {name} across {axis}"])
    run.results["sweep"] = summary
    return EXIT_OK


# -- entry point --------------------------------------------------------------------


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="run configuration (key = value text or JSON)")
    common.add_argument("--out", metavar="DIR", help="output directory (overrides run.out)")
    common.add_argument("--seed", type=int, metavar="N", help="random seed (overrides run.seed)")
    common.add_argument("--threads", type=int, metavar="N", help="worker threads (overrides run.threads)")
    common.add_argument("--quiet", action="store_true", help="only warnings and errors on stderr")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config field, e.g. --set model.P=200")

    parser = argparse.ArgumentParser(prog="rsharvest", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("init", help="write the default configuration")
    p.add_argument("--out", metavar="PATH", default="-", help="file to write ('-' for stdout)")
    p.add_argument("--json", action="store_true", help="emit the JSON mirror")
    p = sub.add_parser("solve", parents=[common], help="solve one optimality system")
    p.add_argument("--kind", choices=("flexible", "inflexible"), default=None)
    sub.add_parser("voi", parents=[common], help="flexible and inflexible solves plus the value of information")
    sub.add_parser("simulate", parents=[common], help="Monte Carlo estimate of a policy")
    sub.add_parser("estimate-chain", parents=[common], help="estimate the regime chain from a discharge file")
    sub.add_parser("oracle-check", parents=[common], help="compare the solver with the reduced exact solution")
    sub.add_parser("sweep", parents=[common], help="repeat a solve across values of one model parameter")
    return parser


MODE_OF = {"voi": "voi", "simulate": "simulate", "estimate-chain": "estimate-chain",
           "oracle-check": "oracle-check", "sweep": "sweep"}


def _load_config(args) -> RunConfig:
    cfg = cfgmod.load(args.config) if args.config else cfgmod.default_config()
    pairs = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError("--set", f"expected KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        pairs[k.strip()] = v.strip()
    if args.command == "solve":
        kind = args.kind or ("inflexible" if cfg.run.mode == "solve-inflexible" else "flexible")
        pairs["run.mode"] = f"solve-{kind}"
    else:
        pairs["run.mode"] = MODE_OF[args.command]
    if args.out is not None:
        pairs["run.out"] = args.out
    if args.seed is not None:
        pairs["run.seed"] = str(args.seed)
    if args.threads is not None:
        pairs["run.threads"] = str(args.threads)
    return cfgmod.parse_pairs(pairs, cfg)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if getattr(args, "quiet", False) else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    if args.command == "init":
        cfg = cfgmod.default_config()
        text = cfgmod.to_json(cfg) + "\n" if args.json else cfgmod.dumps(cfg)
        if args.out == "-":
            sys.stdout.write(text)
        else:
            with open(args.out, "w") as fh:
                fh.write(text)
        return EXIT_OK

    t0 = time.perf_counter()
    try:
        cfg = _load_config(args)
        _set_threads(cfg.run.threads)
        run = Run(cfg, cfg.run.out)
        mode = cfg.run.mode
        if mode.startswith("solve-"):
            status = cmd_solve(run, mode.split("-", 1)[1])
        elif mode == "voi":
            status = cmd_voi(run)
        elif mode == "simulate":
            status = cmd_simulate(run)
        elif mode == "estimate-chain":
            status = cmd_estimate_chain(run)
        elif mode == "oracle-check":
            status = cmd_oracle_check(run)
        else:
            status = cmd_sweep(run)
    except DivergenceError as exc:
        log.error("solver diverged: %s", exc)
        return EXIT_DIVERGED
    except (ConfigError, ModelError, ValueError, OSError) as exc:
        log.error("invalid input: %s", exc)
        return EXIT_INVALID
    run.results["exit_status"] = status
    run.manifest(time.perf_counter() - t0)
    return status


def _set_threads(n):
    # kernels are serial; extra threads only reach numba's own parallel pool
    if n > 1:
        import numba

        numba.config.THREADING_LAYER = "workqueue"
        numba.set_num_threads(min(int(n), numba.config.NUMBA_NUM_THREADS))


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
