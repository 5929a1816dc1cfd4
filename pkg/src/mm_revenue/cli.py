"""Command-line front end: solve, simulate, sweep, validate."""

from __future__ import annotations

import argparse
import json
import sys as _sys
from typing import Optional

from .ctmc import MachineParams
from .policies import POLICIES
from .sim import SimConfig, run
from .solver import (
    ConvergenceError,
    SystemParams,
    absorption_probabilities,
    j_theta,
    optimal_wait,
    solve_theta_star,
)
from .sweep import ExperimentSpec, SweepError, load_experiment_spec, run_sweep, worker_count
from .validation import run_validation


def _add_system_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--alpha", type=float, required=True, help="machine free->busy rate")
    p.add_argument("--beta", type=float, required=True, help="machine busy->free rate")
    p.add_argument("--mu", type=float, required=True, help="query rate")
    p.add_argument("--lambda", dest="lam", type=float, required=True, help="job arrival rate")
    p.add_argument("--rs", type=float, required=True, help="revenue per successful job")
    p.add_argument("--cd", type=float, required=True, help="penalty per discarded job")


def _system_from(args) -> SystemParams:
    return SystemParams(
        machine=MachineParams(args.alpha, args.beta),
        mu=args.mu,
        lam=args.lam,
        r_s=args.rs,
        c_d=args.cd,
    )


def _wait_repr(w) -> object:
    return "never" if w.is_never else w.duration


def cmd_solve(args) -> int:
    sys_p = _system_from(args)
    try:
        theta_star, coeffs = solve_theta_star(sys_p, tol=args.tol)
    except ConvergenceError as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return 1
    probs = absorption_probabilities(sys_p)
    residual = j_theta(sys_p, theta_star)
    regime = "threshold" if coeffs.threshold_regime else "switching"
    u_grid = [round(0.5 * k, 6) for k in range(11)]
    table = [
        {
            "u": u,
            "tau_0": _wait_repr(optimal_wait(coeffs, 0, u)),
            "tau_1": _wait_repr(optimal_wait(coeffs, 1, u)),
        }
        for u in u_grid
    ]
    report = {
        "theta_star": theta_star,
        "j_residual": residual,
        "v1": coeffs.v1,
        "a": coeffs.a_coef,
        "b": coeffs.b_coef,
        "gamma": coeffs.gamma,
        "kappa": coeffs.kappa,
        "regime": regime,
        "p0": probs.p0,
        "p1": probs.p1,
        "tau_10": _wait_repr(coeffs.tau_10),
        "wait_table": table,
    }
    if args.json:
        print(json.dumps(report, indent=2))
        return 0
    print(f"theta* (revenue per job) = {theta_star:.9f}   |J| = {abs(residual):.2e}")
    print(f"regime: {regime}   V1 = {coeffs.v1:.6f}   A = {coeffs.a_coef:.6f}   B = {coeffs.b_coef:.6f}")
    if coeffs.gamma is not None:
        print(f"threshold age Gamma = {coeffs.gamma:.6f}")
    else:
        print(f"switching age kappa = {coeffs.kappa:.6f}")
    print(f"acceptance probabilities: p0 = {probs.p0:.6f}, p1 = {probs.p1:.6f}")
    print("optimal waits by age:")
    print(f"  {'u':>6}  {'tau*(free, u)':>14}  {'tau*(busy, u)':>14}")
    for entry in table:
        t0, t1 = entry["tau_0"], entry["tau_1"]
        t0s = f"{t0:.4f}" if isinstance(t0, float) else t0
        t1s = f"{t1:.4f}" if isinstance(t1, float) else t1
        print(f"  {entry['u']:>6}  {t0s:>14}  {t1s:>14}")
    return 0


def cmd_simulate(args) -> int:
    sys_p = _system_from(args)
    if args.arrivals is None and args.max_time is None:
        args.arrivals = 100_000
    coeffs = None
    theta_star = None
    if args.policy == "opt_wait":
        theta_star, coeffs = solve_theta_star(sys_p, tol=args.tol)
    cfg = SimConfig(
        sys=sys_p,
        policy=args.policy,
        coeffs=coeffs,
        max_arrivals=args.arrivals,
        max_time=args.max_time,
        seed=args.seed,
    )
    stats = run(cfg)
    report = {
        "policy": args.policy,
        "revenue_per_job": stats.revenue_per_job,
        "stderr": stats.revenue_stderr,
        "theta_star": theta_star,
        "S": stats.submitted_ok,
        "D": stats.discarded_penalty,
        "N": stats.total_arrivals,
        "rejected": stats.rejected,
        "lost_while_holding": stats.lost_while_holding,
        "elapsed": stats.elapsed,
        "busy_fraction": stats.busy_fraction,
        "seed": args.seed,
    }
    if args.json:
        print(json.dumps(report, indent=2))
    else:
        print(f"policy {args.policy}: revenue per job = {stats.revenue_per_job:.6f} "
              f"+/- {stats.revenue_stderr:.6f}")
        if theta_star is not None:
            print(f"analytical optimum theta* = {theta_star:.6f}")
        print(f"S = {stats.submitted_ok}, D = {stats.discarded_penalty}, "
              f"N = {stats.total_arrivals}, rejected = {stats.rejected}, "
              f"lost while holding = {stats.lost_while_holding}")
        print(f"elapsed = {stats.elapsed:.2f}, busy fraction = {stats.busy_fraction:.4f}")
    return 0


def cmd_sweep(args) -> int:
    overrides = {
        "alpha": args.alpha,
        "beta": args.beta,
        "mu": args.mu,
        "lambda": args.lam,
        "r_s": args.rs,
        "c_d": args.cd,
        "sweep_variable": args.sweep_var,
        "sweep_grid": [float(v) for v in args.grid.split(",")] if args.grid else None,
        "policies": args.policies.split(",") if args.policies else None,
        "arrivals_per_point": args.arrivals,
        "seed": args.seed,
    }
    try:
        if args.config:
            spec = load_experiment_spec(args.config, overrides)
        else:
            missing = [k for k in ("alpha", "beta", "mu", "lambda", "r_s", "c_d") if overrides[k] is None]
            if missing or overrides["sweep_variable"] is None or overrides["sweep_grid"] is None:
                print("error: without --config, all system flags plus --sweep-var and --grid "
                      "are required", file=_sys.stderr)
                return 2
            spec = ExperimentSpec(
                base=SystemParams(
                    machine=MachineParams(overrides["alpha"], overrides["beta"]),
                    mu=overrides["mu"],
                    lam=overrides["lambda"],
                    r_s=overrides["r_s"],
                    c_d=overrides["c_d"],
                ),
                sweep_variable=overrides["sweep_variable"],
                sweep_grid=tuple(overrides["sweep_grid"]),
                policies=tuple(overrides["policies"] or POLICIES),
                arrivals_per_point=overrides["arrivals_per_point"] or 100_000,
                seed=overrides["seed"] or 0,
            )
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return 2
    try:
        rows = run_sweep(spec, args.out, max_workers=worker_count())
    except SweepError as exc:
        print(f"error: {exc} (partial rows flushed to {args.out})", file=_sys.stderr)
        return 1
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def cmd_validate(args) -> int:
    results = run_validation(
        seed=args.seed,
        arrivals=args.arrivals,
        progress=(lambda name: print(f"... {name}", file=_sys.stderr)) if args.verbose else None,
    )
    ok = True
    for res in results:
        mark = "PASS" if res.passed else "FAIL"
        ok &= res.passed
        print(f"{mark}  {res.name}: {res.detail}")
    print(f"{sum(r.passed for r in results)}/{len(results)} checks passed")
    return 0 if ok else 1


def main(argv: Optional[list] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="mm-revenue",
        description="Optimal job-submission policies for a two-state machine, "
        "with a validating event simulator.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="solve for theta* and the optimal policy")
    _add_system_args(p_solve)
    p_solve.add_argument("--tol", type=float, default=1e-9, help="tolerance on |J(theta*)|")
    p_solve.add_argument("--json", action="store_true", help="machine-readable output")
    p_solve.set_defaults(func=cmd_solve)

    p_sim = sub.add_parser("simulate", help="run one policy in the event simulator")
    _add_system_args(p_sim)
    p_sim.add_argument("--policy", choices=POLICIES, default="opt_wait")
    p_sim.add_argument("--arrivals", type=int, default=None, help="stop after this many arrivals")
    p_sim.add_argument("--max-time", type=float, default=None, help="stop at this simulated time")
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--tol", type=float, default=1e-9)
    p_sim.add_argument("--json", action="store_true")
    p_sim.set_defaults(func=cmd_simulate)

    p_sweep = sub.add_parser("sweep", help="sweep a parameter and compare policies")
    p_sweep.add_argument("--config", help="TOML or JSON experiment file")
    p_sweep.add_argument("--alpha", type=float)
    p_sweep.add_argument("--beta", type=float)
    p_sweep.add_argument("--mu", type=float)
    p_sweep.add_argument("--lambda", dest="lam", type=float)
    p_sweep.add_argument("--rs", type=float)
    p_sweep.add_argument("--cd", type=float)
    p_sweep.add_argument("--sweep-var", choices=("mu", "lambda", "r_s"))
    p_sweep.add_argument("--grid", help="comma-separated grid values")
    p_sweep.add_argument("--policies", help="comma-separated policy identifiers")
    p_sweep.add_argument("--arrivals", type=int, help="arrivals per grid point")
    p_sweep.add_argument("--seed", type=int)
    p_sweep.add_argument("--out", required=True, help="output CSV path (SVG lands next to it)")
    p_sweep.set_defaults(func=cmd_sweep)

    p_val = sub.add_parser("validate", help="run the numerical cross-check suite")
    p_val.add_argument("--seed", type=int, default=0)
    p_val.add_argument("--arrivals", type=int, default=500_000,
                       help="arrivals for the simulation-backed checks")
    p_val.add_argument("--verbose", action="store_true", help="announce checks as they run")
    p_val.set_defaults(func=cmd_validate)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return 2


if __name__ == "__main__":
    _sys.exit(main())
