"""Reproduce the headline comparison: optimal waits beat the benchmarks.

Sweeps the query rate mu for two machines (one mostly free, one mostly
busy) and plots simulated revenue per job for all four policies against
the analytical optimum curve.  Small arrival counts keep this quick; the
acceptance suite runs the full-size version.
"""

from pathlib import Path

from mm_revenue import ExperimentSpec, MachineParams, SystemParams, run_sweep

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

for alpha, beta in ((0.2, 0.5), (0.5, 0.3)):
    spec = ExperimentSpec(
        base=SystemParams(machine=MachineParams(alpha, beta), mu=0.5, lam=0.3, r_s=2.0, c_d=3.0),
        sweep_variable="mu",
        sweep_grid=tuple(round(0.1 * k, 1) for k in range(1, 11)),
        policies=("opt_wait", "rl", "map_rl", "map_wait"),
        arrivals_per_point=20_000,
        seed=1,
    )
    out = OUT / f"revenue_vs_mu_a{alpha}_b{beta}.csv"
    rows = run_sweep(spec, out)
    print(f"alpha={alpha}, beta={beta}: wrote {len(rows)} rows to {out}")
    print(f"  chart: {out.with_suffix('.svg')}")
    at_half = {r["policy"]: r["revenue_per_job"] for r in rows if r["value"] == 0.5}
    ranked = sorted(at_half.items(), key=lambda kv: -kv[1])
    print("  revenue per job at mu=0.5: " + ", ".join(f"{p}={v:.3f}" for p, v in ranked))
