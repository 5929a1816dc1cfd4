"""Cross-check the closed forms against the event simulator.

Three spot checks, the same ones the validate command runs at full size:
the simulated revenue under the solved policy lands on theta*; the age of
the estimate at job-acceptance epochs is Exp(lambda + mu); and the split
of acceptances between free and busy estimates matches the absorption
probabilities of the post-submission chain.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from mm_revenue import (
    MachineParams,
    SimConfig,
    SystemParams,
    absorption_probabilities,
    estimate_age_at_acceptance,
    run,
    solve_theta_star,
)

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

sys_p = SystemParams(machine=MachineParams(0.2, 0.5), mu=0.5, lam=0.3, r_s=2.0, c_d=3.0)
theta_star, coeffs = solve_theta_star(sys_p)
cfg = SimConfig(sys=sys_p, policy="opt_wait", coeffs=coeffs, max_arrivals=100_000, seed=2)

stats = run(cfg)
print(f"theta* = {theta_star:.5f}")
print(
    f"simulated revenue per job = {stats.revenue_per_job:.5f} "
    f"+/- {stats.revenue_stderr:.5f}  ({stats.total_arrivals} arrivals)"
)
print(f"counters: S={stats.submitted_ok} D={stats.discarded_penalty} "
      f"lost={stats.lost_while_holding} rejected={stats.rejected}")

sample = estimate_age_at_acceptance(cfg)
rate = sys_p.lam + sys_p.mu
print(f"\nacceptance ages: n={sample.ages.size}, mean={sample.ages.mean():.4f} "
      f"(theory {1 / rate:.4f})")

p = absorption_probabilities(sys_p)
freq1 = (sample.estimates == 1).mean()
print(f"acceptances at a busy estimate: {freq1:.4f} (theory p1 = {p.p1:.4f})")

fig, ax = plt.subplots(figsize=(6, 4))
xs = np.linspace(0, sample.ages.max(), 200)
ax.hist(sample.ages, bins=80, density=True, alpha=0.6, label="simulated ages")
ax.plot(xs, rate * np.exp(-rate * xs), "k--", label=f"Exp({rate:.1f}) density")
ax.set_xlabel("age of estimate at acceptance")
ax.set_ylabel("density")
ax.legend()
fig.tight_layout()
fig.savefig(OUT / "acceptance_age_distribution.svg")
print(f"\nwrote {OUT / 'acceptance_age_distribution.svg'}")
