"""Solve for the optimal waiting policy and look at its two shapes.

The solver linearizes the revenue-per-job ratio with a holding cost theta
and bisects J(theta) to its root theta*, which equals the optimal revenue
per job.  Depending on the sign of the coefficient A at the root, the
policy is either a threshold rule (wait out (Gamma - age)+ on a busy
estimate, submit free estimates instantly) or a switching rule (hold busy
estimates for the next sample; submit free estimates only up to age kappa).
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from mm_revenue import MachineParams, SystemParams, optimal_wait, solve_theta_star

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

cases = {
    "switching (lean rewards)": SystemParams(
        machine=MachineParams(0.2, 0.5), mu=0.5, lam=0.3, r_s=2.0, c_d=3.0
    ),
    "threshold (rich rewards)": SystemParams(
        machine=MachineParams(0.2, 0.5), mu=0.5, lam=0.3, r_s=5.0, c_d=3.0
    ),
}

fig, axes = plt.subplots(1, 2, figsize=(10, 4), sharey=True)
for ax, (label, sys_p) in zip(axes, cases.items()):
    theta_star, coeffs = solve_theta_star(sys_p)
    regime = "threshold" if coeffs.threshold_regime else "switching"
    print(f"{label}: theta* = {theta_star:.6f}, regime = {regime}")
    print(f"  V1 = {coeffs.v1:.4f}, A = {coeffs.a_coef:+.4f}, B = {coeffs.b_coef:.4f}")
    if coeffs.gamma is not None:
        print(f"  threshold age Gamma = {coeffs.gamma:.4f}")
    else:
        print(f"  switching age kappa = {coeffs.kappa:.4f}")

    us = np.linspace(0, 8, 400)
    for i, (name, style) in enumerate((("free estimate", "-"), ("busy estimate", "--"))):
        waits = []
        for u in us:
            w = optimal_wait(coeffs, i, float(u))
            waits.append(np.nan if w.is_never else w.duration)
        ax.plot(us, waits, style, label=name)
    ax.set_title(f"{label}\n(gaps mean: hold for the next sample)")
    ax.set_xlabel("age of estimate u")
    ax.legend()
axes[0].set_ylabel("optimal wait")

fig.tight_layout()
fig.savefig(OUT / "optimal_policy_shapes.svg")
print(f"\nwrote {OUT / 'optimal_policy_shapes.svg'}")
