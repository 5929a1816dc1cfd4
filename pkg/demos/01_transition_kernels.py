"""Walk through the machine chain kernels.

The machine flips between free (0) and busy (1).  Everything the policy
layer needs comes from two objects: the transition matrix P(t) and the
sampled weights G_ij(u, tau), the probability mass of the first query
landing in state j before a wait tau expires.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from mm_revenue import NEVER, MachineParams, WaitDecision, sampled_transition_weight, transition_matrix

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

machine = MachineParams(alpha=0.2, beta=0.5)
print(f"machine: alpha={machine.alpha}, beta={machine.beta}")
print(f"stationary masses: free={machine.pi0:.4f}, busy={machine.pi1:.4f}")

print("\nP(t) relaxes from the identity to the stationary rows:")
for t in (0.0, 0.5, 2.0, 10.0):
    p = transition_matrix(machine, t).entries
    print(f"  t={t:4.1f}:  P(free->free)={p[0, 0]:.4f}  P(busy->free)={p[1, 0]:.4f}")

ts = np.linspace(0, 12, 300)
fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
ax1.plot(ts, [transition_matrix(machine, t).entries[0, 0] for t in ts], label="free -> free")
ax1.plot(ts, [transition_matrix(machine, t).entries[1, 0] for t in ts], label="busy -> free")
ax1.axhline(machine.pi0, color="gray", linestyle=":", label="stationary free mass")
ax1.set_xlabel("elapsed time")
ax1.set_ylabel("probability")
ax1.set_title("transition probabilities")
ax1.legend()

# sampled weights: how much first-sample mass lands in state j before tau,
# starting from a busy estimate of age u = 1
mu = 0.5
taus = np.linspace(0, 15, 200)
for j, label in ((0, "sample sees free"), (1, "sample sees busy")):
    ws = [sampled_transition_weight(machine, mu, 1, j, 1.0, WaitDecision(t)) for t in taus]
    ax2.plot(taus, ws, label=label)
    ax2.axhline(
        sampled_transition_weight(machine, mu, 1, j, 1.0, NEVER), linestyle=":", color="gray"
    )
ax2.set_xlabel("wait cutoff tau")
ax2.set_ylabel("weight")
ax2.set_title(f"first-sample weights (query rate mu={mu})")
ax2.legend()

fig.tight_layout()
fig.savefig(OUT / "transition_kernels.svg")
print(f"\nwrote {OUT / 'transition_kernels.svg'}")

total = sum(sampled_transition_weight(machine, mu, 1, j, 1.0, NEVER) for j in (0, 1))
print(f"never-cutoff weights sum to {total:.12f} (a full probability density)")
