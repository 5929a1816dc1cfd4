"""Transition kernels of the two-state machine chain.

The machine alternates between free (state 0) and busy (state 1): free to
busy at rate ``alpha`` (internal work arriving), busy to free at rate
``beta`` (service completing).  Everything downstream consumes either the
transition matrix P(t) of this chain or its exponentially sampled weights

    G_ij(u, tau) = E[ P_ij(u + Y) 1{Y <= tau} ],   Y ~ Exp(mu),

which is the probability mass of landing in state j at the first sample,
given the last known state was i at age u and the sampler is cut off at tau.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np

__all__ = [
    "MachineParams",
    "TransitionMatrix",
    "WaitDecision",
    "NEVER",
    "SUBMIT_NOW",
    "transition_matrix",
    "sampled_transition_weight",
]


@dataclass(frozen=True)
class MachineParams:
    """Switching rates of the machine: ``alpha`` free->busy, ``beta`` busy->free."""

    alpha: float
    beta: float

    def __post_init__(self):
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be a positive finite rate, got {v!r}")

    @cached_property
    def rho(self) -> float:
        """Relaxation rate alpha + beta of the chain."""
        return self.alpha + self.beta

    @cached_property
    def pi0(self) -> float:
        """Stationary probability of the free state."""
        return self.beta / self.rho

    @cached_property
    def pi1(self) -> float:
        """Stationary probability of the busy state."""
        return self.alpha / self.rho


@dataclass(frozen=True)
class WaitDecision:
    """How long to hold a job before submitting it.

    ``duration`` is a nonnegative finite wait in time units; ``None`` encodes
    the never-submit branch: hold the job until the next sample arrives and
    decide afresh at age zero.
    """

    duration: Optional[float] = None

    def __post_init__(self):
        d = self.duration
        if d is not None and not (math.isfinite(d) and d >= 0.0):
            raise ValueError(f"finite wait must be nonnegative and finite, got {d!r}")

    @property
    def is_never(self) -> bool:
        return self.duration is None

    def __repr__(self):
        if self.duration is None:
            return "WaitDecision(never)"
        return f"WaitDecision({self.duration!r})"


NEVER = WaitDecision(None)
SUBMIT_NOW = WaitDecision(0.0)


@dataclass(frozen=True)
class TransitionMatrix:
    """P(t) of the machine chain; ``entries[i, j] = P(X(t) = j | X(0) = i)``."""

    entries: np.ndarray
    t: float


def transition_matrix(params: MachineParams, t: float) -> TransitionMatrix:
    """Closed-form transition probabilities after an elapsed time ``t``.

    P00 = pi0 + pi1 e^{-rho t}, P01 = pi1 (1 - e^{-rho t}), and symmetrically
    for the busy row.  ``t = inf`` yields the stationary matrix.
    """
    if t < 0:
        raise ValueError(f"elapsed time must be nonnegative, got {t!r}")
    pi0, pi1 = params.pi0, params.pi1
    e = math.exp(-params.rho * t)
    # convex mix of identity and stationary rows: algebraically identical to
    # pi0 + pi1 e etc., but cannot leave [0, 1] by a rounding ulp
    w = 1.0 - e
    entries = np.array(
        [
            [e + pi0 * w, pi1 * w],
            [pi0 * w, e + pi1 * w],
        ]
    )
    return TransitionMatrix(entries=entries, t=t)


def sampled_transition_weight(
    params: MachineParams,
    mu: float,
    i: int,
    j: int,
    u: float,
    tau: WaitDecision,
) -> float:
    """Weight G_ij(u, tau) of the first sample landing in state j before tau.

    Closed form of the integral of mu e^{-mu y} P_ij(u + y) over [0, tau],
    using the two-exponential form of P.  The never branch integrates over
    all of [0, inf).
    """
    if mu <= 0:
        raise ValueError(f"query rate must be positive, got {mu!r}")
    if u < 0:
        raise ValueError(f"age must be nonnegative, got {u!r}")
    rho = params.rho
    pi_j = params.pi0 if j == 0 else params.pi1
    sigma = (1.0 if i == j else 0.0) - pi_j
    transient = sigma * math.exp(-rho * u) * mu / (rho + mu)
    if tau.is_never:
        return pi_j + transient
    d = tau.duration
    return pi_j * (1.0 - math.exp(-mu * d)) + transient * (1.0 - math.exp(-(rho + mu) * d))
