"""The four job-submission rules behind one ``decide`` interface.

Identifiers (stable strings, used by the CLI and config files):

* ``opt_wait``  -- the solved optimal policy (requires coefficients);
* ``rl``        -- submit immediately iff the estimate says free, else discard;
* ``map_rl``    -- submit immediately iff the age-corrected most-likely state
  is free, else discard;
* ``map_wait``  -- hold the job until the most-likely state turns free.

A decision is either a :class:`~mm_revenue.ctmc.WaitDecision` (wait, possibly
forever pending the next sample) or the ``REJECT`` sentinel, meaning the job
is discarded on the spot and the buffer stays empty.  Rejection is distinct
from a never-wait: a held job survives to the next sample, a rejected one is
gone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

from .ctmc import NEVER, SUBMIT_NOW, MachineParams, WaitDecision
from .solver import PolicyCoefficients, SystemParams, optimal_wait

__all__ = [
    "POLICIES",
    "EstimateState",
    "Reject",
    "REJECT",
    "map_estimate",
    "make_decider",
    "decide",
]

POLICIES = ("opt_wait", "rl", "map_rl", "map_wait")


@dataclass(frozen=True)
class EstimateState:
    """Last sampled machine state and the time elapsed since it was fresh."""

    x_hat: int
    age: float

    def __post_init__(self):
        if self.x_hat not in (0, 1):
            raise ValueError(f"estimate must be 0 or 1, got {self.x_hat!r}")
        if self.age < 0:
            raise ValueError(f"age must be nonnegative, got {self.age!r}")


class Reject:
    """Immediate discard of an arriving job (benchmark policies only)."""

    def __repr__(self):
        return "REJECT"


REJECT = Reject()

Decision = Union[WaitDecision, Reject]


def map_estimate(params: MachineParams, x_hat: int, u: float) -> int:
    """Most likely machine state given the last known state and its age.

    Ties at probability one half go to free (submit), a fixed rule for
    determinism on a measure-zero event.
    """
    if x_hat not in (0, 1):
        raise ValueError(f"estimate must be 0 or 1, got {x_hat!r}")
    if u < 0:
        raise ValueError(f"age must be nonnegative, got {u!r}")
    decay = math.exp(-params.rho * u)
    if x_hat == 0:
        p_free = params.pi0 + params.pi1 * decay
    else:
        p_free = params.pi0 * (1.0 - decay)
    return 0 if p_free >= 0.5 else 1


def make_decider(
    policy: str,
    sys: SystemParams,
    coeffs: Optional[PolicyCoefficients] = None,
) -> Callable[[int, float], Decision]:
    """Bind a policy identifier to its parameters.

    The returned callable maps (x_hat, age) to a decision and is pure, so a
    simulation driven by it replays deterministically.
    """
    m = sys.machine

    if policy == "opt_wait":
        if coeffs is None:
            raise ValueError("opt_wait requires solved PolicyCoefficients")

        def decider(x_hat: int, age: float) -> Decision:
            return optimal_wait(coeffs, x_hat, age)

    elif policy == "rl":

        def decider(x_hat: int, age: float) -> Decision:
            return SUBMIT_NOW if x_hat == 0 else REJECT

    elif policy == "map_rl":

        def decider(x_hat: int, age: float) -> Decision:
            return SUBMIT_NOW if map_estimate(m, x_hat, age) == 0 else REJECT

    elif policy == "map_wait":
        alpha, beta, rho = m.alpha, m.beta, m.rho
        # boundary ages where the most-likely state flips
        free_limit = None if beta >= alpha else math.log(2 * alpha / (alpha - beta)) / rho
        busy_limit = None if alpha >= beta else math.log(2 * beta / (beta - alpha)) / rho

        def decider(x_hat: int, age: float) -> Decision:
            if x_hat == 0:
                if free_limit is None or age <= free_limit:
                    return SUBMIT_NOW
                return NEVER
            if busy_limit is None:
                return NEVER
            return WaitDecision(max(busy_limit - age, 0.0))

    else:
        raise ValueError(f"unknown policy identifier {policy!r}; expected one of {POLICIES}")

    return decider


def decide(
    policy: str,
    sys: SystemParams,
    coeffs: Optional[PolicyCoefficients],
    s: EstimateState,
) -> Decision:
    """Decision of ``policy`` for a job accepted at estimate state ``s``."""
    return make_decider(policy, sys, coeffs)(s.x_hat, s.age)
