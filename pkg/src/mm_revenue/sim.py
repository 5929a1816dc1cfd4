"""Event-driven simulation of machine, sampler, job arrivals, and a policy.

Ground truth for the solver: the engine makes none of the analytical
simplifications, it just races exponential clocks.  Four timers compete:
the machine flip, the next query, the next job arrival, and (when a job is
held) its scheduled submission.  A query refreshes the estimate and, if a
job is being held, the policy is re-invoked at age zero, superseding any
pending submission timer.  A submission reveals the true machine state,
pays out, and restarts the sampler at (busy, busy): on success the machine
is genuinely busy serving the submitted job, on discard it was busy anyway.

A run is single-threaded and driven by one seeded stream, so equal configs
replay bit-identically.  Independent runs parallelize freely.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .policies import REJECT, make_decider
from .solver import PolicyCoefficients, SystemParams

__all__ = ["SimConfig", "SimStats", "AcceptanceSample", "run", "estimate_age_at_acceptance"]

_INF = float("inf")
_BATCHES = 40  # batch-means resolution; comfortably above the 30 minimum


@dataclass(frozen=True)
class SimConfig:
    """One simulation run: system, policy, stop bound, and RNG seed."""

    sys: SystemParams
    policy: str
    coeffs: Optional[PolicyCoefficients] = None
    max_arrivals: Optional[int] = None
    max_time: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        if self.max_arrivals is None and self.max_time is None:
            raise ValueError("need a stop bound: max_arrivals or max_time")
        if self.max_arrivals is not None and self.max_arrivals <= 0:
            raise ValueError(f"max_arrivals must be positive, got {self.max_arrivals!r}")
        if self.max_time is not None and self.max_time <= 0:
            raise ValueError(f"max_time must be positive, got {self.max_time!r}")


@dataclass(frozen=True)
class SimStats:
    """Counters and the per-job revenue estimate of one run.

    ``submitted_ok`` and ``discarded_penalty`` count machine outcomes;
    ``rejected`` counts jobs the policy turned away at arrival (benchmarks
    only); ``lost_while_holding`` counts arrivals that found the buffer
    occupied.  ``revenue_per_job`` is (r_s S - c_d D) / N with a batch-means
    standard error; ``busy_fraction`` is the time fraction the machine spent
    busy within the measurement window.
    """

    submitted_ok: int
    discarded_penalty: int
    total_arrivals: int
    rejected: int
    lost_while_holding: int
    elapsed: float
    revenue_per_job: float
    revenue_stderr: float
    busy_fraction: float


@dataclass(frozen=True)
class AcceptanceSample:
    """Ages and estimate values observed at job-acceptance epochs."""

    ages: np.ndarray
    estimates: np.ndarray

    def ecdf(self) -> Tuple[np.ndarray, np.ndarray]:
        xs = np.sort(self.ages)
        return xs, np.arange(1, xs.size + 1) / xs.size


def run(config: SimConfig) -> SimStats:
    """Simulate until the stop bound, then drain the held job if any."""
    stats, _, _ = _simulate(config, record_acceptance=False)
    return stats


def estimate_age_at_acceptance(config: SimConfig) -> AcceptanceSample:
    """Collect the estimate age at every job acceptance.

    Only meaningful for policies that never reject; for the rejecting
    benchmarks acceptance is conditioned on the estimate and the age law is
    a different object.
    """
    if config.policy in ("rl", "map_rl"):
        raise ValueError(f"policy {config.policy!r} rejects jobs; ages are not comparable")
    _, ages, estimates = _simulate(config, record_acceptance=True)
    return AcceptanceSample(
        ages=np.asarray(ages, dtype=float),
        estimates=np.asarray(estimates, dtype=np.int64),
    )


def _simulate(cfg: SimConfig, record_acceptance: bool):
    s = cfg.sys
    m = s.machine
    alpha, beta, mu, lam = m.alpha, m.beta, s.mu, s.lam
    r_s, c_d = s.r_s, s.c_d
    decider = make_decider(cfg.policy, s, cfg.coeffs)

    rng = random.Random(cfg.seed)
    expo = rng.expovariate

    max_n = cfg.max_arrivals
    max_t = cfg.max_time if cfg.max_time is not None else _INF

    x = 0 if rng.random() < m.pi0 else 1  # stationary start
    x_hat = x
    known_t = 0.0
    t = 0.0
    holding = False
    submit_at = _INF

    next_flip = expo(alpha if x == 0 else beta)
    next_query = expo(mu)
    next_arrival = expo(lam)

    S = D = N = rejected = lost = 0
    busy_time = 0.0
    stopped = False
    elapsed = 0.0

    # batch means: a batch closes at the first renewal point (empty buffer)
    # once it holds batch_target arrivals
    expected_n = max_n if max_n is not None else max(lam * max_t, 1.0)
    batch_target = max(1, math.ceil(expected_n / _BATCHES))
    batches = []
    bS = bD = bN = 0

    ages = [] if record_acceptance else None
    est_at_accept = [] if record_acceptance else None

    def do_submit(now: float):
        nonlocal x, x_hat, known_t, holding, submit_at, S, D, bS, bD, next_flip
        if x == 0:
            S += 1
            bS += 1
            x = 1
            next_flip = now + expo(beta)  # machine now serving the job
        else:
            D += 1
            bD += 1
        x_hat = 1
        known_t = now
        holding = False
        submit_at = _INF

    while True:
        te = next_flip
        kind = 0
        if next_query < te:
            te = next_query
            kind = 1
        if next_arrival < te:
            te = next_arrival
            kind = 2
        if submit_at < te:
            te = submit_at
            kind = 3

        if not stopped and te >= max_t:
            # time-based stop: freeze the measurement window at max_t
            busy_time += (max_t - t) * x
            elapsed = max_t
            stopped = True
            next_arrival = _INF
            if not holding:
                break
            if kind == 2:
                continue  # the arrival fell past the horizon
        elif not stopped:
            busy_time += (te - t) * x
        t = te

        if kind == 0:  # machine flip
            x = 1 - x
            next_flip = t + expo(beta if x == 1 else alpha)
        elif kind == 1:  # query: refresh estimate, re-decide a held job
            x_hat = x
            known_t = t
            if holding:
                d = decider(x_hat, 0.0).duration
                if d is None:
                    submit_at = _INF
                elif d == 0.0:
                    do_submit(t)
                    if bN >= batch_target:
                        batches.append((bS, bD, bN))
                        bS = bD = bN = 0
                else:
                    submit_at = t + d
            next_query = t + expo(mu)
        elif kind == 2:  # job arrival
            N += 1
            bN += 1
            if holding:
                lost += 1
            else:
                dec = decider(x_hat, t - known_t)
                if dec is REJECT:
                    rejected += 1
                else:
                    if ages is not None:
                        ages.append(t - known_t)
                        est_at_accept.append(x_hat)
                    d = dec.duration
                    if d is None:
                        holding = True
                        submit_at = _INF
                    elif d == 0.0:
                        do_submit(t)
                    else:
                        holding = True
                        submit_at = t + d
            if not holding and bN >= batch_target:
                batches.append((bS, bD, bN))
                bS = bD = bN = 0
            if max_n is not None and N >= max_n:
                stopped = True
                elapsed = t
                next_arrival = _INF
            else:
                next_arrival = t + expo(lam)
        else:  # scheduled submission fires
            do_submit(t)
            if bN >= batch_target:
                batches.append((bS, bD, bN))
                bS = bD = bN = 0

        if stopped and not holding:
            break

    if bN:
        batches.append((bS, bD, bN))

    revenue = (r_s * S - c_d * D) / N if N else 0.0
    if len(batches) >= 2:
        ratios = np.array([(r_s * sb - c_d * db) / nb for sb, db, nb in batches])
        stderr = float(ratios.std(ddof=1) / math.sqrt(len(ratios)))
    else:
        stderr = float("nan")

    stats = SimStats(
        submitted_ok=S,
        discarded_penalty=D,
        total_arrivals=N,
        rejected=rejected,
        lost_while_holding=lost,
        elapsed=elapsed,
        revenue_per_job=revenue,
        revenue_stderr=stderr,
        busy_fraction=busy_time / elapsed if elapsed > 0 else 0.0,
    )
    return stats, ages, est_at_accept
