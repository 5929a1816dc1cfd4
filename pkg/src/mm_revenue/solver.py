"""Closed-form optimal waiting policy and the fractional-program solver.

The target quantity is the maximal expected revenue per arriving job.  The
ratio program is linearized with a holding-cost parameter theta: for each
theta the inner problem has a closed-form optimal policy (a threshold rule
or a switching rule on the age of the estimate), and the outer problem is a
one-dimensional root find on the linearized objective J(theta), which is
continuous and strictly decreasing with J(theta*) = 0 at the optimal ratio.

Conventions: the machine estimate is i in {0 free, 1 busy}; u >= 0 is the
age of that estimate; V0 and V1 are the values of restarting at a fresh
estimate of 0 or 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .ctmc import (
    NEVER,
    SUBMIT_NOW,
    MachineParams,
    WaitDecision,
    sampled_transition_weight,
    transition_matrix,
)

__all__ = [
    "SystemParams",
    "PolicyCoefficients",
    "ClosedFormTerms",
    "AbsorbingChain",
    "AbsorptionProbabilities",
    "ConvergenceError",
    "v1_objective",
    "solve_v1",
    "coefficients",
    "optimal_wait",
    "value_recursion",
    "expected_value",
    "absorbing_chain",
    "absorption_probabilities",
    "j_theta",
    "solve_theta_star",
]

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class SystemParams:
    """Machine rates plus the sampling, arrival, and reward parameters.

    ``mu`` is the query rate, ``lam`` the external job arrival rate, ``r_s``
    the revenue of a job accepted by a free machine, ``c_d`` the penalty of
    a job discarded by a busy machine.
    """

    machine: MachineParams
    mu: float
    lam: float
    r_s: float
    c_d: float

    def __post_init__(self):
        if not (math.isfinite(self.mu) and self.mu > 0):
            raise ValueError(f"mu must be positive, got {self.mu!r}")
        if not (math.isfinite(self.lam) and self.lam > 0):
            raise ValueError(f"lam must be positive, got {self.lam!r}")
        if not (math.isfinite(self.r_s) and self.r_s > 0):
            raise ValueError(f"r_s must be positive, got {self.r_s!r}")
        if not (math.isfinite(self.c_d) and self.c_d >= 0):
            raise ValueError(f"c_d must be nonnegative, got {self.c_d!r}")


@dataclass(frozen=True)
class PolicyCoefficients:
    """Everything needed to evaluate the optimal policy at one theta.

    Exactly one of ``gamma`` (threshold age, a_coef > 0) and ``kappa``
    (switching age, a_coef <= 0) is set; ``kappa`` is ``inf`` when
    a_coef == 0, where the switching age diverges.
    """

    theta: float
    v0: float
    v1: float
    tau_10: WaitDecision
    a_coef: float
    b_coef: float
    b0: float
    b1: float
    gamma: Optional[float]
    kappa: Optional[float]

    @property
    def threshold_regime(self) -> bool:
        """True when waits are finite thresholds, False in the switching regime."""
        return self.a_coef > 0


@dataclass(frozen=True)
class ClosedFormTerms:
    """Scalar building blocks of the expected-value closed forms."""

    a0: float
    a1: float
    a2: float
    b0_term: float


@dataclass(frozen=True)
class AbsorbingChain:
    """Sub-generator over transient states (1,1),(0,1),(0,0),(1,0) and the
    absorption rates into the two acceptance states (estimate 0 / estimate 1)."""

    sub_generator: np.ndarray
    absorption_rates: np.ndarray


@dataclass(frozen=True)
class AbsorptionProbabilities:
    """p_i = probability the next job is accepted while the estimate is i."""

    p0: float
    p1: float


class ConvergenceError(RuntimeError):
    """Root search exhausted its iteration budget; carries the last bracket."""

    def __init__(self, message: str, bracket: Tuple[float, float]):
        super().__init__(f"{message} (bracket: {bracket[0]!r}, {bracket[1]!r})")
        self.bracket = bracket


def v1_objective(sys: SystemParams, theta: float, tau: WaitDecision) -> float:
    """Value of restarting at a fresh busy estimate when committing to wait tau.

    Evaluates the self-consistent ratio obtained by conditioning on the first
    sample; its maximum over tau is V1.  The never branch uses the analytic
    limit r_s - lam theta (rho + mu) / (mu beta).
    """
    if theta < 0:
        raise ValueError(f"theta must be nonnegative, got {theta!r}")
    m = sys.machine
    mu, lam = sys.mu, sys.lam
    if tau.is_never:
        return sys.r_s - lam * theta * (m.rho + mu) / (mu * m.beta)
    p = transition_matrix(m, tau.duration).entries
    decay = math.exp(-mu * tau.duration)
    num = (
        (sys.r_s * p[1, 0] - sys.c_d * p[1, 1]) * decay
        - lam * theta * (1.0 - decay) / mu
        + sys.r_s * sampled_transition_weight(m, mu, 1, 0, 0.0, tau)
    )
    den = 1.0 - sampled_transition_weight(m, mu, 1, 1, 0.0, tau)
    if den <= 0.0:
        raise AssertionError(f"nonpositive renewal denominator {den!r} at tau={tau!r}")
    return num / den


def _golden_max(f, lo: float, hi: float, tol: float = 1e-12) -> Tuple[float, float]:
    """Golden-section maximization of a unimodal f on [lo, hi].

    The bracket shrinks until function comparisons drown in rounding noise;
    a final three-point parabolic fit then recovers the maximizer to well
    below the sqrt(eps) limit of pure section search.
    """
    a, b = lo, hi
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(200):
        if b - a <= tol * (1.0 + abs(a) + abs(b)):
            break
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    fx = f(x)
    h = 1e-6 * (1.0 + abs(x))
    if lo < x - h and x + h < hi:
        fm, fp = f(x - h), f(x + h)
        curv = fm + fp - 2.0 * fx
        if curv < 0.0:
            step = max(-h, min(h, 0.5 * h * (fm - fp) / curv))
            xv = x + step
            fv = f(xv)
            if fv >= fx:
                return xv, fv
    return x, fx


def solve_v1(sys: SystemParams, theta: float) -> Tuple[float, WaitDecision]:
    """Global maximum of ``v1_objective`` over tau in [0, inf].

    The endpoints tau = 0 and the never limit are evaluated analytically; the
    interior is scanned on a log-spaced grid and refined by golden section.
    Ties against the never limit report never, since then the supremum is
    attained only in the limit.
    """
    if theta <= 0:
        raise ValueError(f"theta must be positive, got {theta!r}")

    def f(tau_val: float) -> float:
        return v1_objective(sys, theta, WaitDecision(tau_val))

    v_never = v1_objective(sys, theta, NEVER)

    hi = 1e3
    for _ in range(4):
        grid = np.concatenate(([0.0], np.geomspace(1e-4, hi, 240)))
        vals = [f(t) for t in grid]
        k = int(np.argmax(vals))
        if k < len(grid) - 1:
            break
        hi *= 100.0  # peak beyond the grid: widen and rescan
    lo_b = grid[k - 1] if k > 0 else 0.0
    hi_b = grid[k + 1] if k < len(grid) - 1 else grid[k]
    tau_int, v_int = _golden_max(f, lo_b, hi_b)

    v_zero = f(0.0)
    if v_zero >= v_int:
        v_best, tau_best = v_zero, 0.0
    else:
        v_best, tau_best = v_int, tau_int
    # In the switching regime the ratio climbs monotonically to its never
    # limit, so on the far plateau float noise can put a grid point a few
    # ulps above the limit; classify against an ulp-scale guard.
    if v_never >= v_best - 1e-12 * (1.0 + abs(v_never)):
        return v_never, NEVER
    return float(v_best), WaitDecision(float(tau_best))


def coefficients(sys: SystemParams, theta: float) -> PolicyCoefficients:
    """Solve V1 at this theta and assemble the policy coefficients.

    A = lam theta / mu - (c_d + V1) alpha / rho decides the regime; B splits
    into B0 + B1 with the stationary weights.  The threshold age gamma and
    switching age kappa take their positive parts; kappa diverges at A = 0.
    """
    m = sys.machine
    rho, mu = m.rho, sys.mu
    v1, tau_10 = solve_v1(sys, theta)
    a_coef = sys.lam * theta / mu - (sys.c_d + v1) * m.alpha / rho
    b_coef = sys.c_d + (rho * sys.r_s + mu * v1) / (rho + mu)
    b0 = m.alpha / rho * b_coef
    b1 = m.beta / rho * b_coef
    gamma = kappa = None
    if a_coef > 0:
        gamma = max(0.0, math.log((rho + mu) * b1 / (mu * a_coef)) / rho)
    elif a_coef == 0:
        kappa = math.inf
    else:
        kappa = max(0.0, math.log(b0 / -a_coef) / rho)
    return PolicyCoefficients(
        theta=theta,
        v0=sys.r_s,
        v1=v1,
        tau_10=tau_10,
        a_coef=a_coef,
        b_coef=b_coef,
        b0=b0,
        b1=b1,
        gamma=gamma,
        kappa=kappa,
    )


def optimal_wait(coeffs: PolicyCoefficients, i: int, u: float) -> WaitDecision:
    """Optimal wait with estimate ``i`` at age ``u``.

    Threshold regime (a_coef > 0): submit immediately on a free estimate and
    wait (gamma - u)+ on a busy one.  Switching regime (a_coef <= 0): hold a
    busy estimate for the next sample; on a free estimate submit immediately
    up to age kappa and hold beyond it.
    """
    if i not in (0, 1):
        raise ValueError(f"estimate state must be 0 or 1, got {i!r}")
    if u < 0:
        raise ValueError(f"age must be nonnegative, got {u!r}")
    if u == 0.0:
        return SUBMIT_NOW if i == 0 else coeffs.tau_10
    if coeffs.a_coef > 0:
        if i == 0:
            return SUBMIT_NOW
        return WaitDecision(max(coeffs.gamma - u, 0.0))
    if i == 1:
        return NEVER
    return SUBMIT_NOW if u <= coeffs.kappa else NEVER


def value_recursion(
    sys: SystemParams,
    theta: float,
    i: int,
    u: float,
    tau: WaitDecision,
    v0: float,
    v1: float,
) -> float:
    """One-step value of waiting tau from (i, u), conditioning on the first sample.

    Pays the terminal reward if no sample arrives within tau, charges the
    holding cost of jobs lost during the wait, and otherwise restarts at the
    sampled state with continuation values v0, v1.  Serves as the numerical
    oracle for all expected-value closed forms.
    """
    m = sys.machine
    mu, lam = sys.mu, sys.lam
    if tau.is_never:
        return (
            -lam * theta / mu
            + sampled_transition_weight(m, mu, i, 0, u, NEVER) * v0
            + sampled_transition_weight(m, mu, i, 1, u, NEVER) * v1
        )
    p = transition_matrix(m, u + tau.duration).entries
    decay = math.exp(-mu * tau.duration)
    return (
        (sys.r_s * p[i, 0] - sys.c_d * p[i, 1]) * decay
        - lam * theta * (1.0 - decay) / mu
        + sampled_transition_weight(m, mu, i, 0, u, tau) * v0
        + sampled_transition_weight(m, mu, i, 1, u, tau) * v1
    )


def expected_value(
    sys: SystemParams, coeffs: PolicyCoefficients
) -> Tuple[float, float, ClosedFormTerms]:
    """Expected value of following the optimal waits from estimate 0 and 1,
    averaged over the age-at-acceptance distribution Exp(lam + mu).

    Uses the exact piecewise integrals of the one-step value along the
    optimal policy.  On the threshold side these reduce to the usual
    a0/a1/a2 form whenever gamma is an interior stationary point; the
    piecewise form stays exact when gamma clamps to zero.
    """
    m = sys.machine
    alpha, beta, rho = m.alpha, m.beta, m.rho
    mu, lam, r_s, c_d = sys.mu, sys.lam, sys.r_s, sys.c_d
    lm = lam + mu
    v1, a_coef = coeffs.v1, coeffs.a_coef
    base = (beta * r_s - alpha * c_d) / rho

    terms = ClosedFormTerms(
        a0=beta * mu * lm * (r_s - v1) / (rho * (rho + mu) * (rho + lm)) + a_coef,
        a1=rho * lm * a_coef / (lam * (rho + mu)),
        a2=mu * rho * a_coef / (lam * (rho + lm)),
        b0_term=alpha * lm * (r_s + c_d) / (rho * (rho + lm)),
    )

    if a_coef > 0:
        gamma = coeffs.gamma
        ev0 = base + alpha * lm * (r_s + c_d) / (rho * (rho + lm))
        e_lm = math.exp(-lm * gamma)
        e_all = math.exp(-(rho + lm) * gamma)
        # ages beyond the threshold: submit immediately at a busy estimate
        ev1 = base * e_lm - beta * (r_s + c_d) / rho * lm / (rho + lm) * e_all
        if gamma > 0:
            # ages below the threshold: wait out the remaining gamma - u
            edge = a_coef * math.exp(-mu * gamma) - coeffs.b1 * math.exp(-(rho + mu) * gamma)
            ev1 += (
                edge * lm / lam * (1.0 - math.exp(-lam * gamma))
                + (base - a_coef) * (1.0 - e_lm)
                - beta * mu * (r_s - v1) / (rho * (rho + mu)) * lm / (rho + lm) * (1.0 - e_all)
            )
        return ev0, ev1, terms

    kappa = coeffs.kappa
    ev1 = base - a_coef - beta * mu * lm * (r_s - v1) / (rho * (rho + mu) * (rho + lm))
    e_lm = math.exp(-lm * kappa)
    e_all = math.exp(-(rho + lm) * kappa)
    ev0 = (
        base * (1.0 - e_lm)
        + alpha * (r_s + c_d) / rho * lm / (rho + lm) * (1.0 - e_all)
        + (base - a_coef) * e_lm
        + alpha * mu * (r_s - v1) / (rho * (rho + mu)) * lm / (rho + lm) * e_all
    )
    return ev0, ev1, terms


_TRANSIENT_STATES = ((1, 1), (0, 1), (0, 0), (1, 0))


def absorbing_chain(sys: SystemParams) -> AbsorbingChain:
    """Chain tracking (machine, estimate) between a submission and the next
    job acceptance, absorbed by an arrival according to the current estimate."""
    alpha, beta = sys.machine.alpha, sys.machine.beta
    mu, lam = sys.mu, sys.lam
    sub = np.zeros((4, 4))
    psi = np.zeros((4, 2))
    sub[0, 1] = beta   # (1,1) -> (0,1): service completes, estimate stale
    sub[1, 0] = alpha  # (0,1) -> (1,1): internal work arrives
    sub[1, 2] = mu     # (0,1) -> (0,0): sample reveals free
    sub[2, 3] = alpha  # (0,0) -> (1,0): internal work arrives, estimate stale
    sub[3, 2] = beta   # (1,0) -> (0,0): service completes
    sub[3, 0] = mu     # (1,0) -> (1,1): sample reveals busy
    for row, (_, x_hat) in enumerate(_TRANSIENT_STATES):
        psi[row, x_hat] = lam
    np.fill_diagonal(sub, -(sub.sum(axis=1) + psi.sum(axis=1)))
    return AbsorbingChain(sub_generator=sub, absorption_rates=psi)


def absorption_probabilities(sys: SystemParams) -> AbsorptionProbabilities:
    """Probabilities of the next job being accepted at estimate 0 vs 1,
    starting from the post-submission state (machine busy, estimate busy)."""
    chain = absorbing_chain(sys)
    # row of -Lambda^{-1} Psi for the initial state (1,1); partial-pivot solve
    hit = np.linalg.solve(chain.sub_generator, -chain.absorption_rates)
    return AbsorptionProbabilities(p0=float(hit[0, 0]), p1=float(hit[0, 1]))


def j_theta(sys: SystemParams, theta: float) -> float:
    """Linearized objective: acceptance-weighted expected value minus theta."""
    if theta <= 0:
        raise ValueError(f"theta must be positive, got {theta!r}")
    ev0, ev1, _ = expected_value(sys, coefficients(sys, theta))
    p = absorption_probabilities(sys)
    return p.p0 * ev0 + p.p1 * ev1 - theta


def solve_theta_star(
    sys: SystemParams, tol: float = 1e-9
) -> Tuple[float, PolicyCoefficients]:
    """Bisection for the root of J; the root is the optimal revenue per job.

    The lower bracket starts at 0 (J is positive there); the upper bracket
    grows geometrically from r_s until J goes negative.
    """
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol!r}")
    lo = 0.0
    hi = sys.r_s
    growths = 0
    while j_theta(sys, hi) > 0:
        lo = hi
        hi *= 2.0
        growths += 1
        if growths > 60:
            raise ConvergenceError("upper bracket failed to make J negative", (lo, hi))
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        val = j_theta(sys, mid)
        if abs(val) <= tol:
            return mid, coefficients(sys, mid)
        if val > 0:
            lo = mid
        else:
            hi = mid
    raise ConvergenceError(f"|J| did not reach tol={tol!r} in 200 bisections", (lo, hi))
