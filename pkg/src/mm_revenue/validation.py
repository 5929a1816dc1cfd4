"""Independent numerical oracles and the cross-module validation suite.

Every closed form in the solver has a second, dumber route to the same
number: Runge-Kutta integration of the forward equations, adaptive
quadrature of the sampling integrals, dense-grid maximization, Monte-Carlo
rollouts, and the event simulator itself.  ``run_validation`` executes all
of them on the canonical parameter sets and reports one verdict per check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np
from scipy import stats
from scipy.integrate import quad

from .ctmc import NEVER, MachineParams, WaitDecision, sampled_transition_weight, transition_matrix
from .sim import AcceptanceSample, SimConfig, run
from .sim import _simulate
from .solver import (
    PolicyCoefficients,
    SystemParams,
    absorption_probabilities,
    coefficients,
    j_theta,
    optimal_wait,
    solve_theta_star,
    solve_v1,
    v1_objective,
    value_recursion,
)

__all__ = [
    "CheckResult",
    "run_validation",
    "canonical_systems",
    "rk4_transition",
    "quad_sampled_weight",
    "quad_v1_objective",
    "grid_solve_v1",
    "quad_expected_value",
    "mc_absorption",
    "mc_value_recursion",
    "random_system",
]

PRESET_MACHINES = (MachineParams(0.2, 0.5), MachineParams(0.5, 0.3))


def canonical_systems() -> List[SystemParams]:
    """The four reference configurations used throughout the checks."""
    return [
        SystemParams(machine=m, mu=mu, lam=0.3, r_s=2.0, c_d=3.0)
        for m in PRESET_MACHINES
        for mu in (0.5, 0.4)
    ]


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


# ---------------------------------------------------------------------------
# oracles


def rk4_transition(params: MachineParams, t: float, steps: int = 4000) -> np.ndarray:
    """Fixed-step RK4 integration of dP/dt = P Q from the identity."""
    q = np.array([[-params.alpha, params.alpha], [params.beta, -params.beta]])
    p = np.eye(2)
    h = t / steps
    for _ in range(steps):
        k1 = p @ q
        k2 = (p + 0.5 * h * k1) @ q
        k3 = (p + 0.5 * h * k2) @ q
        k4 = (p + h * k3) @ q
        p = p + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return p


def quad_sampled_weight(
    params: MachineParams, mu: float, i: int, j: int, u: float, tau: WaitDecision
) -> float:
    """Adaptive quadrature of mu e^{-mu y} P_ij(u + y) over [0, tau]."""

    def integrand(y: float) -> float:
        return mu * math.exp(-mu * y) * transition_matrix(params, u + y).entries[i, j]

    hi = 200.0 / mu if tau.is_never else tau.duration
    val, _ = quad(integrand, 0.0, hi, epsabs=1e-13, epsrel=1e-13, limit=300)
    return val


def quad_v1_objective(sys: SystemParams, theta: float, tau: WaitDecision) -> float:
    """The fresh-busy value ratio with both sampling weights done by quadrature."""
    m = sys.machine
    if tau.is_never:
        tau = WaitDecision(1e4 / sys.mu)
    p = transition_matrix(m, tau.duration).entries
    decay = math.exp(-sys.mu * tau.duration)
    num = (
        (sys.r_s * p[1, 0] - sys.c_d * p[1, 1]) * decay
        - sys.lam * theta * (1.0 - decay) / sys.mu
        + sys.r_s * quad_sampled_weight(m, sys.mu, 1, 0, 0.0, tau)
    )
    den = 1.0 - quad_sampled_weight(m, sys.mu, 1, 1, 0.0, tau)
    return num / den


def grid_solve_v1(sys: SystemParams, theta: float, n: int = 4001) -> float:
    """Dense grid over tau in [0, 200] plus golden refinement and the never limit."""
    taus = np.linspace(0.0, 200.0, n)
    vals = [v1_objective(sys, theta, WaitDecision(t)) for t in taus]
    k = int(np.argmax(vals))
    lo = taus[max(k - 1, 0)]
    hi = taus[min(k + 1, n - 1)]
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc = v1_objective(sys, theta, WaitDecision(c))
    fd = v1_objective(sys, theta, WaitDecision(d))
    for _ in range(120):
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = v1_objective(sys, theta, WaitDecision(c))
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = v1_objective(sys, theta, WaitDecision(d))
    best = max(vals[k], v1_objective(sys, theta, WaitDecision(0.5 * (a + b))))
    return max(best, v1_objective(sys, theta, NEVER))


def quad_expected_value(sys: SystemParams, coeffs: PolicyCoefficients, i: int) -> float:
    """Expectation of the one-step value along the optimal policy, integrating
    the age density (lam + mu) e^{-(lam + mu) u} numerically."""
    lm = sys.lam + sys.mu

    def integrand(u: float) -> float:
        tau = optimal_wait(coeffs, i, u)
        return lm * math.exp(-lm * u) * value_recursion(
            sys, coeffs.theta, i, u, tau, coeffs.v0, coeffs.v1
        )

    kink = coeffs.gamma if coeffs.gamma is not None else coeffs.kappa
    hi = 60.0 / lm
    if kink is not None and math.isfinite(kink):
        hi = max(hi, 2.0 * kink + 10.0 / lm)
    points = [kink] if kink is not None and 0.0 < kink < hi else None
    val, _ = quad(integrand, 0.0, hi, epsabs=1e-12, epsrel=1e-12, limit=500, points=points)
    return val


def mc_absorption(sys: SystemParams, n: int, rng: np.random.Generator):
    """Monte-Carlo absorption frequencies of the acceptance chain from (1,1).

    Jump-chain simulation: transient states 0..3 in the order (1,1), (0,1),
    (0,0), (1,0); codes 4 and 5 mark acceptance at estimate 0 and 1.
    """
    al, be, mu, lam = sys.machine.alpha, sys.machine.beta, sys.mu, sys.lam
    nexts = [
        np.array([1, 5]),
        np.array([0, 2, 5]),
        np.array([3, 4]),
        np.array([2, 0, 4]),
    ]
    cums = [
        np.cumsum([be, lam]),
        np.cumsum([al, mu, lam]),
        np.cumsum([al, lam]),
        np.cumsum([be, mu, lam]),
    ]
    cums = [c / c[-1] for c in cums]
    state = np.zeros(n, dtype=np.int64)
    while True:
        active = state < 4
        if not active.any():
            break
        for s in range(4):
            mask = active & (state == s)
            k = int(mask.sum())
            if k:
                state[mask] = nexts[s][np.searchsorted(cums[s], rng.random(k))]
    p0 = float((state == 4).mean())
    p1 = float((state == 5).mean())
    return p0, p1


def _simulate_flips(
    rng: np.random.Generator, alpha: float, beta: float, start: int, horizon: np.ndarray
) -> np.ndarray:
    """Terminal machine states after running the flip dynamics for ``horizon``,
    simulated by explicit exponential holding times (no closed form used)."""
    n = horizon.size
    state = np.full(n, start, dtype=np.int64)
    rem = horizon.astype(float).copy()
    while True:
        active = rem > 0.0
        if not active.any():
            break
        scale = np.where(state == 0, 1.0 / alpha, 1.0 / beta)
        dt = rng.exponential(scale)
        flip = active & (dt < rem)
        ended = active & ~flip  # holding time overshoots: state frozen to the end
        rem[ended] = 0.0
        rem[flip] -= dt[flip]
        state[flip] ^= 1
    return state


def mc_value_recursion(
    sys: SystemParams,
    theta: float,
    i: int,
    u: float,
    tau: WaitDecision,
    v0: float,
    v1: float,
    episodes: int,
    rng: np.random.Generator,
):
    """Episodic rollout of the one-step waiting value; returns (mean, stderr)."""
    y = rng.exponential(1.0 / sys.mu, size=episodes)
    if tau.is_never:
        waited = y
        sampled = np.ones(episodes, dtype=bool)
    else:
        waited = np.minimum(y, tau.duration)
        sampled = y <= tau.duration
    terminal = _simulate_flips(rng, sys.machine.alpha, sys.machine.beta, i, u + waited)
    rewards = -sys.lam * theta * waited
    cont = np.where(terminal == 0, v0, v1)
    submit_pay = np.where(terminal == 0, sys.r_s, -sys.c_d)
    rewards += np.where(sampled, cont, submit_pay)
    return float(rewards.mean()), float(rewards.std(ddof=1) / math.sqrt(episodes))


def random_system(rng: np.random.Generator) -> SystemParams:
    """A broad random configuration for property-style checks."""
    return SystemParams(
        machine=MachineParams(float(rng.uniform(0.05, 2.5)), float(rng.uniform(0.05, 2.5))),
        mu=float(rng.uniform(0.05, 2.0)),
        lam=float(rng.uniform(0.05, 2.0)),
        r_s=float(rng.uniform(0.5, 4.0)),
        c_d=float(rng.uniform(0.0, 5.0)),
    )


# ---------------------------------------------------------------------------
# the validation suite


def _corrupt(coeffs: PolicyCoefficients) -> PolicyCoefficients:
    """Deliberately wrong policy coefficients (negative-control hook)."""
    import dataclasses

    if coeffs.a_coef > 0:
        bad = coeffs.gamma + 4.0
        return dataclasses.replace(coeffs, gamma=bad, tau_10=WaitDecision(bad))
    return dataclasses.replace(coeffs, kappa=0.0, tau_10=WaitDecision(0.0), a_coef=1.0, gamma=4.0)


def run_validation(
    seed: int = 0,
    arrivals: int = 500_000,
    corrupt_coefficients: bool = False,
    progress: Optional[Callable[[str], None]] = None,
) -> List[CheckResult]:
    """Run every numerical cross-check on the canonical parameter sets.

    ``corrupt_coefficients`` feeds a deliberately wrong policy to the
    simulation checks; the suite must then fail (negative control).
    """
    results: List[CheckResult] = []
    say = progress or (lambda _msg: None)

    def check(name: str, fn: Callable[[], str]):
        say(name)
        try:
            detail = fn()
            results.append(CheckResult(name, True, detail))
        except AssertionError as exc:
            results.append(CheckResult(name, False, str(exc)))
        except Exception as exc:  # diagnostics beat a crash mid-suite
            results.append(CheckResult(name, False, f"{type(exc).__name__}: {exc}"))

    systems = canonical_systems()
    rng = np.random.default_rng(seed)

    def transition_rk4() -> str:
        worst = 0.0
        for m in (MachineParams(0.5, 0.5), *PRESET_MACHINES):
            for t in (0.1, math.log(2.0), 1.0, 5.0):
                err = np.abs(transition_matrix(m, t).entries - rk4_transition(m, t)).max()
                worst = max(worst, err)
        assert worst < 1e-10, f"closed form vs RK4 max err {worst:.2e}"
        return f"max err {worst:.2e}"

    check("transition_matrix_vs_rk4", transition_rk4)

    def weight_quadrature() -> str:
        worst = 0.0
        for _ in range(40):
            m = MachineParams(float(rng.uniform(0.05, 3.0)), float(rng.uniform(0.05, 3.0)))
            mu = float(rng.uniform(0.05, 3.0))
            i, j = int(rng.integers(2)), int(rng.integers(2))
            u = float(rng.uniform(0.0, 10.0))
            tau = NEVER if rng.random() < 0.25 else WaitDecision(float(rng.uniform(0.0, 10.0)))
            err = abs(
                sampled_transition_weight(m, mu, i, j, u, tau)
                - quad_sampled_weight(m, mu, i, j, u, tau)
            )
            worst = max(worst, err)
        assert worst < 1e-9, f"weight vs quadrature max err {worst:.2e}"
        return f"max err {worst:.2e}"

    check("sampled_weight_vs_quadrature", weight_quadrature)

    def v1_quadrature() -> str:
        worst = 0.0
        for _ in range(20):
            s = random_system(rng)
            theta = float(rng.uniform(0.01, 4.0))
            tau = WaitDecision(float(rng.uniform(0.0, 20.0)))
            worst = max(worst, abs(v1_objective(s, theta, tau) - quad_v1_objective(s, theta, tau)))
            worst = max(
                worst, abs(v1_objective(s, theta, NEVER) - quad_v1_objective(s, theta, NEVER))
            )
        assert worst < 1e-9, f"ratio vs quadrature max err {worst:.2e}"
        return f"max err {worst:.2e}"

    check("v1_objective_vs_quadrature", v1_quadrature)

    def v1_grid() -> str:
        worst = 0.0
        for s in systems:
            for theta in (0.5, 1.5):
                v1, _ = solve_v1(s, theta)
                worst = max(worst, abs(v1 - grid_solve_v1(s, theta)))
        assert worst < 1e-6, f"solve_v1 vs grid oracle max err {worst:.2e}"
        return f"max err {worst:.2e}"

    check("solve_v1_vs_grid_oracle", v1_grid)

    def closed_form_quadrature() -> str:
        from .solver import expected_value

        worst, n_pos, n_neg, draws = 0.0, 0, 0, 0
        while n_pos + n_neg < 50 and draws < 2000:
            draws += 1
            s = random_system(rng)
            theta = float(rng.uniform(0.01, 6.0))
            coeffs = coefficients(s, theta)
            if coeffs.a_coef > 0:
                if n_pos >= 35:
                    continue
                n_pos += 1
            else:
                if n_neg >= 35:
                    continue
                n_neg += 1
            ev0, ev1, _ = expected_value(s, coeffs)
            worst = max(worst, abs(ev0 - quad_expected_value(s, coeffs, 0)))
            worst = max(worst, abs(ev1 - quad_expected_value(s, coeffs, 1)))
        assert n_pos and n_neg, "random draw failed to span both regimes"
        assert worst < 1e-7, f"closed form vs quadrature max err {worst:.2e}"
        return f"max err {worst:.2e} over {n_pos} threshold / {n_neg} switching points"

    check("expected_value_vs_quadrature", closed_form_quadrature)

    def absorption_mc() -> str:
        worst_sigma = 0.0
        for s in systems:
            p = absorption_probabilities(s)
            assert abs(p.p0 + p.p1 - 1.0) < 1e-10, f"p0+p1-1 = {p.p0 + p.p1 - 1.0:.2e}"
            n = 1_000_000
            p0_hat, _ = mc_absorption(s, n, rng)
            sigma = math.sqrt(max(p.p0 * (1.0 - p.p0), 1e-12) / n)
            pull = abs(p0_hat - p.p0) / sigma
            assert pull <= 3.0, f"MC absorption off by {pull:.2f} sigma"
            worst_sigma = max(worst_sigma, pull)
        return f"worst deviation {worst_sigma:.2f} sigma over {len(systems)} systems"

    check("absorption_vs_monte_carlo", absorption_mc)

    def dinkelbach() -> str:
        details = []
        for s in systems:
            theta_star, _ = solve_theta_star(s, tol=1e-9)
            resid = j_theta(s, theta_star)
            assert abs(resid) <= 1e-9, f"|J(theta*)| = {abs(resid):.2e}"
            assert 0.0 < theta_star <= s.r_s, f"theta* = {theta_star!r} outside (0, r_s]"
            for theta in np.linspace(0.5 * theta_star, 1.5 * theta_star, 20):
                if abs(theta - theta_star) < 1e-6:
                    continue
                assert (j_theta(s, float(theta)) > 0) == (theta < theta_star), (
                    f"sign rule broken at theta={theta!r}"
                )
            details.append(f"{theta_star:.6f}")
        return "theta* = " + ", ".join(details)

    check("dinkelbach_root_and_sign_rule", dinkelbach)

    # simulation-backed checks share one run per system
    sim_details = []
    ks_detail = {}

    def theta_vs_sim() -> str:
        for idx, s in enumerate(systems):
            theta_star, coeffs = solve_theta_star(s, tol=1e-9)
            if corrupt_coefficients:
                coeffs = _corrupt(coeffs)
            cfg = SimConfig(
                sys=s, policy="opt_wait", coeffs=coeffs, max_arrivals=arrivals, seed=seed + idx
            )
            if idx == 0:
                stats_run, ages, ests = _simulate(cfg, record_acceptance=True)
                ks_detail["sample"] = AcceptanceSample(
                    ages=np.asarray(ages, dtype=float),
                    estimates=np.asarray(ests, dtype=np.int64),
                )
                ks_detail["sys"] = s
            else:
                stats_run = run(cfg)
            rel = abs(stats_run.revenue_per_job - theta_star) / theta_star
            sim_details.append(f"{rel * 100:.2f}%")
            assert rel <= 0.02, (
                f"simulated revenue {stats_run.revenue_per_job:.5f} vs theta* "
                f"{theta_star:.5f} off by {rel * 100:.2f}%"
            )
        return "relative gaps " + ", ".join(sim_details)

    check("theta_star_vs_simulation", theta_vs_sim)

    def age_distribution() -> str:
        assert "sample" in ks_detail, "simulation check did not produce a sample"
        sample = ks_detail["sample"]
        s = ks_detail["sys"]
        ages = sample.ages[:100_000]
        floor = min(100_000, arrivals // 5)
        assert ages.size >= floor, f"only {ages.size} acceptance ages collected"
        rate = s.lam + s.mu
        res = stats.kstest(ages, lambda x: 1.0 - np.exp(-rate * x))
        assert res.pvalue > 0.01, f"KS p-value {res.pvalue:.4f} at the 1% level"
        return f"KS D={res.statistic:.5f}, p={res.pvalue:.3f}, n={ages.size}"

    check("acceptance_age_distribution", age_distribution)

    def acceptance_frequencies() -> str:
        sample = ks_detail["sample"]
        s = ks_detail["sys"]
        p = absorption_probabilities(s)
        n = sample.estimates.size
        freq1 = float((sample.estimates == 1).mean())
        sigma = math.sqrt(max(p.p1 * (1.0 - p.p1), 1e-12) / n)
        pull = abs(freq1 - p.p1) / sigma
        assert pull <= 3.0, f"estimate-at-acceptance frequency off by {pull:.2f} sigma"
        return f"freq(busy)={freq1:.4f} vs p1={p.p1:.4f} ({pull:.2f} sigma)"

    check("acceptance_state_frequencies", acceptance_frequencies)

    return results
