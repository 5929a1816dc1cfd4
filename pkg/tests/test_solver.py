import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mm_revenue import (
    NEVER,
    ConvergenceError,
    MachineParams,
    SystemParams,
    WaitDecision,
    absorbing_chain,
    absorption_probabilities,
    coefficients,
    expected_value,
    j_theta,
    optimal_wait,
    solve_theta_star,
    solve_v1,
    v1_objective,
    value_recursion,
)
from mm_revenue.validation import (
    grid_solve_v1,
    mc_absorption,
    mc_value_recursion,
    quad_expected_value,
    quad_v1_objective,
    random_system,
)


def _system(alpha, beta, mu, lam, r_s, c_d):
    return SystemParams(machine=MachineParams(alpha, beta), mu=mu, lam=lam, r_s=r_s, c_d=c_d)


systems = st.builds(
    _system,
    alpha=st.floats(0.05, 2.5),
    beta=st.floats(0.05, 2.5),
    mu=st.floats(0.05, 2.0),
    lam=st.floats(0.05, 2.0),
    r_s=st.floats(0.5, 4.0),
    c_d=st.floats(0.0, 5.0),
)


# --- the fresh-busy value ratio --------------------------------------------


def test_v1_objective_zero_wait_pays_the_penalty(canonical):
    assert v1_objective(canonical, 0.7, WaitDecision(0.0)) == -canonical.c_d


def test_v1_objective_never_limit_value(canonical):
    # r_s - lam * theta * (rho + mu) / (mu * beta) at theta = 1
    got = v1_objective(canonical, 1.0, NEVER)
    assert got == pytest.approx(0.56, abs=1e-12)
    # and the limit is where the ratio is heading: quadrature at tau = 1e4
    assert got == pytest.approx(quad_v1_objective(canonical, 1.0, NEVER), abs=1e-9)


def test_v1_objective_matches_quadrature_randomized():
    rng = np.random.default_rng(3)
    for _ in range(12):
        sys_p = random_system(rng)
        theta = rng.uniform(0.01, 4.0)
        tau = WaitDecision(rng.uniform(0.0, 15.0))
        got = v1_objective(sys_p, theta, tau)
        assert got == pytest.approx(quad_v1_objective(sys_p, theta, tau), abs=1e-9)


# --- solving for V1 ---------------------------------------------------------


def test_solve_v1_dominates_immediate_submission():
    rng = np.random.default_rng(11)
    for _ in range(25):
        sys_p = random_system(rng)
        v1, _ = solve_v1(sys_p, rng.uniform(0.01, 5.0))
        assert v1 >= -sys_p.c_d - 1e-12


def test_solve_v1_never_when_switching_regime(canonical):
    # at this system the optimum holds busy-estimate jobs for the next sample
    coeffs = coefficients(canonical, 0.9775522192940116)
    assert coeffs.a_coef <= 0
    assert coeffs.tau_10.is_never


def test_solve_v1_matches_grid_oracle(canonical, threshold_sys):
    for sys_p in (canonical, threshold_sys):
        for theta in (0.5, 1.2):
            v1, _ = solve_v1(sys_p, theta)
            assert v1 == pytest.approx(grid_solve_v1(sys_p, theta), abs=1e-6)


def test_solve_v1_requires_positive_theta(canonical):
    with pytest.raises(ValueError):
        solve_v1(canonical, 0.0)


# --- coefficients -----------------------------------------------------------


@given(sys_p=systems, theta=st.floats(0.05, 5.0))
@settings(max_examples=40, deadline=None)
def test_b_decomposition(sys_p, theta):
    coeffs = coefficients(sys_p, theta)
    assert coeffs.b0 + coeffs.b1 == pytest.approx(coeffs.b_coef, rel=1e-12)
    m = sys_p.machine
    assert coeffs.b0 == pytest.approx(m.alpha / m.rho * coeffs.b_coef, rel=1e-12)
    assert coeffs.b_coef >= 0.0
    assert coeffs.v0 == sys_p.r_s
    assert coeffs.v1 >= -sys_p.c_d - 1e-12
    # exactly one regime is populated
    assert (coeffs.gamma is None) != (coeffs.kappa is None)


def test_immediate_submission_forces_arrival_pressure_sign(canonical):
    # a large holding cost collapses the busy-estimate wait to zero, so
    # v1 = -c_d exactly and A reduces to lam * theta / mu
    coeffs = coefficients(canonical, 9.0)
    assert coeffs.v1 == -canonical.c_d
    assert coeffs.tau_10 == WaitDecision(0.0)
    assert coeffs.a_coef == pytest.approx(canonical.lam * 9.0 / canonical.mu, rel=1e-14)
    assert coeffs.gamma == 0.0


def test_coefficients_match_oracle_derived_v1(canonical):
    theta = 0.9775522192940116  # converged root for this system
    v1_oracle = grid_solve_v1(canonical, theta)
    coeffs = coefficients(canonical, theta)
    m = canonical.machine
    a_oracle = canonical.lam * theta / canonical.mu - (canonical.c_d + v1_oracle) * m.alpha / m.rho
    b_oracle = canonical.c_d + (m.rho * canonical.r_s + canonical.mu * v1_oracle) / (
        m.rho + canonical.mu
    )
    assert coeffs.a_coef == pytest.approx(a_oracle, abs=1e-8)
    assert coeffs.b_coef == pytest.approx(b_oracle, abs=1e-8)


# --- the optimal wait map ---------------------------------------------------


def test_threshold_regime_waits(threshold_solution):
    _, coeffs = threshold_solution
    assert coeffs.a_coef > 0
    gamma = coeffs.gamma
    assert gamma > 0
    for u in (0.1, 0.5, 2.0, 10.0):
        assert optimal_wait(coeffs, 0, u) == WaitDecision(0.0)
    for u in (0.1, 0.5, gamma / 2):
        w = optimal_wait(coeffs, 1, u)
        assert w.duration == pytest.approx(gamma - u, rel=1e-12)
    assert optimal_wait(coeffs, 1, gamma).duration == 0.0
    assert optimal_wait(coeffs, 1, gamma + 1.0).duration == 0.0
    # slope -1 below the threshold
    us = np.linspace(0.05, gamma * 0.95, 9)
    waits = np.array([optimal_wait(coeffs, 1, float(u)).duration for u in us])
    slopes = np.diff(waits) / np.diff(us)
    assert np.abs(slopes + 1.0).max() < 1e-9


def test_switching_regime_waits(canonical_solution):
    _, coeffs = canonical_solution
    assert coeffs.a_coef <= 0
    kappa = coeffs.kappa
    assert kappa > 0
    for u in (0.05, 1.0, 5.0):
        assert optimal_wait(coeffs, 1, u).is_never
    assert optimal_wait(coeffs, 0, kappa / 2) == WaitDecision(0.0)
    assert optimal_wait(coeffs, 0, 2 * kappa).is_never
    assert optimal_wait(coeffs, 0, kappa) == WaitDecision(0.0)  # boundary submits


def test_wait_at_age_zero_uses_solved_values(canonical_solution, threshold_solution):
    for _, coeffs in (canonical_solution, threshold_solution):
        assert optimal_wait(coeffs, 0, 0.0) == WaitDecision(0.0)
        assert optimal_wait(coeffs, 1, 0.0) == coeffs.tau_10
    # in the threshold regime the stored maximizer and the closed form agree
    _, coeffs = threshold_solution
    assert coeffs.tau_10.duration == pytest.approx(coeffs.gamma, abs=1e-6)


def test_optimal_wait_validates_inputs(canonical_solution):
    _, coeffs = canonical_solution
    with pytest.raises(ValueError):
        optimal_wait(coeffs, 2, 1.0)
    with pytest.raises(ValueError):
        optimal_wait(coeffs, 0, -1.0)


# --- the one-step value recursion -------------------------------------------


def test_recursion_fresh_free_immediate(canonical):
    assert value_recursion(canonical, 0.8, 0, 0.0, WaitDecision(0.0), 1.23, -4.5) == canonical.r_s


def test_recursion_fresh_busy_immediate(canonical):
    got = value_recursion(canonical, 0.8, 1, 0.0, WaitDecision(0.0), 9.9, 7.7)
    assert got == -canonical.c_d


def test_recursion_against_episodic_rollout(canonical):
    rng = np.random.default_rng(5)
    cases = [
        (0, 0.7, WaitDecision(1.3)),
        (1, 2.0, WaitDecision(0.4)),
        (1, 0.3, NEVER),
    ]
    v0, v1 = 2.0, -0.6
    for i, u, tau in cases:
        want = value_recursion(canonical, 0.8, i, u, tau, v0, v1)
        mean, stderr = mc_value_recursion(canonical, 0.8, i, u, tau, v0, v1, 1_000_000, rng)
        assert abs(mean - want) <= 3.0 * stderr, (i, u, tau, mean, want, stderr)


# --- expected value under the optimal policy --------------------------------


def test_expected_value_free_estimate_threshold_formula(threshold_solution, threshold_sys):
    _, coeffs = threshold_solution
    ev0, _, _ = expected_value(threshold_sys, coeffs)
    m = threshold_sys.machine
    lam, mu, r_s, c_d = threshold_sys.lam, threshold_sys.mu, threshold_sys.r_s, threshold_sys.c_d
    want = (m.beta * r_s - m.alpha * c_d) / m.rho + m.alpha * (mu + lam) * (r_s + c_d) / (
        m.rho * (m.rho + mu + lam)
    )
    assert ev0 == pytest.approx(want, rel=1e-12)


def test_expected_value_threshold_display_terms(threshold_solution, threshold_sys):
    # with an interior threshold the compact a0/a1/a2 form is exact
    _, coeffs = threshold_solution
    _, ev1, terms = expected_value(threshold_sys, coeffs)
    m = threshold_sys.machine
    lam, mu = threshold_sys.lam, threshold_sys.mu
    base = (m.beta * threshold_sys.r_s - m.alpha * threshold_sys.c_d) / m.rho
    display = (
        base
        - terms.a0
        + terms.a1 * math.exp(-mu * coeffs.gamma)
        - terms.a2 * math.exp(-(lam + mu) * coeffs.gamma)
    )
    assert ev1 == pytest.approx(display, rel=1e-9)
    assert terms.a1 > 0 and terms.a2 > 0  # share the sign of A > 0


def test_expected_value_switching_displays(canonical_solution, canonical):
    _, coeffs = canonical_solution
    ev0, ev1, terms = expected_value(canonical, coeffs)
    m = canonical.machine
    lam, mu, r_s, c_d = canonical.lam, canonical.mu, canonical.r_s, canonical.c_d
    lm = lam + mu
    base = (m.beta * r_s - m.alpha * c_d) / m.rho
    a = coeffs.a_coef
    want0 = base + terms.b0_term - a * m.rho * math.exp(-lm * coeffs.kappa) / (m.rho + lm)
    want1 = base - a - m.beta * mu * lm * (r_s - coeffs.v1) / (
        m.rho * (m.rho + mu) * (m.rho + lm)
    )
    assert ev0 == pytest.approx(want0, rel=1e-9)
    assert ev1 == pytest.approx(want1, rel=1e-9)
    assert terms.a1 <= 0 and terms.a2 <= 0  # share the sign of A <= 0


def test_expected_value_matches_age_quadrature_both_regimes():
    rng = np.random.default_rng(17)
    found = {True: 0, False: 0}
    draws = 0
    while (found[True] < 5 or found[False] < 5) and draws < 300:
        draws += 1
        sys_p = random_system(rng)
        theta = float(rng.uniform(0.01, 6.0))
        coeffs = coefficients(sys_p, theta)
        regime = coeffs.a_coef > 0
        if found[regime] >= 8:
            continue
        found[regime] += 1
        for i in (0, 1):
            ev = expected_value(sys_p, coeffs)[i]
            assert ev == pytest.approx(quad_expected_value(sys_p, coeffs, i), abs=1e-7)
    assert found[True] >= 5 and found[False] >= 5


def test_expected_value_exact_at_clamped_threshold(canonical):
    # a steep holding cost clamps the threshold age to zero: everyone submits
    # immediately, and the expectation must still match the quadrature oracle
    coeffs = coefficients(canonical, 9.0)
    assert coeffs.a_coef > 0 and coeffs.gamma == 0.0
    for i in (0, 1):
        ev = expected_value(canonical, coeffs)[i]
        assert ev == pytest.approx(quad_expected_value(canonical, coeffs, i), abs=1e-9)
    # closed form of the zero-threshold case, integrated directly
    m = canonical.machine
    lam, mu, r_s, c_d = canonical.lam, canonical.mu, canonical.r_s, canonical.c_d
    want = (m.beta * r_s - m.alpha * c_d) / m.rho - m.beta * (r_s + c_d) * (lam + mu) / (
        m.rho * (m.rho + mu + lam)
    )
    assert expected_value(canonical, coeffs)[1] == pytest.approx(want, rel=1e-12)


# --- acceptance-state probabilities -----------------------------------------


def test_absorption_chain_structure(canonical):
    chain = absorbing_chain(canonical)
    sub, psi = chain.sub_generator, chain.absorption_rates
    off = sub - np.diag(np.diag(sub))
    assert (off >= 0).all()
    assert np.allclose(np.diag(sub), -(off.sum(axis=1) + psi.sum(axis=1)))
    # each transient state feeds exactly one acceptance state, at rate lam
    assert ((psi > 0).sum(axis=1) == 1).all()
    assert psi.max() == canonical.lam


@given(sys_p=systems)
@settings(max_examples=40, deadline=None)
def test_absorption_probabilities_sum_to_one(sys_p):
    p = absorption_probabilities(sys_p)
    assert 0.0 <= p.p0 <= 1.0 and 0.0 <= p.p1 <= 1.0
    assert p.p0 + p.p1 == pytest.approx(1.0, abs=1e-10)


def test_absorption_rare_sampling_limit():
    sys_p = _system(0.2, 0.5, 1e-9, 0.3, 2.0, 3.0)
    p = absorption_probabilities(sys_p)
    assert p.p1 == pytest.approx(1.0, abs=1e-6)


def test_absorption_independent_of_rewards(canonical):
    p_base = absorption_probabilities(canonical)
    p_alt = absorption_probabilities(dataclasses.replace(canonical, r_s=9.0, c_d=0.0))
    assert p_base == p_alt


def test_absorption_matches_monte_carlo(canonical):
    rng = np.random.default_rng(23)
    p = absorption_probabilities(canonical)
    n = 400_000
    p0_hat, p1_hat = mc_absorption(canonical, n, rng)
    sigma = math.sqrt(p.p0 * (1 - p.p0) / n)
    assert abs(p0_hat - p.p0) <= 3 * sigma
    assert p0_hat + p1_hat == 1.0


# --- the linearized objective and its root ----------------------------------


def test_j_theta_sign_brackets_the_root(canonical, canonical_solution):
    theta_star, _ = canonical_solution
    assert j_theta(canonical, theta_star - 0.01) > 0
    assert j_theta(canonical, theta_star + 0.01) < 0
    assert j_theta(canonical, 1e-6) > 0


def test_j_theta_strictly_decreasing():
    rng = np.random.default_rng(29)
    for _ in range(6):
        sys_p = random_system(rng)
        grid = np.sort(rng.uniform(0.01, 4.0, size=6))
        vals = [j_theta(sys_p, float(t)) for t in grid]
        assert all(a > b for a, b in zip(vals, vals[1:]))


def test_j_theta_rejects_nonpositive_theta(canonical):
    with pytest.raises(ValueError):
        j_theta(canonical, 0.0)


def test_solve_theta_star_root_quality(canonical, canonical_solution):
    theta_star, coeffs = canonical_solution
    assert 0.0 < theta_star <= canonical.r_s
    assert abs(j_theta(canonical, theta_star)) <= 1e-9
    assert coeffs.theta == theta_star


def test_solve_theta_star_random_systems_stay_bounded():
    rng = np.random.default_rng(31)
    for _ in range(5):
        sys_p = random_system(rng)
        theta_star, _ = solve_theta_star(sys_p, tol=1e-9)
        assert 0.0 < theta_star <= sys_p.r_s + 1e-12


def test_solve_theta_star_rejects_bad_tol(canonical):
    with pytest.raises(ValueError):
        solve_theta_star(canonical, tol=0.0)


def test_interior_maximizer_satisfies_stationarity(threshold_solution, threshold_sys):
    _, coeffs = threshold_solution
    tau = coeffs.tau_10.duration
    assert tau > 0
    m = threshold_sys.machine
    mu = threshold_sys.mu
    residual = mu * coeffs.a_coef - (m.rho + mu) * coeffs.b1 * math.exp(-m.rho * tau)
    assert abs(residual) <= 1e-6


def test_policy_continuity_across_regime_boundary(canonical):
    # locate the theta where the regime flips and probe both sides
    lo, hi = 0.5, 2.0
    assert coefficients(canonical, lo).a_coef < 0 or True
    a = lambda th: coefficients(canonical, th).a_coef
    a_lo, a_hi = a(lo), a(hi)
    assert a_lo < 0 < a_hi
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if a(mid) > 0:
            hi = mid
        else:
            lo = mid
    c_neg = coefficients(canonical, lo)
    c_pos = coefficients(canonical, hi)
    assert -1e-5 < c_neg.a_coef <= 0 < c_pos.a_coef < 1e-5
    # vanishing |A| pushes both critical ages out beyond any fixed horizon
    assert c_pos.gamma > 10.0
    assert c_neg.kappa > 10.0
    for u in (0.5, 2.0, 5.0):
        w_pos = optimal_wait(c_pos, 1, u)
        assert w_pos.duration == pytest.approx(c_pos.gamma - u, rel=1e-9)
        assert optimal_wait(c_neg, 1, u).is_never
        assert optimal_wait(c_pos, 0, u) == WaitDecision(0.0)
        assert optimal_wait(c_neg, 0, u) == WaitDecision(0.0)


def test_convergence_error_carries_bracket():
    err = ConvergenceError("nope", (1.0, 2.0))
    assert err.bracket == (1.0, 2.0)
    assert "1.0" in str(err)
