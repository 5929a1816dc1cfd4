import pytest

from mm_revenue import MachineParams, SystemParams, solve_theta_star


@pytest.fixture(scope="session")
def canonical():
    """Reference system; its optimum sits in the switching regime."""
    return SystemParams(machine=MachineParams(0.2, 0.5), mu=0.5, lam=0.3, r_s=2.0, c_d=3.0)


@pytest.fixture(scope="session")
def canonical_solution(canonical):
    return solve_theta_star(canonical)


@pytest.fixture(scope="session")
def threshold_sys():
    """Same machine with a richer reward; its optimum is a threshold policy."""
    return SystemParams(machine=MachineParams(0.2, 0.5), mu=0.5, lam=0.3, r_s=5.0, c_d=3.0)


@pytest.fixture(scope="session")
def threshold_solution(threshold_sys):
    return solve_theta_star(threshold_sys)
