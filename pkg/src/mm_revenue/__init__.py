"""Revenue-maximizing job submission for a two-state Markov machine.

A resource allocator holds at most one job, learns the machine state only
through Poisson-timed queries, and chooses how long to wait before each
submission.  This package computes the closed-form optimal waiting policy,
the optimal revenue per job theta*, and validates both against an
independent event-driven simulation alongside three benchmark policies.
"""

from .ctmc import (
    NEVER,
    SUBMIT_NOW,
    MachineParams,
    TransitionMatrix,
    WaitDecision,
    sampled_transition_weight,
    transition_matrix,
)
from .policies import POLICIES, REJECT, EstimateState, Reject, decide, make_decider, map_estimate
from .sim import AcceptanceSample, SimConfig, SimStats, estimate_age_at_acceptance, run
from .solver import (
    AbsorbingChain,
    AbsorptionProbabilities,
    ClosedFormTerms,
    ConvergenceError,
    PolicyCoefficients,
    SystemParams,
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
from .sweep import CSV_HEADER, ExperimentSpec, SweepError, load_experiment_spec, run_sweep

__version__ = "0.1.0"

__all__ = [
    "MachineParams",
    "TransitionMatrix",
    "WaitDecision",
    "NEVER",
    "SUBMIT_NOW",
    "transition_matrix",
    "sampled_transition_weight",
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
    "POLICIES",
    "EstimateState",
    "Reject",
    "REJECT",
    "decide",
    "make_decider",
    "map_estimate",
    "SimConfig",
    "SimStats",
    "AcceptanceSample",
    "run",
    "estimate_age_at_acceptance",
    "ExperimentSpec",
    "SweepError",
    "CSV_HEADER",
    "load_experiment_spec",
    "run_sweep",
]
