"""Cooperative D2D spectrum sharing: threshold cooperation policies,
an ascending-price matching auction, and Monte Carlo experiment drivers.
"""

from .channel import (EmpiricalStateSet, PairGains, PairGeometry, Position,
                      RadioParams, RateState, direct_rate,
                      instantaneous_rates, link_gain, relay_rate,
                      sample_state_set, state_set_from_fading)
from .config import ConfigError, build_config, dbm_to_watts, parse_config
from .experiments import (ALGOS, DEFAULT_EPS_VALUES, DEFAULT_N_VALUES,
                          EXPERIMENT_NAMES, AlgoRepResult, ExperimentSpec,
                          rep_rng, run_algo_sweep, run_experiment)
from .matching import (DmaTrace, InvariantViolation, Matching, PayoffMatrix,
                       StabilityReport, demand, deviation_gain,
                       empty_matching, marginal_gap, matching_from_pairs,
                       matching_without_transfer, optimal_assignment,
                       optimal_matching, optimal_value_without,
                       assignment_value, random_matching, run_dma,
                       verify_eps_stable)
from .policy import (PolicyOutcome, ThresholdPolicy, classify_states,
                     coverage_value, evaluate_policy, pair_payoff,
                     solve_policy, solve_threshold_batch,
                     weighted_sum_condition)
from .sim import (FrameMetrics, MetricsSummary, Realization, Scenario,
                  ScenarioConfig, TrainingResult, aggregate_metrics,
                  build_payoff_matrix, closed_loop_metrics, draw_realization,
                  generate_scenario, realize_frame, run_frame_two_timescale,
                  run_mobility, run_one_timescale_restricted, utility_means)

__version__ = "0.1.0"

__all__ = [
    "ALGOS", "AlgoRepResult", "ConfigError", "DEFAULT_EPS_VALUES",
    "DEFAULT_N_VALUES", "DmaTrace", "EXPERIMENT_NAMES", "EmpiricalStateSet",
    "ExperimentSpec", "FrameMetrics", "InvariantViolation", "Matching",
    "MetricsSummary", "PairGains", "PairGeometry", "PayoffMatrix",
    "PolicyOutcome", "Position", "RadioParams", "RateState", "Realization",
    "Scenario", "ScenarioConfig", "StabilityReport", "ThresholdPolicy",
    "TrainingResult", "aggregate_metrics", "assignment_value",
    "build_config", "build_payoff_matrix", "classify_states",
    "closed_loop_metrics", "coverage_value", "dbm_to_watts", "demand",
    "deviation_gain", "direct_rate", "draw_realization", "empty_matching",
    "evaluate_policy", "generate_scenario", "instantaneous_rates",
    "link_gain", "marginal_gap", "matching_from_pairs",
    "matching_without_transfer", "optimal_assignment", "optimal_matching",
    "optimal_value_without", "pair_payoff", "parse_config", "random_matching",
    "realize_frame", "relay_rate", "rep_rng", "run_algo_sweep", "run_dma",
    "run_experiment", "run_frame_two_timescale", "run_mobility",
    "run_one_timescale_restricted", "sample_state_set", "solve_policy",
    "solve_threshold_batch", "state_set_from_fading", "utility_means",
    "verify_eps_stable", "weighted_sum_condition",
]
