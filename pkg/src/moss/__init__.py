"""Sparse decision-rule sets that trade in-sample stability against ridge loss.

The main entry points are re-exported here; see the submodules for details.
"""

from .data import (CandidatePool, Dataset, DecisionRule, Direction, ParetoFrontier, PredictionMatrix,
                   RuleModel, Solution, Split, build_prediction_matrix, load_dataset, rule_predict)
from .errors import MossError, SolverError
from .evaluation import ExperimentConfig, ExperimentReport, r_squared, run_cv, run_sensitivity
from .heuristic import CDConfig, fit_target_k, solve_cd
from .objective import grad_h2, h1, h2
from .rules import ForestConfig, generate_pool
from .solver import compute_pareto, epsilon_sequence, solve_fixed_epsilon, stability_select_topk
from .stability import empirical_stability, pairwise_similarity

__version__ = "0.1.0"

__all__ = [
    "CDConfig", "CandidatePool", "Dataset", "DecisionRule", "Direction", "ExperimentConfig",
    "ExperimentReport", "ForestConfig", "MossError", "ParetoFrontier", "PredictionMatrix", "RuleModel",
    "Solution", "SolverError", "Split", "build_prediction_matrix", "compute_pareto", "empirical_stability",
    "epsilon_sequence", "fit_target_k", "generate_pool", "grad_h2", "h1", "h2", "load_dataset",
    "pairwise_similarity", "r_squared", "rule_predict", "run_cv", "run_sensitivity", "solve_cd",
    "solve_fixed_epsilon", "stability_select_topk",
]
