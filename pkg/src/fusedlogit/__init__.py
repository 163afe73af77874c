"""Logistic models for ordered binary tasks with elastic net and neighbor-fusion penalties."""

from .admm import AdmmState, FitError, FitResult, fit, objective_of_state, residuals
from .bench import (BenchmarkConfig, BenchmarkReport, GridSpec, bayes_risk_estimate,
                    grid_search, l01_error, recovery_distances, run_benchmark)
from .datagen import (CASES, BenchmarkInstance, CaseSpec, case_spec, gen_coefficients,
                      gen_features_correlated, gen_features_independent, gen_labels,
                      make_instance)
from .model import (DifferenceOperator, PenaltyConfig, TaskDataset, classify,
                    difference_apply, mt_objective, predict_proba, sigmoid, task_nll)

__version__ = "0.1.0"
