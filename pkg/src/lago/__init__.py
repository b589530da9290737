"""Toolkit for multi-stage learn-as-you-go intervention trials with
continuous outcomes: estimating-equation fits with sandwich variance,
cost-minimizing package recommendations, confidence sets/bands, and
simulation of multi-stage / factorial / screening-then-RCT designs."""

from .data import DatasetError, TrialDataset, load_trial_csv
from .estimation import (FitResult, TestResult, adjusted_group_test, fit_gee,
                         two_sample_means_test, wald_component_test)
from .inference import (ConfidenceBands, ConfidenceSet, MeanInterval,
                        confidence_bands, confidence_set, mean_ci)
from .links import Link
from .model import (CenterCovariates, ComponentBounds, CostFunction,
                    InterventionPackage, ParameterVector, TargetSpec, cost,
                    mean_response)
from .optimizer import (Recommendation, project_power, recommend, recommend_grid,
                        recommend_linear, recommend_with_power)

__all__ = [
    "CenterCovariates", "ComponentBounds", "ConfidenceBands", "ConfidenceSet",
    "CostFunction", "DatasetError", "FitResult", "InterventionPackage", "Link",
    "MeanInterval", "ParameterVector", "Recommendation", "TargetSpec",
    "TestResult", "TrialDataset", "adjusted_group_test", "confidence_bands",
    "confidence_set", "cost", "fit_gee", "load_trial_csv", "mean_ci",
    "mean_response", "project_power", "recommend", "recommend_grid",
    "recommend_linear", "recommend_with_power", "two_sample_means_test",
    "wald_component_test",
]

__version__ = "0.1.0"
