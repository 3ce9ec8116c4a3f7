"""Network inference from interventional time-course data with causal DBNs."""

from .data import (
    Direction,
    InterventionDesign,
    InterventionKind,
    InterventionScheme,
    NetworkPrior,
    TimeCourseDataset,
    load_dataset,
    load_intervention_design,
    load_prior_network,
)
from .design import ParentSet, build_design, orthogonalize
from .evaluate import descendancy_sets, paired_t_test, roc_descendancy, roc_edges
from .inference import edge_probabilities, fitted_values, infer_network, infer_node
from .likelihood import log_marginal_likelihood, log_model_prior
from .simulate import SimulationConfig, WeightedGraph, sample_coefficients, simulate_dataset

__version__ = "0.1.0"
