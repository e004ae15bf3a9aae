"""Personalized trajectory location privacy under temporal correlations.

Delta-location sets from a Markov mobility model, Hilbert-curve protection
set search, permute-and-flip location perturbation and a Bayesian attacker.
"""

from .grid import GridMap, cell_center, distance, hilbert_ordering
from .mobility import Belief, DeltaSet, delta_location_set, normalize_counts, propagate_prior, surrogate
from .adversary import expected_inference_error, optimal_inference, posterior, prior_weighted_error
from .pls import PLS, PrivacyParams, diameter, satisfies_condition, search_all_pls, search_pls
from .perturbation import (PerturbationModel, closed_form_pmf, dp_ratio_check, exponential_baseline_pmf,
                           pf_exact_pmf, pf_pmf, pf_sample)
from .metrics import privacy_metric, qos_loss, solve_epsilon_for_qos, trajectory_metrics
from .scenario import ScenarioConfig, load_config
from .pipeline import compare_equal_qos, run_trajectory, sweep

__version__ = "0.1.0"
