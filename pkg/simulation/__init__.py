"""
Simulated trials with known subgroup truth and the study harness built on them.

Responsibilities:
- Correlated covariates, continuous and binary outcome models, null / 4-subgroup settings
- Monte Carlo truth for arbitrary subgroup rules
- Simulation study (see ``simulation.study``)
"""

from .generator import (
    PREDICTIVE,
    PROGNOSTIC,
    SimScenario,
    generate_covariates,
    generate_outcome,
    generate_trial,
    outcome_mean,
    population_ate,
    population_cell_prevalences,
    true_benefit,
    true_effect,
    true_subgroup_labels,
    true_subgroup_partition,
    write_simulation,
)
from .oracle import TruthOracle, oracle_true_subgroup_effect, scenario_ate

__all__ = [
    'SimScenario',
    'PREDICTIVE',
    'PROGNOSTIC',
    'generate_covariates',
    'generate_outcome',
    'generate_trial',
    'outcome_mean',
    'true_effect',
    'true_benefit',
    'true_subgroup_partition',
    'true_subgroup_labels',
    'population_cell_prevalences',
    'population_ate',
    'write_simulation',
    'TruthOracle',
    'oracle_true_subgroup_effect',
    'scenario_ate',
]
