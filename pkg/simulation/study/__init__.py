"""
Simulation study: compares MOB, PRISM variants, the oracle and standard practice
across simulated scenarios.

Responsibilities:
- Seeded replicates over a family x setting x noise grid
- Size-weighted bias, MSE and coverage against oracle truths
- Variable-selection rates and treatment-assignment accuracy / PPV / NPV
- Tidy CSV, JSON summary and SVG charts
"""

from .assignment import StandardDecision, ci_assign, prism_assign, standard_practice_assign
from .harness import ReplicateRecord, StudyResult, run_replicate, run_study, write_study_outputs
from .metrics import (
    ClassificationMetrics,
    EstimationMetrics,
    SubgroupRecord,
    bias_mse_coverage,
    classification_metrics,
    estimation_metrics,
    selection_rates,
    variable_selection_rates,
)

__all__ = [
    'run_study',
    'run_replicate',
    'write_study_outputs',
    'StudyResult',
    'ReplicateRecord',
    'SubgroupRecord',
    'EstimationMetrics',
    'ClassificationMetrics',
    'estimation_metrics',
    'bias_mse_coverage',
    'selection_rates',
    'variable_selection_rates',
    'classification_metrics',
    'StandardDecision',
    'standard_practice_assign',
    'prism_assign',
    'ci_assign',
]
