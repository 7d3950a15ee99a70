"""
Parameter Worker - Step 4 Subgroup Estimation

Turns a subgroup partition into point estimates, standard errors, intervals and
posterior probability statements.

Responsibilities:
- PLE averaging with pseudo-outcome standard errors
- Within-subgroup y ~ a fits for the MOB configuration
- Normal prior update centred on the overall estimate
- Miettinen-Nurminen risk-difference intervals and the oracle benchmark
- Pooled estimates for unions of subgroups

Input: TrialDataset + subgroup assignment (+ PleTable)
Output: ParamResult (overall + per-subgroup SubgroupEstimate)
"""

from .bayes import bayes_update, posterior_interval, probability_statements, tail_probability
from .glm import GlmFit, UnivariateRow, fit_treatment_effect, glm_within_subgroups, univariate_forest
from .oracle import oracle_estimate
from .param_stage import ParamResult, combine_subgroups, estimate_subgroups
from .ple_estimates import ple_average, pseudo_outcomes, se_ple, t_interval
from .risk_difference import RiskDifference, miettinen_nurminen_rd, mn_score

__all__ = [
    'ple_average',
    'pseudo_outcomes',
    'se_ple',
    't_interval',
    'bayes_update',
    'posterior_interval',
    'probability_statements',
    'tail_probability',
    'GlmFit',
    'fit_treatment_effect',
    'glm_within_subgroups',
    'UnivariateRow',
    'univariate_forest',
    'RiskDifference',
    'miettinen_nurminen_rd',
    'mn_score',
    'oracle_estimate',
    'ParamResult',
    'estimate_subgroups',
    'combine_subgroups',
]
