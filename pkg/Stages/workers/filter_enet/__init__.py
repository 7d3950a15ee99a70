"""
Filter Worker - Step 1 Covariate Screening

Fits an elastic net of the outcome on the covariates (treatment excluded) and keeps
the covariates with a nonzero coefficient at the cross-validated lambda.

Responsibilities:
- Regularization path by coordinate descent (gaussian, or binomial via IRLS)
- K-fold cross-validation with the minimum-deviance lambda rule
- Filter report (per-covariate coefficient, kept/dropped flag)

Input: TrialDataset
Output: FilteredView (q <= p retained covariates, possibly none)
"""

from .elastic_net import ElasticNetFit, ElasticNetSolution, fit_elastic_net, kkt_violation, lambda_grid, solve_elastic_net
from .filter_stage import filter_covariates, filter_report, screen_covariates

__all__ = [
    'ElasticNetFit',
    'ElasticNetSolution',
    'fit_elastic_net',
    'solve_elastic_net',
    'lambda_grid',
    'kkt_violation',
    'filter_covariates',
    'screen_covariates',
    'filter_report',
]
