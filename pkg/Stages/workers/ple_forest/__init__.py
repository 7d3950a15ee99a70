"""
PLE Worker - Step 2 Counterfactual Forest

Fits one random forest per treatment arm and cross-predicts both to every patient,
giving per-patient treatment-difference estimates theta_hat = mu1_hat - mu0_hat.

Responsibilities:
- Bagged CART regression forests with per-tree seeds
- Counterfactual predictions (optionally out-of-bag for the patient's own arm)
- Constant fallback when the filter retained no covariates
- Optional PLE dump (CSV)

Input: TrialDataset + FilteredView
Output: PleTable (mu0_hat, mu1_hat, theta_hat, pi_hat)
"""

from .counterfactual import PleTable, counterfactual_ple, write_ple_dump
from .forest import ForestModel, fit_regression_forest

__all__ = ['ForestModel', 'fit_regression_forest', 'PleTable', 'counterfactual_ple', 'write_ple_dump']
