"""
Subgroup estimates from patient-level estimates.

Point estimates average theta_hat within a subgroup; standard errors come from
augmented inverse-propensity pseudo-outcomes, so observed outcomes enter only the
uncertainty, never the point estimate.
"""

import logging
from typing import Tuple

import numpy as np
from scipy import stats

from shared.data import TrialDataset
from shared.errors import DegenerateProbabilityError, EmptySubgroupError, InsufficientSubgroupError
from Stages.workers.ple_forest import PleTable

logger = logging.getLogger(__name__)


def subgroup_rows(assignment: np.ndarray, k: int) -> np.ndarray:
    """Row mask of subgroup k; k = 0 selects every row."""
    assignment = np.asarray(assignment)
    return np.ones(assignment.shape[0], dtype=bool) if k == 0 else assignment == k


def ple_average(ple: PleTable, assignment: np.ndarray, k: int) -> float:
    """Mean of theta_hat over subgroup k (k = 0: all patients)."""
    mask = subgroup_rows(assignment, k)
    if not mask.any():
        raise EmptySubgroupError(k)
    return float(ple.theta_hat[mask].mean())


def pseudo_outcomes(ds: TrialDataset, ple: PleTable) -> np.ndarray:
    """
    Augmented inverse-propensity pseudo-outcomes.

    y*_i = a_i (y_i - mu1_i) / pi_i - (1 - a_i)(y_i - mu0_i) / (1 - pi_i) + (mu1_i - mu0_i)
    """
    pi = ple.pi_hat
    if np.any(pi <= 0.0) or np.any(pi >= 1.0):
        raise DegenerateProbabilityError("treatment probability estimate must lie strictly inside (0, 1)")
    a, y = ds.a, ds.y
    return a * (y - ple.mu1_hat) / pi - (1 - a) * (y - ple.mu0_hat) / (1 - pi) + (ple.mu1_hat - ple.mu0_hat)


def arm_pseudo_outcomes(ds: TrialDataset, ple: PleTable, arm: int) -> np.ndarray:
    """Pseudo-outcomes whose mean targets E(Y | A = arm) within a subgroup."""
    pi = ple.pi_hat
    if np.any(pi <= 0.0) or np.any(pi >= 1.0):
        raise DegenerateProbabilityError("treatment probability estimate must lie strictly inside (0, 1)")
    if arm == 1:
        return ds.a * (ds.y - ple.mu1_hat) / pi + ple.mu1_hat
    return (1 - ds.a) * (ds.y - ple.mu0_hat) / (1 - pi) + ple.mu0_hat


def se_ple(y_star: np.ndarray, theta_tilde: float, assignment: np.ndarray, k: int) -> float:
    """SE(theta_tilde_k) = sqrt(sum_{i in S_k} (y*_i - theta_tilde_k)^2) / n_k."""
    mask = subgroup_rows(assignment, k)
    n_k = int(mask.sum())
    if n_k < 2:
        raise InsufficientSubgroupError(k, n_k, 2)
    resid = np.asarray(y_star)[mask] - theta_tilde
    return float(np.sqrt(resid @ resid) / n_k)


def t_interval(estimate: float, se: float, n_k: int, alpha: float = 0.05) -> Tuple[float, float]:
    """estimate -/+ t_{n_k - 1, 1 - alpha/2} * se."""
    if n_k < 2:
        raise InsufficientSubgroupError(-1, n_k, 2)
    half = stats.t.ppf(1 - alpha / 2, n_k - 1) * se
    return float(estimate - half), float(estimate + half)


def arm_estimate(ds: TrialDataset, ple: PleTable, assignment: np.ndarray, k: int, arm: int) -> Tuple[float, float]:
    """Arm-specific PLE mean of subgroup k with its pseudo-outcome SE."""
    mask = subgroup_rows(assignment, k)
    if not mask.any():
        raise EmptySubgroupError(k)
    fitted = ple.mu1_hat if arm == 1 else ple.mu0_hat
    estimate = float(fitted[mask].mean())
    se = se_ple(arm_pseudo_outcomes(ds, ple, arm), estimate, assignment, k)
    return estimate, se
