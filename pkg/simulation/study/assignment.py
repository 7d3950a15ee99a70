"""Treatment-assignment rules compared by the simulation study."""

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import statsmodels.api as sm
from statsmodels.stats.proportion import proportions_ztest

from shared.data import OutcomeFamily, TrialDataset
from shared.models import SubgroupEstimate
from Stages.workers.param_infer import tail_probability

logger = logging.getLogger(__name__)

ADJUSTMENT_COVARIATES = ("X1", "X2", "X3")


@dataclass(frozen=True)
class StandardDecision:
    estimate: float
    p_value: float
    treat_all: bool  # True = everyone receives the test drug


def standard_practice_assign(
    ds: TrialDataset,
    family: OutcomeFamily,
    alpha: float = 0.05,
    adjusted: bool = False,
) -> StandardDecision:
    """
    Test the overall treatment effect; p < alpha treats everyone with the test drug.

    Args:
        ds: Trial dataset
        family: Continuous (least squares) or binary (two-proportion z-test / logistic)
        alpha: Test level
        adjusted: Adjust for X1-X3

    Returns:
        StandardDecision
    """
    a = ds.a
    if adjusted:
        columns = [ds.column_index(name) for name in ADJUSTMENT_COVARIATES]
        exog = sm.add_constant(np.column_stack([a, ds.x[:, columns]]), has_constant="add")
        if OutcomeFamily(family) is OutcomeFamily.BINARY:
            model = sm.Logit(ds.y, exog).fit(disp=0)
        else:
            model = sm.OLS(ds.y, exog).fit()
        estimate, p_value = float(model.params[1]), float(model.pvalues[1])
    elif OutcomeFamily(family) is OutcomeFamily.BINARY:
        counts = np.array([ds.y[a == 1].sum(), ds.y[a == 0].sum()])
        nobs = np.array([np.sum(a == 1), np.sum(a == 0)])
        _, p_value = proportions_ztest(counts, nobs)
        estimate = float(counts[0] / nobs[0] - counts[1] / nobs[1])
        p_value = float(p_value) if np.isfinite(p_value) else 1.0
    else:
        model = sm.OLS(ds.y, sm.add_constant(a, has_constant="add")).fit()
        estimate, p_value = float(model.params[1]), float(model.pvalues[1])
    return StandardDecision(estimate=estimate, p_value=p_value, treat_all=p_value < alpha)


def _benefit_probability(estimate: SubgroupEstimate, threshold: float, direction: str) -> float:
    sign = ">" if direction == "greater" else "<"
    stored = estimate.probability(threshold, sign)
    if stored is not None:
        return stored
    if estimate.posterior_mean is None or estimate.posterior_var is None:
        return 0.0
    return tail_probability(estimate.posterior_mean, estimate.posterior_var, threshold, sign)


def prism_assign(
    estimates: Sequence[SubgroupEstimate],
    assignment: np.ndarray,
    cutoff: float,
    threshold: float = 0.0,
    direction: str = "greater",
) -> np.ndarray:
    """
    Per-patient decision: the test drug iff the patient's subgroup has posterior
    probability of benefit above ``cutoff``.

    Args:
        estimates: Subgroup estimates k = 1..K
        assignment: Subgroup index per patient
        cutoff: Posterior-probability cutoff in (0, 1)
        threshold: Effect comparator c
        direction: "greater" (benefit = theta > c) or "less"

    Returns:
        Boolean array, True = test drug
    """
    assignment = np.asarray(assignment)
    treat = np.zeros(assignment.shape[0], dtype=bool)
    for estimate in estimates:
        if _benefit_probability(estimate, threshold, direction) > cutoff:
            treat[assignment == estimate.k] = True
    return treat


def ci_assign(
    estimates: Sequence[SubgroupEstimate],
    assignment: np.ndarray,
    threshold: float = 0.0,
    direction: str = "greater",
) -> np.ndarray:
    """Test drug iff the subgroup interval lies entirely on the benefit side of ``threshold``."""
    assignment = np.asarray(assignment)
    treat = np.zeros(assignment.shape[0], dtype=bool)
    for estimate in estimates:
        if estimate.ci_low is None or estimate.ci_high is None:
            continue
        beneficial = estimate.ci_low > threshold if direction == "greater" else estimate.ci_high < threshold
        if beneficial:
            treat[assignment == estimate.k] = True
    return treat
