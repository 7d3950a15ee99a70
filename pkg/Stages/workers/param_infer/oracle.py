"""Oracle benchmark: estimates within the true subgroups of a simulated trial."""

import logging
from typing import Dict, List, Optional

import numpy as np

from shared.data import OutcomeFamily, TrialDataset
from shared.models import SubgroupEstimate

from .glm import arm_summaries, fit_treatment_effect
from .risk_difference import miettinen_nurminen_rd

logger = logging.getLogger(__name__)


def oracle_estimate(
    ds: TrialDataset,
    partition: np.ndarray,
    family: OutcomeFamily,
    alpha: float = 0.05,
    labels: Optional[Dict[int, str]] = None,
) -> List[SubgroupEstimate]:
    """
    Fit the treatment effect within each true subgroup.

    Args:
        ds: Simulated trial
        partition: True subgroup label per row (1..G); a single label means no subgroups
        family: Continuous -> OLS per subgroup, binary -> Miettinen-Nurminen risk difference
        alpha: 1 - CI level
        labels: Optional rule text per label

    Returns:
        One estimate per true subgroup; a single "Overall" estimate (k = 0) when G = 1
    """
    partition = np.asarray(partition)
    groups = [int(g) for g in np.unique(partition)]
    labels = labels or {}
    if len(groups) == 1:
        keyed = [(0, np.ones(ds.n, dtype=bool), "Overall")]
    else:
        keyed = [(g, partition == g, labels.get(g, f"True subgroup {g}")) for g in groups]

    estimates = []
    for k, mask, rule in keyed:
        y, a = ds.y[mask], ds.a[mask]
        summaries = arm_summaries(y, a)
        if OutcomeFamily(family) is OutcomeFamily.BINARY:
            n1, n0 = summaries[1].n, summaries[0].n
            if n1 == 0 or n0 == 0:
                estimates.append(SubgroupEstimate(
                    k=k, rule=rule, n_k=int(mask.sum()), estimator="miettinen_nurminen",
                    arm_summaries=summaries, flag="single_arm",
                ))
                continue
            result = miettinen_nurminen_rd(int(y[a == 1].sum()), n1, int(y[a == 0].sum()), n0, alpha)
            theta, se, low, high = result.rd, None, result.ci_low, result.ci_high
            estimator = "miettinen_nurminen"
            flag = None
        else:
            fit = fit_treatment_effect(y, a, OutcomeFamily.CONTINUOUS, alpha)
            theta, se, low, high, flag = fit.estimate, fit.se, fit.ci_low, fit.ci_high, fit.flag
            estimator = "ols"
        estimates.append(SubgroupEstimate(
            k=k, rule=rule, n_k=int(mask.sum()), estimator=estimator,
            theta_tilde=theta, se=se, t_ci_low=low, t_ci_high=high, ci_low=low, ci_high=high,
            arm_summaries=summaries, flag=flag,
        ))
    logger.debug(f"Oracle: {len(estimates)} true subgroup estimate(s)")
    return estimates
