"""
Within-subgroup regression of the outcome on treatment.

Continuous outcomes use ordinary least squares of y on (1, a), whose slope is the
difference of arm means with the classical SE. Binary outcomes use the risk
difference with its Wald SE. Also hosts the descriptive univariate subgroup table.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np
import statsmodels.api as sm
from scipy import stats

from shared.data import CovariateKind, OutcomeFamily, TrialDataset
from shared.models import ArmSummary

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GlmFit:
    """Treatment-effect fit for one set of rows; estimate is None when an arm is missing."""
    n: int
    estimate: Optional[float]
    se: Optional[float]
    ci_low: Optional[float]
    ci_high: Optional[float]
    p_value: Optional[float] = None
    flag: Optional[str] = None

    @property
    def usable(self) -> bool:
        return self.estimate is not None and self.se is not None and self.se > 0


def arm_summaries(y: np.ndarray, a: np.ndarray) -> List[ArmSummary]:
    out = []
    for arm in (0, 1):
        values = y[a == arm]
        out.append(ArmSummary(arm=arm, n=int(values.size), mean=float(values.mean()) if values.size else None))
    return out


def fit_treatment_effect(y: np.ndarray, a: np.ndarray, family: OutcomeFamily, alpha: float = 0.05) -> GlmFit:
    """
    Fit y ~ a on one set of rows.

    Args:
        y: Outcomes
        a: 0/1 treatment
        family: Continuous (OLS) or binary (Wald risk difference)
        alpha: 1 - CI level

    Returns:
        GlmFit; single-arm rows give a flagged fit without estimate
    """
    y = np.asarray(y, dtype=float)
    a = np.asarray(a, dtype=float)
    n = int(y.size)
    n1 = int(a.sum())
    n0 = n - n1
    if n0 == 0 or n1 == 0:
        return GlmFit(n=n, estimate=None, se=None, ci_low=None, ci_high=None, flag="single_arm")

    if OutcomeFamily(family) is OutcomeFamily.BINARY:
        p1 = y[a == 1].mean()
        p0 = y[a == 0].mean()
        rd = float(p1 - p0)
        se = math.sqrt(p1 * (1 - p1) / n1 + p0 * (1 - p0) / n0)
        if se == 0.0:
            return GlmFit(n=n, estimate=rd, se=0.0, ci_low=rd, ci_high=rd, flag="zero_variance")
        z = stats.norm.ppf(1 - alpha / 2)
        p_value = float(2 * stats.norm.sf(abs(rd) / se))
        return GlmFit(n=n, estimate=rd, se=se, ci_low=rd - z * se, ci_high=rd + z * se, p_value=p_value)

    if n < 3:
        diff = float(y[a == 1].mean() - y[a == 0].mean())
        return GlmFit(n=n, estimate=diff, se=None, ci_low=None, ci_high=None, flag="no_residual_df")
    model = sm.OLS(y, sm.add_constant(a, has_constant="add")).fit()
    estimate = float(model.params[1])
    se = float(model.bse[1])
    if not np.isfinite(se) or se == 0.0:
        return GlmFit(n=n, estimate=estimate, se=0.0, ci_low=estimate, ci_high=estimate, flag="zero_variance")
    low, high = model.conf_int(alpha=alpha)[1]
    return GlmFit(
        n=n, estimate=estimate, se=se, ci_low=float(low), ci_high=float(high), p_value=float(model.pvalues[1])
    )


def glm_within_subgroups(
    ds: TrialDataset,
    assignment: np.ndarray,
    family: OutcomeFamily,
    alpha: float = 0.05,
) -> Dict[int, GlmFit]:
    """
    Fit y ~ a within the overall population (k = 0) and every subgroup k = 1..K.

    Returns:
        Mapping k -> GlmFit
    """
    assignment = np.asarray(assignment)
    fits = {0: fit_treatment_effect(ds.y, ds.a, family, alpha)}
    for k in np.unique(assignment):
        mask = assignment == k
        fits[int(k)] = fit_treatment_effect(ds.y[mask], ds.a[mask], family, alpha)
        if fits[int(k)].flag:
            logger.warning(f"GLM subgroup {int(k)}: {fits[int(k)].flag} (n={int(mask.sum())})")
    return fits


# ============================================================================
# UNIVARIATE SUBGROUP TABLE
# ============================================================================

@dataclass(frozen=True)
class UnivariateRow:
    covariate: str
    level: int
    n: int
    mean0: Optional[float]
    mean1: Optional[float]
    fit: GlmFit


def univariate_forest(ds: TrialDataset, family: OutcomeFamily, alpha: float = 0.05) -> List[UnivariateRow]:
    """Observed treatment effect within each level of every binary covariate."""
    rows = []
    for j, name in enumerate(ds.covariate_names):
        if ds.covariate_kinds[j] is not CovariateKind.BINARY:
            continue
        for level in (0, 1):
            mask = ds.x[:, j] == level
            y, a = ds.y[mask], ds.a[mask]
            summaries = arm_summaries(y, a)
            rows.append(UnivariateRow(
                covariate=name,
                level=level,
                n=int(mask.sum()),
                mean0=summaries[0].mean,
                mean1=summaries[1].mean,
                fit=fit_treatment_effect(y, a, family, alpha),
            ))
    logger.debug(f"Univariate table: {len(rows)} rows")
    return rows
