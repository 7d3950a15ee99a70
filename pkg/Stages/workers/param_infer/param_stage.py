"""
Step 4 - subgroup estimation.

PLE configurations average theta_hat per subgroup with pseudo-outcome SEs; the MOB
configuration fits y ~ a within each subgroup. Either way each subgroup estimate is
combined with a normal prior centred on the overall estimate.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np

from shared.config import BayesConfig, ParamMethod
from shared.data import OutcomeFamily, TrialDataset
from shared.errors import InsufficientSubgroupError
from shared.models import ArmEstimate, SubgroupEstimate
from Stages.workers.ple_forest import PleTable

from .bayes import bayes_update, posterior_interval, probability_statements
from .glm import GlmFit, arm_summaries, glm_within_subgroups
from .ple_estimates import arm_estimate, ple_average, pseudo_outcomes, se_ple, t_interval

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ParamResult:
    overall: SubgroupEstimate
    subgroups: List[SubgroupEstimate]

    def by_k(self, k: int) -> SubgroupEstimate:
        if k == 0:
            return self.overall
        return next(e for e in self.subgroups if e.k == k)


@dataclass(frozen=True)
class _Prior:
    mean: float
    var: float


def _posterior_fields(
    theta: float,
    se: float,
    prior: Optional[_Prior],
    bayes: BayesConfig,
    n: int,
    k: int,
) -> dict:
    """Posterior mean/var, reported interval and probability statements."""
    var = se ** 2
    flag = None
    if var <= 0:
        logger.warning(f"Subgroup {k}: zero estimated variance, reporting a point mass at {theta:.4g}")
        mean, post_var, flag = theta, 0.0, "zero_variance"
    elif prior is None:
        mean, post_var = theta, var
    elif prior.var <= 0:
        logger.warning(f"Subgroup {k}: overall variance is zero, skipping the prior update")
        mean, post_var, flag = theta, var, "prior_degenerate"
    else:
        mean, post_var = bayes_update(theta, var, prior.mean, prior.var, bayes.gamma_for(n))
    low, high = posterior_interval(mean, post_var, bayes.alpha)
    return {
        "posterior_mean": mean,
        "posterior_var": post_var,
        "ci_low": low,
        "ci_high": high,
        "prob_statements": probability_statements(mean, post_var, bayes.thresholds),
        "flag": flag,
    }


def _ple_estimate(
    k: int,
    rule: str,
    ds: TrialDataset,
    ple: PleTable,
    y_star: np.ndarray,
    assignment: np.ndarray,
    prior: Optional[_Prior],
    bayes: BayesConfig,
) -> SubgroupEstimate:
    mask = np.ones(ds.n, dtype=bool) if k == 0 else assignment == k
    n_k = int(mask.sum())
    theta = ple_average(ple, assignment, k)
    summaries = arm_summaries(ds.y[mask], ds.a[mask])
    if n_k < 2:
        raise InsufficientSubgroupError(k, n_k, 2)
    se = se_ple(y_star, theta, assignment, k)
    t_low, t_high = t_interval(theta, se, n_k, bayes.alpha)
    arms = []
    for arm in (0, 1):
        estimate, arm_se = arm_estimate(ds, ple, assignment, k, arm)
        arms.append(ArmEstimate(arm=arm, estimate=estimate, se=arm_se))
    return SubgroupEstimate(
        k=k, rule=rule, n_k=n_k, estimator="ple", theta_tilde=theta, se=se,
        t_ci_low=t_low, t_ci_high=t_high, arm_summaries=summaries, arm_estimates=arms,
        **_posterior_fields(theta, se, prior, bayes, ds.n, k),
    )


def _glm_estimate(
    k: int,
    rule: str,
    ds: TrialDataset,
    fit: GlmFit,
    assignment: np.ndarray,
    prior: Optional[_Prior],
    bayes: BayesConfig,
) -> SubgroupEstimate:
    mask = np.ones(ds.n, dtype=bool) if k == 0 else assignment == k
    base = dict(
        k=k, rule=rule, n_k=int(mask.sum()), estimator="glm",
        theta_tilde=fit.estimate, se=fit.se, t_ci_low=fit.ci_low, t_ci_high=fit.ci_high,
        arm_summaries=arm_summaries(ds.y[mask], ds.a[mask]),
    )
    if fit.estimate is None or fit.se is None:
        return SubgroupEstimate(flag=fit.flag, **base)
    posterior = _posterior_fields(fit.estimate, fit.se, prior, bayes, ds.n, k)
    posterior["flag"] = posterior["flag"] or fit.flag
    return SubgroupEstimate(**base, **posterior)


def _map(fn: Callable, items: Sequence, workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(fn, items))


def estimate_subgroups(
    ds: TrialDataset,
    assignment: np.ndarray,
    rules: Sequence[str],
    family: OutcomeFamily,
    method: ParamMethod,
    bayes: BayesConfig = BayesConfig(),
    ple: Optional[PleTable] = None,
    workers: int = 1,
) -> ParamResult:
    """
    Estimate the overall effect (k = 0) and every subgroup effect.

    Args:
        ds: Trial dataset
        assignment: Subgroup index 1..K per row
        rules: Rule text per subgroup, rules[k - 1] describing subgroup k
        family: Outcome family (GLM path only)
        method: ple (needs ``ple``) or glm
        bayes: Prior scale, CI level and thresholds
        ple: Patient-level estimates
        workers: Threads for per-subgroup estimation

    Returns:
        ParamResult with the overall estimate and one estimate per subgroup
    """
    assignment = np.asarray(assignment)
    ks = list(range(1, len(rules) + 1))
    method = ParamMethod(method)

    if method is ParamMethod.PLE:
        if ple is None:
            raise ValueError("PLE parameter estimation requires a PleTable")
        y_star = pseudo_outcomes(ds, ple)
        overall = _ple_estimate(0, "Overall", ds, ple, y_star, assignment, None, bayes)
        prior = _Prior(overall.theta_tilde, overall.se ** 2)
        subgroups = _map(
            lambda k: _ple_estimate(k, rules[k - 1], ds, ple, y_star, assignment, prior, bayes), ks, workers
        )
    else:
        fits = glm_within_subgroups(ds, assignment, family, bayes.alpha)
        overall = _glm_estimate(0, "Overall", ds, fits[0], assignment, None, bayes)
        prior = _Prior(overall.theta_tilde, overall.se ** 2) if overall.se is not None else None
        subgroups = _map(
            lambda k: _glm_estimate(k, rules[k - 1], ds, fits[k], assignment, prior, bayes), ks, workers
        )

    logger.info(
        f"Param ({method.value}): overall {overall.point:.4g} "
        f"[{overall.ci_low:.4g}, {overall.ci_high:.4g}], K={len(subgroups)}"
        if overall.ci_low is not None else f"Param ({method.value}): overall estimate unavailable ({overall.flag})"
    )
    return ParamResult(overall=overall, subgroups=subgroups)


def combine_subgroups(
    ds: TrialDataset,
    ple: PleTable,
    assignment: np.ndarray,
    ks: Sequence[int],
    overall: SubgroupEstimate,
    bayes: BayesConfig = BayesConfig(),
    rule: Optional[str] = None,
) -> SubgroupEstimate:
    """
    PLE estimate, SE and posterior for the union of subgroups ``ks`` (reported as k = -1).

    Args:
        ds: Trial dataset
        ple: Patient-level estimates
        assignment: Subgroup index per row
        ks: Subgroups to pool
        overall: Overall estimate providing the prior
        bayes: Prior scale, CI level and thresholds
        rule: Label; defaults to "Subgroups k1, k2, ..."
    """
    members = np.isin(np.asarray(assignment), list(ks))
    pooled = np.where(members, 1, 0)
    prior = _Prior(overall.theta_tilde, overall.se ** 2)
    estimate = _ple_estimate(
        1, rule or "Subgroups " + ", ".join(str(k) for k in sorted(ks)),
        ds, ple, pseudo_outcomes(ds, ple), pooled, prior, bayes,
    )
    return estimate.model_copy(update={"k": -1})
