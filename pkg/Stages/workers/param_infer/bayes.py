"""Normal prior update of subgroup estimates and posterior probability statements."""

import math
from typing import Iterable, List, Tuple

from scipy import stats

from shared.models import ProbabilityStatement


def bayes_update(
    theta_tilde: float,
    var_tilde: float,
    theta_0: float,
    var_0: float,
    gamma: float,
) -> Tuple[float, float]:
    """
    Combine a subgroup estimate with the normal prior N(theta_0, gamma * var_0).

    Var_post = (1 / (gamma var_0) + 1 / var_tilde)^-1
    mean_post = Var_post * (theta_0 / (gamma var_0) + theta_tilde / var_tilde)

    Args:
        theta_tilde: Subgroup point estimate
        var_tilde: Its variance (> 0)
        theta_0: Overall estimate (prior mean)
        var_0: Variance of the overall estimate (> 0)
        gamma: Prior variance scale (> 0); math.inf returns the likelihood unchanged

    Returns:
        (posterior mean, posterior variance)
    """
    if var_tilde <= 0 or var_0 <= 0 or gamma <= 0:
        raise ValueError(f"variances and gamma must be positive (var_tilde={var_tilde}, var_0={var_0}, gamma={gamma})")
    if math.isinf(gamma):
        return float(theta_tilde), float(var_tilde)
    prior_var = gamma * var_0
    post_var = 1.0 / (1.0 / prior_var + 1.0 / var_tilde)
    w_prior = post_var / prior_var
    w_data = post_var / var_tilde
    assert abs(w_prior + w_data - 1.0) < 1e-9, "posterior weights must sum to 1"
    return float(w_prior * theta_0 + w_data * theta_tilde), float(post_var)


def posterior_interval(mean: float, var: float, alpha: float = 0.05) -> Tuple[float, float]:
    """Equal-tailed normal posterior interval."""
    half = stats.norm.ppf(1 - alpha / 2) * math.sqrt(max(var, 0.0))
    return float(mean - half), float(mean + half)


def tail_probability(mean: float, var: float, threshold: float, direction: str = ">") -> float:
    """P(theta > c) or P(theta < c) under N(mean, var); a point mass when var = 0."""
    if var <= 0:
        above = 1.0 if mean > threshold else 0.0
        below = 1.0 if mean < threshold else 0.0
        return above if direction == ">" else below
    z = (threshold - mean) / math.sqrt(var)
    return float(stats.norm.sf(z) if direction == ">" else stats.norm.cdf(z))


def probability_statements(mean: float, var: float, thresholds: Iterable[float]) -> List[ProbabilityStatement]:
    """Both tail probabilities for every threshold, in threshold order."""
    statements = []
    for c in sorted(thresholds):
        for direction in (">", "<"):
            statements.append(ProbabilityStatement(
                threshold=float(c), direction=direction, probability=tail_probability(mean, var, c, direction)
            ))
    return statements
