"""
Score interval for a difference of two proportions (Miettinen-Nurminen).

The score statistic at a hypothesised difference delta uses the restricted maximum
likelihood estimates of both proportions under p1 - p0 = delta (closed-form cubic
root) and the N / (N - 1) variance correction. Interval bounds are the deltas where
the statistic equals -/+ z_{1 - alpha/2}.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, stats

from shared.errors import InvalidParameterError

BISECT_XTOL = 1e-12


def _restricted_mle(p1: float, n1: int, p0: float, n0: int, delta: float):
    """Proportions maximizing the likelihood subject to p1 - p0 = delta."""
    t = n0 / n1
    a = 1.0 + t
    b = -(1.0 + t + p1 + t * p0 + delta * (t + 2.0))
    c = delta * delta + delta * (2.0 * p1 + t + 1.0) + p1 + t * p0
    d = -p1 * delta * (1.0 + delta)
    v = (b / (3 * a)) ** 3 - b * c / (6 * a * a) + d / (2 * a)
    s = math.sqrt(max((b / (3 * a)) ** 2 - c / (3 * a), 0.0))
    u = s if v > 0 else -s
    if u == 0.0:
        p1d = -b / (3 * a)
    else:
        w = (math.pi + math.acos(float(np.clip(v / u ** 3, -1.0, 1.0)))) / 3.0
        p1d = 2.0 * u * math.cos(w) - b / (3 * a)
    p1d = min(max(p1d, 0.0), 1.0)
    p0d = min(max(p1d - delta, 0.0), 1.0)
    return p1d, p0d


def mn_score(x1: int, n1: int, x0: int, n0: int, delta: float) -> float:
    """
    Signed score statistic (p1_hat - p0_hat - delta) / sqrt(restricted variance).

    Decreasing in delta; +/-inf when the restricted variance vanishes.
    """
    p1, p0 = x1 / n1, x0 / n0
    difference = p1 - p0 - delta
    if difference == 0.0:
        return 0.0
    p1d, p0d = _restricted_mle(p1, n1, p0, n0, delta)
    total = n1 + n0
    var = (p1d * (1 - p1d) / n1 + p0d * (1 - p0d) / n0) * total / (total - 1)
    if var <= 0.0:
        return math.copysign(math.inf, difference)
    return difference / math.sqrt(var)


@dataclass(frozen=True)
class RiskDifference:
    rd: float
    ci_low: float
    ci_high: float


def miettinen_nurminen_rd(x1: int, n1: int, x0: int, n0: int, alpha: float = 0.05) -> RiskDifference:
    """
    Risk difference x1/n1 - x0/n0 with its score confidence interval.

    Args:
        x1, n1: Events and patients in the test arm
        x0, n0: Events and patients in the control arm
        alpha: 1 - confidence level

    Returns:
        RiskDifference with bounds clamped to [-1, 1]
    """
    if n1 < 1 or n0 < 1 or not (0 <= x1 <= n1) or not (0 <= x0 <= n0):
        raise InvalidParameterError(f"invalid counts: x1={x1}, n1={n1}, x0={x0}, n0={n0}")
    if n1 + n0 < 2:
        raise InvalidParameterError("need at least two patients")
    z = stats.norm.ppf(1 - alpha / 2)
    rd = x1 / n1 - x0 / n0

    def upper_gap(delta: float) -> float:
        return mn_score(x1, n1, x0, n0, delta) + z

    def lower_gap(delta: float) -> float:
        return mn_score(x1, n1, x0, n0, delta) - z

    if rd >= 1.0 or upper_gap(1.0) >= 0:
        high = 1.0
    else:
        high = optimize.bisect(upper_gap, rd, 1.0, xtol=BISECT_XTOL)
    if rd <= -1.0 or lower_gap(-1.0) <= 0:
        low = -1.0
    else:
        low = optimize.bisect(lower_gap, -1.0, rd, xtol=BISECT_XTOL)
    return RiskDifference(rd=float(rd), ci_low=float(max(low, -1.0)), ci_high=float(min(high, 1.0)))
