"""
Node-level association tests with closed-form null distributions.

    sup_lm_test            score-process supremum LM test (continuous split variable)
    categorical_score_test per-level score sums (binary split variable)
    linear_statistic_test  standardized linear statistic under permutation moments

None of these tests sample: p-values come from asymptotic approximations, so tree
search is deterministic given the data.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import stats
from scipy.special import gammaln

EIGEN_FLOOR = 1e-10


@dataclass(frozen=True)
class AssociationResult:
    statistic: float
    p_value: float
    df: int

    @classmethod
    def null(cls, df: int = 1) -> "AssociationResult":
        return cls(statistic=0.0, p_value=1.0, df=df)


def decorrelate(scores: np.ndarray) -> Optional[np.ndarray]:
    """
    Scores multiplied by J^{-1/2}, J = psi'psi / n (outer-product information).

    Returns None when J is numerically singular (zero-variance scores).
    """
    n = scores.shape[0]
    info = scores.T @ scores / n
    eigval, eigvec = np.linalg.eigh(info)
    if eigval.max(initial=0.0) <= 0 or eigval.min() <= EIGEN_FLOOR * eigval.max():
        return None
    inv_sqrt = eigvec @ np.diag(1.0 / np.sqrt(eigval)) @ eigvec.T
    return scores @ inv_sqrt


def sup_lm_pvalue(statistic: float, k: int, trim: float = 0.10) -> float:
    """
    Asymptotic p-value of the supremum of a k-dimensional squared Bessel bridge
    standardized by t(1-t) over [trim, 1-trim].

    Uses the boundary-crossing tail approximation, floored by the pointwise
    chi-square tail and capped at 1.
    """
    if statistic <= 0:
        return 1.0
    b2 = float(statistic)
    b = np.sqrt(b2)
    t0, t1 = trim, 1.0 - trim
    log_ratio = np.log(t1 * (1 - t0) / (t0 * (1 - t1)))
    log_lead = k * np.log(b) - b2 / 2 - (k / 2) * np.log(2.0) - gammaln(k / 2)
    bracket = (1 - k / b2) * log_ratio + 4 / b2
    approx = np.exp(log_lead) * bracket if bracket > 0 else 0.0
    pointwise = stats.chi2.sf(b2, k)
    return float(min(1.0, max(approx, pointwise)))


def sup_lm_test(scores: np.ndarray, values: np.ndarray, trim: float = 0.10) -> AssociationResult:
    """
    Supremum LM test of parameter instability along an ordering covariate.

    Args:
        scores: Per-row score contributions of the node model (n x k), summing to ~0
        values: Covariate values ordering the rows
        trim: Fraction trimmed from each end of the ordering

    Returns:
        AssociationResult with statistic max ||W(t)||^2 / (t(1-t)) over tie-block boundaries
    """
    n, k = scores.shape
    white = decorrelate(scores)
    if white is None:
        return AssociationResult.null(k)
    order = np.argsort(values, kind="mergesort")
    sorted_values = values[order]
    process = np.cumsum(white[order], axis=0) / np.sqrt(n)

    m = np.arange(1, n)
    lo = int(np.ceil(trim * n))
    hi = n - lo
    ok = (sorted_values[:-1] < sorted_values[1:]) & (m >= lo) & (m <= hi)
    if not ok.any():
        return AssociationResult.null(k)
    m = m[ok]
    t = m / n
    lm = np.sum(process[m - 1] ** 2, axis=1) / (t * (1 - t))
    statistic = float(lm.max())
    return AssociationResult(statistic=statistic, p_value=sup_lm_pvalue(statistic, k, trim), df=k)


def categorical_score_test(scores: np.ndarray, levels: np.ndarray) -> AssociationResult:
    """
    Chi-square test on per-level sums of decorrelated scores (k * (L - 1) df).
    """
    n, k = scores.shape
    white = decorrelate(scores)
    unique = np.unique(levels)
    if white is None or unique.size < 2:
        return AssociationResult.null(k)
    statistic = 0.0
    for level in unique:
        mask = levels == level
        w = white[mask].sum(axis=0) / np.sqrt(n)
        statistic += float(w @ w) / (mask.sum() / n)
    df = k * (unique.size - 1)
    return AssociationResult(statistic=statistic, p_value=float(stats.chi2.sf(statistic, df)), df=df)


def linear_statistic_test(g: np.ndarray, h: np.ndarray) -> AssociationResult:
    """
    Standardized linear statistic T = sum g_i h_i under the permutation null.

    E(T) = sum(g) * mean(h)
    Var(T) = n/(n-1) V_h sum(g^2) - 1/(n-1) V_h (sum g)^2,  V_h = mean((h - mean h)^2)

    The p-value is the chi-square(1) tail of the squared standardized statistic.
    """
    g = np.asarray(g, dtype=float)
    h = np.asarray(h, dtype=float)
    n = h.shape[0]
    if n < 2:
        return AssociationResult.null()
    h_bar = h.mean()
    v_h = np.mean((h - h_bar) ** 2)
    sg = g.sum()
    var = n / (n - 1) * v_h * (g @ g) - v_h * sg ** 2 / (n - 1)
    if not var > 1e-14 * max(1.0, v_h * (g @ g)):
        return AssociationResult.null()
    c = (g @ h - sg * h_bar) / np.sqrt(var)
    statistic = float(c ** 2)
    return AssociationResult(statistic=statistic, p_value=float(stats.chi2.sf(statistic, 1)), df=1)
