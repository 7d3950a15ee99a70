"""
Model-based recursive partitioning on observed outcomes.

Every node fits y ~ 1 + a: least squares for continuous outcomes, an identity-link
binomial likelihood for binary outcomes (intercept = control proportion, slope = risk
difference). Candidate covariates are screened with score-based instability tests;
cutpoints minimize the summed child objective (RSS or negative log-likelihood).
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import xlogy

from shared.config import SubmodSettings
from shared.data import CovariateKind, FilteredView, OutcomeFamily, TrialDataset

from .instability import categorical_score_test, sup_lm_test
from .tree import CovariateTest, Cut, SubgroupTree, TreeGrower, TreeSettings

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class NodeModel:
    intercept: float
    slope: float
    scores: np.ndarray  # n_node x 2


def _arm_objective(n: np.ndarray, s: np.ndarray, ss: np.ndarray, family: OutcomeFamily) -> np.ndarray:
    """RSS (continuous) or Bernoulli NLL (binary) of per-arm means, vectorized over candidates."""
    safe_n = np.maximum(n, 1)
    if family is OutcomeFamily.BINARY:
        p = s / safe_n
        return -(xlogy(s, p) + xlogy(n - s, 1 - p))
    return ss - s ** 2 / safe_n


class MobGrower(TreeGrower):
    source = "mob_observed"

    def __init__(
        self,
        ds: TrialDataset,
        view: FilteredView,
        settings: TreeSettings,
        family: OutcomeFamily,
        workers: int = 1,
    ):
        super().__init__(view, settings, workers)
        self.y = ds.y
        self.a = ds.a
        self.family = family

    def fit_node(self, rows: np.ndarray) -> Optional[NodeModel]:
        y, a = self.y[rows], self.a[rows]
        treated = a == 1
        if treated.all() or not treated.any():
            return None
        p0, p1 = y[~treated].mean(), y[treated].mean()
        mu = np.where(treated, p1, p0)
        if self.family is OutcomeFamily.BINARY:
            # two-parameter identity-link fit reproduces the arm proportions
            assert 0.0 <= p0 <= 1.0 and 0.0 <= p1 <= 1.0
            if min(p0, p1) <= 0.0 or max(p0, p1) >= 1.0:
                return None
            base = (y - mu) / (mu * (1 - mu))
        else:
            base = y - mu
        scores = np.column_stack([base, base * a])
        return NodeModel(intercept=float(p0), slope=float(p1 - p0), scores=scores)

    def prepare_node(self, rows: np.ndarray) -> Optional[NodeModel]:
        return self.fit_node(rows)

    def test_covariate(self, rows: np.ndarray, position: int, context: NodeModel) -> CovariateTest:
        values = self.x[rows, position]
        if self.kinds[position] is CovariateKind.BINARY:
            result = categorical_score_test(context.scores, values)
        else:
            result = sup_lm_test(context.scores, values, self.settings.trim)
        return CovariateTest(position=position, statistic=result.statistic, p_value=result.p_value)

    def _totals(self, rows: np.ndarray):
        y, a = self.y[rows], self.a[rows]
        out = []
        for arm in (0, 1):
            mask = a == arm
            out.append((mask.sum(), y[mask].sum(), (y[mask] ** 2).sum()))
        return out

    def node_objective(self, rows: np.ndarray) -> float:
        total = 0.0
        for n_a, s_a, ss_a in self._totals(rows):
            total += float(_arm_objective(np.array([n_a]), np.array([s_a]), np.array([ss_a]), self.family)[0])
        return total

    def find_cut(self, rows: np.ndarray, position: int, context: NodeModel) -> Optional[Cut]:
        ordered, sorted_values, m = self.sorted_candidates(rows, position)
        if m.size == 0:
            return None
        y, a = self.y[ordered], self.a[ordered]
        objective = np.zeros(m.size)
        admissible = np.ones(m.size, dtype=bool)
        for arm in (0, 1):
            mask = (a == arm).astype(float)
            cn = np.cumsum(mask)
            cs = np.cumsum(y * mask)
            css = np.cumsum(y ** 2 * mask)
            left = (cn[m - 1], cs[m - 1], css[m - 1])
            right = (cn[-1] - left[0], cs[-1] - left[1], css[-1] - left[2])
            admissible &= (left[0] > 0) & (right[0] > 0)
            objective += _arm_objective(*left, self.family) + _arm_objective(*right, self.family)
        if not admissible.any():
            return None
        objective = np.where(admissible, objective, np.inf)
        best = int(np.argmin(objective))
        cut_at = int(m[best])
        cutpoint = 0.5 * (sorted_values[cut_at - 1] + sorted_values[cut_at])
        return Cut(
            cutpoint=float(cutpoint),
            left_rows=np.sort(ordered[:cut_at]),
            right_rows=np.sort(ordered[cut_at:]),
            objective=float(objective[best]),
        )


def fit_mob(
    ds: TrialDataset,
    fv: FilteredView,
    settings: SubmodSettings = SubmodSettings(),
    family: OutcomeFamily = OutcomeFamily.CONTINUOUS,
    workers: int = 1,
) -> SubgroupTree:
    """
    Grow a MOB tree for y ~ a over the retained covariates.

    Args:
        ds: Trial dataset
        fv: Retained covariates (q = 0 gives a root-only tree)
        settings: alpha, max_depth, min_node_frac (of n), trim
        family: Outcome family selecting least squares or identity-link binomial
        workers: Threads for the per-covariate tests

    Returns:
        SubgroupTree with source "mob_observed"
    """
    tree_settings = TreeSettings.from_submod(settings, ds.n)
    tree = MobGrower(ds, fv, tree_settings, OutcomeFamily(family), workers).grow()
    logger.info(
        f"MOB: {tree.n_subgroups} subgroup(s) from q={fv.q} covariates "
        f"(alpha={tree_settings.alpha}, min_node={tree_settings.min_node})"
    )
    return tree
