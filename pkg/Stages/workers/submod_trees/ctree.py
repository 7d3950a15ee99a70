"""
Conditional inference tree on patient-level estimates.

The response is theta_hat with the identity influence function. Each node tests the
linear association between theta_hat and every retained covariate, splits on the most
significant one after Bonferroni adjustment, and places the cutpoint where the
standardized two-sample statistic of theta_hat between the children is largest.
"""

import logging
from typing import Optional

import numpy as np

from shared.config import SubmodSettings
from shared.data import CovariateKind, FilteredView, TrialDataset
from Stages.workers.ple_forest import PleTable

from .instability import linear_statistic_test
from .tree import CovariateTest, Cut, SubgroupTree, TreeGrower, TreeSettings

logger = logging.getLogger(__name__)


class CtreeGrower(TreeGrower):
    source = "ctree_ple"

    def __init__(self, theta_hat: np.ndarray, view: FilteredView, settings: TreeSettings, workers: int = 1):
        super().__init__(view, settings, workers)
        self.h = np.asarray(theta_hat, dtype=float)

    def prepare_node(self, rows: np.ndarray) -> Optional[np.ndarray]:
        h = self.h[rows]
        if np.ptp(h) == 0:
            return None
        return h

    def test_covariate(self, rows: np.ndarray, position: int, context: np.ndarray) -> CovariateTest:
        values = self.x[rows, position]
        g = (values == 1).astype(float) if self.kinds[position] is CovariateKind.BINARY else values
        result = linear_statistic_test(g, context)
        return CovariateTest(position=position, statistic=result.statistic, p_value=result.p_value)

    def node_objective(self, rows: np.ndarray) -> float:
        h = self.h[rows]
        return float(np.sum((h - h.mean()) ** 2))

    def find_cut(self, rows: np.ndarray, position: int, context: np.ndarray) -> Optional[Cut]:
        ordered, sorted_values, m = self.sorted_candidates(rows, position)
        if m.size == 0:
            return None
        h = self.h[ordered]
        n = h.size
        h_bar = h.mean()
        v_h = np.mean((h - h_bar) ** 2)
        cs = np.cumsum(h)
        css = np.cumsum(h ** 2)
        t = cs[m - 1]
        var = v_h * m * (n - m) / (n - 1)
        standardized = np.abs(t - m * h_bar) / np.sqrt(var)
        best = int(np.argmax(standardized))
        cut_at = int(m[best])

        sse_left = css[cut_at - 1] - cs[cut_at - 1] ** 2 / cut_at
        right_sum = cs[-1] - cs[cut_at - 1]
        sse_right = (css[-1] - css[cut_at - 1]) - right_sum ** 2 / (n - cut_at)
        return Cut(
            cutpoint=float(0.5 * (sorted_values[cut_at - 1] + sorted_values[cut_at])),
            left_rows=np.sort(ordered[:cut_at]),
            right_rows=np.sort(ordered[cut_at:]),
            objective=float(sse_left + sse_right),
        )


def fit_ctree_on_ple(
    ple: PleTable,
    ds: TrialDataset,
    fv: FilteredView,
    settings: SubmodSettings = SubmodSettings(),
    workers: int = 1,
) -> SubgroupTree:
    """
    Grow a conditional inference tree for theta_hat over the retained covariates.

    Args:
        ple: Patient-level estimates (one row per patient of ds)
        ds: Trial dataset (defines n for the minimum node size)
        fv: Retained covariates
        settings: alpha, max_depth, min_node_frac (of n)
        workers: Threads for the per-covariate tests

    Returns:
        SubgroupTree with source "ctree_ple"; constant theta_hat gives a root-only tree
    """
    tree_settings = TreeSettings.from_submod(settings, ds.n)
    tree = CtreeGrower(ple.theta_hat, fv, tree_settings, workers).grow()
    logger.info(f"CTREE: {tree.n_subgroups} subgroup(s) from q={fv.q} covariates (alpha={tree_settings.alpha})")
    return tree
