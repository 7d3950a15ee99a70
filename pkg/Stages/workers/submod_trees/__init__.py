"""
Subgroup Worker - Step 3 Rule-Based Subgroup Discovery

Grows interpretable trees whose terminal nodes are the candidate subgroups.

Responsibilities:
- MOB on observed outcomes (node model y ~ a, score-based instability tests)
- CTREE on patient-level estimates (permutation-moment linear statistics)
- Routing of rows to subgroups and human-readable rule extraction
- Tree serialization for the report

Input: TrialDataset + FilteredView (+ PleTable for CTREE)
Output: SubgroupTree
"""

from .ctree import fit_ctree_on_ple
from .instability import categorical_score_test, linear_statistic_test, sup_lm_pvalue, sup_lm_test
from .mob import fit_mob
from .tree import SplitRule, SubgroupRule, SubgroupTree, TreeSettings, assign_subgroups, extract_rules

__all__ = [
    'fit_mob',
    'fit_ctree_on_ple',
    'assign_subgroups',
    'extract_rules',
    'SubgroupTree',
    'SubgroupRule',
    'SplitRule',
    'TreeSettings',
    'sup_lm_test',
    'sup_lm_pvalue',
    'categorical_score_test',
    'linear_statistic_test',
]
