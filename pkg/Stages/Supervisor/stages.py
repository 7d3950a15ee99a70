"""
Steps 1-4 of one PRISM fit.

Shared by the supervisor (the original data) and the bootstrap worker (every
resample), so both run exactly the same stage sequence.
"""

import logging
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Iterator, List, Optional

import numpy as np

from shared.config import PipelineConfig, SubmodMethod
from shared.data import FilteredView, OutcomeFamily, TrialDataset
from shared.errors import StageError
from shared.random_streams import RandomStreams
from Stages.workers.filter_enet import ElasticNetFit, screen_covariates
from Stages.workers.param_infer import ParamResult, estimate_subgroups
from Stages.workers.ple_forest import PleTable, counterfactual_ple
from Stages.workers.submod_trees import SubgroupRule, SubgroupTree, extract_rules, fit_ctree_on_ple, fit_mob

logger = logging.getLogger(__name__)

STAGES = ("filter", "ple", "submod", "param", "bootstrap")


@contextmanager
def stage(label: str) -> Iterator[None]:
    """Re-raise any failure inside the block as a StageError carrying ``label``."""
    try:
        yield
    except StageError:
        raise
    except Exception as e:
        logger.debug(f"Stage '{label}' failed: {e!r}")
        raise StageError(label, e) from e


@dataclass(frozen=True)
class StageProducts:
    """Everything Steps 1-4 produce for one dataset."""
    family: OutcomeFamily
    view: FilteredView
    filter_fit: Optional[ElasticNetFit]
    ple: Optional[PleTable]
    tree: SubgroupTree
    assignment: np.ndarray
    rules: List[SubgroupRule]
    param: ParamResult


def fit_stages(
    ds: TrialDataset,
    cfg: PipelineConfig,
    family: OutcomeFamily,
    streams: RandomStreams,
    workers: int = 1,
) -> StageProducts:
    """
    Run filter -> PLE -> subgroup tree -> estimation on ``ds``.

    Args:
        ds: Validated trial dataset
        cfg: Pipeline configuration
        family: Resolved outcome family
        streams: Random streams for this fit
        workers: Threads per stage

    Returns:
        StageProducts
    """
    with stage("filter"):
        view, filter_fit = screen_covariates(ds, streams, cfg.filter, family, workers)

    ple = None
    if cfg.ple.enabled:
        with stage("ple"):
            ple = counterfactual_ple(ds, view, streams, cfg.ple, workers)

    with stage("submod"):
        if cfg.submod.method is SubmodMethod.CTREE:
            tree = fit_ctree_on_ple(ple, ds, view, cfg.submod, workers)
        else:
            tree = fit_mob(ds, view, cfg.submod, family, workers)
        assignment = tree.training_assignment()
        rules = extract_rules(tree)

    with stage("param"):
        param = estimate_subgroups(
            ds, assignment, [rule.text for rule in rules], family, cfg.param.method, cfg.bayes, ple, workers
        )

    return StageProducts(
        family=family,
        view=view,
        filter_fit=filter_fit,
        ple=ple,
        tree=tree,
        assignment=assignment,
        rules=rules,
        param=param,
    )
