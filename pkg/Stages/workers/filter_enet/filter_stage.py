"""
Filter stage: keep the covariates with a nonzero elastic-net coefficient.

The treatment indicator is never part of the design; the filter only screens out
covariates unrelated to the outcome.
"""

import logging
from typing import Optional, Tuple

from shared.config import FilterSettings
from shared.data import FilteredView, OutcomeFamily, TrialDataset, infer_outcome_family
from shared.models import CovariateFilterRecord, FilterSummary
from shared.random_streams import RandomStreams

from .elastic_net import ElasticNetFit, fit_elastic_net

logger = logging.getLogger(__name__)


def screen_covariates(
    ds: TrialDataset,
    streams: RandomStreams,
    settings: FilterSettings = FilterSettings(),
    family: Optional[OutcomeFamily] = None,
    workers: int = 1,
) -> Tuple[FilteredView, Optional[ElasticNetFit]]:
    """
    Run the filter and return the retained view together with the fitted path.

    Args:
        ds: Validated trial dataset
        streams: Random streams; the CV fold seed is drawn from "filter/folds"
        settings: Filter settings (a disabled filter keeps every covariate)
        family: Outcome family; inferred from y when None
        workers: Threads for the CV folds

    Returns:
        (FilteredView, ElasticNetFit or None when the filter is disabled)
    """
    if not settings.enabled:
        logger.info(f"Filter disabled: keeping all {ds.p} covariates")
        return FilteredView.all_columns(ds), None

    family = family or infer_outcome_family(ds)
    fit = fit_elastic_net(
        ds.x,
        ds.y,
        family=family,
        alpha=settings.alpha,
        seed=streams.integer_seed("filter", "folds"),
        folds=settings.folds,
        n_lambda=settings.n_lambda,
        lambda_min_ratio=settings.lambda_min_ratio,
        workers=workers,
    )
    view = FilteredView(base=ds, kept_columns=fit.selected)
    kept = ", ".join(view.names) if view.q else "none"
    logger.info(f"Filter kept {view.q} of {ds.p} covariates: {kept}")
    return view, fit


def filter_covariates(
    ds: TrialDataset,
    streams: RandomStreams,
    settings: FilterSettings = FilterSettings(),
    family: Optional[OutcomeFamily] = None,
    workers: int = 1,
) -> FilteredView:
    """Covariates with a nonzero coefficient at the CV-chosen lambda (possibly none)."""
    view, _ = screen_covariates(ds, streams, settings, family, workers)
    return view


def filter_report(ds: TrialDataset, fit: Optional[ElasticNetFit]) -> FilterSummary:
    """Per-covariate coefficient at the chosen lambda with its kept flag."""
    if fit is None:
        return FilterSummary(
            enabled=False,
            covariates=[CovariateFilterRecord(name=name, coefficient=0.0, kept=True) for name in ds.covariate_names],
        )
    coef = fit.coef
    return FilterSummary(
        enabled=True,
        family=fit.family.value,
        alpha=fit.alpha,
        chosen_lambda=fit.chosen_lambda,
        covariates=[
            CovariateFilterRecord(name=name, coefficient=float(coef[j]), kept=bool(coef[j] != 0.0))
            for j, name in enumerate(ds.covariate_names)
        ],
    )
