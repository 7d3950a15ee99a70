"""
Pipeline Supervisor
Orchestrates one PRISM analysis and assembles the report.

The supervisor:
1. Validates the dataset and resolves the outcome family
2. Runs Steps 1-4 (filter, PLE, subgroup tree, estimation) via the workers
3. Optionally smooths the subgroup estimates with the bootstrap worker
4. Builds the AnalysisReport with a manifest sufficient for exact reproduction
"""

import logging
import time
from dataclasses import dataclass
from importlib import metadata
from typing import Dict, Optional

import numpy as np

from shared import __version__
from shared.config import PipelineConfig, config_hash
from shared.data import OutcomeFamily, TrialDataset, dataset_hash, infer_outcome_family, validate
from shared.errors import ConfigError, DatasetValidationError
from shared.models import AnalysisReport, RunManifest, SubgroupEstimate
from shared.random_streams import RandomStreams
from Stages.Supervisor.stages import StageProducts, fit_stages, stage
from Stages.workers.bootstrap_resampling import BootstrapResult, bootstrap_prism
from Stages.workers.filter_enet import filter_report
from Stages.workers.param_infer import combine_subgroups

logger = logging.getLogger(__name__)

VERSIONED_PACKAGES = ("numpy", "scipy", "pandas", "scikit-learn", "statsmodels", "pydantic")


# ============================================================================
# RUN RESULT
# ============================================================================

@dataclass(frozen=True)
class PipelineRun:
    """Report plus the in-memory stage products it was built from."""
    dataset: TrialDataset
    config: PipelineConfig
    products: StageProducts
    bootstrap: Optional[BootstrapResult]
    report: AnalysisReport
    elapsed_ms: int

    @property
    def tree(self):
        return self.products.tree

    @property
    def ple(self):
        return self.products.ple

    @property
    def assignment(self) -> np.ndarray:
        return self.products.assignment


# ============================================================================
# HELPERS
# ============================================================================

def package_versions() -> Dict[str, str]:
    versions = {}
    for name in VERSIONED_PACKAGES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = "unknown"
    return versions


def resolve_family(ds: TrialDataset, cfg: PipelineConfig) -> OutcomeFamily:
    """Configured family, or the detected one for ``auto``; a binary family needs 0/1 outcomes."""
    detected = infer_outcome_family(ds)
    family = cfg.family_for(detected)
    if family is OutcomeFamily.BINARY and detected is not OutcomeFamily.BINARY:
        raise ConfigError("outcome_family is binary but the outcome has values other than 0/1")
    return family


def build_manifest(
    ds: TrialDataset,
    cfg: PipelineConfig,
    input_path: Optional[str] = None,
    input_sha256: Optional[str] = None,
) -> RunManifest:
    return RunManifest(
        tool_version=__version__,
        seed=cfg.seed,
        config_hash=config_hash(cfg),
        config=cfg.model_dump(mode="json", exclude={"workers"}),
        input_path=input_path,
        input_sha256=input_sha256,
        dataset_hash=dataset_hash(ds),
        versions=package_versions(),
    )


def benefit_group(
    ds: TrialDataset, cfg: PipelineConfig, products: StageProducts
) -> Optional[SubgroupEstimate]:
    """
    Pooled PLE estimate of the subgroups whose posterior favours treatment.

    A subgroup qualifies when P(theta > c) (or P(theta < c) for ``benefit_direction: less``)
    exceeds 0.5 at the first threshold c. Returns None without PLEs, or when no subgroup
    or every subgroup qualifies.
    """
    overall = products.param.overall
    if products.ple is None or overall.se is None:
        return None
    threshold = cfg.bayes.thresholds[0]
    direction = ">" if cfg.bayes.benefit_direction == "greater" else "<"
    subgroups = products.param.subgroups
    ks = [
        e.k for e in subgroups
        if (e.probability(threshold, direction) or 0.0) > 0.5
    ]
    if not ks or len(ks) == len(subgroups):
        return None
    with stage("param"):
        return combine_subgroups(
            ds, products.ple, products.assignment, ks, overall, cfg.bayes,
            rule="Benefit: " + " | ".join(e.rule for e in subgroups if e.k in ks),
        )


# ============================================================================
# PIPELINE
# ============================================================================

def execute_pipeline(
    ds: TrialDataset,
    cfg: PipelineConfig,
    input_path: Optional[str] = None,
    input_sha256: Optional[str] = None,
    workers: Optional[int] = None,
) -> PipelineRun:
    """
    Run PRISM on one dataset.

    Args:
        ds: Trial dataset
        cfg: Pipeline configuration
        input_path: Source CSV (recorded in the manifest)
        input_sha256: Hash of the source CSV
        workers: Overrides cfg.workers; never changes results

    Returns:
        PipelineRun with the AnalysisReport

    Raises:
        DatasetValidationError: Dataset violates an invariant
        StageError: A stage failed; carries the stage label and the cause's exit code
    """
    start = time.perf_counter()
    workers = workers or cfg.workers
    issues = validate(ds)
    if issues:
        raise DatasetValidationError(issues)
    family = resolve_family(ds, cfg)
    streams = RandomStreams(cfg.seed)

    logger.info("=" * 60)
    logger.info(
        f"PRISM {cfg.configuration.value}: n={ds.n}, p={ds.p}, family={family.value}, seed={cfg.seed}"
    )
    logger.info("=" * 60)

    products = fit_stages(ds, cfg, family, streams, workers)
    logger.info(f"✅ Steps 1-4 completed: q={products.view.q}, K={products.tree.n_subgroups}")

    boot = None
    if cfg.bootstrap.resamples > 0:
        with stage("bootstrap"):
            boot = bootstrap_prism(
                ds, cfg, family, products.assignment, products.tree.n_subgroups,
                cfg.bootstrap.resamples, workers,
            )

    report = AnalysisReport(
        configuration=cfg.configuration.value,
        outcome_family=family.value,
        n=ds.n,
        p=ds.p,
        q=products.view.q,
        thresholds=list(cfg.bayes.thresholds),
        filter=filter_report(ds, products.filter_fit),
        tree=products.tree.summary(),
        overall=products.param.overall,
        subgroups=products.param.subgroups,
        benefit_group=benefit_group(ds, cfg, products),
        bootstrap=boot.summary(cfg.bayes.alpha, cfg.bayes.thresholds, cfg.bootstrap.save_vectors) if boot else None,
        manifest=build_manifest(ds, cfg, input_path, input_sha256),
    )
    elapsed_ms = int((time.perf_counter() - start) * 1000)
    logger.info(f"✅ Pipeline completed in {elapsed_ms}ms")
    return PipelineRun(
        dataset=ds, config=cfg, products=products, bootstrap=boot, report=report, elapsed_ms=elapsed_ms
    )


def run_pipeline(ds: TrialDataset, cfg: PipelineConfig, **kwargs) -> AnalysisReport:
    """Run PRISM and return only the report."""
    return execute_pipeline(ds, cfg, **kwargs).report


__all__ = ["PipelineRun", "execute_pipeline", "run_pipeline", "resolve_family", "build_manifest", "benefit_group"]
