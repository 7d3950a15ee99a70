"""
Simulation study harness.

For every scenario (family x setting x n_noise) and replicate: simulate a trial, run
each method, attach oracle truths to every discovered subgroup, and emit one tidy
metric row per (method, metric, cutoff). Replicates are independent and seeded from
named streams, so aggregates do not depend on execution order or worker count.
"""

import json
import logging
import multiprocessing as mp
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from shared.config import Configuration, StudyConfig, StudyMethod, deep_merge, preset_config
from shared.data import OutcomeFamily, TrialDataset
from shared.errors import PrismError
from shared.logging_config import quiet_stage_loggers
from shared.random_streams import RandomStreams
from report.svg_report import render_study_svg
from Stages.Supervisor.pipeline_supervisor import execute_pipeline
from Stages.workers.param_infer import oracle_estimate
from simulation.generator import (
    PREDICTIVE,
    PROGNOSTIC,
    SimScenario,
    generate_trial,
    true_benefit,
    true_subgroup_labels,
    true_subgroup_partition,
)
from simulation.oracle import TruthOracle

from .assignment import ci_assign, prism_assign, standard_practice_assign
from .metrics import (
    SubgroupRecord,
    aggregate_metrics,
    classification_metrics,
    estimation_metrics,
    relative_efficiency,
    selection_rates,
)

logger = logging.getLogger(__name__)

PIPELINE_METHODS = {
    StudyMethod.MOB: (Configuration.MOB, {}),
    StudyMethod.PRISM_A: (Configuration.PRISM_A, {}),
    StudyMethod.PRISM_B: (Configuration.PRISM_B, {}),
    StudyMethod.PRISM_A_NOFILTER: (Configuration.PRISM_A, {"filter": {"enabled": False}}),
    StudyMethod.PRISM_B_NOFILTER: (Configuration.PRISM_B, {"filter": {"enabled": False}}),
}


# ============================================================================
# RECORDS
# ============================================================================

@dataclass
class MethodOutcome:
    """What one method produced on one replicate."""
    method: str
    subgroups: List[SubgroupRecord] = field(default_factory=list)
    split_covariates: Optional[Tuple[str, ...]] = None
    assignments: Dict[float, np.ndarray] = field(default_factory=dict)  # cutoff -> decisions
    ci_assignment: Optional[np.ndarray] = None
    uniform_assignment: Optional[np.ndarray] = None
    error: Optional[str] = None


@dataclass
class ReplicateRecord:
    scenario: SimScenario
    replicate: int
    truth_benefit: np.ndarray
    outcomes: List[MethodOutcome]


def scenario_grid(cfg: StudyConfig) -> List[Tuple[OutcomeFamily, Any, int]]:
    return list(product(cfg.families, cfg.settings, cfg.n_noise))


def replicate_scenario(cfg: StudyConfig, family, setting, n_noise: int, r: int) -> SimScenario:
    streams = RandomStreams(cfg.seed).child("study", family.value, setting.value, n_noise)
    return SimScenario(
        outcome_family=family,
        effect_setting=setting,
        n_noise=n_noise,
        n=cfg.n,
        seed=streams.integer_seed("replicate", r),
    )


# ============================================================================
# METHODS
# ============================================================================

def _run_pipeline_method(
    method: StudyMethod,
    ds: TrialDataset,
    scenario: SimScenario,
    oracle: TruthOracle,
    cfg: StudyConfig,
) -> MethodOutcome:
    configuration, extra = PIPELINE_METHODS[method]
    overrides = deep_merge(deep_merge(cfg.pipeline_overrides, extra), {
        "seed": scenario.seed,
        "outcome_family": scenario.outcome_family.value,
        "bootstrap": {"resamples": 0},
    })
    run = execute_pipeline(ds, preset_config(configuration, **overrides), workers=1)
    outcome = MethodOutcome(method=method.value, split_covariates=run.tree.split_covariates())
    for rule, estimate in zip(run.products.rules, run.report.subgroups):
        if estimate.point is None:
            continue
        outcome.subgroups.append(SubgroupRecord(
            k=estimate.k, rule=estimate.rule, n_k=estimate.n_k, estimate=estimate.point,
            ci_low=estimate.ci_low, ci_high=estimate.ci_high, truth=oracle.effect(rule),
        ))
    bayes = run.config.bayes
    for cutoff in cfg.cutoffs:
        outcome.assignments[cutoff] = prism_assign(
            run.report.subgroups, run.assignment, cutoff, 0.0, bayes.benefit_direction
        )
    outcome.ci_assignment = ci_assign(run.report.subgroups, run.assignment, 0.0, bayes.benefit_direction)
    return outcome


def _run_oracle_method(ds: TrialDataset, scenario: SimScenario, oracle: TruthOracle, cfg: StudyConfig) -> MethodOutcome:
    partition = true_subgroup_partition(ds.covariate_frame(), scenario)
    oracle_partition = true_subgroup_partition(oracle.frame, scenario)
    estimates = oracle_estimate(ds, partition, scenario.outcome_family, 0.05, true_subgroup_labels(scenario))
    outcome = MethodOutcome(method=StudyMethod.ORACLE.value)
    for estimate in estimates:
        if estimate.theta_tilde is None:
            continue
        truth_mask = np.ones(oracle.m, dtype=bool) if estimate.k == 0 else oracle_partition == estimate.k
        outcome.subgroups.append(SubgroupRecord(
            k=estimate.k, rule=estimate.rule, n_k=estimate.n_k, estimate=estimate.theta_tilde,
            ci_low=estimate.ci_low, ci_high=estimate.ci_high, truth=oracle.effect_of_mask(truth_mask),
        ))
    return outcome


def _run_standard_method(ds: TrialDataset, scenario: SimScenario, cfg: StudyConfig) -> MethodOutcome:
    decision = standard_practice_assign(
        ds, scenario.outcome_family, cfg.standard_alpha, cfg.adjusted_standard_practice
    )
    return MethodOutcome(
        method=StudyMethod.STANDARD.value,
        uniform_assignment=np.full(ds.n, decision.treat_all),
    )


def run_replicate(cfg: StudyConfig, family, setting, n_noise: int, r: int) -> ReplicateRecord:
    """Simulate one trial and run every configured method on it."""
    scenario = replicate_scenario(cfg, family, setting, n_noise, r)
    ds = generate_trial(scenario)
    oracle = TruthOracle(scenario, cfg.oracle_size)
    outcomes = []
    for method in cfg.methods:
        try:
            if method in PIPELINE_METHODS:
                outcomes.append(_run_pipeline_method(method, ds, scenario, oracle, cfg))
            elif method is StudyMethod.ORACLE:
                outcomes.append(_run_oracle_method(ds, scenario, oracle, cfg))
            else:
                outcomes.append(_run_standard_method(ds, scenario, cfg))
        except PrismError as e:
            logger.warning(f"{scenario.label()} replicate {r}: {method.value} failed: {e}")
            outcomes.append(MethodOutcome(method=method.value, error=str(e)))
    return ReplicateRecord(
        scenario=scenario,
        replicate=r,
        truth_benefit=true_benefit(ds.covariate_frame(), scenario),
        outcomes=outcomes,
    )


# ============================================================================
# METRIC ROWS
# ============================================================================

def replicate_metric_rows(record: ReplicateRecord) -> List[dict]:
    """Tidy per-replicate metric rows (value None = undefined, excluded later)."""
    s = record.scenario
    base = {"family": s.outcome_family.value, "setting": s.effect_setting.value, "n_noise": s.n_noise}
    noise = s.noise_covariates
    rows: List[dict] = []

    def emit(method: str, metric: str, value, cutoff=None):
        rows.append({**base, "method": method, "metric": metric, "cutoff": cutoff,
                     "replicate": record.replicate, "value": value})

    for outcome in record.outcomes:
        if outcome.error:
            emit(outcome.method, "failed", 1.0)
            continue
        emit(outcome.method, "failed", 0.0)
        if outcome.subgroups:
            for metric, value in estimation_metrics(outcome.subgroups).as_dict().items():
                emit(outcome.method, metric, value)
            emit(outcome.method, "n_subgroups", float(len(outcome.subgroups)))
        if outcome.split_covariates is not None:
            rates = selection_rates(outcome.split_covariates, PREDICTIVE, PROGNOSTIC, noise)
            emit(outcome.method, "select_predictive", rates.predictive)
            emit(outcome.method, "select_prognostic", rates.prognostic)
            emit(outcome.method, "select_noise", rates.noise)

        decisions = dict(outcome.assignments)
        if outcome.uniform_assignment is not None:
            decisions[None] = outcome.uniform_assignment
            emit(outcome.method, "all_test_drug", float(outcome.uniform_assignment.all()))
        for cutoff, predicted in decisions.items():
            metrics = classification_metrics(predicted, record.truth_benefit)
            emit(outcome.method, "accuracy", metrics.accuracy, cutoff)
            emit(outcome.method, "ppv", metrics.ppv, cutoff)
            emit(outcome.method, "npv", metrics.npv, cutoff)
        if outcome.ci_assignment is not None:
            emit(outcome.method, "accuracy_ci_rule", classification_metrics(
                outcome.ci_assignment, record.truth_benefit).accuracy)
        cutoffs = sorted(outcome.assignments)
        if len(cutoffs) > 1:
            nested = all(
                not np.any(outcome.assignments[hi] & ~outcome.assignments[lo])
                for lo, hi in zip(cutoffs, cutoffs[1:])
            )
            emit(outcome.method, "cutoff_nested", float(nested))
    return rows


def _replicate_worker(args: tuple) -> List[dict]:
    record = run_replicate(*args)
    return replicate_metric_rows(record)


# ============================================================================
# STUDY
# ============================================================================

@dataclass
class StudyResult:
    config: StudyConfig
    rows: List[dict]
    elapsed_s: float

    def replicate_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows)

    def to_tidy_frame(self) -> pd.DataFrame:
        """One row per scenario x method x metric (x cutoff) with mean and MC SE."""
        table = relative_efficiency(aggregate_metrics(self.rows))
        return table.sort_values(["family", "setting", "n_noise", "method", "metric", "cutoff"],
                                 na_position="first").reset_index(drop=True)

    def failures(self) -> pd.DataFrame:
        frame = self.replicate_frame()
        if frame.empty:
            return frame
        failed = frame[(frame["metric"] == "failed") & (frame["value"] == 1.0)]
        return failed.groupby(["family", "setting", "n_noise", "method"]).size().rename("failures").reset_index()

    def summary(self) -> Dict[str, Any]:
        tidy = self.to_tidy_frame()
        return {
            "config": self.config.model_dump(mode="json"),
            "elapsed_s": round(self.elapsed_s, 3),
            "failures": self.failures().to_dict(orient="records"),
            "metrics": json.loads(tidy.to_json(orient="records")),
        }


def run_study(cfg: StudyConfig, workers: Optional[int] = None) -> StudyResult:
    """
    Run every scenario x replicate x method of ``cfg``.

    Args:
        cfg: Study configuration
        workers: Processes (defaults to cfg.workers); results do not depend on it

    Returns:
        StudyResult with tidy per-replicate metric rows
    """
    workers = workers or cfg.workers
    start = time.perf_counter()
    tasks = [
        (cfg, family, setting, n_noise, r)
        for family, setting, n_noise in scenario_grid(cfg)
        for r in range(cfg.replicates)
    ]
    logger.info(
        f"Study: {len(scenario_grid(cfg))} scenario(s) x {cfg.replicates} replicates x "
        f"{len(cfg.methods)} method(s) on {workers} worker(s)"
    )
    rows: List[dict] = []
    with quiet_stage_loggers():
        if workers > 1:
            ctx = mp.get_context("spawn")
            with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
                for i, replicate_rows in enumerate(pool.map(_replicate_worker, tasks), start=1):
                    rows.extend(replicate_rows)
                    if i % max(1, len(tasks) // 10) == 0:
                        logger.info(f"Study progress: {i}/{len(tasks)} replicates")
        else:
            for i, task in enumerate(tasks, start=1):
                rows.extend(_replicate_worker(task))
                if i % max(1, len(tasks) // 10) == 0:
                    logger.info(f"Study progress: {i}/{len(tasks)} replicates")
    elapsed = time.perf_counter() - start
    logger.info(f"✅ Study completed in {elapsed:.1f}s ({len(rows)} metric rows)")
    return StudyResult(config=cfg, rows=rows, elapsed_s=elapsed)


def write_study_outputs(result: StudyResult, out_dir: Union[str, Path], svg: bool = True) -> Dict[str, Path]:
    """Write study.csv (tidy aggregates), study_replicates.csv, study.json and optional SVG charts."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "csv": out_dir / "study.csv",
        "replicates": out_dir / "study_replicates.csv",
        "json": out_dir / "study.json",
    }
    result.to_tidy_frame().to_csv(paths["csv"], index=False)
    result.replicate_frame().to_csv(paths["replicates"], index=False)
    paths["json"].write_text(json.dumps(result.summary(), indent=2), encoding="utf-8")
    if svg:
        for metric in ("bias_abs", "coverage", "accuracy", "select_predictive"):
            path = out_dir / f"study_{metric}.svg"
            path.write_text(render_study_svg(result.to_tidy_frame(), metric), encoding="utf-8")
            paths[f"svg_{metric}"] = path
    logger.info(f"Wrote study outputs to {out_dir}")
    return paths
