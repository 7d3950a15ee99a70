"""Shared report models for the PRISM subgroup-identification system.

Everything written to disk as JSON goes through these pydantic models, so the report
layout is declared once and mirrored by ``shared/schemas/analysis_report.schema.json``.
"""

from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

SCHEMA_VERSION = "1.1.0"


class _Record(BaseModel):
    model_config = ConfigDict(extra="forbid")


# Estimate Models
class ProbabilityStatement(_Record):
    """Posterior (or bootstrap) probability that the effect lies beyond a threshold."""
    threshold: float = Field(..., description="Comparator c")
    direction: Literal[">", "<"] = Field(..., description="P(theta > c) or P(theta < c)")
    probability: float = Field(..., ge=0.0, le=1.0, description="Probability")


class ArmSummary(_Record):
    """Observed outcome summary for one treatment arm."""
    arm: int = Field(..., description="0 = control, 1 = test")
    n: int = Field(..., ge=0, description="Patients in the arm")
    mean: Optional[float] = Field(None, description="Mean outcome (event rate for binary outcomes)")


class ArmEstimate(_Record):
    """PLE-based arm-specific mean with its pseudo-outcome SE."""
    arm: int
    estimate: float
    se: Optional[float] = None


class SubgroupEstimate(_Record):
    """Estimates for one subgroup; k = 0 is the overall population."""
    k: int = Field(..., ge=-1, description="Subgroup index (0 = overall, -1 = combined subgroups)")
    rule: str = Field(..., description="Human-readable rule conjunction")
    n_k: int = Field(..., ge=0, description="Subgroup size")
    estimator: str = Field(..., description="ple, glm, ols or miettinen_nurminen")
    theta_tilde: Optional[float] = Field(None, description="Likelihood-side point estimate")
    se: Optional[float] = Field(None, description="Standard error of theta_tilde")
    t_ci_low: Optional[float] = Field(None, description="Frequentist interval lower bound")
    t_ci_high: Optional[float] = Field(None, description="Frequentist interval upper bound")
    posterior_mean: Optional[float] = Field(None, description="Normal posterior mean")
    posterior_var: Optional[float] = Field(None, description="Normal posterior variance")
    ci_low: Optional[float] = Field(None, description="Reported interval lower bound")
    ci_high: Optional[float] = Field(None, description="Reported interval upper bound")
    prob_statements: List[ProbabilityStatement] = Field(default_factory=list)
    arm_summaries: List[ArmSummary] = Field(default_factory=list)
    arm_estimates: List[ArmEstimate] = Field(default_factory=list)
    flag: Optional[str] = Field(None, description="Why an estimate is incomplete, if it is")

    @model_validator(mode="after")
    def _ordered_interval(self) -> "SubgroupEstimate":
        if None not in (self.ci_low, self.ci_high, self.posterior_mean):
            tol = 1e-12 * max(1.0, abs(self.posterior_mean))
            if not self.ci_low - tol <= self.posterior_mean <= self.ci_high + tol:
                raise ValueError(
                    f"subgroup {self.k}: interval [{self.ci_low}, {self.ci_high}] "
                    f"does not contain {self.posterior_mean}"
                )
        return self

    @property
    def point(self) -> Optional[float]:
        """Posterior mean when available, else theta_tilde."""
        return self.posterior_mean if self.posterior_mean is not None else self.theta_tilde

    def probability(self, threshold: float, direction: str = ">") -> Optional[float]:
        for statement in self.prob_statements:
            if statement.direction == direction and abs(statement.threshold - threshold) < 1e-12:
                return statement.probability
        return None


# Stage Summaries
class CovariateFilterRecord(_Record):
    name: str
    coefficient: float = Field(..., description="Standardized coefficient at the chosen lambda")
    kept: bool


class FilterSummary(_Record):
    """Elastic-net filter outcome."""
    enabled: bool
    family: Optional[str] = None
    alpha: Optional[float] = None
    chosen_lambda: Optional[float] = None
    covariates: List[CovariateFilterRecord] = Field(default_factory=list)


class SplitRecord(_Record):
    covariate: str
    kind: Literal["continuous", "binary"]
    cutpoint: Optional[float] = Field(None, description="Left child is <= cutpoint (continuous)")
    statistic: float
    p_value: float = Field(..., description="Unadjusted p-value of the chosen covariate")
    adjusted_p_value: float = Field(..., description="Bonferroni-adjusted p-value")


class TreeNodeRecord(_Record):
    """One node of a serialized subgroup tree."""
    node_id: int
    depth: int
    n: int
    rule: str
    subgroup: Optional[int] = Field(None, description="k for terminal nodes")
    split: Optional[SplitRecord] = None
    children: List["TreeNodeRecord"] = Field(default_factory=list)


TreeNodeRecord.model_rebuild()


class TreeSummary(_Record):
    source: Literal["mob_observed", "ctree_ple"]
    alpha: float
    max_depth: int
    min_node: int
    n_subgroups: int
    root: TreeNodeRecord


class BootstrapSubgroupSummary(_Record):
    k: int
    smoothed_estimate: float
    ci_low: float
    ci_high: float
    prob_statements: List[ProbabilityStatement] = Field(default_factory=list)
    vector: Optional[List[float]] = Field(None, description="Per-resample estimates (flag-gated)")


class BootstrapSummary(_Record):
    resamples: int
    alpha: float
    redraws: int = Field(..., description="Single-arm resamples redrawn")
    subgroups: List[BootstrapSubgroupSummary]


# Report Models
class RunManifest(_Record):
    """Everything needed to regenerate a report bit-identically."""
    tool_version: str
    schema_version: str = SCHEMA_VERSION
    seed: int
    config_hash: str
    config: Dict[str, Any]
    input_path: Optional[str] = None
    input_sha256: Optional[str] = None
    dataset_hash: str
    versions: Dict[str, str] = Field(default_factory=dict)


class AnalysisReport(_Record):
    """Complete output of one pipeline run."""
    schema_version: str = SCHEMA_VERSION
    configuration: str
    outcome_family: Literal["continuous", "binary"]
    n: int
    p: int
    q: int = Field(..., description="Covariates passed to subgroup discovery")
    thresholds: List[float]
    filter: FilterSummary
    tree: TreeSummary
    overall: SubgroupEstimate
    subgroups: List[SubgroupEstimate]
    benefit_group: Optional[SubgroupEstimate] = Field(
        None, description="Pooled estimate (k = -1) of the subgroups whose posterior favours treatment"
    )
    bootstrap: Optional[BootstrapSummary] = None
    manifest: RunManifest

    def subgroup(self, k: int) -> SubgroupEstimate:
        if k == 0:
            return self.overall
        for estimate in self.subgroups:
            if estimate.k == k:
                return estimate
        raise KeyError(f"no subgroup {k} in report")

    def to_json(self) -> str:
        return self.model_dump_json(indent=2)
