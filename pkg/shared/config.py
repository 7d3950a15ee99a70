"""Configuration management for the PRISM subgroup-identification system.

Two layers:
    - ``Config``: process-level settings read from the environment (log levels,
      worker count, output directory).
    - ``PipelineConfig`` / ``StudyConfig``: every algorithmic knob, validated by pydantic
      and loaded from YAML files that name a preset and override nested keys.
"""

import copy
import hashlib
import json
import logging
import os
import tempfile
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from shared.data import CovariateKind, OutcomeFamily
from shared.errors import ConfigError

logger = logging.getLogger(__name__)

PROJECT_ROOT = Path(__file__).parent.parent
PROJECT_RUNS_DIR = PROJECT_ROOT / "runs"
CONFIG_DIR = PROJECT_ROOT / "config"


def get_output_base_dir() -> Path:
    """
    Get the base directory for run outputs.

    3-tier priority:
    1. PRISM_OUTPUT_DIR environment variable (if set by user)
    2. Project runs directory (./runs in project root) - DEFAULT
    3. System temp directory (fallback if project dir not writable)

    Returns:
        Path object pointing to the output base directory
    """
    env_dir = os.getenv("PRISM_OUTPUT_DIR")
    if env_dir:
        base = Path(env_dir)
        logger.info(f"Using output directory from PRISM_OUTPUT_DIR: {base}")
        base.mkdir(parents=True, exist_ok=True)
        return base

    try:
        PROJECT_RUNS_DIR.mkdir(parents=True, exist_ok=True)
        probe = PROJECT_RUNS_DIR / ".write_test"
        probe.touch()
        probe.unlink()
        logger.debug(f"Using project runs directory: {PROJECT_RUNS_DIR}")
        return PROJECT_RUNS_DIR
    except (PermissionError, OSError) as e:
        logger.warning(f"Cannot use project runs directory: {e}")

    system_temp = Path(tempfile.gettempdir()) / "prism-runs"
    system_temp.mkdir(parents=True, exist_ok=True)
    logger.info(f"Using system temp directory (fallback): {system_temp}")
    return system_temp


def _env_int(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw == "":
        return default
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"Environment variable {name} must be an integer, got '{raw}'")


@dataclass
class Config:
    """Process-level settings; read after ``load_dotenv`` has run."""

    log_level: str = field(default_factory=lambda: os.getenv("LOG_LEVEL", "INFO"))
    stage_log_level: str = field(default_factory=lambda: os.getenv("STAGE_LOG_LEVEL", "INFO"))
    workers: int = field(default_factory=lambda: _env_int("PRISM_WORKERS", 1))
    output_dir: Optional[str] = field(default_factory=lambda: os.getenv("PRISM_OUTPUT_DIR"))

    def validate(self) -> None:
        """Raise ConfigError for unusable values."""
        levels = {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}
        for name, value in (("LOG_LEVEL", self.log_level), ("STAGE_LOG_LEVEL", self.stage_log_level)):
            if value.upper() not in levels:
                raise ConfigError(f"{name} must be one of {sorted(levels)}, got '{value}'")
        if self.workers < 1:
            raise ConfigError(f"PRISM_WORKERS must be >= 1, got {self.workers}")


# ============================================================================
# PIPELINE CONFIGURATION
# ============================================================================

class Configuration(str, Enum):
    """Named pipeline configurations (plus custom combinations)."""
    MOB = "MOB"
    PRISM_A = "PRISM_A"
    PRISM_B = "PRISM_B"
    CUSTOM = "custom"


class SubmodMethod(str, Enum):
    MOB = "mob"
    CTREE = "ctree"


class ParamMethod(str, Enum):
    PLE = "ple"
    GLM = "glm"


class _Settings(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class DataSettings(_Settings):
    """CSV column roles and optional covariate kind overrides."""
    outcome_col: str = Field("y", description="Outcome column name")
    treatment_col: str = Field("a", description="0/1 treatment column name")
    kind_overrides: Dict[str, CovariateKind] = Field(default_factory=dict, description="Covariate kind overrides")


class FilterSettings(_Settings):
    """Step 1: elastic-net filter."""
    enabled: bool = Field(True, description="Run the filter; off keeps all covariates")
    alpha: float = Field(0.5, ge=0.0, le=1.0, description="Elastic-net mixing weight (1 = lasso)")
    folds: int = Field(10, ge=2, description="Cross-validation folds")
    n_lambda: int = Field(100, ge=2, description="Length of the lambda path")
    lambda_min_ratio: Optional[float] = Field(None, gt=0.0, lt=1.0, description="Smallest lambda / lambda_max")


class PleSettings(_Settings):
    """Step 2: counterfactual random forests."""
    enabled: bool = Field(True, description="Fit patient-level estimates")
    num_trees: int = Field(500, ge=1, description="Trees per arm-specific forest")
    min_node_frac: float = Field(0.10, gt=0.0, le=1.0, description="Minimum leaf size as a fraction of total N")
    mtry: Optional[int] = Field(None, ge=1, description="Covariates tried per split; None = max(q // 3, 1)")
    out_of_bag: bool = Field(False, description="Predict a patient's own arm out-of-bag")


class SubmodSettings(_Settings):
    """Step 3: tree-based subgroup discovery."""
    method: SubmodMethod = Field(SubmodMethod.MOB, description="Tree algorithm")
    alpha: float = Field(0.10, gt=0.0, lt=1.0, description="Split significance level (Bonferroni-adjusted)")
    max_depth: int = Field(4, ge=0, description="Maximum tree depth (root = 0)")
    min_node_frac: float = Field(0.10, gt=0.0, le=1.0, description="Minimum node size as a fraction of n")
    trim: float = Field(0.10, gt=0.0, lt=0.5, description="Trimming fraction for the sup-LM statistic")


class ParamSettings(_Settings):
    """Step 4: subgroup estimation."""
    method: ParamMethod = Field(ParamMethod.PLE, description="PLE averaging or within-subgroup GLM")


class BayesConfig(_Settings):
    """Normal prior update and probability statements."""
    gamma: Optional[float] = Field(None, gt=0.0, description="Prior variance scale; None = n, inf allowed")
    alpha: float = Field(0.05, gt=0.0, lt=1.0, description="1 - CI level")
    thresholds: List[float] = Field(default_factory=lambda: [0.0], description="Comparators c for P(theta > c), P(theta < c)")
    benefit_direction: Literal["greater", "less"] = Field("greater", description="Direction of benefit for assignment")

    @field_validator("thresholds")
    @classmethod
    def _sorted_unique(cls, v: List[float]) -> List[float]:
        if not v:
            raise ValueError("at least one threshold is required")
        return sorted(set(float(c) for c in v))

    def gamma_for(self, n: int) -> float:
        return float(n) if self.gamma is None else float(self.gamma)


class BootstrapSettings(_Settings):
    """Optional bootstrap smoothing of subgroup estimates."""
    resamples: int = Field(0, ge=0, description="B resamples; 0 = off")
    save_vectors: bool = Field(False, description="Write per-subgroup estimate vectors")
    max_retries: int = Field(10, ge=0, description="Redraws allowed when a resample has a single arm")


class PipelineConfig(_Settings):
    """Complete, validated configuration of one PRISM run."""
    configuration: Configuration = Field(Configuration.PRISM_A, description="Preset name or custom")
    outcome_family: Literal["continuous", "binary", "auto"] = Field("auto", description="Outcome family")
    data: DataSettings = Field(default_factory=DataSettings)
    filter: FilterSettings = Field(default_factory=FilterSettings)
    ple: PleSettings = Field(default_factory=PleSettings)
    submod: SubmodSettings = Field(default_factory=SubmodSettings)
    param: ParamSettings = Field(default_factory=ParamSettings)
    bayes: BayesConfig = Field(default_factory=BayesConfig)
    bootstrap: BootstrapSettings = Field(default_factory=BootstrapSettings)
    seed: int = Field(2024, ge=0, description="Base seed for every random stream")
    workers: int = Field(1, ge=1, description="Parallel workers (does not affect results)")

    @model_validator(mode="after")
    def _stages_consistent(self) -> "PipelineConfig":
        if self.submod.method is SubmodMethod.CTREE and not self.ple.enabled:
            raise ValueError("CTREE subgroup discovery needs the PLE stage (ple.enabled = true)")
        if self.param.method is ParamMethod.PLE and not self.ple.enabled:
            raise ValueError("PLE parameter estimation needs the PLE stage (ple.enabled = true)")
        return self

    def family_for(self, detected: OutcomeFamily) -> OutcomeFamily:
        return detected if self.outcome_family == "auto" else OutcomeFamily(self.outcome_family)


_PRESET_COMPONENTS: Dict[Configuration, Dict[str, Any]] = {
    Configuration.MOB: {
        "filter": {"enabled": False},
        "ple": {"enabled": False},
        "submod": {"method": "mob"},
        "param": {"method": "glm"},
    },
    Configuration.PRISM_A: {
        "filter": {"enabled": True},
        "ple": {"enabled": True},
        "submod": {"method": "mob"},
        "param": {"method": "ple"},
    },
    Configuration.PRISM_B: {
        "filter": {"enabled": True},
        "ple": {"enabled": True},
        "submod": {"method": "ctree"},
        "param": {"method": "ple"},
    },
}


def deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    """Recursively merge ``override`` into a copy of ``base``."""
    merged = copy.deepcopy(base)
    for key, value in (override or {}).items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def preset_config(name: Union[str, Configuration], **overrides: Any) -> PipelineConfig:
    """
    Build the pipeline configuration for a named preset.

    Args:
        name: MOB, PRISM_A or PRISM_B
        **overrides: Nested overrides merged on top of the preset

    Returns:
        Validated PipelineConfig
    """
    try:
        configuration = Configuration(name)
    except ValueError:
        raise ConfigError(f"Unknown configuration '{name}' (expected MOB, PRISM_A or PRISM_B)")
    if configuration is Configuration.CUSTOM:
        raise ConfigError("'custom' is not a preset; start from MOB, PRISM_A or PRISM_B")
    payload = deep_merge({"configuration": configuration.value}, _PRESET_COMPONENTS[configuration])
    return build_pipeline_config(deep_merge(payload, overrides))


def _components_match(payload: Dict[str, Any], configuration: Configuration) -> bool:
    for section, values in _PRESET_COMPONENTS[configuration].items():
        for key, expected in values.items():
            if payload.get(section, {}).get(key, expected) != expected:
                return False
    return True


def build_pipeline_config(payload: Dict[str, Any]) -> PipelineConfig:
    """Validate a merged dict, relabelling altered presets as custom."""
    payload = dict(payload)
    name = payload.get("configuration", Configuration.PRISM_A.value)
    try:
        configuration = Configuration(name)
    except ValueError:
        raise ConfigError(f"Unknown configuration '{name}'")
    if configuration is not Configuration.CUSTOM and not _components_match(payload, configuration):
        logger.info(f"Stage choices differ from preset {configuration.value}; running as custom")
        payload["configuration"] = Configuration.CUSTOM.value
    try:
        return PipelineConfig.model_validate(payload)
    except ValidationError as e:
        raise ConfigError(f"Invalid pipeline configuration: {e}") from e


def read_yaml(path: Union[str, Path]) -> Dict[str, Any]:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Config file not found: {path}")
    try:
        with path.open("r", encoding="utf-8") as f:
            content = yaml.safe_load(f) or {}
    except yaml.YAMLError as e:
        raise ConfigError(f"Cannot parse YAML config {path}: {e}") from e
    if not isinstance(content, dict):
        raise ConfigError(f"Config file {path} must contain a mapping at the top level")
    return content


def load_pipeline_config(
    path: Optional[Union[str, Path]] = None,
    overrides: Optional[Dict[str, Any]] = None,
) -> PipelineConfig:
    """
    Load a pipeline config from YAML.

    The file may name a preset under ``configuration:`` (default PRISM_A); every other
    key is deep-merged over that preset. ``overrides`` (e.g. CLI flags) win last.
    """
    content = read_yaml(path) if path else {}
    content = deep_merge(content, overrides or {})
    name = content.pop("configuration", Configuration.PRISM_A.value)
    if name == Configuration.CUSTOM.value:
        cfg = build_pipeline_config(deep_merge({"configuration": name}, content))
    else:
        cfg = preset_config(name, **content)
    logger.debug(f"Loaded pipeline config ({cfg.configuration.value}) from {path or 'defaults'}")
    return cfg


def canonical_json(model: BaseModel, exclude: Optional[set] = None) -> str:
    return json.dumps(model.model_dump(mode="json", exclude=exclude), sort_keys=True, separators=(",", ":"))


def config_hash(cfg: PipelineConfig) -> str:
    """SHA-256 of the canonical JSON dump; the worker count is excluded since it never changes results."""
    return hashlib.sha256(canonical_json(cfg, exclude={"workers"}).encode("utf-8")).hexdigest()


# ============================================================================
# STUDY CONFIGURATION
# ============================================================================

class EffectSetting(str, Enum):
    """Treatment-effect structure of a simulated trial."""
    NULL = "null"
    SUBGROUP4 = "subgroup4"


class StudyMethod(str, Enum):
    """Methods compared by the simulation study."""
    MOB = "MOB"
    PRISM_A = "PRISM_A"
    PRISM_B = "PRISM_B"
    PRISM_A_NOFILTER = "PRISM_A_NOFILTER"
    PRISM_B_NOFILTER = "PRISM_B_NOFILTER"
    ORACLE = "ORACLE"
    STANDARD = "STANDARD"


class StudyConfig(_Settings):
    """Scenario grid, methods and scale of a simulation study."""
    families: List[OutcomeFamily] = Field(default_factory=lambda: [OutcomeFamily.CONTINUOUS])
    settings: List[EffectSetting] = Field(default_factory=lambda: [EffectSetting.NULL, EffectSetting.SUBGROUP4])
    n_noise: List[int] = Field(default_factory=lambda: [6], description="Noise-covariate counts (6 or 56 canonical)")
    n: int = Field(800, ge=4, description="Patients per simulated trial")
    methods: List[StudyMethod] = Field(
        default_factory=lambda: [
            StudyMethod.MOB, StudyMethod.PRISM_A, StudyMethod.PRISM_B, StudyMethod.ORACLE, StudyMethod.STANDARD
        ]
    )
    replicates: int = Field(200, ge=1, description="Replicates R per scenario")
    seed: int = Field(2024, ge=0, description="Base seed; replicate seeds are derived streams")
    cutoffs: List[float] = Field(default_factory=lambda: [0.50, 0.80], description="Posterior-probability cutoffs")
    oracle_size: int = Field(10000, ge=1, description="Oracle patients")
    standard_alpha: float = Field(0.05, gt=0.0, lt=1.0, description="Standard-practice test level")
    adjusted_standard_practice: bool = Field(False, description="Adjust the standard test for X1-X3")
    workers: int = Field(1, ge=1, description="Parallel replicate workers")
    pipeline_overrides: Dict[str, Any] = Field(default_factory=dict, description="Nested overrides for every preset")

    @field_validator("cutoffs")
    @classmethod
    def _cutoffs_open_unit(cls, v: List[float]) -> List[float]:
        if not v or any(not 0.0 < c < 1.0 for c in v):
            raise ValueError("cutoffs must lie in (0, 1)")
        return sorted(set(v))

    @field_validator("n")
    @classmethod
    def _even(cls, v: int) -> int:
        if v % 2:
            raise ValueError("n must be even for 1:1 randomization")
        return v


def load_study_config(
    path: Optional[Union[str, Path]] = None,
    overrides: Optional[Dict[str, Any]] = None,
) -> StudyConfig:
    content = deep_merge(read_yaml(path) if path else {}, overrides or {})
    try:
        return StudyConfig.model_validate(content)
    except ValidationError as e:
        raise ConfigError(f"Invalid study configuration: {e}") from e
