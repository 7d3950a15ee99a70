"""Canonical trial data model, validation and CSV ingestion.

A TrialDataset is the single currency passed between pipeline stages: one row per
patient with an outcome, a binary treatment indicator and a covariate table whose
columns are tagged continuous or binary. Datasets are immutable once built, so they
can be shared read-only across worker threads and processes.
"""

import hashlib
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from shared.errors import (
    DatasetFileNotFoundError,
    DatasetValidationError,
    EmptyArmError,
    MissingColumnError,
    MissingValueError,
    NonNumericCellError,
)

logger = logging.getLogger(__name__)


class CovariateKind(str, Enum):
    """Per-column covariate tag; split search differs by kind."""
    CONTINUOUS = "continuous"
    BINARY = "binary"


class OutcomeFamily(str, Enum):
    """Outcome type driving the filter family, node model and estimators."""
    CONTINUOUS = "continuous"
    BINARY = "binary"


def _frozen(values, ndim: int) -> np.ndarray:
    arr = np.array(values, dtype=float, copy=True)
    if ndim == 2 and arr.ndim == 1:
        arr = arr.reshape(-1, 0) if arr.size == 0 else arr.reshape(-1, 1)
    arr.setflags(write=False)
    return arr


def _is_zero_one(values: np.ndarray) -> bool:
    finite = values[~np.isnan(values)]
    return bool(np.all((finite == 0) | (finite == 1)))


@dataclass(frozen=True)
class TrialDataset:
    """Outcome vector, treatment vector and covariate table for n patients.

    Construction never validates; call ``validate`` (or use ``load_csv``) to check the
    invariants, so that invalid datasets can still be inspected and reported on.
    """

    y: np.ndarray
    a: np.ndarray
    x: np.ndarray
    covariate_kinds: Tuple[CovariateKind, ...]
    covariate_names: Tuple[str, ...]
    outcome_name: str = "y"
    treatment_name: str = "a"

    def __post_init__(self):
        object.__setattr__(self, "y", _frozen(self.y, 1))
        object.__setattr__(self, "a", _frozen(self.a, 1))
        object.__setattr__(self, "x", _frozen(self.x, 2))
        object.__setattr__(self, "covariate_kinds", tuple(CovariateKind(k) for k in self.covariate_kinds))
        object.__setattr__(self, "covariate_names", tuple(str(c) for c in self.covariate_names))

    @property
    def n(self) -> int:
        return int(self.x.shape[0])

    @property
    def p(self) -> int:
        return int(self.x.shape[1])

    def covariate_frame(self) -> pd.DataFrame:
        return pd.DataFrame(np.array(self.x), columns=list(self.covariate_names))

    def frame(self) -> pd.DataFrame:
        """Full table in file order: outcome, treatment, covariates."""
        df = self.covariate_frame()
        df.insert(0, self.treatment_name, np.array(self.a))
        df.insert(0, self.outcome_name, np.array(self.y))
        return df

    def column_index(self, name: str) -> int:
        return self.covariate_names.index(name)

    def take(self, rows: Sequence[int]) -> "TrialDataset":
        """Row subset (rows may repeat, as in a bootstrap resample)."""
        idx = np.asarray(rows, dtype=int)
        return TrialDataset(
            y=self.y[idx],
            a=self.a[idx],
            x=self.x[idx, :],
            covariate_kinds=self.covariate_kinds,
            covariate_names=self.covariate_names,
            outcome_name=self.outcome_name,
            treatment_name=self.treatment_name,
        )

    def arm_sizes(self) -> Tuple[int, int]:
        return int(np.sum(self.a == 0)), int(np.sum(self.a == 1))


@dataclass(frozen=True)
class FilteredView:
    """The q <= p covariates retained by the filter, as indices into the base dataset."""

    base: TrialDataset
    kept_columns: Tuple[int, ...] = field(default_factory=tuple)

    def __post_init__(self):
        kept = tuple(int(j) for j in self.kept_columns)
        if len(set(kept)) != len(kept):
            raise ValueError(f"kept_columns contains duplicates: {kept}")
        if any(j < 0 or j >= self.base.p for j in kept):
            raise ValueError(f"kept_columns {kept} out of range for p={self.base.p}")
        object.__setattr__(self, "kept_columns", kept)

    @classmethod
    def all_columns(cls, base: TrialDataset) -> "FilteredView":
        return cls(base=base, kept_columns=tuple(range(base.p)))

    @property
    def q(self) -> int:
        return len(self.kept_columns)

    @property
    def x(self) -> np.ndarray:
        return self.base.x[:, list(self.kept_columns)]

    @property
    def names(self) -> Tuple[str, ...]:
        return tuple(self.base.covariate_names[j] for j in self.kept_columns)

    @property
    def kinds(self) -> Tuple[CovariateKind, ...]:
        return tuple(self.base.covariate_kinds[j] for j in self.kept_columns)


# ============================================================================
# VALIDATION
# ============================================================================

@dataclass(frozen=True)
class ValidationIssue:
    """One violated dataset invariant."""
    code: str
    message: str
    row: Optional[int] = None
    column: Optional[str] = None

    def __str__(self) -> str:
        return f"{self.code}: {self.message}"


def validate(ds: TrialDataset) -> List[ValidationIssue]:
    """
    Check every TrialDataset invariant and report all violations.

    Args:
        ds: Dataset to check

    Returns:
        List of issues; empty iff the dataset is valid
    """
    issues: List[ValidationIssue] = []
    n = ds.x.shape[0]

    if n < 2:
        issues.append(ValidationIssue("too_few_rows", f"need at least 2 patients, got {n}"))
    for label, vec in (("outcome", ds.y), ("treatment", ds.a)):
        if vec.shape[0] != n:
            issues.append(ValidationIssue(
                "length_mismatch", f"{label} has {vec.shape[0]} rows but covariates have {n}"
            ))
    if len(ds.covariate_names) != ds.x.shape[1] or len(ds.covariate_kinds) != ds.x.shape[1]:
        issues.append(ValidationIssue(
            "covariate_labels",
            f"{ds.x.shape[1]} covariate columns but {len(ds.covariate_names)} names "
            f"and {len(ds.covariate_kinds)} kinds",
        ))
    if len(set(ds.covariate_names)) != len(ds.covariate_names):
        issues.append(ValidationIssue("duplicate_names", "covariate names are not unique"))

    for label, vec in (("outcome", ds.y), ("treatment", ds.a)):
        missing = np.flatnonzero(~np.isfinite(vec))
        if missing.size:
            issues.append(ValidationIssue(
                "missing_value", f"{label} has {missing.size} missing/non-finite value(s)",
                row=int(missing[0]),
            ))
    if ds.x.size:
        bad_rows, bad_cols = np.nonzero(~np.isfinite(ds.x))
        for j in sorted(set(bad_cols.tolist())):
            name = ds.covariate_names[j] if j < len(ds.covariate_names) else str(j)
            rows = bad_rows[bad_cols == j]
            issues.append(ValidationIssue(
                "missing_value", f"covariate '{name}' has {rows.size} missing/non-finite value(s)",
                row=int(rows[0]), column=name,
            ))

    a_finite = ds.a[np.isfinite(ds.a)]
    if not _is_zero_one(a_finite):
        issues.append(ValidationIssue("treatment_levels", "treatment must contain only 0 and 1"))
    for arm in (0, 1):
        if not np.any(a_finite == arm):
            issues.append(ValidationIssue("empty_arm", f"treatment arm empty: no patients with treatment = {arm}"))

    for j, kind in enumerate(ds.covariate_kinds):
        if kind is CovariateKind.BINARY and j < ds.x.shape[1] and not _is_zero_one(ds.x[:, j]):
            issues.append(ValidationIssue(
                "binary_levels", f"binary covariate '{ds.covariate_names[j]}' has values other than 0/1",
                column=ds.covariate_names[j],
            ))
    return issues


def infer_outcome_family(ds: TrialDataset) -> OutcomeFamily:
    """Binary iff every outcome is 0 or 1."""
    return OutcomeFamily.BINARY if _is_zero_one(ds.y) else OutcomeFamily.CONTINUOUS


def infer_kind(values: np.ndarray) -> CovariateKind:
    return CovariateKind.BINARY if _is_zero_one(values) else CovariateKind.CONTINUOUS


# ============================================================================
# CSV INGESTION
# ============================================================================

def _parse_numeric(raw: pd.DataFrame) -> pd.DataFrame:
    """Parse a string table, raising on the first bad cell in row-major order."""
    stripped = raw.apply(lambda col: col.str.strip())
    parsed = stripped.apply(lambda col: pd.to_numeric(col, errors="coerce"))
    empty = stripped.eq("").to_numpy()
    bad = (~np.isfinite(parsed.to_numpy(dtype=float))) & ~empty
    offending = np.argwhere(empty | bad)
    if offending.size:
        i, j = (int(v) for v in offending[0])
        line = i + 2  # header is line 1
        column = str(raw.columns[j])
        if empty[i, j]:
            raise MissingValueError(row=line, column=column)
        raise NonNumericCellError(row=line, column=column, value=str(raw.iat[i, j]))
    return parsed.astype(float)


def load_csv(
    path: Union[str, Path],
    outcome_col: str,
    treatment_col: str,
    kind_overrides: Optional[Dict[str, Union[str, CovariateKind]]] = None,
) -> TrialDataset:
    """
    Read a trial CSV into a validated TrialDataset.

    Every column other than the outcome and treatment becomes a covariate, in file
    order. A covariate is tagged binary iff all of its values are 0 or 1, unless an
    override says otherwise.

    Args:
        path: CSV file with a header row (UTF-8, '.' decimal separator)
        outcome_col: Name of the outcome column
        treatment_col: Name of the 0/1 treatment column
        kind_overrides: Optional {covariate name: kind} map

    Returns:
        Validated TrialDataset

    Raises:
        DatasetFileNotFoundError, MissingColumnError, NonNumericCellError,
        MissingValueError, EmptyArmError, DatasetValidationError
    """
    path = Path(path)
    if not path.is_file():
        raise DatasetFileNotFoundError(str(path))

    raw = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    raw.columns = [str(c).strip() for c in raw.columns]
    for column in (outcome_col, treatment_col):
        if column not in raw.columns:
            raise MissingColumnError(column, raw.columns)

    table = _parse_numeric(raw)
    covariate_names = [c for c in table.columns if c not in (outcome_col, treatment_col)]
    x = table[covariate_names].to_numpy(dtype=float) if covariate_names else np.empty((len(table), 0))

    overrides = {k: CovariateKind(v) for k, v in (kind_overrides or {}).items()}
    unknown = set(overrides) - set(covariate_names)
    if unknown:
        raise MissingColumnError(sorted(unknown)[0], covariate_names)
    kinds = tuple(overrides.get(name, infer_kind(x[:, j])) for j, name in enumerate(covariate_names))

    a = table[treatment_col].to_numpy(dtype=float)
    for arm in (0, 1):
        if _is_zero_one(a) and not np.any(a == arm):
            raise EmptyArmError(arm)

    ds = TrialDataset(
        y=table[outcome_col].to_numpy(dtype=float),
        a=a,
        x=x,
        covariate_kinds=kinds,
        covariate_names=tuple(covariate_names),
        outcome_name=outcome_col,
        treatment_name=treatment_col,
    )
    issues = validate(ds)
    if issues:
        raise DatasetValidationError(issues)

    n_binary = sum(k is CovariateKind.BINARY for k in kinds)
    logger.info(f"Loaded {path.name}: n={ds.n}, p={ds.p} ({n_binary} binary), arms={ds.arm_sizes()}")
    return ds


def write_csv(ds: TrialDataset, path: Union[str, Path]) -> Path:
    """Write a dataset so that ``load_csv`` reproduces it exactly."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df = ds.frame()
    df[ds.treatment_name] = df[ds.treatment_name].astype(int)
    for name, kind in zip(ds.covariate_names, ds.covariate_kinds):
        if kind is CovariateKind.BINARY:
            df[name] = df[name].astype(int)
    df.to_csv(path, index=False, encoding="utf-8")
    return path


# ============================================================================
# HASHING
# ============================================================================

def file_sha256(path: Union[str, Path]) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as f:
        for chunk in iter(lambda: f.read(8192), b""):
            h.update(chunk)
    return h.hexdigest()


def dataset_hash(ds: TrialDataset) -> str:
    """Content hash over values, names and kinds."""
    h = hashlib.sha256()
    for arr in (ds.y, ds.a, ds.x):
        h.update(np.ascontiguousarray(arr, dtype=np.float64).tobytes())
    h.update("|".join(ds.covariate_names).encode("utf-8"))
    h.update("|".join(k.value for k in ds.covariate_kinds).encode("utf-8"))
    return h.hexdigest()
