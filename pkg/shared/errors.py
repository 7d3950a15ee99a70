"""Exception hierarchy for the PRISM subgroup-identification system.

Every error carries the CLI exit code it maps to:
    0 - ok
    1 - input error (bad file, bad column, bad config)
    2 - numeric failure (degenerate estimates, non-convergence)
"""

from typing import List, Optional, Sequence


class PrismError(Exception):
    """Base class for all errors raised by the pipeline."""

    exit_code = 2


# ============================================================================
# INPUT ERRORS (exit code 1)
# ============================================================================

class InputError(PrismError):
    """Raised when user-supplied input cannot be used."""

    exit_code = 1


class ConfigError(InputError):
    """Raised when a configuration file or override is invalid."""


class DatasetFileNotFoundError(InputError):
    """Raised when the trial CSV does not exist."""

    def __init__(self, path: str):
        self.path = path
        super().__init__(f"Dataset file not found: {path}")


class MissingColumnError(InputError):
    """Raised when a named outcome/treatment column is absent from the header."""

    def __init__(self, column: str, available: Sequence[str]):
        self.column = column
        self.available = list(available)
        super().__init__(
            f"Column '{column}' not found in header (available: {', '.join(self.available)})"
        )


class NonNumericCellError(InputError):
    """Raised when a cell cannot be parsed as a number."""

    def __init__(self, row: int, column: str, value: str):
        self.row = row
        self.column = column
        self.value = value
        super().__init__(f"Non-numeric value '{value}' at line {row}, column '{column}'")


class MissingValueError(InputError):
    """Raised when a cell is empty. Missing data is rejected, never imputed."""

    def __init__(self, row: int, column: str):
        self.row = row
        self.column = column
        super().__init__(f"Missing value at line {row}, column '{column}'")


class EmptyArmError(InputError):
    """Raised when one treatment arm has no patients."""

    def __init__(self, arm: int):
        self.arm = arm
        super().__init__(f"treatment arm empty: no patients with treatment = {arm}")


class DatasetValidationError(InputError):
    """Raised when a dataset violates one or more TrialDataset invariants."""

    def __init__(self, issues: List["object"]):
        self.issues = list(issues)
        summary = "; ".join(str(issue) for issue in self.issues)
        super().__init__(f"Dataset failed validation ({len(self.issues)} issue(s)): {summary}")


# ============================================================================
# NUMERICAL ERRORS (exit code 2)
# ============================================================================

class NumericalError(PrismError):
    """Raised when an estimator cannot produce a well-defined result."""

    exit_code = 2


class NonFiniteInputError(NumericalError):
    """Raised when a numeric routine receives NaN or infinite values."""


class InvalidParameterError(NumericalError, ValueError):
    """Raised when a tuning parameter lies outside its admissible range."""


class EmptySubgroupError(NumericalError):
    """Raised when an estimate is requested for a subgroup with no rows."""

    def __init__(self, k: int):
        self.k = k
        super().__init__(f"Subgroup {k} is empty")


class InsufficientSubgroupError(NumericalError):
    """Raised when a subgroup is too small for the requested statistic."""

    def __init__(self, k: int, n_k: int, required: int):
        self.k = k
        self.n_k = n_k
        super().__init__(f"Subgroup {k} has {n_k} row(s); at least {required} required")


class DegenerateProbabilityError(NumericalError):
    """Raised when an estimated treatment probability is 0 or 1."""


class EmptyOracleCellError(NumericalError):
    """Raised when a subgroup rule matches none of the oracle patients."""

    def __init__(self, rule: str, m: int):
        self.rule = rule
        super().__init__(f"Rule '{rule}' matched zero of {m} oracle patients")


class NonPositiveDefiniteError(NumericalError):
    """Raised when a correlation matrix has no Cholesky factor."""


class ConvergenceError(NumericalError):
    """Raised when an iterative solver breaks its descent guarantee or fails to converge."""


class BootstrapResampleError(NumericalError):
    """Raised when a resample keeps drawing a single treatment arm."""

    def __init__(self, b: int, retries: int):
        self.b = b
        self.retries = retries
        super().__init__(f"Bootstrap resample {b} drew a single arm {retries} times in a row")


class ReportSchemaError(PrismError):
    """Raised when a serialized report does not match the published JSON schema."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"report.json does not match schema at '{path}': {message}")


class StageError(PrismError):
    """Wraps an error raised inside a pipeline stage with the stage label."""

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 2)
        super().__init__(f"[{stage}] {cause}")


def exit_code_for(error: Optional[BaseException]) -> int:
    """Map an exception (or None) onto the CLI exit code."""
    if error is None:
        return 0
    return int(getattr(error, "exit_code", 2))
