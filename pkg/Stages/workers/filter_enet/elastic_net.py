"""
Elastic-net regression paths by cyclic coordinate descent.

Objective at penalty lambda (columns standardized to mean 0, variance 1):

    gaussian:  (1/2n) ||y - b0 - X b||^2            + lambda * P(b)
    binomial:  -(1/n) loglik(b0 + X b)               + lambda * P(b)
    P(b) = (1 - alpha)/2 ||b||_2^2 + alpha ||b||_1

The gaussian problem is solved directly in covariance form. The binomial problem is
solved by iteratively reweighted least squares, each weighted quadratic again solved in
covariance form. Every coordinate-descent sweep is checked for objective descent.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy.special import expit
from sklearn.model_selection import KFold

from shared.data import OutcomeFamily
from shared.errors import ConvergenceError, InvalidParameterError, NonFiniteInputError

logger = logging.getLogger(__name__)

COEF_TOL = 1e-12
MAX_SWEEPS = 100_000
IRLS_TOL = 1e-10
IRLS_MAX_ITER = 100
PROB_CLIP = 1e-5
ALPHA_FLOOR = 1e-3


def soft_threshold(z: float, gamma: float) -> float:
    """S(z, gamma) = sign(z) * max(|z| - gamma, 0)."""
    if z > gamma:
        return z - gamma
    if z < -gamma:
        return z + gamma
    return 0.0


# ============================================================================
# STANDARDIZATION
# ============================================================================

@dataclass(frozen=True)
class Standardization:
    center: np.ndarray
    scale: np.ndarray
    constant: np.ndarray  # bool mask; constant columns are pinned at 0

    @classmethod
    def fit(cls, x: np.ndarray) -> "Standardization":
        center = x.mean(axis=0) if x.shape[0] else np.zeros(x.shape[1])
        scale = x.std(axis=0) if x.shape[0] else np.ones(x.shape[1])
        constant = np.ptp(x, axis=0) == 0 if x.shape[0] else np.ones(x.shape[1], dtype=bool)
        scale = np.where(constant, 1.0, scale)
        return cls(center=center, scale=scale, constant=constant)

    def transform(self, x: np.ndarray) -> np.ndarray:
        xs = (x - self.center) / self.scale
        xs[:, self.constant] = 0.0
        return xs


def _check_inputs(x: np.ndarray, y: np.ndarray, alpha: float) -> None:
    if not 0.0 <= alpha <= 1.0:
        raise InvalidParameterError(f"alpha must lie in [0, 1], got {alpha}")
    if x.ndim != 2 or y.ndim != 1 or x.shape[0] != y.shape[0]:
        raise InvalidParameterError(f"shape mismatch: x {x.shape}, y {y.shape}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise NonFiniteInputError("elastic net received NaN or infinite values")


# ============================================================================
# COORDINATE DESCENT ON A QUADRATIC
# ============================================================================

def _quadratic_objective(gram: np.ndarray, cross: np.ndarray, beta: np.ndarray, l1: float, l2: float) -> float:
    return float(0.5 * beta @ gram @ beta - cross @ beta + l1 * np.abs(beta).sum() + 0.5 * l2 * beta @ beta)


def _sweep(gram, cross, beta, coords, l1, l2) -> float:
    max_change = 0.0
    for j in coords:
        gjj = gram[j, j]
        if gjj <= 0.0:
            continue
        old = beta[j]
        rho = cross[j] - gram[j] @ beta + gjj * old
        new = soft_threshold(rho, l1) / (gjj + l2)
        if new != old:
            beta[j] = new
            max_change = max(max_change, abs(new - old) * np.sqrt(gjj))
    return max_change


def coordinate_descent(
    gram: np.ndarray,
    cross: np.ndarray,
    lam: float,
    alpha: float,
    beta_init: Optional[np.ndarray] = None,
    free: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, int]:
    """
    Minimize 1/2 b'Gb - c'b + lam * P(b) by cyclic coordinate descent.

    Full sweeps alternate with sweeps restricted to the active set until a full sweep
    moves no coordinate by more than COEF_TOL.

    Args:
        gram: Weighted Gram matrix G (p x p)
        cross: Weighted cross-product vector c (p)
        lam: Penalty lambda >= 0
        alpha: Mixing weight in [0, 1]
        beta_init: Warm start
        free: Bool mask of coordinates allowed to move

    Returns:
        (beta, total sweeps)

    Raises:
        ConvergenceError: if a sweep increases the objective or MAX_SWEEPS is hit
    """
    p = cross.shape[0]
    beta = np.zeros(p) if beta_init is None else np.array(beta_init, dtype=float)
    all_coords = np.flatnonzero(np.ones(p, dtype=bool) if free is None else free)
    beta[np.setdiff1d(np.arange(p), all_coords)] = 0.0
    l1, l2 = lam * alpha, lam * (1.0 - alpha)

    objective = _quadratic_objective(gram, cross, beta, l1, l2)
    sweeps = 0

    def checked_sweep(coords) -> float:
        nonlocal objective, sweeps
        change = _sweep(gram, cross, beta, coords, l1, l2)
        sweeps += 1
        updated = _quadratic_objective(gram, cross, beta, l1, l2)
        if updated > objective + 1e-12 * max(1.0, abs(objective)):
            raise ConvergenceError(
                f"coordinate descent objective increased at sweep {sweeps}: {objective!r} -> {updated!r}"
            )
        objective = updated
        if sweeps > MAX_SWEEPS:
            raise ConvergenceError(f"coordinate descent did not converge in {MAX_SWEEPS} sweeps (lambda={lam})")
        return change

    while checked_sweep(all_coords) >= COEF_TOL:
        active = all_coords[beta[all_coords] != 0.0]
        while active.size and checked_sweep(active) >= COEF_TOL:
            pass
    return beta, sweeps


# ============================================================================
# SINGLE-LAMBDA SOLVER
# ============================================================================

@dataclass(frozen=True)
class ElasticNetSolution:
    """Solution at one lambda, on both the standardized and original scales."""
    lam: float
    intercept_std: float
    coef_std: np.ndarray
    intercept: float
    coef: np.ndarray


def _to_original(std: Standardization, b0: float, beta: np.ndarray) -> Tuple[float, np.ndarray]:
    coef = beta / std.scale
    return float(b0 - coef @ std.center), coef


def _binomial_objective(eta: np.ndarray, y: np.ndarray, beta: np.ndarray, lam: float, alpha: float) -> float:
    nll = np.mean(np.logaddexp(0.0, eta) - y * eta)
    return float(nll + lam * (alpha * np.abs(beta).sum() + 0.5 * (1 - alpha) * beta @ beta))


def _gaussian_quadratic(xs: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    n = xs.shape[0]
    yc = y - y.mean()
    return xs.T @ xs / n, xs.T @ yc / n


def _solve_binomial(
    xs: np.ndarray,
    y: np.ndarray,
    lam: float,
    alpha: float,
    free: np.ndarray,
    b0_init: float,
    beta_init: np.ndarray,
) -> Tuple[float, np.ndarray]:
    n = xs.shape[0]
    b0, beta = b0_init, beta_init.copy()
    eta = b0 + xs @ beta
    objective = _binomial_objective(eta, y, beta, lam, alpha)
    for _ in range(IRLS_MAX_ITER):
        prob = np.clip(expit(eta), PROB_CLIP, 1 - PROB_CLIP)
        w = prob * (1 - prob) / n
        z = eta + (y - prob) / (prob * (1 - prob))
        sw = w.sum()
        x_bar = w @ xs / sw
        z_bar = w @ z / sw
        xc = xs - x_bar
        gram = (xc * w[:, None]).T @ xc
        cross = (xc * w[:, None]).T @ (z - z_bar)
        beta_new, _ = coordinate_descent(gram, cross, lam, alpha, beta, free)
        b0_new = float(z_bar - x_bar @ beta_new)

        # step halving keeps the penalized deviance from rising
        for _ in range(30):
            eta_new = b0_new + xs @ beta_new
            updated = _binomial_objective(eta_new, y, beta_new, lam, alpha)
            if updated <= objective + 1e-12 * max(1.0, abs(objective)):
                break
            beta_new = 0.5 * (beta_new + beta)
            b0_new = 0.5 * (b0_new + b0)
        change = max(abs(b0_new - b0), float(np.max(np.abs(beta_new - beta), initial=0.0)))
        b0, beta, eta, objective = b0_new, beta_new, eta_new, updated
        if change < IRLS_TOL:
            return b0, beta
    logger.warning(f"IRLS reached {IRLS_MAX_ITER} iterations at lambda={lam:.3g}; keeping last iterate")
    return b0, beta


def solve_elastic_net(
    x: np.ndarray,
    y: np.ndarray,
    lam: float,
    alpha: float = 0.5,
    family: OutcomeFamily = OutcomeFamily.CONTINUOUS,
    warm_start: Optional[ElasticNetSolution] = None,
) -> ElasticNetSolution:
    """
    Fit the elastic net at a single lambda.

    Args:
        x: Covariates (n x p), standardized internally
        y: Outcome (0/1 for binomial)
        lam: Penalty lambda >= 0 on the standardized scale
        alpha: Mixing weight in [0, 1]
        family: Continuous (gaussian) or binary (binomial-logit)
        warm_start: Previous solution on the same data

    Returns:
        ElasticNetSolution
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_inputs(x, y, alpha)
    if lam < 0:
        raise InvalidParameterError(f"lambda must be >= 0, got {lam}")
    std = Standardization.fit(x)
    xs = std.transform(x)
    free = ~std.constant
    return _solve_standardized(xs, y, std, lam, alpha, OutcomeFamily(family), free, warm_start)


def _solve_standardized(xs, y, std, lam, alpha, family, free, warm_start) -> ElasticNetSolution:
    p = xs.shape[1]
    beta_init = np.zeros(p) if warm_start is None else warm_start.coef_std
    if family is OutcomeFamily.BINARY:
        if warm_start is None:
            ybar = np.clip(y.mean(), PROB_CLIP, 1 - PROB_CLIP)
            b0_init = float(np.log(ybar / (1 - ybar)))
        else:
            b0_init = warm_start.intercept_std
        b0, beta = _solve_binomial(xs, y, lam, alpha, free, b0_init, beta_init)
    else:
        gram, cross = _gaussian_quadratic(xs, y)
        beta, _ = coordinate_descent(gram, cross, lam, alpha, beta_init, free)
        b0 = float(y.mean())
    intercept, coef = _to_original(std, b0, beta)
    return ElasticNetSolution(lam=float(lam), intercept_std=b0, coef_std=beta, intercept=intercept, coef=coef)


def kkt_violation(
    x: np.ndarray,
    y: np.ndarray,
    solution: ElasticNetSolution,
    alpha: float,
    family: OutcomeFamily = OutcomeFamily.CONTINUOUS,
) -> float:
    """
    Largest subgradient-optimality violation of a solution on the standardized scale.

    For b_j != 0 the gradient must equal -lambda*alpha*sign(b_j); for b_j = 0 its
    magnitude must not exceed lambda*alpha. Constant columns are ignored.
    """
    std = Standardization.fit(np.asarray(x, dtype=float))
    xs = std.transform(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float)
    n = xs.shape[0]
    eta = solution.intercept_std + xs @ solution.coef_std
    fitted = expit(eta) if OutcomeFamily(family) is OutcomeFamily.BINARY else eta
    beta = solution.coef_std
    grad = -xs.T @ (y - fitted) / n + solution.lam * (1 - alpha) * beta
    l1 = solution.lam * alpha
    violation = np.where(beta != 0, np.abs(grad + l1 * np.sign(beta)), np.maximum(np.abs(grad) - l1, 0.0))
    violation[std.constant] = 0.0
    return float(violation.max(initial=0.0))


# ============================================================================
# PATH + CROSS-VALIDATION
# ============================================================================

def lambda_max(x: np.ndarray, y: np.ndarray, alpha: float) -> float:
    """Smallest lambda whose solution is all-zero (same formula for both families)."""
    std = Standardization.fit(x)
    xs = std.transform(x)
    grad = np.abs(xs.T @ (y - y.mean())) / x.shape[0]
    return float(grad.max(initial=0.0) / max(alpha, ALPHA_FLOOR))


def lambda_grid(lam_max: float, n_lambda: int = 100, min_ratio: float = 1e-3) -> np.ndarray:
    """Strictly decreasing geometric grid from lam_max to min_ratio * lam_max."""
    if lam_max <= 0:
        return np.zeros(1)
    return lam_max * np.logspace(0.0, np.log10(min_ratio), n_lambda)


def solution_path(
    x: np.ndarray,
    y: np.ndarray,
    lambdas: np.ndarray,
    alpha: float,
    family: OutcomeFamily,
) -> List[ElasticNetSolution]:
    """Warm-started solutions along a decreasing lambda grid."""
    std = Standardization.fit(x)
    xs = std.transform(x)
    free = ~std.constant
    path: List[ElasticNetSolution] = []
    previous: Optional[ElasticNetSolution] = None
    for lam in lambdas:
        previous = _solve_standardized(xs, y, std, float(lam), alpha, family, free, previous)
        path.append(previous)
    return path


def _heldout_deviance(solution: ElasticNetSolution, x: np.ndarray, y: np.ndarray, family: OutcomeFamily) -> float:
    eta = solution.intercept + x @ solution.coef
    if family is OutcomeFamily.BINARY:
        prob = np.clip(expit(eta), PROB_CLIP, 1 - PROB_CLIP)
        return float(np.mean(-2.0 * (y * np.log(prob) + (1 - y) * np.log(1 - prob))))
    return float(np.mean((y - eta) ** 2))


@dataclass(frozen=True)
class ElasticNetFit:
    """Regularization path with K-fold cross-validation."""

    family: OutcomeFamily
    alpha: float
    lambdas: np.ndarray
    coef_path: np.ndarray  # n_lambda x p, standardized scale
    intercept_path: np.ndarray
    cv_mean: np.ndarray
    cv_se: np.ndarray
    chosen_index: int
    folds: int

    @property
    def chosen_lambda(self) -> float:
        return float(self.lambdas[self.chosen_index])

    @property
    def coef(self) -> np.ndarray:
        """Standardized coefficients at the chosen lambda."""
        return self.coef_path[self.chosen_index]

    @property
    def selected(self) -> Tuple[int, ...]:
        return tuple(int(j) for j in np.flatnonzero(self.coef != 0.0))


def fit_elastic_net(
    x: np.ndarray,
    y: np.ndarray,
    family: OutcomeFamily = OutcomeFamily.CONTINUOUS,
    alpha: float = 0.5,
    seed: int = 0,
    folds: int = 10,
    n_lambda: int = 100,
    lambda_min_ratio: Optional[float] = None,
    workers: int = 1,
) -> ElasticNetFit:
    """
    Fit the elastic-net path and choose lambda by K-fold CV (minimum mean deviance).

    Args:
        x: Covariates (n x p)
        y: Outcome
        family: Gaussian for continuous outcomes, binomial-logit for binary
        alpha: Mixing weight in [0, 1]
        seed: Seed of the fold assignment (pure function of n and seed)
        folds: Number of CV folds
        n_lambda: Length of the lambda grid
        lambda_min_ratio: Smallest lambda / lambda_max; default 1e-3 (1e-2 when p > n)
        workers: Threads used for the CV folds

    Returns:
        ElasticNetFit
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    family = OutcomeFamily(family)
    _check_inputs(x, y, alpha)
    n, p = x.shape
    if n <= folds:
        raise InvalidParameterError(f"need more rows ({n}) than CV folds ({folds})")
    if lambda_min_ratio is None:
        lambda_min_ratio = 1e-2 if p > n else 1e-3

    lambdas = lambda_grid(lambda_max(x, y, alpha), n_lambda, lambda_min_ratio)
    path = solution_path(x, y, lambdas, alpha, family)
    coef_path = np.vstack([s.coef_std for s in path]) if p else np.zeros((len(lambdas), 0))
    intercept_path = np.array([s.intercept_std for s in path])

    if len(lambdas) == 1:
        # outcome carries no variation along any column: nothing to cross-validate
        logger.debug("lambda_max is 0; returning the all-zero fit")
        return ElasticNetFit(family, alpha, lambdas, coef_path, intercept_path,
                             np.zeros(1), np.zeros(1), 0, folds)

    splitter = KFold(n_splits=folds, shuffle=True, random_state=seed)
    splits = list(splitter.split(x))

    def run_fold(train_test) -> np.ndarray:
        train, test = train_test
        fold_path = solution_path(x[train], y[train], lambdas, alpha, family)
        return np.array([_heldout_deviance(s, x[test], y[test], family) for s in fold_path])

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            errors = np.vstack(list(executor.map(run_fold, splits)))
    else:
        errors = np.vstack([run_fold(split) for split in splits])

    sizes = np.array([len(test) for _, test in splits], dtype=float)
    weights = sizes / sizes.sum()
    cv_mean = weights @ errors
    cv_var = weights @ (errors - cv_mean) ** 2
    cv_se = np.sqrt(cv_var / (folds - 1))
    chosen = int(np.argmin(cv_mean))

    fit = ElasticNetFit(family, alpha, lambdas, coef_path, intercept_path, cv_mean, cv_se, chosen, folds)
    logger.debug(
        f"Elastic net ({family.value}, alpha={alpha}): lambda={fit.chosen_lambda:.4g} "
        f"(index {chosen}/{len(lambdas)}), {len(fit.selected)} of {p} nonzero"
    )
    return fit
