"""
Bagged regression forest built from scikit-learn CART trees.

Each tree is a variance-reduction DecisionTreeRegressor fit on a bootstrap sample of
the rows, considering ``mtry`` random covariates per split. Bootstrap indices and tree
seeds come from per-tree random streams, so a forest does not depend on the order
in which its trees are trained.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from sklearn.tree import DecisionTreeRegressor

from shared.errors import InvalidParameterError, NonFiniteInputError
from shared.random_streams import RandomStreams

logger = logging.getLogger(__name__)


def default_mtry(q: int) -> int:
    return max(q // 3, 1)


def default_min_node_size(n_total: int, fraction: float = 0.10) -> int:
    return max(int(math.ceil(fraction * n_total)), 1)


@dataclass(frozen=True)
class ForestModel:
    """Fitted bagged forest: trees, their bootstrap rows, and hyperparameters."""

    trees: Tuple[DecisionTreeRegressor, ...]
    bootstrap_rows: Tuple[np.ndarray, ...]
    tree_seeds: Tuple[int, ...]
    num_trees: int
    mtry: int
    min_node_size: int
    n_train: int

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Average of the tree predictions."""
        x = np.asarray(x, dtype=float)
        total = np.zeros(x.shape[0])
        for tree in self.trees:
            total += tree.predict(x)
        return total / len(self.trees)

    def predict_oob(self, x_train: np.ndarray) -> np.ndarray:
        """
        Out-of-bag predictions for the training rows.

        A row that landed in every bootstrap sample gets the full-forest prediction.
        """
        x_train = np.asarray(x_train, dtype=float)
        if x_train.shape[0] != self.n_train:
            raise InvalidParameterError(f"expected the {self.n_train} training rows, got {x_train.shape[0]}")
        total = np.zeros(self.n_train)
        counts = np.zeros(self.n_train)
        for tree, rows in zip(self.trees, self.bootstrap_rows):
            oob = np.ones(self.n_train, dtype=bool)
            oob[rows] = False
            if oob.any():
                total[oob] += tree.predict(x_train[oob])
                counts[oob] += 1
        full = self.predict(x_train)
        return np.where(counts > 0, total / np.maximum(counts, 1), full)

    def leaf_sizes(self) -> List[np.ndarray]:
        """Bootstrap rows per leaf, one array per tree."""
        sizes = []
        for tree in self.trees:
            structure = tree.tree_
            leaves = structure.children_left == -1
            sizes.append(structure.n_node_samples[leaves])
        return sizes


def fit_regression_forest(
    x: np.ndarray,
    y: np.ndarray,
    streams: RandomStreams,
    num_trees: int = 500,
    mtry: Optional[int] = None,
    min_node_size: int = 1,
    workers: int = 1,
) -> ForestModel:
    """
    Fit a bagged CART regression forest.

    Args:
        x: Covariates (n x q), q >= 1
        y: Outcome (0/1 outcomes give probability predictions)
        streams: Stream namespace for this forest; tree t draws from stream ("tree", t)
        num_trees: Number of trees
        mtry: Covariates tried per split; default max(q // 3, 1)
        min_node_size: Minimum bootstrap rows per leaf
        workers: Threads used to train trees

    Returns:
        ForestModel
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n, q = x.shape
    if q == 0:
        raise InvalidParameterError("forest needs at least one covariate (q = 0)")
    if n == 0 or n != y.shape[0]:
        raise InvalidParameterError(f"shape mismatch: x {x.shape}, y {y.shape}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise NonFiniteInputError("forest received NaN or infinite values")
    if num_trees < 1:
        raise InvalidParameterError(f"num_trees must be >= 1, got {num_trees}")

    mtry = min(mtry or default_mtry(q), q)
    leaf_size = min(int(min_node_size), n)

    def grow(t: int) -> Tuple[DecisionTreeRegressor, np.ndarray, int]:
        rows = streams.generator("tree", t, "bootstrap").integers(0, n, size=n)
        seed = streams.integer_seed("tree", t, "splits")
        tree = DecisionTreeRegressor(max_features=mtry, min_samples_leaf=leaf_size, random_state=seed)
        tree.fit(x[rows], y[rows])
        return tree, rows, seed

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            grown = list(executor.map(grow, range(num_trees)))
    else:
        grown = [grow(t) for t in range(num_trees)]

    forest = ForestModel(
        trees=tuple(g[0] for g in grown),
        bootstrap_rows=tuple(g[1] for g in grown),
        tree_seeds=tuple(g[2] for g in grown),
        num_trees=num_trees,
        mtry=mtry,
        min_node_size=leaf_size,
        n_train=n,
    )
    logger.debug(f"Forest: {num_trees} trees on n={n}, q={q}, mtry={mtry}, min_node_size={leaf_size}")
    return forest
