"""
Subgroup trees: node structure, routing, rule extraction and the shared growth loop.

A SubgroupTree partitions the covariate space with binary splits. Continuous splits
send ``x <= cutpoint`` left and ``x > cutpoint`` right; binary splits send level 0
left and level 1 right. Terminal nodes are the subgroups, numbered k = 1..K in
depth-first, left-first order.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from shared.config import SubmodSettings
from shared.data import CovariateKind, FilteredView
from shared.models import SplitRecord, TreeNodeRecord, TreeSummary

logger = logging.getLogger(__name__)

TreeSource = Literal["mob_observed", "ctree_ple"]


@dataclass(frozen=True)
class TreeSettings:
    alpha: float = 0.10
    max_depth: int = 4
    min_node: int = 1
    trim: float = 0.10

    @classmethod
    def from_submod(cls, settings: SubmodSettings, n: int) -> "TreeSettings":
        return cls(
            alpha=settings.alpha,
            max_depth=settings.max_depth,
            min_node=max(int(math.ceil(settings.min_node_frac * n)), 1),
            trim=settings.trim,
        )


@dataclass(frozen=True)
class SplitRule:
    """One side of a split: covariate, relation and threshold (cutpoint or level)."""
    covariate: str
    column: int
    relation: Literal["<=", ">", "=0", "=1"]
    threshold: float

    def mask(self, values: np.ndarray) -> np.ndarray:
        if self.relation == "<=":
            return values <= self.threshold
        if self.relation == ">":
            return values > self.threshold
        return values == self.threshold


@dataclass(frozen=True)
class SplitInfo:
    column: int
    covariate: str
    kind: CovariateKind
    cutpoint: Optional[float]
    statistic: float
    p_value: float
    adjusted_p_value: float

    def sides(self) -> Tuple[SplitRule, SplitRule]:
        if self.kind is CovariateKind.BINARY:
            return (SplitRule(self.covariate, self.column, "=0", 0.0),
                    SplitRule(self.covariate, self.column, "=1", 1.0))
        return (SplitRule(self.covariate, self.column, "<=", self.cutpoint),
                SplitRule(self.covariate, self.column, ">", self.cutpoint))

    def goes_left(self, values: np.ndarray) -> np.ndarray:
        if self.kind is CovariateKind.BINARY:
            return values == 0
        return values <= self.cutpoint


@dataclass
class TreeNode:
    node_id: int
    depth: int
    rows: np.ndarray
    path: Tuple[SplitRule, ...] = ()
    objective: Optional[float] = None
    split: Optional[SplitInfo] = None
    left: Optional["TreeNode"] = None
    right: Optional["TreeNode"] = None
    subgroup: Optional[int] = None

    @property
    def is_terminal(self) -> bool:
        return self.split is None


def _fmt(value: float) -> str:
    return f"{value:.4g}"


@dataclass(frozen=True)
class Condition:
    """Simplified constraint on one covariate: lower < x <= upper, or x = level."""
    covariate: str
    column: int
    lower: Optional[float] = None
    upper: Optional[float] = None
    level: Optional[float] = None

    def text(self) -> str:
        if self.level is not None:
            return f"{self.covariate} = {int(self.level)}"
        if self.lower is not None and self.upper is not None:
            return f"{_fmt(self.lower)} < {self.covariate} <= {_fmt(self.upper)}"
        if self.upper is not None:
            return f"{self.covariate} <= {_fmt(self.upper)}"
        return f"{self.covariate} > {_fmt(self.lower)}"

    def mask(self, values: np.ndarray) -> np.ndarray:
        keep = np.ones(values.shape[0], dtype=bool)
        if self.level is not None:
            keep &= values == self.level
        if self.lower is not None:
            keep &= values > self.lower
        if self.upper is not None:
            keep &= values <= self.upper
        return keep


@dataclass(frozen=True)
class SubgroupRule:
    """Conjunction describing one terminal node."""
    k: int
    conditions: Tuple[Condition, ...]

    @property
    def text(self) -> str:
        if not self.conditions:
            return "Overall"
        return " & ".join(c.text() for c in self.conditions)

    @property
    def covariates(self) -> Tuple[str, ...]:
        return tuple(c.covariate for c in self.conditions)

    def mask(self, frame: Union[pd.DataFrame, np.ndarray]) -> np.ndarray:
        """Rows satisfying the rule; a DataFrame is matched by name, an array by base column."""
        n = frame.shape[0]
        keep = np.ones(n, dtype=bool)
        for condition in self.conditions:
            if isinstance(frame, pd.DataFrame):
                values = frame[condition.covariate].to_numpy(dtype=float)
            else:
                values = np.asarray(frame)[:, condition.column]
            keep &= condition.mask(values)
        return keep

    def __str__(self) -> str:
        return self.text


def simplify_path(path: Sequence[SplitRule]) -> Tuple[Condition, ...]:
    """Merge repeated bounds on the same covariate, keeping first-appearance order."""
    order: List[str] = []
    bounds: Dict[str, Dict[str, Optional[float]]] = {}
    columns: Dict[str, int] = {}
    for rule in path:
        if rule.covariate not in bounds:
            order.append(rule.covariate)
            bounds[rule.covariate] = {"lower": None, "upper": None, "level": None}
            columns[rule.covariate] = rule.column
        b = bounds[rule.covariate]
        if rule.relation == "<=":
            b["upper"] = rule.threshold if b["upper"] is None else min(b["upper"], rule.threshold)
        elif rule.relation == ">":
            b["lower"] = rule.threshold if b["lower"] is None else max(b["lower"], rule.threshold)
        else:
            b["level"] = rule.threshold
    return tuple(
        Condition(covariate=name, column=columns[name], **bounds[name]) for name in order
    )


# ============================================================================
# TREE
# ============================================================================

@dataclass
class SubgroupTree:
    """Fitted rule-based partition of the training rows."""

    root: TreeNode
    settings: TreeSettings
    source: TreeSource
    n: int
    terminals: List[TreeNode] = field(default_factory=list)

    def __post_init__(self):
        self.terminals = []
        self._number(self.root)

    def _number(self, node: TreeNode) -> None:
        if node.is_terminal:
            node.subgroup = len(self.terminals) + 1
            self.terminals.append(node)
            return
        self._number(node.left)
        self._number(node.right)

    @property
    def n_subgroups(self) -> int:
        return len(self.terminals)

    def internal_nodes(self) -> List[TreeNode]:
        stack, found = [self.root], []
        while stack:
            node = stack.pop()
            if not node.is_terminal:
                found.append(node)
                stack.extend([node.right, node.left])
        return found

    def split_covariates(self) -> Tuple[str, ...]:
        """Distinct covariates used by any split, in first-use order."""
        names: List[str] = []
        for node in self.internal_nodes():
            if node.split.covariate not in names:
                names.append(node.split.covariate)
        return tuple(names)

    def max_depth(self) -> int:
        return max(node.depth for node in self.terminals)

    def training_assignment(self) -> np.ndarray:
        """Subgroup index per training row from the stored terminal rows."""
        assignment = np.zeros(self.n, dtype=int)
        for node in self.terminals:
            assignment[node.rows] = node.subgroup
        return assignment

    def check_structure(self) -> None:
        """Partition, minimum-size and depth invariants of a grown tree."""
        counts = np.zeros(self.n, dtype=int)
        for node in self.terminals:
            counts[node.rows] += 1
            assert node.rows.size >= min(self.settings.min_node, self.n), (
                f"terminal {node.subgroup} has {node.rows.size} rows < min_node {self.settings.min_node}"
            )
            assert node.depth <= self.settings.max_depth, f"terminal {node.subgroup} deeper than max_depth"
        assert np.all(counts == 1), "terminal nodes do not partition the rows"

    def to_record(self) -> TreeNodeRecord:
        def convert(node: TreeNode) -> TreeNodeRecord:
            split = None
            children: List[TreeNodeRecord] = []
            if not node.is_terminal:
                s = node.split
                split = SplitRecord(
                    covariate=s.covariate,
                    kind=s.kind.value,
                    cutpoint=s.cutpoint,
                    statistic=float(s.statistic),
                    p_value=float(s.p_value),
                    adjusted_p_value=float(s.adjusted_p_value),
                )
                children = [convert(node.left), convert(node.right)]
            return TreeNodeRecord(
                node_id=node.node_id,
                depth=node.depth,
                n=int(node.rows.size),
                rule=SubgroupRule(0, simplify_path(node.path)).text,
                subgroup=node.subgroup,
                split=split,
                children=children,
            )

        return convert(self.root)

    def summary(self) -> TreeSummary:
        return TreeSummary(
            source=self.source,
            alpha=self.settings.alpha,
            max_depth=self.settings.max_depth,
            min_node=self.settings.min_node,
            n_subgroups=self.n_subgroups,
            root=self.to_record(),
        )

    def to_dict(self) -> dict:
        return self.summary().model_dump(mode="json")


def assign_subgroups(tree: SubgroupTree, x_rows: Union[np.ndarray, pd.DataFrame]) -> np.ndarray:
    """
    Route rows to terminal nodes.

    Args:
        tree: Fitted tree
        x_rows: Covariates in the base dataset's column order (array) or by name (DataFrame)

    Returns:
        Subgroup index k in 1..K per row
    """
    n = x_rows.shape[0]
    assignment = np.zeros(n, dtype=int)
    stack = [(tree.root, np.arange(n))]
    while stack:
        node, rows = stack.pop()
        if node.is_terminal:
            assignment[rows] = node.subgroup
            continue
        if isinstance(x_rows, pd.DataFrame):
            values = x_rows[node.split.covariate].to_numpy(dtype=float)[rows]
        else:
            values = np.asarray(x_rows)[rows, node.split.column]
        left = node.split.goes_left(values)
        stack.append((node.left, rows[left]))
        stack.append((node.right, rows[~left]))
    return assignment


def extract_rules(tree: SubgroupTree) -> List[SubgroupRule]:
    """One simplified conjunction per terminal node, in subgroup order."""
    return [SubgroupRule(node.subgroup, simplify_path(node.path)) for node in tree.terminals]


# ============================================================================
# GROWTH LOOP
# ============================================================================

@dataclass(frozen=True)
class CovariateTest:
    """Node-level association test of one candidate covariate."""
    position: int  # index into the view's columns
    statistic: float
    p_value: float


@dataclass(frozen=True)
class Cut:
    cutpoint: Optional[float]
    left_rows: np.ndarray
    right_rows: np.ndarray
    objective: float


class TreeGrower:
    """
    Recursive partitioning shared by MOB and CTREE.

    Subclasses provide the per-covariate test, the split search and the node objective.
    At each node: test every candidate, Bonferroni-adjust, and split on the most
    significant covariate that admits a split; stop at max_depth or when no adjusted
    p-value falls below alpha.
    """

    source: TreeSource

    def __init__(self, view: FilteredView, settings: TreeSettings, workers: int = 1):
        self.view = view
        self.x = view.x
        self.names = view.names
        self.kinds = view.kinds
        self.columns = view.kept_columns
        self.settings = settings
        self.workers = workers
        self._next_id = 0

    # -- subclass hooks ------------------------------------------------------
    def test_covariate(self, rows: np.ndarray, position: int, context: Any) -> CovariateTest:
        raise NotImplementedError

    def find_cut(self, rows: np.ndarray, position: int, context: Any) -> Optional[Cut]:
        raise NotImplementedError

    def node_objective(self, rows: np.ndarray) -> float:
        raise NotImplementedError

    def prepare_node(self, rows: np.ndarray) -> Any:
        """Per-node context shared by the covariate tests; None marks a degenerate node."""
        return rows

    # -- growth ----------------------------------------------------------------
    def grow(self) -> SubgroupTree:
        n = self.x.shape[0]
        self._next_id = 0
        root = self._grow(np.arange(n), depth=0, path=())
        tree = SubgroupTree(root=root, settings=self.settings, source=self.source, n=n)
        tree.check_structure()
        return tree

    def _new_node(self, rows: np.ndarray, depth: int, path: Tuple[SplitRule, ...]) -> TreeNode:
        node = TreeNode(node_id=self._next_id, depth=depth, rows=rows, path=path)
        self._next_id += 1
        return node

    def _run_tests(self, rows: np.ndarray, context: Any) -> List[CovariateTest]:
        positions = range(len(self.columns))
        if self.workers > 1 and len(self.columns) > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as executor:
                return list(executor.map(lambda j: self.test_covariate(rows, j, context), positions))
        return [self.test_covariate(rows, j, context) for j in positions]

    def _grow(self, rows: np.ndarray, depth: int, path: Tuple[SplitRule, ...]) -> TreeNode:
        node = self._new_node(rows, depth, path)
        q = len(self.columns)
        if q == 0 or depth >= self.settings.max_depth or rows.size < 2 * self.settings.min_node:
            return node
        context = self.prepare_node(rows)
        if context is None:
            logger.debug(f"node {node.node_id}: degenerate node model, not splitting")
            return node

        node.objective = self.node_objective(rows)
        tests = self._run_tests(rows, context)
        ranked = sorted(tests, key=lambda t: (min(1.0, q * t.p_value), t.position))
        for test in ranked:
            adjusted = min(1.0, q * test.p_value)
            if adjusted >= self.settings.alpha:
                break
            cut = self.find_cut(rows, test.position, context)
            if cut is None or not cut.objective < node.objective - 1e-10 * max(1.0, abs(node.objective)):
                logger.debug(f"node {node.node_id}: {self.names[test.position]} significant but no admissible split")
                continue
            kind = self.kinds[test.position]
            node.split = SplitInfo(
                column=self.columns[test.position],
                covariate=self.names[test.position],
                kind=kind,
                cutpoint=None if kind is CovariateKind.BINARY else float(cut.cutpoint),
                statistic=float(test.statistic),
                p_value=float(test.p_value),
                adjusted_p_value=adjusted,
            )
            left_rule, right_rule = node.split.sides()
            logger.debug(
                f"node {node.node_id} (depth {depth}, n={rows.size}): split {left_rule.covariate} "
                f"cut={node.split.cutpoint} p_adj={adjusted:.3g}"
            )
            node.left = self._grow(cut.left_rows, depth + 1, path + (left_rule,))
            node.right = self._grow(cut.right_rows, depth + 1, path + (right_rule,))
            return node
        return node

    # -- helpers for subclasses ------------------------------------------------
    def sorted_candidates(self, rows: np.ndarray, position: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        Rows ordered by the covariate, plus admissible boundary positions.

        Returns (ordered rows, sorted values, left sizes m) where each m is the end of a
        run of tied values and both sides hold at least min_node rows.
        """
        values = self.x[rows, position]
        order = np.argsort(values, kind="mergesort")
        sorted_values = values[order]
        m = np.arange(1, rows.size)
        boundary = sorted_values[:-1] < sorted_values[1:]
        ok = boundary & (m >= self.settings.min_node) & (rows.size - m >= self.settings.min_node)
        return rows[order], sorted_values, m[ok]
