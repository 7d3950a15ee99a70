"""
Monte Carlo truth for discovered subgroups.

A fresh oracle population of m patients is drawn from the generating model; the true
effect of a rule is the mean of E(Y | X, A = 1) - E(Y | X, A = 0) over the oracle
patients satisfying it. Both arms are evaluated on the same covariates.
"""

import logging
from typing import Any, Callable, Dict, Hashable, Optional, Union

import numpy as np
import pandas as pd

from shared.data import OutcomeFamily
from shared.errors import EmptyOracleCellError
from shared.random_streams import RandomStreams

from .generator import SimScenario, generate_covariates, outcome_mean, population_ate

logger = logging.getLogger(__name__)

DEFAULT_ORACLE_SIZE = 10000

# None (everyone), an object with mask(frame), or a callable frame -> mask
Rule = Optional[Union[Callable[[pd.DataFrame], np.ndarray], Any]]


def _rule_mask(rule: Rule, frame: pd.DataFrame) -> np.ndarray:
    if rule is None:
        return np.ones(frame.shape[0], dtype=bool)
    if hasattr(rule, "mask"):
        return np.asarray(rule.mask(frame), dtype=bool)
    return np.asarray(rule(frame), dtype=bool)


def _rule_text(rule: Rule) -> str:
    if rule is None:
        return "Overall"
    return str(getattr(rule, "text", rule))


def _rule_key(rule: Rule) -> Optional[Hashable]:
    """Memo key from the exact cutpoints of a subgroup rule; None (not memoized) for callables."""
    if rule is None:
        return ()
    conditions = getattr(rule, "conditions", None)
    if conditions is None:
        return None
    return tuple((c.covariate, c.lower, c.upper, c.level) for c in conditions)


class TruthOracle:
    """Oracle population for one scenario; effects are memoized per rule."""

    def __init__(self, scenario: SimScenario, m: int = DEFAULT_ORACLE_SIZE, streams: Optional[RandomStreams] = None):
        if m < 1:
            raise ValueError(f"oracle size must be >= 1, got {m}")
        streams = streams or RandomStreams(scenario.seed).child("oracle")
        self.scenario = scenario
        self.m = m
        self.frame = generate_covariates(m, scenario.n_noise, streams.generator("covariates"))
        self.effects = outcome_mean(self.frame, 1, scenario) - outcome_mean(self.frame, 0, scenario)
        self._memo: Dict[Hashable, float] = {}

    def effect(self, rule: Rule = None) -> float:
        """True E(Y | A = 1, rule) - E(Y | A = 0, rule)."""
        key = _rule_key(rule)
        if key is not None and key in self._memo:
            return self._memo[key]
        mask = _rule_mask(rule, self.frame)
        if not mask.any():
            raise EmptyOracleCellError(_rule_text(rule), self.m)
        value = float(self.effects[mask].mean())
        if key is not None:
            self._memo[key] = value
        return value

    def effect_of_mask(self, mask: np.ndarray) -> float:
        mask = np.asarray(mask, dtype=bool)
        if not mask.any():
            raise EmptyOracleCellError("<mask>", self.m)
        return float(self.effects[mask].mean())


def oracle_true_subgroup_effect(
    rule: Rule,
    scenario: SimScenario,
    m: int = DEFAULT_ORACLE_SIZE,
    streams: Optional[RandomStreams] = None,
) -> float:
    """
    True treatment effect within a subgroup rule.

    Args:
        rule: None (everyone), an object with ``mask(frame)`` or a callable frame -> mask
        scenario: Generating model
        m: Oracle patients
        streams: Random streams for the oracle population

    Returns:
        Mean treatment difference over matching oracle patients

    Raises:
        EmptyOracleCellError: The rule matches none of the m patients
    """
    return TruthOracle(scenario, m, streams).effect(rule)


def scenario_ate(
    scenario: SimScenario,
    m: int = DEFAULT_ORACLE_SIZE,
    streams: Optional[RandomStreams] = None,
) -> float:
    """
    True overall treatment effect of a scenario.

    Continuous outcomes use the closed form; binary outcomes are scored on the risk
    difference scale, so their truth is the Monte Carlo oracle's overall effect.
    """
    if scenario.outcome_family is OutcomeFamily.CONTINUOUS:
        return population_ate(scenario)
    return TruthOracle(scenario, m, streams).effect()
