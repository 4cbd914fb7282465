"""Dynamic reward assignment: per-task rewards, weight adaptation and budget control."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Tuple

import numpy as np

LOSS_PAIRINGS = ("literal", "swapped")


@dataclass(frozen=True)
class RewardWeights:
    """Controller state.

    ``admission`` is the fraction of a cycle's tasks admitted for allocation;
    it shrinks by ``shed_fraction`` after a cycle where every task missed.
    """

    alpha1: float = 1.0
    alpha2: float = 1.0
    eta: float = 0.1
    budget: float = 100.0
    beta: float = 1.2
    thres_high: Optional[int] = None  # None -> ceil(0.2 * I)
    loss_pairing: str = "literal"
    shed_fraction: float = 0.1
    admission: float = 1.0

    def __post_init__(self):
        if not (self.alpha1 > 0 and self.alpha2 > 0):
            raise ValueError("reward weights must be positive")
        if self.budget < 0:
            raise ValueError("budget must be >= 0")
        if self.eta < 0:
            raise ValueError("learning rate must be >= 0")
        if self.beta <= 0:
            raise ValueError("budget multiplier must be > 0")
        if self.loss_pairing not in LOSS_PAIRINGS:
            raise ValueError(f"loss_pairing must be one of {LOSS_PAIRINGS}")
        if not 0 <= self.shed_fraction < 1:
            raise ValueError("shed_fraction must lie in [0,1)")
        if not 0 < self.admission <= 1:
            raise ValueError("admission must lie in (0,1]")

    def threshold(self, n_tasks: int) -> int:
        return math.ceil(0.2 * n_tasks) if self.thres_high is None else self.thres_high

    def admitted(self, n_tasks: int) -> int:
        if n_tasks == 0:
            return 0
        return max(1, min(n_tasks, math.floor(n_tasks * self.admission + 1e-9)))


def raw_rewards(comp: Sequence[float], trans: Sequence[float], weights: RewardWeights) -> np.ndarray:
    a1, a2 = weights.alpha1, weights.alpha2
    return a1 / (a1 + a2) * np.asarray(comp, dtype=float) + a2 / (a1 + a2) * np.asarray(trans, dtype=float)


def compute_rewards(comp: Sequence[float], trans: Sequence[float], weights: RewardWeights,
                    budget: Optional[float] = None) -> np.ndarray:
    """Split ``budget`` (default: the controller's) among tasks in proportion to their weighted complexity."""
    budget = weights.budget if budget is None else budget
    raw = raw_rewards(comp, trans, weights)
    if raw.size == 0:
        raise ValueError("at least one task is required")
    total = raw.sum()
    if total <= 0:
        return np.full(raw.size, budget / raw.size)
    return budget * raw / total


def losses(missed: Sequence[bool], comp: Sequence[float], trans: Sequence[float],
           pairing: str = "literal") -> Optional[Tuple[float, float]]:
    """(L1, L2): mean complexity of missed tasks minus that of hit tasks; None if all hit or all missed."""
    d = np.asarray(missed, dtype=bool)
    if d.all() or not d.any():
        return None
    comp = np.asarray(comp, dtype=float)
    trans = np.asarray(trans, dtype=float)
    gap_t = trans[d].mean() - trans[~d].mean()
    gap_c = comp[d].mean() - comp[~d].mean()
    return (gap_t, gap_c) if pairing == "literal" else (gap_c, gap_t)


def update_weights(weights: RewardWeights, missed: Sequence[bool], comp: Sequence[float],
                   trans: Sequence[float]) -> Tuple[RewardWeights, Optional[Tuple[float, float]]]:
    """Exponential-weight step, renormalised so alpha1 + alpha2 = 2. Returns the losses used too."""
    ls = losses(missed, comp, trans, weights.loss_pairing)
    if ls is None:
        return weights, None
    # work in log space so large losses cannot underflow a weight to zero
    log_a = np.array([math.log(weights.alpha1) - weights.eta * ls[0],
                      math.log(weights.alpha2) - weights.eta * ls[1]])
    a = 2.0 * np.exp(log_a - np.logaddexp(log_a[0], log_a[1]))
    a = np.maximum(a, np.finfo(float).tiny)
    return replace(weights, alpha1=float(a[0]), alpha2=float(a[1])), ls


def update_budget(weights: RewardWeights, misses: int, n_tasks: int) -> RewardWeights:
    """Grow the budget by beta on a high-miss cycle; shed admitted tasks after an all-miss cycle."""
    budget = weights.budget
    if n_tasks > 0 and misses >= weights.threshold(n_tasks):
        budget *= weights.beta
    admission = weights.admission
    if n_tasks > 0 and misses == n_tasks:
        admission = max(admission * (1.0 - weights.shed_fraction), 1e-6)
    elif misses == 0:
        # recover once the system keeps up again
        admission = min(1.0, admission / (1.0 - weights.shed_fraction))
    return replace(weights, budget=budget, admission=admission)


@dataclass
class ControllerRecord:
    cycle: int
    alpha1: float
    alpha2: float
    budget: float
    loss1: float
    loss2: float
    misses: int
    admitted: int
