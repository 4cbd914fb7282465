"""Task-allocation game mathematics.

Quality scores, probabilistic tie-breaking, the feasibility-gated payoff and
an exhaustive unilateral-deviation check for pure Nash equilibria.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Hashable, List, Mapping, Optional, Sequence

import numpy as np

from .model import Task
from .privacy import Estimate

SCORE_FLOOR = 1e-6
# relative slack when comparing payoffs, absorbs summation-order rounding
PAYOFF_RTOL = 1e-12


def quality_score(est: Estimate, lambda1: float = 1.0, lambda2: float = 1.0) -> float:
    """Server-side score of a device: weighted spare compute minus weighted distance, floored."""
    if lambda1 < 0 or lambda2 < 0:
        raise ValueError("quality weights must be non-negative")
    raw = lambda1 * est.freq * (1.0 - est.usage) - lambda2 * est.dist
    return max(raw, SCORE_FLOOR)


def win_probabilities(scores: Sequence[float]) -> np.ndarray:
    s = np.asarray(scores, dtype=float)
    if s.size == 0:
        raise ValueError("tie-break needs at least one claimant")
    if np.any(s <= 0):
        raise ValueError("claimant scores must be positive")
    return s / s.sum()


def tie_break(claimants: Mapping[Hashable, float], rng: np.random.Generator):
    """Pick one winner among ``claimants`` (id -> score) with probability proportional to score."""
    ids = list(claimants)
    if not ids:
        raise ValueError("tie-break needs at least one claimant")
    if len(ids) == 1:
        return ids[0]
    scores = [float(claimants[i]) for i in ids]
    if min(scores) <= 0:
        raise ValueError("claimant scores must be positive")
    # inverse-CDF draw on the cumulative scores
    target = rng.random() * math.fsum(scores)
    acc = 0.0
    for i, s in zip(ids, scores):
        acc += s
        if target < acc:
            return i
    return ids[-1]


def wcet(task: Task, freq: float, usage: float) -> float:
    """Execution time of ``task`` on the spare capacity of a device, in seconds."""
    capacity = freq * (1.0 - usage)
    if capacity <= 0:
        return math.inf if task.comp_complexity > 0 else 0.0
    return task.comp_complexity / capacity


def feasible(task: Task, freq: float, usage: float, deadline: float, utilization: float = 0.0) -> bool:
    """EDF schedulability: the task's utilization plus what is already committed must fit in one.

    ``usage`` is the background CPU load that slows execution, ``utilization``
    the share of the cycle taken by tasks already accepted this cycle.
    """
    if usage >= 1.0 and task.comp_complexity > 0:
        return False
    return wcet(task, freq, usage) / deadline + utilization <= 1.0


def payoff(reward: float, score: float, score_sum: float, energy: float, is_feasible: bool) -> float:
    """Reward share of one claimant, per joule spent; zero when the task cannot meet the deadline."""
    if energy <= 0:
        raise ValueError("energy cost must be positive")
    if not is_feasible:
        return 0.0
    if score <= 0 or score_sum < score * (1 - 1e-12):
        raise ValueError("score sum must include the claimant's own positive score")
    return reward * score / (energy * score_sum)


@dataclass
class GameInstance:
    """Everything needed to evaluate the game for one local group.

    Arrays are indexed [device, task]. ``feasible`` is each device's own
    schedulability verdict, ``quality`` the server-side scores.
    """

    rewards: np.ndarray
    quality: np.ndarray
    energy: np.ndarray
    feasible: np.ndarray
    device_ids: Optional[List[int]] = None
    task_ids: Optional[List[int]] = None

    def __post_init__(self):
        self.rewards = np.asarray(self.rewards, dtype=float)
        self.quality = np.asarray(self.quality, dtype=float)
        self.energy = np.asarray(self.energy, dtype=float)
        self.feasible = np.asarray(self.feasible, dtype=bool)
        j, i = self.quality.shape
        if self.rewards.shape != (i,) or self.energy.shape != (j, i) or self.feasible.shape != (j, i):
            raise ValueError("game arrays have inconsistent shapes")
        if self.device_ids is None:
            self.device_ids = list(range(j))
        if self.task_ids is None:
            self.task_ids = list(range(i))

    @property
    def n_devices(self) -> int:
        return self.quality.shape[0]

    @property
    def n_tasks(self) -> int:
        return self.quality.shape[1]

    def claim_sums(self, profile: Sequence[Optional[int]]) -> np.ndarray:
        """Total score of claimants per task (task indices, ``None`` = no claim)."""
        sums = np.zeros(self.n_tasks)
        for j, a in enumerate(profile):
            if a is not None:
                sums[a] += self.quality[j, a]
        return sums

    def device_payoff(self, j: int, task: Optional[int], sums: np.ndarray) -> float:
        """Payoff of device ``j`` on ``task`` when ``sums`` already includes its own claim."""
        if task is None:
            return 0.0
        return payoff(self.rewards[task], self.quality[j, task], sums[task],
                      self.energy[j, task], bool(self.feasible[j, task]))

    def deviation_payoffs(self, j: int, current: Optional[int], sums: np.ndarray) -> np.ndarray:
        """Payoff device ``j`` would get on each task after moving there alone."""
        others = sums.copy()
        if current is not None:
            others[current] -= self.quality[j, current]
        out = np.zeros(self.n_tasks)
        for k in range(self.n_tasks):
            if self.feasible[j, k]:
                out[k] = payoff(self.rewards[k], self.quality[j, k], others[k] + self.quality[j, k],
                                self.energy[j, k], True)
        return out


def improves(candidate: float, current: float) -> bool:
    return candidate > current + PAYOFF_RTOL * max(abs(current), abs(candidate))


def is_stable(game: GameInstance, j: int, profile: Sequence[Optional[int]], sums: np.ndarray) -> bool:
    current = profile[j]
    here = game.device_payoff(j, current, sums)
    alt = game.deviation_payoffs(j, current, sums)
    return not any(improves(alt[k], here) for k in range(game.n_tasks) if k != current)


def verify_equilibrium(profile: Sequence[Optional[int]], game: GameInstance) -> bool:
    """True iff no device gains strictly by switching its single claim (or dropping it)."""
    if game.n_devices * game.n_tasks > 10_000:
        raise ValueError("instance too large for an exhaustive deviation scan")
    profile = list(profile)
    sums = game.claim_sums(profile)
    return all(is_stable(game, j, profile, sums) for j in range(game.n_devices))
