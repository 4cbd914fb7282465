"""Decentralized privacy-aware fictitious play.

Devices never see each other's claims. Each iteration the server broadcasts
per-task aggregates only (rewards, predicted congestion and the observed
claimed quality); devices answer privately with a claim and a one-bit
"stable" flag saying whether, given the observed aggregates, they would keep
their claim. The server signals convergence once claims repeat across two
consecutive iterations and every device reports stable.

Message schema ``gpata.msg/1`` (one JSON object per line in a log):

* broadcast, server -> all devices of a group::

    {"schema", "type": "broadcast", "cycle", "server", "round", "iteration",
     "tasks": [task ids], "rewards": {task: R}, "congestion": {task: N},
     "observed": {task: sum q} | null, "converged": bool}

* claim, one device -> server (never relayed)::

    {"schema", "type": "claim", "cycle", "server", "round", "iteration",
     "device", "task": id | null, "stable": bool}
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from .game import PAYOFF_RTOL, SCORE_FLOOR, GameInstance, tie_break

SCHEMA = "gpata.msg/1"
BROADCAST_KEYS = frozenset({"schema", "type", "cycle", "server", "round", "iteration",
                            "tasks", "rewards", "congestion", "observed", "converged"})
_PER_TASK_KEYS = ("rewards", "congestion", "observed")
_SCALAR_KEYS = ("cycle", "server", "round", "iteration")


@dataclass(frozen=True)
class CongestionState:
    rates: np.ndarray
    decay: float

    def __post_init__(self):
        rates = np.asarray(self.rates, dtype=float)
        if np.any(rates < 0):
            raise ValueError("congestion rates must be non-negative")
        if not 0 < self.decay <= 1:
            raise ValueError(f"decay must lie in (0,1], got {self.decay}")
        object.__setattr__(self, "rates", rates)


def update_congestion(state: CongestionState, actual: Sequence[float]) -> CongestionState:
    """Blend the previous prediction with the observed claimed quality of each task."""
    actual = np.asarray(actual, dtype=float)
    if np.any(actual < 0):
        raise ValueError("observed congestion must be non-negative")
    mu = state.decay
    return CongestionState(mu * state.rates + (1.0 - mu) * actual, mu)


def best_response(rewards: Sequence[float], quality: Sequence[float], energy: Sequence[float],
                  congestion: Sequence[float], feasible: Sequence[bool], previous: Optional[int],
                  rho: float, rng: np.random.Generator) -> Optional[int]:
    """One device's move: keep ``previous`` with probability 1 - rho, else the best task.

    Tasks are ranked by R * q / (e * N); infeasible tasks are never chosen and
    ties go to the lowest index. ``None`` means nothing is feasible.
    """
    keep = rng.random() >= rho
    if keep and previous is not None:
        return previous
    feasible = np.asarray(feasible, dtype=bool)
    if not feasible.any():
        return None
    value = (np.asarray(rewards, dtype=float) * np.asarray(quality, dtype=float)
             / (np.asarray(energy, dtype=float) * np.maximum(np.asarray(congestion, dtype=float), SCORE_FLOOR)))
    value = np.where(feasible, value, -np.inf)
    return int(np.argmax(value))


@dataclass
class ServerBroadcast:
    cycle: int
    server: int
    round: int
    iteration: int
    tasks: List[int]
    rewards: List[float]
    congestion: List[float]
    observed: Optional[List[float]] = None
    converged: bool = False

    def to_message(self) -> dict:
        def per_task(values):
            return None if values is None else {str(t): float(v) for t, v in zip(self.tasks, values)}
        return {
            "schema": SCHEMA, "type": "broadcast", "cycle": self.cycle, "server": self.server,
            "round": self.round, "iteration": self.iteration, "tasks": list(self.tasks),
            "rewards": per_task(self.rewards), "congestion": per_task(self.congestion),
            "observed": per_task(self.observed), "converged": bool(self.converged),
        }


def audit_broadcast(msg) -> bool:
    """True iff a broadcast exposes nothing but per-task aggregates."""
    if isinstance(msg, ServerBroadcast):
        msg = msg.to_message()
    if not isinstance(msg, dict) or msg.get("type") != "broadcast" or msg.get("schema") != SCHEMA:
        return False
    if set(msg) - BROADCAST_KEYS:
        return False
    if not all(isinstance(msg.get(k), int) and not isinstance(msg.get(k), bool) for k in _SCALAR_KEYS):
        return False
    if not isinstance(msg.get("converged"), bool):
        return False
    tasks = msg.get("tasks")
    if not isinstance(tasks, list) or not all(isinstance(t, int) and not isinstance(t, bool) for t in tasks):
        return False
    keys = {str(t) for t in tasks}
    for name in _PER_TASK_KEYS:
        values = msg.get(name)
        if values is None and name == "observed":
            continue
        if not isinstance(values, dict) or set(values) != keys:
            return False
        for v in values.values():
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v) or v < 0:
                return False
    return True


class MessageLog:
    """In-memory message log, exportable as line-delimited JSON."""

    def __init__(self):
        self.messages: List[dict] = []

    def append(self, msg: dict):
        self.messages.append(msg)

    def broadcasts(self) -> List[dict]:
        return [m for m in self.messages if m.get("type") == "broadcast"]

    def write(self, path):
        with open(path, "w") as fh:
            for m in self.messages:
                fh.write(json.dumps(m, sort_keys=True) + "\n")

    @classmethod
    def read(cls, path) -> "MessageLog":
        log = cls()
        for line in Path(path).read_text().splitlines():
            if line.strip():
                log.append(json.loads(line))
        return log


def audit_log(log: MessageLog) -> bool:
    return all(audit_broadcast(m) for m in log.broadcasts())


@dataclass
class NegotiationResult:
    profile: Dict[int, Optional[int]]  # device id -> task id
    winners: Dict[int, int]  # task id -> device id
    iterations: int
    converged: bool
    congestion: CongestionState
    choices: List[Optional[int]] = field(default_factory=list)  # final claims by index


def _responses(game: GameInstance, previous: Sequence[Optional[int]], rates: np.ndarray, rho: float,
               rng: np.random.Generator) -> List[Optional[int]]:
    """All devices' best responses to one broadcast, equal to calling ``best_response`` per device.

    A device already holding a task sees that task's congestion as broadcast;
    for any other task it adds its own score, since joining puts it among the
    claimants.
    """
    draws = rng.random(game.n_devices)
    perceived = rates[None, :] + game.quality
    held = [(j, c) for j, c in enumerate(previous) if c is not None]
    for j, c in held:
        perceived[j, c] = rates[c]
    value = game.rewards[None, :] * game.quality / (game.energy * np.maximum(perceived, SCORE_FLOOR))
    value = np.where(game.feasible, value, -np.inf)
    best = np.argmax(value, axis=1)
    any_ok = game.feasible.any(axis=1)
    out: List[Optional[int]] = []
    for j in range(game.n_devices):
        if draws[j] >= rho and previous[j] is not None:
            out.append(previous[j])
        else:
            out.append(int(best[j]) if any_ok[j] else None)
    return out


def _stable_flags(game: GameInstance, choices: Sequence[Optional[int]], observed: np.ndarray) -> List[bool]:
    """Each device checks, against the observed sums, whether moving would pay strictly more."""
    alone = observed[None, :] + game.quality
    for j, c in enumerate(choices):
        if c is not None:
            alone[j, c] = observed[c]
    value = np.where(game.feasible, game.rewards[None, :] * game.quality / (game.energy * alone), 0.0)
    flags = []
    for j, c in enumerate(choices):
        row = value[j]
        here = row[c] if c is not None else 0.0
        others = np.delete(row, c) if c is not None else row
        flags.append(not bool(np.any(others > here + PAYOFF_RTOL * np.maximum(np.abs(others), abs(here)))))
    return flags


def negotiate(game: GameInstance, congestion: CongestionState, rho: float, max_iterations: int,
              rng: np.random.Generator, tie_rng: Optional[np.random.Generator] = None,
              log: Optional[MessageLog] = None, cycle: int = 0, server: int = 0,
              round_: int = 0) -> NegotiationResult:
    """Run one claim round of the negotiation for a local group, then settle contested tasks."""
    if not 0 < rho <= 1:
        raise ValueError(f"inertia rho must lie in (0,1], got {rho}")
    if max_iterations < 1:
        raise ValueError("max_iterations must be >= 1")
    if len(congestion.rates) != game.n_tasks:
        raise ValueError("one congestion rate per task is required")
    tie_rng = rng if tie_rng is None else tie_rng
    tasks = list(game.task_ids)
    rewards = game.rewards.tolist()

    def emit(iteration, rates, observed, converged):
        if log is not None:
            log.append(ServerBroadcast(cycle, server, round_, iteration, tasks, rewards,
                                       rates.tolist(), None if observed is None else observed.tolist(),
                                       converged).to_message())

    state = congestion
    emit(0, state.rates, None, False)
    previous: List[Optional[int]] = [None] * game.n_devices
    converged = False
    iteration = 0
    while iteration < max_iterations:
        iteration += 1
        choices = _responses(game, previous, state.rates, rho, rng)
        observed = game.claim_sums(choices)
        state = update_congestion(state, observed)
        flags = _stable_flags(game, choices, observed)
        if log is not None:
            for j, c in enumerate(choices):
                log.append({"schema": SCHEMA, "type": "claim", "cycle": cycle, "server": server,
                            "round": round_, "iteration": iteration, "device": game.device_ids[j],
                            "task": None if c is None else tasks[c], "stable": flags[j]})
        converged = iteration > 1 and choices == previous and all(flags)
        emit(iteration, state.rates, observed, converged)
        previous = choices
        if converged:
            break

    winners: Dict[int, int] = {}
    for k in range(game.n_tasks):
        claimants = {j: game.quality[j, k] for j, c in enumerate(previous) if c == k}
        if claimants:
            winners[tasks[k]] = game.device_ids[tie_break(claimants, tie_rng)]
    profile = {game.device_ids[j]: (None if c is None else tasks[c]) for j, c in enumerate(previous)}
    return NegotiationResult(profile, winners, iteration, converged, state, previous)
