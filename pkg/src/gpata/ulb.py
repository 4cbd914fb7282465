"""Uncertainty-aware load balancing of devices onto edge servers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .model import EdgeServer
from .privacy import DisclosedView, estimate


def ulb_distance(view: DisclosedView, server: EdgeServer, mode: str = "conservative",
                 k: int = 32, rng: Optional[np.random.Generator] = None) -> float:
    """Expected distance to ``server`` divided by the estimated spare compute; inf when saturated."""
    est = estimate(view, server, mode, k, rng)
    capacity = est.freq * (1.0 - est.usage)
    if capacity <= 0:
        return math.inf
    return view.location_region.expected_distance(server.location) / capacity


@dataclass
class Assignment:
    server_of: Dict[int, int]
    groups: Dict[int, List[int]]  # server id -> device ids in pick order
    trace: List[Tuple[int, int, float]] = field(default_factory=list)  # (device, server, distance)

    @property
    def sizes(self) -> Dict[int, int]:
        return {s: len(d) for s, d in self.groups.items()}


def balance_matrix(dist: np.ndarray, device_ids: Sequence[int], server_ids: Sequence[int]) -> Assignment:
    """Round-robin greedy on a [server, device] distance matrix.

    Servers pick in the given order; each takes its nearest unassigned device,
    ties going to the lowest device id. Sorting each row once makes the whole
    pass O(Y X log X).
    """
    dist = np.asarray(dist, dtype=float)
    n_servers, n_devices = dist.shape if dist.ndim == 2 else (len(server_ids), 0)
    if n_servers == 0:
        raise ValueError("at least one server is required")
    ids = np.asarray(device_ids)
    orders = [np.lexsort((ids, dist[y])) for y in range(n_servers)]
    cursor = [0] * n_servers
    taken = np.zeros(n_devices, dtype=bool)
    server_of: Dict[int, int] = {}
    groups: Dict[int, List[int]] = {s: [] for s in server_ids}
    trace = []
    for turn in range(n_devices):
        y = turn % n_servers
        order, c = orders[y], cursor[y]
        while taken[order[c]]:
            c += 1
        x = order[c]
        cursor[y] = c + 1
        taken[x] = True
        dev, srv = int(ids[x]), server_ids[y]
        server_of[dev] = srv
        groups[srv].append(dev)
        trace.append((dev, srv, float(dist[y, x])))
    return Assignment(server_of, groups, trace)


def distance_matrix(views: Sequence[DisclosedView], servers: Sequence[EdgeServer], mode: str = "conservative",
                    k: int = 32, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    return np.array([[ulb_distance(v, s, mode, k, rng) for v in views] for s in servers]).reshape(len(servers), len(views))


def balance(views: Sequence[DisclosedView], servers: Sequence[EdgeServer], mode: str = "conservative",
            k: int = 32, rng: Optional[np.random.Generator] = None) -> Assignment:
    servers = sorted(servers, key=lambda s: s.id)
    views = sorted(views, key=lambda v: v.device_id)
    dist = distance_matrix(views, servers, mode, k, rng)
    return balance_matrix(dist, [v.device_id for v in views], [s.id for s in servers])
