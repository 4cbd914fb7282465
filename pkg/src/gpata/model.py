"""Domain types shared across the simulator: devices, servers, tasks and metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

Point = Tuple[float, float]


def distance(a: Sequence[float], b: Sequence[float]) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


@dataclass(frozen=True)
class DeviceState:
    """True attributes of an end device. Only the device itself sees these."""

    id: int
    cpu_freq: float  # GHz
    cpu_usage: float  # background load, fraction of CPU
    location: Point
    power_comp: float  # W
    power_trans_per_byte: float  # W per (byte/s) carried
    utilization: float = 0.0  # fraction of the cycle already committed

    def __post_init__(self):
        if not self.cpu_freq > 0:
            raise ValueError(f"device {self.id}: cpu_freq must be > 0, got {self.cpu_freq}")
        if not 0.0 <= self.cpu_usage <= 1.0:
            raise ValueError(f"device {self.id}: cpu_usage must lie in [0,1], got {self.cpu_usage}")
        if self.utilization < 0:
            raise ValueError(f"device {self.id}: utilization must be >= 0")
        if self.power_comp < 0 or self.power_trans_per_byte < 0:
            raise ValueError(f"device {self.id}: power fields must be >= 0")
        object.__setattr__(self, "location", (float(self.location[0]), float(self.location[1])))


@dataclass(frozen=True)
class EdgeServer:
    id: int
    location: Point
    assigned_devices: Tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "location", (float(self.location[0]), float(self.location[1])))
        object.__setattr__(self, "assigned_devices", tuple(self.assigned_devices))


@dataclass(frozen=True)
class Task:
    """One sensing-cycle computation unit.

    ``comp_complexity`` is in giga-operations, ``trans_complexity`` in abstract
    transfer units. The algorithm and data-type labels are carried but unused
    by any cost or reward formula.
    """

    id: int
    input_volume: float  # bytes
    output_volume: float  # bytes
    comp_complexity: float
    trans_complexity: float
    algorithm_label: str = ""
    data_type_label: str = ""
    reward: float = 0.0

    def __post_init__(self):
        for name in ("input_volume", "output_volume", "comp_complexity", "trans_complexity", "reward"):
            if getattr(self, name) < 0:
                raise ValueError(f"task {self.id}: {name} must be >= 0")


def deadline_indicator(delay: float, deadline: float) -> int:
    """1 if the task missed its deadline (strictly later than ``deadline``), else 0."""
    if not deadline > 0:
        raise ValueError("deadline must be > 0")
    return 1 if delay > deadline else 0


def edge_cost(device: DeviceState, compute_time: float, trans_time: float, rate: float) -> float:
    """Energy in joules spent computing for ``compute_time`` and sending at ``rate`` bytes/s."""
    if compute_time < 0 or trans_time < 0:
        raise ValueError("times must be non-negative")
    power_trans = device.power_trans_per_byte * rate
    return device.power_comp * compute_time + power_trans * trans_time


@dataclass
class ExecutionRecord:
    """Outcome of one task in one cycle. ``device_id`` is None for unassigned tasks."""

    task_id: int
    device_id: Optional[int]
    e2e_delay: float
    deadline_hit: bool
    reward_paid: float
    reward: float = 0.0
    server_id: Optional[int] = None
    wait: float = 0.0
    compute_time: float = 0.0
    trans_time: float = 0.0
    energy: float = 0.0
    payoff: float = 0.0
    feasible: bool = False  # device-side schedulability verdict when the task was claimed


@dataclass
class DeviceRecord:
    device_id: int
    payoff: float = 0.0
    energy_cost: float = 0.0


@dataclass
class CycleMetrics:
    cycle: int
    tasks: list = field(default_factory=list)  # ExecutionRecord
    devices: list = field(default_factory=list)  # DeviceRecord
    iterations: list = field(default_factory=list)  # negotiation iterations per game played
    converged: list = field(default_factory=list)

    @property
    def dhr(self) -> float:
        if not self.tasks:
            return 0.0
        return sum(1 for r in self.tasks if r.deadline_hit) / len(self.tasks)

    @property
    def misses(self) -> int:
        return sum(1 for r in self.tasks if not r.deadline_hit)


@dataclass(frozen=True)
class NetworkModel:
    """Device-to-server link: fixed overhead plus distance-proportional latency plus serialization."""

    latency_per_distance: float = 0.02  # s per distance unit
    bandwidth: float = 5e6  # bytes/s
    overhead: float = 0.01  # s

    def __post_init__(self):
        if self.latency_per_distance < 0 or self.overhead < 0:
            raise ValueError("latency and overhead must be >= 0")
        if not self.bandwidth > 0:
            raise ValueError("bandwidth must be > 0")

    def trans_time(self, dist: float, volume: float) -> float:
        return self.overhead + self.latency_per_distance * dist + volume / self.bandwidth
