"""Per-user privacy levels, cloaking into uncertainty regions, and server-side estimation.

A device never reveals its true frequency, usage or location to a server.
It discloses an uncertainty region whose width is set by its privacy level,
and the server turns that region into point estimates either pessimistically
(``estimate_conservative``) or by averaging anchor samples (``estimate_anchor``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Iterable, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from .model import DeviceState, EdgeServer, Point, distance

LEVELS = (0, 1, 2, 3)
FREQ_RESOLUTION = {1: 0.5, 2: 2.0}  # GHz
USAGE_RESOLUTION = {1: 0.2, 2: 0.5}
PRESETS = ("high", "medium", "low")
ESTIMATION_MODES = ("conservative", "anchor")


@dataclass(frozen=True)
class PrivacyProfile:
    level_location: int = 0
    level_freq: int = 0
    level_usage: int = 0

    def __post_init__(self):
        for name in ("level_location", "level_freq", "level_usage"):
            v = getattr(self, name)
            if v not in LEVELS:
                raise ValueError(f"{name} must be one of {LEVELS}, got {v!r}")

    @classmethod
    def uniform(cls, level: int) -> "PrivacyProfile":
        return cls(level, level, level)


def preset_profile(name: str, rng: Optional[np.random.Generator] = None) -> PrivacyProfile:
    """Profile for a named preset. ``medium`` draws one level in [0, 3] from ``rng``."""
    if name == "high":
        return PrivacyProfile.uniform(3)
    if name == "low":
        return PrivacyProfile.uniform(0)
    if name == "medium":
        if rng is None:
            raise ValueError("the medium preset needs an rng")
        return PrivacyProfile.uniform(int(rng.integers(0, 4)))
    raise ValueError(f"unknown privacy preset {name!r}; expected one of {PRESETS}")


@dataclass(frozen=True)
class Interval:
    """Closed scalar region [lb, ub] with a uniform density."""

    lb: float
    ub: float

    pdf_label = "uniform"

    def __post_init__(self):
        if self.lb > self.ub:
            raise ValueError(f"interval lower bound {self.lb} exceeds upper bound {self.ub}")

    @property
    def degenerate(self) -> bool:
        return self.lb == self.ub

    def contains(self, value: float) -> bool:
        return self.lb <= value <= self.ub

    def covers(self, other: "Interval") -> bool:
        return self.lb <= other.lb and other.ub <= self.ub

    def sample(self, rng: np.random.Generator, k: int) -> np.ndarray:
        if self.degenerate:
            return np.full(k, self.lb)
        return rng.uniform(self.lb, self.ub, size=k)


@dataclass(frozen=True)
class PointSet:
    """Finite set of candidate locations, optionally weighted (e.g. by population)."""

    points: Tuple[Point, ...]
    weights: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        if not self.points:
            raise ValueError("a point-set region needs at least one point")
        object.__setattr__(self, "points", tuple((float(x), float(y)) for x, y in self.points))
        if self.weights is not None:
            w = tuple(float(v) for v in self.weights)
            if len(w) != len(self.points):
                raise ValueError("weights and points differ in length")
            if any(v < 0 for v in w) or not math.isclose(sum(w), 1.0, rel_tol=0, abs_tol=1e-9):
                raise ValueError("point weights must be non-negative and sum to 1")
            object.__setattr__(self, "weights", w)

    @property
    def pdf_label(self) -> str:
        return "uniform" if self.weights is None else "weighted"

    @property
    def degenerate(self) -> bool:
        return len(self.points) == 1

    def probabilities(self) -> np.ndarray:
        if self.weights is None:
            return np.full(len(self.points), 1.0 / len(self.points))
        return np.asarray(self.weights)

    def contains(self, point: Sequence[float]) -> bool:
        return (float(point[0]), float(point[1])) in set(self.points)

    def covers(self, other: "PointSet") -> bool:
        return set(other.points) <= set(self.points)

    def distances(self, target: Sequence[float]) -> np.ndarray:
        # same rounding as model.distance so a singleton region matches the true distance exactly
        return np.array([distance(p, target) for p in self.points])

    def expected_distance(self, target: Sequence[float]) -> float:
        return float(np.dot(self.probabilities(), self.distances(target)))

    def max_distance(self, target: Sequence[float]) -> float:
        return float(self.distances(target).max())


UncertaintyRegion = Union[Interval, PointSet]


@dataclass(frozen=True)
class DisclosedView:
    """What a server is allowed to know about a device."""

    device_id: int
    freq_region: Interval
    usage_region: Interval
    location_region: PointSet


class LocationHierarchy:
    """City -> street -> points-of-interest, with optional per-POI population weights."""

    def __init__(self, cities: Dict[str, Dict[str, Sequence[Point]]],
                 weights: Optional[Dict[Point, float]] = None):
        self.cities: Dict[str, Dict[str, Tuple[Point, ...]]] = {}
        self._where: Dict[Point, Tuple[str, str]] = {}
        for city, streets in cities.items():
            self.cities[city] = {}
            for street, pts in streets.items():
                pts = tuple((float(x), float(y)) for x, y in pts)
                if not pts:
                    raise ValueError(f"street {city}/{street} has no points")
                self.cities[city][street] = pts
                for p in pts:
                    if p in self._where:
                        raise ValueError(f"point {p} appears on more than one street")
                    self._where[p] = (city, street)
        if not self._where:
            raise ValueError("location hierarchy is empty")
        self.weights = None
        if weights:
            self.weights = {(float(p[0]), float(p[1])): float(w) for p, w in weights.items()}
            unknown = set(self.weights) - set(self._where)
            if unknown:
                raise ValueError(f"weights given for points outside the hierarchy: {sorted(unknown)}")

    def __eq__(self, other):
        return (isinstance(other, LocationHierarchy) and self.cities == other.cities
                and self.weights == other.weights)

    def locate(self, point: Sequence[float]) -> Tuple[str, str]:
        key = (float(point[0]), float(point[1]))
        try:
            return self._where[key]
        except KeyError:
            raise ValueError(f"location {key} is not a point of interest in the hierarchy") from None

    def street_points(self, city: str, street: str) -> Tuple[Point, ...]:
        return self.cities[city][street]

    def city_points(self, city: str) -> Tuple[Point, ...]:
        return tuple(p for pts in self.cities[city].values() for p in pts)

    def all_points(self) -> Tuple[Point, ...]:
        return tuple(p for city in self.cities for p in self.city_points(city))

    @property
    def bounds(self) -> Tuple[float, float, float, float]:
        xs = [p[0] for p in self._where]
        ys = [p[1] for p in self._where]
        return min(xs), min(ys), max(xs), max(ys)

    def region(self, points: Iterable[Point]) -> PointSet:
        pts = tuple(points)
        if self.weights is None:
            return PointSet(pts)
        w = np.array([self.weights.get(p, 0.0) for p in pts])
        if w.sum() <= 0:
            return PointSet(pts)
        w = w / w.sum()
        # renormalise so the stored tuple sums to 1 within tolerance
        return PointSet(pts, tuple(w.tolist()))


def grid_cell(value: float, resolution: float, upper: float) -> Interval:
    """Cell (k*res, (k+1)*res] of a zero-anchored grid holding ``value``, clipped to [0, upper]."""
    ratio = value / resolution
    nearest = round(ratio)
    cell = nearest if abs(ratio - nearest) < 1e-9 else math.ceil(ratio)
    cell = max(cell, 1)  # zero belongs to the first cell
    lb = (cell - 1) * resolution
    ub = min(cell * resolution, upper)
    return Interval(min(lb, value), max(ub, value))


def _cloak_scalar(value: float, level: int, resolutions: Dict[int, float], upper: float) -> Interval:
    if level == 0:
        return Interval(value, value)
    if level == 3:
        return Interval(0.0, upper)
    cell = grid_cell(value, resolutions[level], upper)
    if level == 2:
        # 20% and 50% usage grids are not nested; keep level 2 a superset of level 1
        fine = grid_cell(value, resolutions[1], upper)
        cell = Interval(min(cell.lb, fine.lb), max(cell.ub, fine.ub))
    return cell


def cloak(state: DeviceState, profile: PrivacyProfile, hierarchy: LocationHierarchy,
          freq_max: float = 5.0) -> DisclosedView:
    """Replace each private attribute by the region its privacy level allows."""
    if not 0 < state.cpu_freq <= freq_max:
        raise ValueError(f"device {state.id}: frequency {state.cpu_freq} outside (0, {freq_max}]")
    if not 0.0 <= state.cpu_usage <= 1.0:
        raise ValueError(f"device {state.id}: usage {state.cpu_usage} outside [0, 1]")
    city, street = hierarchy.locate(state.location)

    freq = _cloak_scalar(state.cpu_freq, profile.level_freq, FREQ_RESOLUTION, freq_max)
    usage = _cloak_scalar(state.cpu_usage, profile.level_usage, USAGE_RESOLUTION, 1.0)

    level = profile.level_location
    if level == 0:
        location = PointSet((state.location,))
    elif level == 1:
        location = hierarchy.region(hierarchy.street_points(city, street))
    elif level == 2:
        location = hierarchy.region(hierarchy.city_points(city))
    else:
        location = hierarchy.region(hierarchy.all_points())
    return DisclosedView(state.id, freq, usage, location)


class Estimate(NamedTuple):
    freq: float
    usage: float
    dist: float


def estimate_conservative(view: DisclosedView, server: EdgeServer) -> Estimate:
    """Worst case inside each region: slowest clock, busiest CPU, furthest point."""
    return Estimate(view.freq_region.lb, view.usage_region.ub,
                    view.location_region.max_distance(server.location))


def estimate_anchor(view: DisclosedView, server: EdgeServer, k: int,
                    rng: np.random.Generator) -> Estimate:
    """Mean of ``k`` anchor samples drawn from each region's density."""
    if k < 1:
        raise ValueError("anchor sample count must be >= 1")
    freq = float(view.freq_region.sample(rng, k).mean())
    usage = float(view.usage_region.sample(rng, k).mean())
    loc = view.location_region
    if loc.degenerate:
        dist = distance(loc.points[0], server.location)
    else:
        idx = rng.choice(len(loc.points), size=k, p=loc.probabilities())
        dist = float(loc.distances(server.location)[idx].mean())
    return Estimate(freq, usage, dist)


def estimate(view: DisclosedView, server: EdgeServer, mode: str = "conservative",
             k: int = 32, rng: Optional[np.random.Generator] = None) -> Estimate:
    if mode == "conservative":
        return estimate_conservative(view, server)
    if mode == "anchor":
        if rng is None:
            raise ValueError("anchor estimation needs an rng")
        return estimate_anchor(view, server, k, rng)
    raise ValueError(f"unknown estimation mode {mode!r}; expected one of {ESTIMATION_MODES}")


def true_estimate(state: DeviceState, server: EdgeServer) -> Estimate:
    return Estimate(state.cpu_freq, state.cpu_usage, distance(state.location, server.location))
