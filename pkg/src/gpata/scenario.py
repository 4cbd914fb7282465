"""Scenario configuration: rosters, generators and parameters, with YAML round-tripping."""

from __future__ import annotations

import math
import zlib
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import yaml

from .model import EdgeServer, NetworkModel, Point
from .privacy import ESTIMATION_MODES, LEVELS, PRESETS, LocationHierarchy, PrivacyProfile
from .dra import LOSS_PAIRINGS


class ConfigError(ValueError):
    pass


def stream(seed: int, name: str, *keys: int) -> np.random.Generator:
    """Independent generator for one purpose, so adding draws in one place never shifts another."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), zlib.crc32(name.encode()), *map(int, keys)]))


@dataclass
class TaskGenConfig:
    per_cycle: int = 30
    comp_range: Tuple[float, float] = (0.2, 1.2)  # giga-operations
    output_range: Tuple[float, float] = (1e5, 1e6)  # bytes
    input_range: Tuple[float, float] = (5e5, 5e6)  # bytes
    trans_unit: float = 1e6  # bytes per transfer-complexity unit
    algorithms: Tuple[str, ...] = ("detect", "classify")
    data_types: Tuple[str, ...] = ("video", "image")


@dataclass
class GameConfig:
    lambda1: float = 1.0
    lambda2: float = 1.0
    mu: float = 0.5
    rho: float = 0.8
    max_iterations: int = 20
    round_cap: Optional[int] = None  # None -> number of tasks in the group
    estimation: str = "conservative"
    anchor_samples: int = 32
    bgta_max_iterations: int = 100


@dataclass
class RewardConfig:
    budget: float = 100.0
    alpha1: float = 1.0
    alpha2: float = 1.0
    eta: float = 0.1
    beta: float = 1.2
    thres_high: Optional[int] = None
    loss_pairing: str = "literal"
    shed_fraction: float = 0.1


@dataclass
class TdaConfig:
    exhaustive_limit: int = 4096  # max (devices+1)^tasks assignments enumerated


@dataclass
class DynamicsConfig:
    usage_jitter: float = 0.0  # per-cycle uniform perturbation of background usage


@dataclass
class DeviceSpec:
    id: int
    cpu_freq: float
    cpu_usage: float
    location: Point
    power_comp: float
    power_trans_per_byte: float
    privacy: Optional[PrivacyProfile] = None  # overrides the scenario preset


@dataclass
class ScenarioConfig:
    devices: List[DeviceSpec]
    servers: List[EdgeServer]
    hierarchy: LocationHierarchy
    seed: int = 0
    cycles: int = 100
    deadline: float = 2.0
    privacy: str = "medium"
    freq_max: float = 5.0
    tasks: TaskGenConfig = field(default_factory=TaskGenConfig)
    game: GameConfig = field(default_factory=GameConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    network: NetworkModel = field(default_factory=NetworkModel)
    tda: TdaConfig = field(default_factory=TdaConfig)
    dynamics: DynamicsConfig = field(default_factory=DynamicsConfig)

    def __post_init__(self):
        self.validate()

    def validate(self):
        def need(cond, key, msg):
            if not cond:
                raise ConfigError(f"{key}: {msg}")

        need(isinstance(self.seed, int) and 0 <= self.seed < 2 ** 64, "seed", "must be a 64-bit non-negative integer")
        need(isinstance(self.cycles, int) and self.cycles >= 0, "cycles", "must be a non-negative integer")
        need(self.deadline > 0, "deadline", "Δ must be > 0")
        need(self.privacy in PRESETS, "privacy", f"must be one of {PRESETS}")
        need(self.freq_max > 0, "freq_max", "must be > 0")
        need(len(self.servers) >= 1, "servers", "at least one server is required")
        need(len({s.id for s in self.servers}) == len(self.servers), "servers", "ids must be unique")
        need(len({d.id for d in self.devices}) == len(self.devices), "devices", "ids must be unique")
        for d in self.devices:
            key = f"devices[{d.id}]"
            need(0 < d.cpu_freq <= self.freq_max, f"{key}.cpu_freq", f"must lie in (0, {self.freq_max}]")
            need(0 <= d.cpu_usage <= 1, f"{key}.cpu_usage", "must lie in [0,1]")
            need(d.power_comp >= 0, f"{key}.power_comp", "must be >= 0")
            need(d.power_trans_per_byte >= 0, f"{key}.power_trans_per_byte", "must be >= 0")
            try:
                self.hierarchy.locate(d.location)
            except ValueError as exc:
                raise ConfigError(f"{key}.location: {exc}") from None
        t = self.tasks
        need(isinstance(t.per_cycle, int) and t.per_cycle >= 0, "tasks.per_cycle", "must be a non-negative integer")
        for name in ("comp_range", "output_range", "input_range"):
            lo, hi = getattr(t, name)
            need(0 <= lo <= hi, f"tasks.{name}", "must be [lo, hi] with 0 <= lo <= hi")
        need(t.trans_unit > 0, "tasks.trans_unit", "must be > 0")
        need(len(t.algorithms) > 0 and len(t.data_types) > 0, "tasks", "label lists must be non-empty")
        g = self.game
        need(g.lambda1 >= 0, "game.lambda1", "λ1 must be >= 0")
        need(g.lambda2 >= 0, "game.lambda2", "λ2 must be >= 0")
        need(0 < g.mu <= 1, "game.mu", "μ must lie in (0,1]")
        need(0 < g.rho <= 1, "game.rho", "ρ must lie in (0,1]")
        need(isinstance(g.max_iterations, int) and g.max_iterations >= 1, "game.max_iterations", "P must be >= 1")
        need(g.round_cap is None or (isinstance(g.round_cap, int) and g.round_cap >= 1), "game.round_cap",
             "must be a positive integer")
        need(g.estimation in ESTIMATION_MODES, "game.estimation", f"must be one of {ESTIMATION_MODES}")
        need(isinstance(g.anchor_samples, int) and g.anchor_samples >= 1, "game.anchor_samples", "K must be >= 1")
        need(isinstance(g.bgta_max_iterations, int) and g.bgta_max_iterations >= 1, "game.bgta_max_iterations",
             "must be >= 1")
        r = self.reward
        need(r.budget >= 0, "reward.budget", "must be >= 0")
        need(r.alpha1 > 0 and r.alpha2 > 0, "reward.alpha", "α1, α2 must be > 0")
        need(r.eta >= 0, "reward.eta", "η must be >= 0")
        need(r.beta > 0, "reward.beta", "β must be > 0")
        need(r.thres_high is None or r.thres_high >= 0, "reward.thres_high", "must be >= 0")
        need(r.loss_pairing in LOSS_PAIRINGS, "reward.loss_pairing", f"must be one of {LOSS_PAIRINGS}")
        need(0 <= r.shed_fraction < 1, "reward.shed_fraction", "must lie in [0,1)")
        n = self.network
        need(n.bandwidth > 0, "network.bandwidth", "must be > 0")
        need(n.latency_per_distance >= 0 and n.overhead >= 0, "network", "latency and overhead must be >= 0")
        need(self.tda.exhaustive_limit >= 1, "tda.exhaustive_limit", "must be >= 1")
        need(0 <= self.dynamics.usage_jitter <= 1, "dynamics.usage_jitter", "must lie in [0,1]")

    # variants used by sweeps
    def with_deadline(self, deadline: float) -> "ScenarioConfig":
        return replace(self, deadline=float(deadline))

    def with_privacy(self, preset: str) -> "ScenarioConfig":
        devices = [replace(d, privacy=None) for d in self.devices]
        return replace(self, privacy=preset, devices=devices)

    def with_tasks(self, per_cycle: int) -> "ScenarioConfig":
        return replace(self, tasks=replace(self.tasks, per_cycle=int(per_cycle)))

    def with_devices(self, count: int) -> "ScenarioConfig":
        """First ``count`` devices; beyond the roster, clones of it placed at seeded POIs."""
        count = int(count)
        if count < 0:
            raise ConfigError("devices: count must be >= 0")
        roster = list(self.devices[:count])
        pois = self.hierarchy.all_points()
        next_id = max((d.id for d in self.devices), default=-1) + 1
        for k in range(len(roster), count):
            template = self.devices[k % len(self.devices)]
            spot = pois[int(stream(self.seed, "roster", k).integers(len(pois)))]
            roster.append(replace(template, id=next_id, location=spot))
            next_id += 1
        return replace(self, devices=roster)

    def with_cycles(self, cycles: int) -> "ScenarioConfig":
        return replace(self, cycles=int(cycles))

    def with_game(self, **kw) -> "ScenarioConfig":
        return replace(self, game=replace(self.game, **kw))

    def with_reward(self, **kw) -> "ScenarioConfig":
        return replace(self, reward=replace(self.reward, **kw))

    # serialisation
    def to_dict(self) -> Dict[str, Any]:
        def device(d: DeviceSpec):
            out = {"id": d.id, "cpu_freq": d.cpu_freq, "cpu_usage": d.cpu_usage,
                   "location": list(d.location), "power_comp": d.power_comp,
                   "power_trans_per_byte": d.power_trans_per_byte}
            if d.privacy is not None:
                out["privacy"] = [d.privacy.level_location, d.privacy.level_freq, d.privacy.level_usage]
            return out

        cities = []
        for city, streets in self.hierarchy.cities.items():
            entries = []
            for street, pts in streets.items():
                entry = {"name": street, "pois": [list(p) for p in pts]}
                if self.hierarchy.weights is not None:
                    entry["weights"] = [self.hierarchy.weights.get(p, 0.0) for p in pts]
                entries.append(entry)
            cities.append({"name": city, "streets": entries})

        def plain(obj):
            d = asdict(obj)
            return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}

        return {
            "seed": self.seed, "cycles": self.cycles, "deadline": self.deadline, "privacy": self.privacy,
            "freq_max": self.freq_max,
            "hierarchy": {"cities": cities},
            "servers": [{"id": s.id, "location": list(s.location)} for s in self.servers],
            "devices": [device(d) for d in self.devices],
            "tasks": plain(self.tasks), "game": plain(self.game), "reward": plain(self.reward),
            "network": plain(self.network), "tda": plain(self.tda), "dynamics": plain(self.dynamics),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ScenarioConfig":
        if not isinstance(data, dict):
            raise ConfigError("scenario: top level must be a mapping")
        _check_keys(data, {"seed", "cycles", "deadline", "privacy", "freq_max", "hierarchy", "servers",
                           "devices", "tasks", "game", "reward", "network", "tda", "dynamics"}, "scenario")
        for key in ("hierarchy", "servers", "devices"):
            if key not in data:
                raise ConfigError(f"{key}: required section is missing")
        kw: Dict[str, Any] = {}
        for key, kind in (("seed", int), ("cycles", int), ("deadline", float), ("privacy", str),
                          ("freq_max", float)):
            if key in data:
                kw[key] = _coerce(data[key], kind, key)
        kw["hierarchy"] = _hierarchy(data["hierarchy"])
        kw["servers"] = [_server(s, i) for i, s in enumerate(_as_list(data["servers"], "servers"))]
        kw["devices"] = [_device(d, i) for i, d in enumerate(_as_list(data["devices"], "devices"))]
        for key, typ in (("tasks", TaskGenConfig), ("game", GameConfig), ("reward", RewardConfig),
                         ("network", NetworkModel), ("tda", TdaConfig), ("dynamics", DynamicsConfig)):
            if key in data:
                kw[key] = _section(typ, data[key], key)
        return cls(**kw)


def _as_list(value, key) -> list:
    if not isinstance(value, list):
        raise ConfigError(f"{key}: expected a list")
    return value


def _check_keys(d, allowed, where):
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected a mapping")
    unknown = sorted(set(d) - set(allowed))
    if unknown:
        raise ConfigError(f"{where}.{unknown[0]}: unknown key")


def _coerce(value, kind, key):
    try:
        if kind is int:
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise TypeError
            return int(value)
        if kind is float:
            if isinstance(value, bool):
                raise TypeError
            return float(value)
        if kind is str:
            if not isinstance(value, str):
                raise TypeError
            return value
    except (TypeError, ValueError):
        pass
    raise ConfigError(f"{key}: expected {kind.__name__}, got {value!r}")


def _point(value, key) -> Point:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigError(f"{key}: expected a point [x, y]")
    return (_coerce(value[0], float, key), _coerce(value[1], float, key))


def _hierarchy(data) -> LocationHierarchy:
    _check_keys(data, {"cities"}, "hierarchy")
    cities: Dict[str, Dict[str, List[Point]]] = {}
    weights: Dict[Point, float] = {}
    for ci, city in enumerate(_as_list(data.get("cities"), "hierarchy.cities")):
        where = f"hierarchy.cities[{ci}]"
        _check_keys(city, {"name", "streets"}, where)
        name = str(city.get("name", f"city{ci}"))
        cities[name] = {}
        for si, street in enumerate(_as_list(city.get("streets"), f"{where}.streets")):
            sw = f"{where}.streets[{si}]"
            _check_keys(street, {"name", "pois", "weights"}, sw)
            pts = [_point(p, f"{sw}.pois") for p in _as_list(street.get("pois"), f"{sw}.pois")]
            cities[name][str(street.get("name", f"street{si}"))] = pts
            if "weights" in street:
                ws = _as_list(street["weights"], f"{sw}.weights")
                if len(ws) != len(pts):
                    raise ConfigError(f"{sw}.weights: one weight per POI is required")
                for p, w in zip(pts, ws):
                    w = _coerce(w, float, f"{sw}.weights")
                    if w < 0:
                        raise ConfigError(f"{sw}.weights: must be >= 0")
                    weights[p] = w
    try:
        return LocationHierarchy(cities, weights or None)
    except ValueError as exc:
        raise ConfigError(f"hierarchy: {exc}") from None


def _server(data, i) -> EdgeServer:
    where = f"servers[{i}]"
    _check_keys(data, {"id", "location"}, where)
    return EdgeServer(_coerce(data.get("id", i), int, f"{where}.id"), _point(data.get("location"), f"{where}.location"))


def _device(data, i) -> DeviceSpec:
    where = f"devices[{i}]"
    _check_keys(data, {"id", "cpu_freq", "cpu_usage", "location", "power_comp", "power_trans_per_byte", "privacy"},
                where)
    for key in ("cpu_freq", "cpu_usage", "location", "power_comp", "power_trans_per_byte"):
        if key not in data:
            raise ConfigError(f"{where}.{key}: required")
    profile = None
    if data.get("privacy") is not None:
        lv = data["privacy"]
        if isinstance(lv, int) and not isinstance(lv, bool):
            lv = [lv, lv, lv]
        if not isinstance(lv, list) or len(lv) != 3 or any(x not in LEVELS for x in lv):
            raise ConfigError(f"{where}.privacy: expected a level in {LEVELS} or [location, freq, usage] levels")
        profile = PrivacyProfile(*lv)
    return DeviceSpec(
        id=_coerce(data.get("id", i), int, f"{where}.id"),
        cpu_freq=_coerce(data["cpu_freq"], float, f"{where}.cpu_freq"),
        cpu_usage=_coerce(data["cpu_usage"], float, f"{where}.cpu_usage"),
        location=_point(data["location"], f"{where}.location"),
        power_comp=_coerce(data["power_comp"], float, f"{where}.power_comp"),
        power_trans_per_byte=_coerce(data["power_trans_per_byte"], float, f"{where}.power_trans_per_byte"),
        privacy=profile,
    )


def _section(typ, data, where):
    names = {f.name: f for f in fields(typ)}
    _check_keys(data, names, where)
    defaults = typ()
    kw = {}
    for key, value in data.items():
        current = getattr(defaults, key)
        full = f"{where}.{key}"
        if isinstance(current, tuple):
            items = _as_list(value, full)
            kind = str if current and isinstance(current[0], str) else float
            kw[key] = tuple(_coerce(v, kind, full) for v in items)
        elif isinstance(current, bool):
            raise ConfigError(f"{full}: unsupported")
        elif isinstance(current, int) or (current is None and key in ("round_cap", "thres_high")):
            kw[key] = None if value is None else _coerce(value, int, full)
        elif isinstance(current, float):
            kw[key] = _coerce(value, float, full)
        else:
            kw[key] = _coerce(value, str, full)
    try:
        return typ(**kw)
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def load_scenario(path) -> ScenarioConfig:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: YAML parse error: {exc}") from None
    return ScenarioConfig.from_dict(data)


def dump_scenario(cfg: ScenarioConfig, path) -> None:
    Path(path).write_text(yaml.safe_dump(cfg.to_dict(), sort_keys=False, default_flow_style=None))


def reference_scenario(seed: int = 0) -> ScenarioConfig:
    """15 heterogeneous devices around 3 servers, 30 tasks per cycle, 100 cycles.

    Three cities on an equilateral triangle of side 3 distance units, each
    with 5 streets of 5 points of interest radiating from its centre where the
    city's server sits.
    """
    centres = [(0.0, 0.0), (3.0, 0.0), (1.5, round(1.5 * math.sqrt(3), 6))]
    cities = {}
    for c, (cx, cy) in enumerate(centres):
        streets = {}
        for s in range(5):
            angle = 2 * math.pi * (s + 0.5 * c) / 5
            streets[f"street{s}"] = [(round(cx + r * math.cos(angle), 6), round(cy + r * math.sin(angle), 6))
                                     for r in (0.1, 0.2, 0.3, 0.4, 0.5)]
        cities[f"city{c}"] = streets
    hierarchy = LocationHierarchy(cities)
    pois = hierarchy.all_points()
    layout = np.random.default_rng(20240611)
    kinds = [(1.9, 10.0)] * 2 + [(2.3, 8.0)] * 3 + [(1.2, 3.0)] * 10
    order = layout.permutation(len(kinds))
    devices = []
    for x, k in enumerate(order):
        freq, power = kinds[k]
        devices.append(DeviceSpec(
            id=x, cpu_freq=freq, cpu_usage=round(float(layout.uniform(0.1, 0.5)), 4),
            location=pois[int(layout.integers(len(pois)))], power_comp=power, power_trans_per_byte=4e-7))
    servers = [EdgeServer(i, c) for i, c in enumerate(centres)]
    return ScenarioConfig(devices=devices, servers=servers, hierarchy=hierarchy, seed=seed,
                          network=NetworkModel(latency_per_distance=0.08, bandwidth=5e6, overhead=0.01))
