"""Sensing-cycle simulator.

Each cycle: group devices onto servers, price the admitted tasks, let every
group allocate its share of tasks under the chosen scheme, execute the
allocation on true device state, and feed deadline misses back into the
reward controller. All schemes share everything except the allocation step.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .dpfp import CongestionState, MessageLog, negotiate
from .dra import ControllerRecord, RewardWeights, compute_rewards, update_budget, update_weights
from .game import PAYOFF_RTOL, SCORE_FLOOR, GameInstance, feasible, quality_score, wcet
from .model import (CycleMetrics, DeviceRecord, DeviceState, EdgeServer, ExecutionRecord, Task,
                    deadline_indicator, distance, edge_cost)
from .privacy import DisclosedView, Estimate, cloak, estimate, estimate_conservative, preset_profile
from .scenario import ScenarioConfig, stream
from .ulb import balance

SCHEMES = ("gpata", "bgta", "cog", "gmxr", "tda", "random")
BEST_RESPONSE_SWEEPS = 100  # cap for the sequential dynamics of the congestion-game baseline


@dataclass(frozen=True)
class Claim:
    task_id: int
    device_id: int
    server_id: int
    feasible: bool


@dataclass
class CycleAllocation:
    """Everything needed to re-execute a cycle's allocation under a different deadline."""

    cycle: int
    tasks: List[Task]
    claims: List[Claim]
    states: Dict[int, DeviceState]


@dataclass
class RunResult:
    scheme: str
    seed: int
    cycles: List[CycleMetrics]
    controller: List[ControllerRecord] = field(default_factory=list)
    assignment: List[Tuple[int, int, int, float]] = field(default_factory=list)  # cycle, device, server, d
    allocations: List[CycleAllocation] = field(default_factory=list)

    def summary(self) -> Dict[str, float]:
        records = [r for c in self.cycles for r in c.tasks]
        devices = [d for c in self.cycles for d in c.devices]
        delays = [r.e2e_delay for r in records if r.device_id is not None and math.isfinite(r.e2e_delay)]
        iters = [i for c in self.cycles for i in c.iterations]
        conv = [v for c in self.cycles for v in c.converged]
        return {
            "cycles": len(self.cycles),
            "tasks": len(records),
            "mean_e2e_delay_s": float(np.mean(delays)) if delays else math.nan,
            "dhr": sum(r.deadline_hit for r in records) / len(records) if records else 0.0,
            "mean_device_payoff": float(np.mean([d.payoff for d in devices])) if devices else 0.0,
            "total_payoff": float(sum(d.payoff for d in devices)),
            "total_energy_j": float(sum(d.energy_cost for d in devices)),
            "mean_iterations": float(np.mean(iters)) if iters else math.nan,
            "converged_fraction": float(np.mean(conv)) if conv else math.nan,
        }

    def device_payoff_totals(self) -> Dict[int, float]:
        out: Dict[int, float] = {}
        for c in self.cycles:
            for d in c.devices:
                out[d.device_id] = out.get(d.device_id, 0.0) + d.payoff
        return out


def execute(claims: Sequence[Claim], tasks: Sequence[Task], states: Dict[int, DeviceState],
            servers: Dict[int, EdgeServer], network, deadline: float) -> List[ExecutionRecord]:
    """Run each device's won tasks back to back in claim order on its true state."""
    by_task = {c.task_id: c for c in claims}
    if len(by_task) != len(claims):
        raise ValueError("a task was allocated twice")
    index = {t.id: t for t in tasks}
    busy: Dict[int, float] = {}
    done: Dict[int, ExecutionRecord] = {}
    for c in claims:
        task = index[c.task_id]
        st = states[c.device_id]
        compute = wcet(task, st.cpu_freq, st.cpu_usage)
        trans = network.trans_time(distance(st.location, servers[c.server_id].location), task.output_volume)
        wait = busy.get(c.device_id, 0.0)
        e2e = wait + compute + trans
        hit = deadline_indicator(e2e, deadline) == 0
        energy = edge_cost(st, compute, trans, network.bandwidth)
        paid = task.reward if (hit and c.feasible) else 0.0
        done[c.task_id] = ExecutionRecord(
            task.id, c.device_id, e2e, hit, paid, task.reward, c.server_id, wait, compute, trans, energy,
            paid / energy if energy > 0 else 0.0, c.feasible)
        busy[c.device_id] = wait + compute
    out = []
    for t in tasks:
        if t.id in done:
            out.append(done[t.id])
        else:
            out.append(ExecutionRecord(t.id, None, math.inf, False, 0.0, t.reward))
    return out


def device_records(records: Sequence[ExecutionRecord], device_ids: Sequence[int]) -> List[DeviceRecord]:
    out = {d: DeviceRecord(d) for d in device_ids}
    for r in records:
        if r.device_id is not None:
            out[r.device_id].payoff += r.payoff
            out[r.device_id].energy_cost += r.energy
    return [out[d] for d in device_ids]


def replay(allocations: Sequence[CycleAllocation], cfg: ScenarioConfig, deadline: float) -> float:
    """DHR of a recorded allocation re-executed under ``deadline``."""
    servers = {s.id: s for s in cfg.servers}
    hits = total = 0
    for a in allocations:
        recs = execute(a.claims, a.tasks, a.states, servers, cfg.network, deadline)
        hits += sum(r.deadline_hit for r in recs)
        total += len(recs)
    return hits / total if total else 0.0


@dataclass
class _Group:
    server: EdgeServer
    devices: List[DeviceState]
    tasks: List[Task]
    views: Optional[List[DisclosedView]]
    cycle: int


class Simulator:
    def __init__(self, cfg: ScenarioConfig, scheme: str = "gpata", log: Optional[MessageLog] = None,
                 record_allocations: bool = False):
        if scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
        self.cfg = cfg
        self.scheme = scheme
        self.log = log
        self.record_allocations = record_allocations
        r = cfg.reward
        self.initial_weights = RewardWeights(r.alpha1, r.alpha2, r.eta, r.budget, r.beta, r.thres_high,
                                             r.loss_pairing, r.shed_fraction)
        self.weights = self.initial_weights
        self.congestion: Dict[int, float] = {}
        self.servers = sorted(cfg.servers, key=lambda s: s.id)
        self.result = RunResult(scheme, cfg.seed, [])

    # seeded inputs, identical for every scheme
    def rng(self, name: str, *keys: int) -> np.random.Generator:
        return stream(self.cfg.seed, name, *keys)

    def device_states(self, cycle: int) -> Dict[int, DeviceState]:
        jitter = self.cfg.dynamics.usage_jitter
        noise = self.rng("dynamics", cycle).uniform(-jitter, jitter, len(self.cfg.devices)) if jitter else None
        out = {}
        for x, d in enumerate(self.cfg.devices):
            usage = d.cpu_usage if noise is None else float(np.clip(d.cpu_usage + noise[x], 0.0, 0.95))
            out[d.id] = DeviceState(d.id, d.cpu_freq, usage, d.location, d.power_comp, d.power_trans_per_byte)
        return out

    def profiles(self, cycle: int):
        rng = self.rng("privacy", cycle)
        out = {}
        for d in self.cfg.devices:
            # one draw per device regardless of overrides keeps streams aligned across variants
            drawn = preset_profile(self.cfg.privacy, rng) if self.cfg.privacy == "medium" else preset_profile(
                self.cfg.privacy)
            out[d.id] = d.privacy if d.privacy is not None else drawn
        return out

    def tasks(self, cycle: int) -> List[Task]:
        g = self.cfg.tasks
        n = g.per_cycle
        rng = self.rng("tasks", cycle)
        comp = rng.uniform(*g.comp_range, n)
        out_v = rng.uniform(*g.output_range, n)
        in_v = rng.uniform(*g.input_range, n)
        alg = rng.integers(len(g.algorithms), size=n)
        typ = rng.integers(len(g.data_types), size=n)
        return [Task(m, float(in_v[m]), float(out_v[m]), float(comp[m]), float(out_v[m] / g.trans_unit),
                     g.algorithms[alg[m]], g.data_types[typ[m]]) for m in range(n)]

    # one cycle
    def step(self, cycle: int) -> CycleMetrics:
        cfg = self.cfg
        states = self.device_states(cycle)
        all_tasks = self.tasks(cycle)
        gp = self.scheme == "gpata"
        weights = self.weights if gp else self.initial_weights
        n_adm = weights.admitted(len(all_tasks)) if gp else len(all_tasks)
        admitted = all_tasks[:n_adm]

        views = None
        if self.scheme in ("gpata", "tda"):
            profiles = self.profiles(cycle)
            views = {d: cloak(states[d], profiles[d], cfg.hierarchy, cfg.freq_max) for d in states}
        if views is not None:
            mode = cfg.game.estimation if gp else "conservative"
            assignment = balance(list(views.values()), self.servers, mode, cfg.game.anchor_samples,
                                 self.rng("ulb", cycle))
            groups = assignment.groups
            self.result.assignment.extend((cycle, d, s, dist) for d, s, dist in assignment.trace)
        else:
            groups = {s.id: [] for s in self.servers}
            for x, d in enumerate(sorted(states)):
                groups[self.servers[x % len(self.servers)].id].append(d)

        active = [s for s in self.servers if groups[s.id]]
        metrics = CycleMetrics(cycle)
        claims: List[Claim] = []
        priced: List[Task] = []
        for g_idx, server in enumerate(active):
            share = admitted[g_idx::len(active)]
            if not share:
                continue
            rewards = compute_rewards([t.comp_complexity for t in share], [t.trans_complexity for t in share],
                                      weights, weights.budget / len(active))
            share = [replace(t, reward=float(r)) for t, r in zip(share, rewards)]
            priced.extend(share)
            members = [states[d] for d in sorted(groups[server.id])]
            group = _Group(server, members, share,
                           None if views is None else [views[d.id] for d in members], cycle)
            claims.extend(self._allocate(group, metrics))
        priced_ids = {t.id for t in priced}
        tasks_out = sorted(priced + [t for t in all_tasks if t.id not in priced_ids], key=lambda t: t.id)

        servers = {s.id: s for s in self.servers}
        metrics.tasks = execute(claims, tasks_out, states, servers, cfg.network, cfg.deadline)
        metrics.devices = device_records(metrics.tasks, sorted(states))
        if self.record_allocations:
            self.result.allocations.append(CycleAllocation(cycle, tasks_out, claims, states))
        if gp:
            self._feedback(cycle, metrics, admitted)
        return metrics

    def _feedback(self, cycle: int, metrics: CycleMetrics, admitted: Sequence[Task]):
        """Controller update from the admitted tasks' outcomes; shed tasks do not inform the weights."""
        n_adm = len(admitted)
        missed = [not r.deadline_hit for r in metrics.tasks[:n_adm]]
        comp = [t.comp_complexity for t in admitted]
        trans = [t.trans_complexity for t in admitted]
        w, ls = update_weights(self.weights, missed, comp, trans) if admitted else (self.weights, None)
        w = update_budget(w, sum(missed), n_adm)
        self.result.controller.append(ControllerRecord(
            cycle, w.alpha1, w.alpha2, w.budget, math.nan if ls is None else ls[0],
            math.nan if ls is None else ls[1], sum(missed), n_adm))
        self.weights = w

    def run(self) -> RunResult:
        for t in range(self.cfg.cycles):
            self.result.cycles.append(self.step(t))
        return self.result

    # allocation schemes
    def _allocate(self, group: _Group, metrics: CycleMetrics) -> List[Claim]:
        if self.scheme == "tda":
            return self._tda(group)
        if self.scheme == "random":
            return self._random(group)
        return self._rounds(group, metrics)

    def _device_side(self, group: _Group):
        """Each device's own (true-state) execution time and energy for every task of the group."""
        cfg = self.cfg
        J, I = len(group.devices), len(group.tasks)
        compute = np.empty((J, I))
        energy = np.empty((J, I))
        for j, st in enumerate(group.devices):
            d = distance(st.location, group.server.location)
            for i, task in enumerate(group.tasks):
                c = wcet(task, st.cpu_freq, st.cpu_usage)
                tr = cfg.network.trans_time(d, task.output_volume)
                compute[j, i] = c
                energy[j, i] = max(edge_cost(st, c, tr, cfg.network.bandwidth), SCORE_FLOOR) if math.isfinite(c) \
                    else math.inf
        return compute, energy

    def _feasibility(self, group: _Group, remaining: Sequence[int], util: np.ndarray) -> np.ndarray:
        return np.array([[feasible(group.tasks[i], st.cpu_freq, st.cpu_usage, self.cfg.deadline, util[j])
                          for i in remaining] for j, st in enumerate(group.devices)], dtype=bool).reshape(
            len(group.devices), len(remaining))

    def _quality(self, group: _Group) -> np.ndarray:
        cfg = self.cfg
        if self.scheme != "gpata":
            return np.ones(len(group.devices))
        rng = self.rng("estimation", group.cycle, group.server.id)
        return np.array([quality_score(estimate(v, group.server, cfg.game.estimation, cfg.game.anchor_samples, rng),
                                       cfg.game.lambda1, cfg.game.lambda2) for v in group.views])

    def _rounds(self, group: _Group, metrics: CycleMetrics) -> List[Claim]:
        """Repeated claim rounds on the residual tasks until every task is taken or nobody can claim."""
        cfg = self.cfg
        J, I = len(group.devices), len(group.tasks)
        compute, energy = self._device_side(group)
        q = self._quality(group)
        util = np.zeros(J)
        remaining = list(range(I))
        claims = []
        cap = cfg.game.round_cap or I
        for r in range(cap):
            if not remaining:
                break
            ok = self._feasibility(group, remaining, util)
            if not ok.any():
                break
            winners = self._play(group, r, remaining, ok, q, energy[:, remaining], metrics)
            if not winners:
                break
            for i_loc in sorted(winners):
                j = winners[i_loc]
                i = remaining[i_loc]
                claims.append(Claim(group.tasks[i].id, group.devices[j].id, group.server.id, True))
                util[j] += compute[j, i] / cfg.deadline
            won = {remaining[i_loc] for i_loc in winners}
            remaining = [i for i in remaining if i not in won]
        return claims

    def _play(self, group: _Group, round_: int, remaining: Sequence[int], ok: np.ndarray, q: np.ndarray,
              energy: np.ndarray, metrics: CycleMetrics) -> Dict[int, int]:
        """One claim round; returns local task index -> device index."""
        cfg = self.cfg
        J = len(group.devices)
        rewards = np.array([group.tasks[i].reward for i in remaining])
        keys = (group.cycle, group.server.id, round_)
        if self.scheme in ("gpata", "bgta"):
            task_ids = [group.tasks[i].id for i in remaining]
            game = GameInstance(rewards, np.repeat(q[:, None], len(remaining), axis=1), energy, ok,
                                list(range(J)), task_ids)
            rates = np.array([self.congestion.get(m, SCORE_FLOOR) for m in task_ids])
            gp = self.scheme == "gpata"
            res = negotiate(game, CongestionState(rates, cfg.game.mu),
                            cfg.game.rho if gp else 1.0,
                            cfg.game.max_iterations if gp else cfg.game.bgta_max_iterations,
                            self.rng("negotiation", *keys), self.rng("tiebreak", *keys),
                            self.log if gp else None, group.cycle, group.server.id, round_)
            for m, v in zip(task_ids, res.congestion.rates):
                self.congestion[m] = float(v)
            metrics.iterations.append(res.iterations)
            metrics.converged.append(res.converged)
            local = {m: k for k, m in enumerate(task_ids)}
            return {local[m]: j for m, j in res.winners.items()}
        if self.scheme == "gmxr":
            choices = greedy_max_reward(rewards, ok)
        else:
            choices = congestion_dynamics(rewards, ok)
        rng = self.rng("tiebreak", *keys)
        winners = {}
        for k in range(len(remaining)):
            claimants = [j for j, c in enumerate(choices) if c == k]
            if claimants:
                winners[k] = claimants[int(rng.integers(len(claimants)))] if len(claimants) > 1 else claimants[0]
        return winners

    def _random(self, group: _Group) -> List[Claim]:
        """Each task goes to a device drawn uniformly among those that can still schedule it."""
        rng = self.rng("random", group.cycle, group.server.id)
        compute, _ = self._device_side(group)
        util = np.zeros(len(group.devices))
        claims = []
        for i, task in enumerate(group.tasks):
            ok = np.flatnonzero(self._feasibility(group, [i], util)[:, 0])
            if ok.size == 0:
                continue
            j = int(ok[rng.integers(ok.size)])
            claims.append(Claim(task.id, group.devices[j].id, group.server.id, True))
            util[j] += compute[j, i] / self.cfg.deadline
        return claims

    def _tda(self, group: _Group) -> List[Claim]:
        cfg = self.cfg
        est = [estimate_conservative(v, group.server) for v in group.views]
        plan = tda_plan(group.tasks, est, cfg.network, cfg.deadline, cfg.tda.exhaustive_limit)
        compute, _ = self._device_side(group)
        util = np.zeros(len(group.devices))
        claims = []
        for i, task in enumerate(group.tasks):
            j = plan[i]
            if j is None:
                continue
            st = group.devices[j]
            ok = feasible(task, st.cpu_freq, st.cpu_usage, cfg.deadline, util[j])
            claims.append(Claim(task.id, st.id, group.server.id, ok))
            util[j] += compute[j, i] / cfg.deadline
        return claims


def greedy_max_reward(rewards: np.ndarray, ok: np.ndarray) -> List[Optional[int]]:
    """Every device claims its highest-reward feasible task (lowest index on ties)."""
    masked = np.where(ok, np.asarray(rewards, dtype=float)[None, :], -np.inf)
    return [int(np.argmax(masked[j])) if ok[j].any() else None for j in range(ok.shape[0])]


def congestion_dynamics(rewards: np.ndarray, ok: np.ndarray) -> List[Optional[int]]:
    """Sequential best responses where a task is worth its reward split evenly among claimants."""
    J, I = ok.shape
    choices: List[Optional[int]] = [None] * J
    counts = np.zeros(I)
    for _ in range(BEST_RESPONSE_SWEEPS):
        changed = False
        for j in range(J):
            if not ok[j].any():
                continue
            c = choices[j]
            others = counts.copy()
            if c is not None:
                others[c] -= 1
            value = np.where(ok[j], rewards / (others + 1), -np.inf)
            best = int(np.argmax(value))
            here = value[c] if c is not None else -np.inf
            if c is None or value[best] > here + PAYOFF_RTOL * abs(here):
                if c is not None:
                    counts[c] -= 1
                counts[best] += 1
                choices[j] = best
                changed = changed or best != c
        if not changed:
            break
    return choices


def _predicted(tasks: Sequence[Task], est: Sequence[Estimate], network) -> Tuple[np.ndarray, np.ndarray]:
    J, I = len(est), len(tasks)
    comp = np.empty((J, I))
    trans = np.empty((J, I))
    for j, e in enumerate(est):
        cap = e.freq * (1.0 - e.usage)
        for i, t in enumerate(tasks):
            comp[j, i] = t.comp_complexity / cap if cap > 0 else math.inf
            trans[j, i] = network.trans_time(e.dist, t.output_volume)
    return comp, trans


def tda_objective(plan: Sequence[Optional[int]], comp: np.ndarray, trans: np.ndarray, deadline: float):
    """(predicted misses incl. unassigned, unassigned count, infinite delays, total finite delay, max queue)."""
    J = comp.shape[0]
    load = np.zeros(J)
    queue = np.zeros(J, dtype=int)
    misses = unassigned = infinite = 0
    total = 0.0
    for i, j in enumerate(plan):
        if j is None:
            misses += 1
            unassigned += 1
            continue
        load[j] += comp[j, i]
        queue[j] += 1
        e2e = load[j] + trans[j, i]
        if not math.isfinite(e2e):
            infinite += 1
            misses += 1
            continue
        total += e2e
        misses += e2e > deadline
    return misses, unassigned, infinite, round(total, 9), int(queue.max()) if J else 0


def tda_plan(tasks: Sequence[Task], est: Sequence[Estimate], network, deadline: float,
             exhaustive_limit: int = 4096) -> List[Optional[int]]:
    """Top-down assignment on worst-case estimates; task i -> device index or None.

    Exhaustive when (devices + 1) ** tasks fits ``exhaustive_limit``, otherwise
    a regret greedy that places the task with the most to lose first.
    """
    J, I = len(est), len(tasks)
    if I == 0:
        return []
    if J == 0:
        return [None] * I
    comp, trans = _predicted(tasks, est, network)
    if (J + 1) ** I <= exhaustive_limit:
        best, best_key = None, None
        for combo in itertools.product(range(J + 1), repeat=I):
            plan = [None if j == J else j for j in combo]
            key = tda_objective(plan, comp, trans, deadline)
            if best_key is None or key < best_key:
                best, best_key = plan, key
        return best
    plan: List[Optional[int]] = [None] * I
    load = np.zeros(J)
    count = np.zeros(J, dtype=int)
    left = set(range(I))
    while left:
        pick = None
        for i in sorted(left):
            finish = load + comp[:, i] + trans[:, i]
            opts = sorted((bool(f > deadline), f, count[j], j) for j, f in enumerate(finish))
            b = opts[0]
            s = opts[1] if len(opts) > 1 else (True, math.inf, 0, J)
            gap = s[1] - b[1] if math.isfinite(b[1]) else 0.0
            regret = (int(s[0]) - int(b[0]), gap)
            if pick is None or regret > pick[0]:
                pick = (regret, i, b[3])
        _, i, j = pick
        plan[i] = j
        load[j] += comp[j, i]
        count[j] += 1
        left.remove(i)
    return plan


def run_scheme(cfg: ScenarioConfig, scheme: str, log: Optional[MessageLog] = None,
               record_allocations: bool = False) -> RunResult:
    return Simulator(cfg, scheme, log, record_allocations).run()


def _fmt(v) -> str:
    if v is None:
        return "NONE"
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return format(v, ".9g")
    return str(v)


TASK_COLUMNS = ("cycle", "scheme", "task_id", "device_id", "e2e_delay_s", "deadline_hit", "reward_paid",
                "server_id", "reward", "compute_time_s", "trans_time_s", "energy_j", "payoff", "feasible")
DEVICE_COLUMNS = ("cycle", "device_id", "payoff", "energy_j")
CONTROLLER_COLUMNS = ("cycle", "alpha1", "alpha2", "budget", "loss1", "loss2", "misses", "admitted")
ASSIGNMENT_COLUMNS = ("cycle", "device_id", "server_id", "distance")
SUMMARY_COLUMNS = ("scheme", "seed", "axis", "value", "cycles", "tasks", "mean_e2e_delay_s", "dhr",
                   "mean_device_payoff", "total_payoff", "total_energy_j", "mean_iterations", "converged_fraction")


def _write(path, columns, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_metrics(result: RunResult, prefix) -> List[str]:
    """Write the per-task, per-device, controller and assignment CSVs; returns the paths."""
    prefix = str(prefix)
    paths = [prefix + s for s in ("_tasks.csv", "_devices.csv", "_controller.csv", "_assignment.csv")]
    _write(paths[0], TASK_COLUMNS, (
        (c.cycle, result.scheme, r.task_id, r.device_id, r.e2e_delay, r.deadline_hit, r.reward_paid, r.server_id,
         r.reward, r.compute_time, r.trans_time, r.energy, r.payoff, r.feasible)
        for c in result.cycles for r in c.tasks))
    _write(paths[1], DEVICE_COLUMNS, ((c.cycle, d.device_id, d.payoff, d.energy_cost)
                                      for c in result.cycles for d in c.devices))
    _write(paths[2], CONTROLLER_COLUMNS, ((k.cycle, k.alpha1, k.alpha2, k.budget, k.loss1, k.loss2, k.misses,
                                           k.admitted) for k in result.controller))
    _write(paths[3], ASSIGNMENT_COLUMNS, result.assignment)
    return paths


def summary_row(result: RunResult, axis: str = "none", value="") -> list:
    s = result.summary()
    return [result.scheme, result.seed, axis, value] + [s[k] for k in SUMMARY_COLUMNS[4:]]


def write_summary(rows, path):
    _write(path, SUMMARY_COLUMNS, rows)
