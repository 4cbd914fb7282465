"""Command-line entry point: run scheme x seed x sweep grids and write CSV metrics."""

from __future__ import annotations

import argparse
import sys
import traceback
from collections import defaultdict
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .engine import SCHEMES, run_scheme, summary_row, write_metrics, write_summary
from .privacy import ESTIMATION_MODES, PRESETS
from .dra import LOSS_PAIRINGS
from .scenario import ConfigError, ScenarioConfig, dump_scenario, load_scenario, reference_scenario

SWEEP_AXES = ("none", "deadline", "privacy", "devices", "tasks")


@dataclass
class RunSpec:
    scenario: Optional[str]
    schemes: List[str]
    seeds: List[int]
    out: str = "out"
    axis: str = "none"
    values: List[str] = field(default_factory=list)
    cycles: Optional[int] = None
    estimation: Optional[str] = None
    loss_pairing: Optional[str] = None

    def __post_init__(self):
        if not self.schemes:
            raise ConfigError("--scheme: at least one scheme is required")
        if not self.seeds:
            raise ConfigError("--seed: at least one seed is required")
        for s in self.schemes:
            if s not in SCHEMES:
                raise ConfigError(f"--scheme: unknown scheme {s!r}; expected one of {SCHEMES}")
        if self.axis not in SWEEP_AXES:
            raise ConfigError(f"--sweep: unknown axis {self.axis!r}; expected one of {SWEEP_AXES[1:]}")
        if self.axis != "none" and not self.values:
            raise ConfigError("--sweep: at least one value is required")
        for v in self.values:
            _parse_value(self.axis, v)


def _parse_value(axis: str, raw: str):
    try:
        if axis == "deadline":
            v = float(raw)
            if not v > 0:
                raise ValueError
            return v
        if axis in ("devices", "tasks"):
            v = int(raw)
            if v < 0:
                raise ValueError
            return v
        if axis == "privacy":
            if raw not in PRESETS:
                raise ValueError
            return raw
    except ValueError:
        pass
    raise ConfigError(f"--sweep: invalid {axis} value {raw!r}")


def parse_sweep(text: str) -> Tuple[str, List[str]]:
    if "=" not in text:
        raise ConfigError("--sweep: expected <axis>=<v1,v2,...>")
    axis, values = text.split("=", 1)
    return axis.strip(), [v.strip() for v in values.split(",") if v.strip()]


def cell_name(scheme: str, seed: int, axis: str = "none", value: str = "") -> str:
    name = f"{scheme}_seed{seed}"
    return name if axis == "none" else f"{name}_{axis}-{value}"


def variant(base: ScenarioConfig, spec: RunSpec, seed: int, value: Optional[str]) -> ScenarioConfig:
    cfg = replace(base, seed=seed)
    if spec.cycles is not None:
        cfg = cfg.with_cycles(spec.cycles)
    if spec.estimation is not None:
        cfg = cfg.with_game(estimation=spec.estimation)
    if spec.loss_pairing is not None:
        cfg = cfg.with_reward(loss_pairing=spec.loss_pairing)
    if spec.axis == "deadline":
        cfg = cfg.with_deadline(_parse_value("deadline", value))
    elif spec.axis == "privacy":
        cfg = cfg.with_privacy(_parse_value("privacy", value))
    elif spec.axis == "devices":
        cfg = cfg.with_devices(_parse_value("devices", value))
    elif spec.axis == "tasks":
        cfg = cfg.with_tasks(_parse_value("tasks", value))
    cfg.validate()
    return cfg


def run(spec: RunSpec, out=sys.stdout) -> int:
    """Execute the grid; returns 0 iff every cell completed."""
    base = load_scenario(spec.scenario) if spec.scenario else reference_scenario()
    out_dir = Path(spec.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    values = spec.values if spec.axis != "none" else [""]
    rows, failures = [], 0
    by_scheme = defaultdict(list)
    for scheme in spec.schemes:
        for seed in spec.seeds:
            for value in values:
                name = cell_name(scheme, seed, spec.axis, value)
                try:
                    cfg = variant(base, spec, seed, value)
                    result = run_scheme(cfg, scheme)
                    write_metrics(result, out_dir / name)
                    row = summary_row(result, spec.axis, value)
                    rows.append(row)
                    s = result.summary()
                    by_scheme[scheme].append((s["dhr"], s["mean_e2e_delay_s"]))
                except Exception as exc:  # keep the remaining cells going
                    failures += 1
                    print(f"cell {name} failed: {exc}", file=sys.stderr)
                    traceback.print_exc(file=sys.stderr)
    write_summary(rows, out_dir / "summary.csv")
    for scheme in spec.schemes:
        pts = by_scheme.get(scheme)
        if pts:
            dhr = np.mean([p[0] for p in pts])
            delay = np.nanmean([p[1] for p in pts]) if not all(np.isnan(p[1]) for p in pts) else float("nan")
            print(f"{scheme:>7}: mean DHR {dhr:.4f}  mean E2E delay {delay:.4f} s  ({len(pts)} cells)", file=out)
    print(f"{len(rows)} cells completed, {failures} failed; outputs in {out_dir}", file=out)
    return 0 if failures == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gpata", description="Privacy-aware task allocation simulator")
    p.add_argument("--scenario", help="scenario YAML (default: built-in reference scenario)")
    p.add_argument("--scheme", action="append", choices=SCHEMES, help="allocation scheme (repeatable)")
    p.add_argument("--seed", action="append", type=int, help="seed (repeatable)")
    p.add_argument("--cycles", type=int, help="override the scenario's cycle count")
    p.add_argument("--sweep", help="<axis>=<v1,v2,...> with axis in deadline|privacy|devices|tasks")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--estimation", choices=ESTIMATION_MODES)
    p.add_argument("--loss-pairing", choices=LOSS_PAIRINGS)
    p.add_argument("--validate", action="store_true", help="check the scenario and exit")
    p.add_argument("--write-reference", metavar="PATH", help="write the reference scenario as YAML and exit")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.write_reference:
            dump_scenario(reference_scenario(), args.write_reference)
            return 0
        if args.validate:
            if not args.scenario:
                raise ConfigError("--validate needs --scenario")
            cfg = load_scenario(args.scenario)
            print(f"{args.scenario}: ok ({len(cfg.devices)} devices, {len(cfg.servers)} servers, "
                  f"{cfg.tasks.per_cycle} tasks/cycle, {cfg.cycles} cycles)")
            return 0
        axis, values = parse_sweep(args.sweep) if args.sweep else ("none", [])
        spec = RunSpec(args.scenario, args.scheme or ["gpata"], args.seed or [0], args.out, axis, values,
                       args.cycles, args.estimation, args.loss_pairing)
        return run(spec)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
