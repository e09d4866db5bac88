"""Experiment sweeps, result persistence and brute-force oracles.

An experiment is the cross product of its sweep axes, times a number of
independent drops, times a list of schemes. Each (point, drop, scheme) cell
becomes one row of ``results.csv``; its report and iteration trace go to
``runs/``. Rows already present are skipped, so an interrupted experiment
resumes where it stopped.
"""
from __future__ import annotations

import csv
import hashlib
import itertools
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import metrics, pilots
from .baselines import SCHEMES as BASELINE_SCHEMES, BaselineConfig, run_scheme
from .engine import SolverConfig
from .power import LOG2E, PowerModelParams, rate_power
from .scenario import ScenarioConfig, build_layout, contaminate, make_drop
from .solvers import run, run_netee

SCHEMES = ("netee", "wsum") + BASELINE_SCHEMES
# sweep axis -> section it modifies
AXES = {"p_rd": "power", "m": "power", "q": "power", "N": "scenario", "L": "scenario",
        "tau_ul": "scenario", "pilots": "pilots"}
PILOT_MODES = ("ee", "greedy")
RESULT_COLUMNS = ("key", "point", "drop", "scheme", "seed", "objective_name", "objective",
                  "network_ee", "wsum_ee", "sum_rate", "transmit_power", "total_power",
                  "fairness", "iterations", "ota", "backhaul", "converged")


class SpecError(ValueError):
    def __init__(self, errors):
        super().__init__("invalid experiment spec: " + "; ".join(errors))
        self.errors = list(errors)


@dataclass
class ExperimentSpec:
    scenario: dict = field(default_factory=dict)
    power: dict = field(default_factory=dict)
    solver: dict = field(default_factory=dict)
    baseline: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)        # axis -> list of values
    schemes: list = field(default_factory=lambda: ["netee"])
    drops: int = 50
    seed: int = 0
    out: str = "results"

    def validate(self) -> list[str]:
        errors = []
        if self.drops < 1:
            errors.append("drops: must be >= 1")
        for axis, values in self.sweep.items():
            if axis not in AXES:
                errors.append(f"sweep.{axis}: unknown axis (choose from {sorted(AXES)})")
            elif not isinstance(values, (list, tuple)) or len(values) == 0:
                errors.append(f"sweep.{axis}: must be a nonempty list")
            elif axis == "pilots" and any(v not in PILOT_MODES for v in values):
                errors.append(f"sweep.pilots: values must be in {PILOT_MODES}")
        if not self.schemes:
            errors.append("schemes: must be a nonempty list")
        for s in self.schemes:
            if s not in SCHEMES:
                errors.append(f"schemes: unknown scheme {s!r}")
        for section, cls in (("scenario", ScenarioConfig), ("power", PowerModelParams),
                             ("solver", SolverConfig), ("baseline", BaselineConfig)):
            unknown = set(getattr(self, section)) - set(cls.__dataclass_fields__)
            if unknown:
                errors.append(f"{section}: unknown fields {sorted(unknown)}")
        if not errors:
            try:
                for point in self.points():
                    scen = self.configs(point)[0]
                    build_layout(scen)
                    reuse = scen.pilots_ul < scen.n_users
                    if reuse and any(s not in ("netee", "wsum") for s in self.schemes):
                        errors.append("schemes: only netee and wsum support pilot reuse")
                        break
                BaselineConfig(**{**self.baseline, "scheme": "uncoordinated"})
            except (ValueError, TypeError) as exc:
                errors.append(f"configuration: {exc}")
        return errors

    def check(self):
        errors = self.validate()
        if errors:
            raise SpecError(errors)
        return self

    def points(self) -> list[dict]:
        axes = sorted(self.sweep)
        return [dict(zip(axes, combo)) for combo in itertools.product(*(self.sweep[a] for a in axes))]

    def configs(self, point: dict):
        """Scenario, power and solver configs at one sweep point."""
        scen = dict(self.scenario)
        power = dict(self.power)
        solver = dict(self.solver)
        for axis, value in point.items():
            if AXES[axis] == "scenario":
                scen[axis] = value
            elif AXES[axis] == "power":
                power[axis] = value
        if "q" in point:
            # the iteration budget is what the circuit power is charged for
            solver["max_iter"] = int(point["q"])
        scen.setdefault("seed", self.seed)
        return ScenarioConfig(**scen), PowerModelParams(**power), SolverConfig(**solver)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise SpecError([f"unknown top-level fields {sorted(unknown)}"])
        return cls(**d)


def load_spec(path) -> ExperimentSpec:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SpecError([f"{path}: not valid JSON ({exc})"]) from exc
    return ExperimentSpec.from_dict(data)


def _row_key(point: dict, drop: int, scheme: str) -> str:
    text = json.dumps([point, drop, scheme], sort_keys=True)
    return hashlib.sha1(text.encode()).hexdigest()[:16]


def run_cell(spec: ExperimentSpec, point: dict, drop: int, scheme: str):
    """One (point, drop, scheme) run; returns ``(row, report)``."""
    scen, params, solver = spec.configs(point)
    d = make_drop(scen, drop, seed=spec.seed)
    observed = None
    table = None
    if scen.pilots_ul < scen.n_users:
        mode = point.get("pilots", "ee")
        if mode == "ee":
            alloc = pilots.allocate(d.channels.path_gain, scen.pilots_ul, params, scen)
        else:
            alloc = pilots.allocate_greedy(d.channels.path_gain, scen.pilots_ul, scen)
        observed = contaminate(d.channels, alloc)
        table = alloc.table()
    if scheme == "netee":
        rep = run_netee(d.channels, scen, params, solver, observed=observed, seed=d.seed)
    elif scheme == "wsum":
        rep = run(d.channels, scen, params, solver=solver, observed=observed, seed=d.seed)
    else:
        base = BaselineConfig(**{**spec.baseline, "scheme": scheme})
        rep = run_scheme(scheme, d.channels, scen, params, solver, base, seed=d.seed)
    rep.pilot_table = table
    row = {"key": _row_key(point, drop, scheme), "point": json.dumps(point, sort_keys=True),
           "drop": drop, "scheme": scheme, "seed": spec.seed}
    row.update(rep.summary())
    return row, rep


def _cell_job(args):
    spec_dict, point, drop, scheme = args
    return run_cell(ExperimentSpec.from_dict(spec_dict), point, drop, scheme)


def read_results(out_dir) -> list[dict]:
    path = Path(out_dir) / "results.csv"
    if not path.exists():
        return []
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def run_experiment(spec: ExperimentSpec, out_dir=None, jobs: int = 1, progress=None) -> Path:
    """Run every missing cell of ``spec`` and append the rows to ``results.csv``."""
    spec.check()
    out = Path(out_dir or spec.out)
    try:
        (out / "runs").mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise SpecError([f"out: cannot create {out} ({exc})"]) from exc
    done = {row["key"] for row in read_results(out)}
    todo = [(p, d, s) for p in spec.points() for d in range(spec.drops) for s in spec.schemes
            if _row_key(p, d, s) not in done]
    results_path = out / "results.csv"
    new_file = not results_path.exists()
    manifest = {"spec": spec.to_dict(), "cells": len(spec.points()) * spec.drops * len(spec.schemes),
                "columns": list(RESULT_COLUMNS)}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1))
    args = [(spec.to_dict(), p, d, s) for p, d, s in todo]
    if jobs > 1:
        pool = ProcessPoolExecutor(max_workers=jobs)
        stream = pool.map(_cell_job, args)
    else:
        pool = None
        stream = map(_cell_job, args)
    try:
        with open(results_path, "a", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=RESULT_COLUMNS, extrasaction="ignore")
            if new_file:
                writer.writeheader()
            for row, rep in stream:
                rep.write_json(out / "runs" / f"{row['key']}.json")
                rep.write_trace_csv(out / "runs" / f"{row['key']}.trace.csv")
                writer.writerow(row)
                fh.flush()
                if progress:
                    progress(row)
    finally:
        if pool is not None:
            pool.shutdown()
    return out


def summarize(out_dir) -> list[dict]:
    """Mean objective, EEs and fairness per (point, scheme)."""
    groups: dict = {}
    for row in read_results(out_dir):
        groups.setdefault((row["point"], row["scheme"]), []).append(row)
    table = []
    for (point, scheme), rows in sorted(groups.items()):
        entry = {"point": json.loads(point), "scheme": scheme, "drops": len(rows)}
        for col in ("objective", "network_ee", "wsum_ee", "fairness", "iterations"):
            vals = np.array([float(r[col]) for r in rows])
            entry[col] = float(np.nanmean(vals))
        table.append(entry)
    return table


def single_user_ee(p, gain, alpha, noise, p_cp, params: PowerModelParams):
    """EE of one user served at power ``p`` along its channel; ``gain = ||h||^2``."""
    p = np.asarray(p, dtype=float)
    rate = alpha * np.log1p(p * gain / noise)
    return rate * LOG2E / (p / params.eta + p_cp + rate_power(rate, params))


def oracle_1d_power(h, params: PowerModelParams, p_cp: float, alpha: float, noise: float,
                    grid: int = 10 ** 4, p_max: float | None = None):
    """Brute-force EE optimum of a single user over a uniform power grid.

    The beamformer is ``sqrt(p) h / ||h||``. Returns ``(best_ee, best_p)``.
    """
    p_max = params.p_max if p_max is None else p_max
    gain = float(np.sum(np.abs(np.asarray(h)) ** 2))
    ps = np.linspace(0.0, p_max, grid)
    ee = single_user_ee(ps, gain, alpha, noise, p_cp, params)
    i = int(np.argmax(ee))
    return float(ee[i]), float(ps[i])


def fairness_index(values) -> float:
    """Jain index of per-cell values."""
    return metrics.jain_index(values)
