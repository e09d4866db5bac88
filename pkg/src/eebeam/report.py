"""Run reports: what a solver or baseline run produced, in a portable form.

A report keeps the final beamformers so every stored metric can be
recomputed from the channels. JSON holds the summary, the per-iteration
trace goes to CSV.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import metrics
from .power import PowerModelParams

TRACE_COLUMNS = ("iteration", "objective", "ota", "backhaul", "max_power_slack")


def _complex_to_list(a):
    a = np.asarray(a, dtype=complex)
    return {"re": a.real.tolist(), "im": a.imag.tolist()}


def _complex_from(obj):
    return np.asarray(obj["re"], dtype=float) + 1j * np.asarray(obj["im"], dtype=float)


@dataclass
class RunReport:
    scheme: str
    objective_name: str              # "netee" or "wsum"
    objective: float                 # value of the optimized objective, bit/J
    network_ee: float
    wsum_ee: float
    cell_ee: np.ndarray
    rates_bs: np.ndarray             # nats/s
    rates_user: np.ndarray           # nats/s
    sinr: np.ndarray
    transmit_power: np.ndarray       # W per BS
    bs_power: np.ndarray             # W per BS
    w: np.ndarray                    # (K, N) final beamformers
    trace: list = field(default_factory=list)
    iterations: int = 0
    ota: int = 0
    backhaul: int = 0
    converged: bool = False
    wall_time: float = 0.0
    seed: tuple | None = None
    config: dict = field(default_factory=dict)
    pilot_table: list | None = None
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_eval(cls, res: metrics.EEResult, w, scheme, objective_name, **kw):
        objective = res.network_ee if objective_name == "netee" else res.wsum_ee
        return cls(scheme=scheme, objective_name=objective_name, objective=float(objective),
                   network_ee=res.network_ee, wsum_ee=res.wsum_ee, cell_ee=res.cell_ee.copy(),
                   rates_bs=res.rates.r_bs.copy(), rates_user=res.rates.r_user.copy(),
                   sinr=res.rates.gamma.copy(), transmit_power=res.transmit_power.copy(),
                   bs_power=res.bs_power.copy(), w=np.array(w, dtype=complex), **kw)

    @property
    def objective_trace(self) -> np.ndarray:
        return np.array([row["objective"] for row in self.trace])

    @property
    def fairness(self) -> float:
        return metrics.jain_index(self.cell_ee) if np.any(self.cell_ee > 0) else float("nan")

    def recompute(self, h, serving, noise, alpha, p_cp, params: PowerModelParams,
                  weights=None) -> metrics.EEResult:
        """Evaluate the stored beamformers on the given channels."""
        return metrics.evaluate(h, self.w, serving, noise, alpha, p_cp, params, weights)

    def to_dict(self) -> dict:
        out = {}
        for key, val in asdict(self).items():
            if key == "w":
                out[key] = _complex_to_list(val)
            elif isinstance(val, np.ndarray):
                out[key] = val.tolist()
            else:
                out[key] = val
        out["seed"] = list(self.seed) if self.seed is not None else None
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "RunReport":
        d = dict(d)
        d["w"] = _complex_from(d["w"])
        for key in ("cell_ee", "rates_bs", "rates_user", "sinr", "transmit_power", "bs_power"):
            d[key] = np.asarray(d[key], dtype=float)
        if d.get("seed") is not None:
            d["seed"] = tuple(d["seed"])
        return cls(**d)

    def summary(self) -> dict:
        """Flat scalar view used for CSV rows."""
        return {"scheme": self.scheme, "objective_name": self.objective_name,
                "objective": self.objective, "network_ee": self.network_ee,
                "wsum_ee": self.wsum_ee, "sum_rate": float(self.rates_bs.sum()),
                "transmit_power": float(self.transmit_power.sum()),
                "total_power": float(self.bs_power.sum()),
                "fairness": self.fairness, "iterations": self.iterations, "ota": self.ota,
                "backhaul": self.backhaul, "converged": self.converged}

    def write_json(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))

    @classmethod
    def read_json(cls, path) -> "RunReport":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def write_trace_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=TRACE_COLUMNS, extrasaction="ignore")
            writer.writeheader()
            writer.writerows(self.trace)


def trace_rows(trace) -> list[dict]:
    """Engine trace rows as plain dicts."""
    return [{"iteration": r.iteration, "objective": r.objective, "ota": r.ota,
             "backhaul": r.backhaul, "max_power_slack": r.max_power_slack} for r in trace]
