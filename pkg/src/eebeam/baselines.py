"""Reference transmission schemes for EE comparisons.

* MMSE directions with EE-optimal powers, either for the network EE
  ("multi-cell") or per cell ("single-cell").
* Uncoordinated: every BS maximizes its own EE on the full band and sees
  the other cells' latest beamformers as noise.
* Orthogonal access: the band is split into ``B`` interference-free
  sub-bands.
* Rate-agnostic: the proposed solvers run with ``P_RD = 0`` and are then
  scored with the true power model.

BS-local schemes refine each cell in Gauss-Seidel order for a fixed number
of rounds and charge computation for their own users only.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import engine, metrics
from .engine import Problem, SolverConfig
from .power import LOG2E, PowerModelParams, network_circuit_power, rate_power
from .report import RunReport
from .scenario import ChannelSet, ScenarioConfig
from .solvers import build_problem, finish, run, run_netee, solve

SCHEMES = ("mmse-multicell", "mmse-singlecell", "uncoordinated", "orthogonal",
           "rate-agnostic-netee", "rate-agnostic-wsum")


@dataclass(frozen=True)
class BaselineConfig:
    scheme: str = "uncoordinated"
    rounds: int = 3                 # Gauss-Seidel rounds for BS-local schemes
    q: int | None = None            # iteration count charged to the circuit power

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")

    @property
    def charged_q(self):
        """MMSE precoding is non-iterative and charged a single iteration."""
        if self.q is not None:
            return self.q
        return 1 if self.scheme.startswith("mmse") else None


def mmse_directions(channels: ChannelSet, config: ScenarioConfig, p_max: float) -> np.ndarray:
    """Unit-norm regularized MMSE directions, shape (K, N)."""
    h = channels.h
    B, K, N = h.shape
    load = p_max / (max(config.L, 1) * config.noise_power)
    R = np.einsum("bjn,bjm->bnm", h, h.conj())
    A = np.eye(N)[None] + load * R
    own = h[channels.serving, np.arange(K)]
    v = np.linalg.solve(A[channels.serving], own[:, :, None])[:, :, 0]
    norms = np.linalg.norm(v, axis=1)
    out = np.zeros_like(v)
    ok = norms > 0
    out[ok] = v[ok] / norms[ok, None]
    return out


def _bs_power_sum(w, serving, B):
    return np.bincount(serving, weights=np.sum(np.abs(w) ** 2, axis=1), minlength=B)


def _local_problem(h, serving, b, w, noise, alpha, p_cp_b, params, directions=None,
                   interference=True):
    """Single-cell view of BS ``b`` with the other cells frozen at ``w``."""
    users = np.flatnonzero(serving == b)
    extra = np.zeros(len(users))
    if interference:
        P = metrics.received_powers(h, w, serving)
        others = serving != b
        extra = P[others][:, users].sum(axis=0)
    dirs = None if directions is None else directions[users]
    prob = Problem(h=h[b:b + 1, users, :], serving=np.zeros(len(users), dtype=int),
                   noise=noise + extra, alpha=alpha, p_max=params.p_max, p_cp=p_cp_b,
                   params=params, weights=np.ones(1), objective="wsum", directions=dirs)
    return prob, users


def _gauss_seidel(h, serving, config, params, p_cp, rounds, solver, directions=None,
                  interference=True, alpha=None, noise=None):
    """Round-robin single-cell EE solves; returns the final beamformers."""
    B, K, N = h.shape
    alpha = config.alpha if alpha is None else alpha
    noise = config.noise_power if noise is None else noise
    w = np.zeros((K, N), dtype=complex)
    started = np.zeros(B, dtype=bool)
    rounds = 1 if (B == 1 or not interference) else rounds
    for _ in range(rounds):
        for b in range(B):
            prob, users = _local_problem(h, serving, b, w, noise, alpha, p_cp[b], params,
                                         directions, interference)
            if len(users) == 0:
                continue
            w0 = w[users] if started[b] and np.any(w[users] != 0) else None
            res = engine.run_engine(prob, solver, w0=w0)
            w[users] = res.w
            started[b] = True
    return w


def ee_power_allocation(directions, channels: ChannelSet, config: ScenarioConfig,
                        params: PowerModelParams, objective="netee", q=1, rounds=3,
                        solver: SolverConfig | None = None):
    """EE-optimal per-user powers along fixed unit ``directions``.

    ``objective`` is ``"netee"`` or ``"wsum"`` for a joint solve, or
    ``"single-cell"`` for per-BS EE maximization in Gauss-Seidel rounds.
    Returns ``(powers, w)``.
    """
    solver = SolverConfig() if solver is None else solver
    directions = np.asarray(directions, dtype=complex)
    if objective == "single-cell":
        p_cp = network_circuit_power(config, params, q=q)
        w = _gauss_seidel(channels.h, channels.serving, config, params, p_cp, rounds, solver,
                          directions=directions)
    elif objective in ("netee", "wsum"):
        prob = build_problem(channels, config, params, objective, q=q, directions=directions)
        w = solve(prob, solver).w
    else:
        raise ValueError("objective must be 'netee', 'wsum' or 'single-cell'")
    return np.sum(np.abs(w) ** 2, axis=1), w


def _report(w, channels, config, params, p_cp, scheme, start, objective="netee",
            backhaul=0, seed=None, **extra) -> RunReport:
    res = metrics.evaluate(channels.h, w, channels.serving, config.noise_power, config.alpha,
                           p_cp, params)
    return RunReport.from_eval(res, w, scheme, objective, wall_time=time.perf_counter() - start,
                               backhaul=backhaul, converged=True, seed=seed,
                               config={"scenario": config.to_dict(), "power": params.to_dict()},
                               extra=extra)


def run_mmse(channels: ChannelSet, config: ScenarioConfig, params: PowerModelParams,
             multicell=True, q=1, rounds=3, solver: SolverConfig | None = None,
             seed=None) -> RunReport:
    start = time.perf_counter()
    dirs = mmse_directions(channels, config, params.p_max)
    objective = "netee" if multicell else "single-cell"
    _, w = ee_power_allocation(dirs, channels, config, params, objective, q=q, rounds=rounds,
                               solver=solver)
    p_cp = network_circuit_power(config, params, q=q)
    scheme = "mmse-multicell" if multicell else "mmse-singlecell"
    return _report(w, channels, config, params, p_cp, scheme, start, seed=seed)


def run_uncoordinated(channels: ChannelSet, config: ScenarioConfig, params: PowerModelParams,
                      rounds=3, q=None, solver: SolverConfig | None = None,
                      seed=None) -> RunReport:
    """Every BS maximizes its own EE on the full band, no information exchange."""
    start = time.perf_counter()
    solver = SolverConfig() if solver is None else solver
    p_cp = network_circuit_power(config, params, q=q, local_complexity=True)
    w = _gauss_seidel(channels.h, channels.serving, config, params, p_cp, rounds, solver)
    return _report(w, channels, config, params, p_cp, "uncoordinated", start,
                   objective="wsum", seed=seed)


def orthogonal_config(config: ScenarioConfig) -> ScenarioConfig:
    """Per-BS view of orthogonal access: 1/B of the band and of the noise."""
    return config.with_(bandwidth=config.bandwidth / config.B,
                        noise_power=config.noise_power / config.B)


def run_orthogonal(channels: ChannelSet, config: ScenarioConfig, params: PowerModelParams,
                   q=None, solver: SolverConfig | None = None, seed=None) -> RunReport:
    """Each BS on its own sub-band: no inter-cell interference at all."""
    start = time.perf_counter()
    solver = SolverConfig() if solver is None else solver
    sub = orthogonal_config(config)
    p_cp = network_circuit_power(sub, params, q=q, local_complexity=True)
    h, serving = channels.h, channels.serving
    w = _gauss_seidel(h, serving, sub, params, p_cp, 1, solver, interference=False)
    # evaluate cell by cell: sub-bands do not interact
    B = channels.B
    gamma = np.zeros(channels.K)
    for b in range(B):
        users = np.flatnonzero(serving == b)
        P = np.abs(np.einsum("kn,jn->jk", h[b, users].conj(), w[users])) ** 2
        desired = np.diag(P)
        gamma[users] = desired / (P.sum(axis=0) - desired + sub.noise_power)
    rv = metrics.rates_from_sinr(gamma, serving, sub.alpha, B)
    tx = _bs_power_sum(w, serving, B)
    bs_power = tx / params.eta + p_cp + rate_power(rv.r_bs, params)
    cell_ee = rv.r_bs * LOG2E / bs_power
    res = metrics.EEResult(network_ee=float(rv.r_bs.sum() * LOG2E / bs_power.sum()),
                           wsum_ee=float(cell_ee.sum()), cell_ee=cell_ee, rates=rv,
                           transmit_power=tx, bs_power=bs_power)
    return RunReport.from_eval(res, w, "orthogonal", "wsum", wall_time=time.perf_counter() - start,
                               converged=True, seed=seed,
                               config={"scenario": sub.to_dict(), "power": params.to_dict()})


def run_rate_agnostic(channels: ChannelSet, config: ScenarioConfig, params: PowerModelParams,
                      objective="netee", solver: SolverConfig | None = None, weights=None,
                      seed=None) -> RunReport:
    """Optimize without the rate-dependent power, then score with it."""
    solver = SolverConfig() if solver is None else solver
    blind = params.with_(p_rd=0.0)
    prob = build_problem(channels, config, blind, objective, weights)
    result = engine.run_engine(prob, solver)
    return finish(result, prob, f"rate-agnostic-{objective}", true_h=channels.h,
                  eval_params=params, seed=seed,
                  config={"scenario": config.to_dict(), "power": params.to_dict()})


def run_scheme(scheme: str, channels: ChannelSet, config: ScenarioConfig,
               params: PowerModelParams, solver: SolverConfig | None = None,
               baseline: BaselineConfig | None = None, seed=None) -> RunReport:
    """Dispatch on a scheme tag, proposed solvers included."""
    baseline = BaselineConfig(scheme=scheme if scheme in SCHEMES else "uncoordinated") \
        if baseline is None else baseline
    if scheme == "netee":
        return run_netee(channels, config, params, solver, seed=seed)
    if scheme == "wsum":
        return run(channels, config, params, solver=solver, seed=seed)
    if scheme == "mmse-multicell":
        return run_mmse(channels, config, params, True, q=baseline.charged_q,
                        solver=solver, seed=seed)
    if scheme == "mmse-singlecell":
        return run_mmse(channels, config, params, False, q=baseline.charged_q,
                        rounds=baseline.rounds, solver=solver, seed=seed)
    if scheme == "uncoordinated":
        return run_uncoordinated(channels, config, params, baseline.rounds, baseline.q,
                                 solver, seed=seed)
    if scheme == "orthogonal":
        return run_orthogonal(channels, config, params, baseline.q, solver, seed=seed)
    if scheme.startswith("rate-agnostic-"):
        return run_rate_agnostic(channels, config, params, scheme.split("-")[-1], solver,
                                 seed=seed)
    raise ValueError(f"unknown scheme {scheme!r}")
