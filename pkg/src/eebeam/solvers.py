"""Entry points for weighted-sum EE and network EE beamforming."""
from __future__ import annotations

from dataclasses import replace

import numpy as np

from . import engine
from .engine import Problem, SolverConfig
from .power import PowerModelParams, network_circuit_power
from .report import RunReport, trace_rows
from .scenario import ChannelSet, ScenarioConfig


def build_problem(channels: ChannelSet, config: ScenarioConfig, params: PowerModelParams,
                  objective="wsum", weights=None, q=None, local_complexity=False,
                  directions=None, noise=None, p_cp=None, alpha=None) -> Problem:
    """Optimizer view of a drop. ``channels`` may be the contaminated estimates."""
    B = channels.B
    if p_cp is None:
        p_cp = network_circuit_power(config, params, q=q, local_complexity=local_complexity)
    return Problem(h=channels.h, serving=channels.serving,
                   noise=config.noise_power if noise is None else noise,
                   alpha=config.alpha if alpha is None else alpha,
                   p_max=np.full(B, params.p_max), p_cp=p_cp, params=params,
                   weights=np.ones(B) if weights is None else weights,
                   objective=objective, directions=directions)


def finish(result: engine.EngineResult, prob: Problem, scheme: str, true_h=None,
           eval_params: PowerModelParams | None = None, seed=None, config=None,
           **extra) -> RunReport:
    """Wrap an engine result, evaluating the beamformers on the true channels."""
    eval_prob = prob if eval_params is None else _with_params(prob, eval_params)
    res = eval_prob.evaluate(result.w, h=true_h)
    return RunReport.from_eval(res, result.w, scheme, prob.objective,
                               trace=trace_rows(result.trace),
                               iterations=result.state.iteration, ota=result.state.ota,
                               backhaul=result.state.backhaul, converged=result.converged,
                               wall_time=result.wall_time, seed=seed,
                               config=config or {}, extra=extra)


def _with_params(prob: Problem, params: PowerModelParams) -> Problem:
    return Problem(h=prob.h, serving=prob.serving, noise=prob.noise, alpha=prob.alpha,
                   p_max=prob.p_max, p_cp=prob.p_cp, params=params, weights=prob.weights,
                   objective=prob.objective, directions=prob.directions)


def _needs_continuation(prob: Problem, solver: SolverConfig) -> bool:
    pr = prob.params
    if not solver.rate_continuation or pr.p_rd == 0.0:
        return False
    # linear rate power leaves the network-EE maximizers unchanged anyway
    return not (prob.objective == "netee" and pr.m == 1.0)


def solve(prob: Problem, solver: SolverConfig, w0=None) -> engine.EngineResult:
    """Run the engine, optionally continuing from the rate-agnostic solution.

    With continuation the problem is first solved with ``P_RD = 0`` and the
    result seeds the actual problem. The reported trace covers the second
    stage; iteration, OTA and backhaul counts include both.
    """
    if not _needs_continuation(prob, solver):
        return engine.run_engine(prob, solver, w0=w0)
    first = engine.run_engine(_with_params(prob, prob.params.with_(p_rd=0.0)), solver, w0=w0)
    second = engine.run_engine(prob, solver, w0=first.w)
    st0, st = first.state, second.state
    second.trace = [replace(row, iteration=row.iteration + st0.iteration, ota=row.ota + st0.ota,
                            backhaul=row.backhaul + st0.backhaul) for row in second.trace]
    st.iteration += st0.iteration
    st.ota += st0.ota
    st.backhaul += st0.backhaul
    second.wall_time += first.wall_time
    second.inner_iterations = first.inner_iterations + second.inner_iterations
    return second


def _echo(config, params, solver):
    return {"scenario": config.to_dict(), "power": params.to_dict(),
            "solver": {k: getattr(solver, k) for k in solver.__dataclass_fields__}}


def run(channels: ChannelSet, config: ScenarioConfig, params: PowerModelParams,
        weights=None, solver: SolverConfig | None = None, w0=None,
        observed: ChannelSet | None = None, seed=None, scheme="wsum") -> RunReport:
    """Maximize the weighted sum of per-cell EEs.

    With ``observed`` the beamformers are designed on those (contaminated)
    channels and evaluated on ``channels``.
    """
    solver = SolverConfig() if solver is None else solver
    prob = build_problem(observed or channels, config, params, "wsum", weights)
    result = solve(prob, solver, w0=w0)
    return finish(result, prob, scheme, true_h=channels.h, seed=seed,
                  config=_echo(config, params, solver))


def run_netee(channels: ChannelSet, config: ScenarioConfig, params: PowerModelParams,
              solver: SolverConfig | None = None, w0=None, observed: ChannelSet | None = None,
              seed=None, scheme="netee") -> RunReport:
    """Maximize the network EE (total rate over total power)."""
    solver = SolverConfig() if solver is None else solver
    prob = build_problem(observed or channels, config, params, "netee")
    result = solve(prob, solver, w0=w0)
    return finish(result, prob, scheme, true_h=channels.h, seed=seed,
                  config=_echo(config, params, solver))
