"""Uplink pilot grouping when there are fewer pilot resources than users.

Users are split into ``tau`` groups, each sharing one pilot. Group sizes are
as even as possible, with as many of the smaller groups as the counts allow.
Two allocators fill the groups greedily: one ranks candidate groups by an
energy-efficiency score built from path gains, the other by their summed
own-cell path gain.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .power import LOG2E, PowerModelParams, delta, network_circuit_power, to_gbps

DEFAULT_CANDIDATE_CAP = 10 ** 6


class InvalidTauError(ValueError):
    pass


class CombinatorialError(RuntimeError):
    pass


@dataclass(frozen=True)
class PilotAllocation:
    groups: tuple            # tuple of sorted user-id tuples, one per pilot resource
    m_max: int
    m_min: int
    x_max: int
    x_min: int

    @property
    def tau(self) -> int:
        return len(self.groups)

    def pilot_of(self, n_users: int) -> np.ndarray:
        out = np.full(n_users, -1)
        for i, grp in enumerate(self.groups):
            out[list(grp)] = i
        return out

    def validate(self, n_users: int):
        seen = sorted(k for grp in self.groups for k in grp)
        if seen != list(range(n_users)):
            raise ValueError("groups do not partition the user set")
        sizes = [len(g) for g in self.groups]
        if sizes.count(self.m_min) != self.x_min:
            raise ValueError("wrong number of small groups")
        if sizes.count(self.m_max) != self.x_max:
            raise ValueError("wrong number of large groups")
        if any(s not in (self.m_min, self.m_max) for s in sizes):
            raise ValueError("group size out of range")

    def table(self) -> list[dict]:
        return [{"resource": i, "users": list(g)} for i, g in enumerate(self.groups)]


def group_sizes(k_total: int, tau: int, max_cell: int = 1):
    """``(M_max, M_min, X_max, X_min)`` for ``k_total`` users on ``tau`` pilots."""
    if tau > k_total or tau < max(max_cell, 1):
        raise InvalidTauError(f"tau={tau} must lie in [{max(max_cell, 1)}, {k_total}]")
    m_max = math.ceil(k_total / tau)
    m_min = m_max - 1
    x_max = k_total - m_min * tau
    x_min = tau - x_max
    return m_max, m_min, x_max, x_min


def _per_user_power(serving, p_max, B):
    counts = np.bincount(serving, minlength=B)
    return np.asarray(p_max, dtype=float)[serving] / counts[serving]


def group_metric(group, path_gains, serving, params: PowerModelParams, alpha: float,
                 noise: float, p_cp_total: float, p_max=None) -> float:
    """EE score of a pilot group (bit/J).

    Every member gets the equal power share of its BS; interference only
    comes from the other members of the group, since only they contaminate
    each other's estimates. The denominator charges the members' transmit
    power, their share of the circuit power and the per-user rate power.
    """
    group = list(group)
    if not group:
        raise ValueError("group must not be empty")
    zeta = np.asarray(path_gains, dtype=float)
    serving = np.asarray(serving)
    B, K = zeta.shape
    p_max = np.full(B, params.p_max) if p_max is None else np.broadcast_to(p_max, (B,))
    pk = _per_user_power(serving, p_max, B)
    g = np.asarray(group)
    bs = serving[g]
    # rx[i, j]: power of member j's stream at member i
    rx = pk[g][None, :] * zeta[bs[None, :], g[:, None]]
    own = np.diag(rx)
    interference = rx.sum(axis=1) - own
    rate = alpha * np.log1p(own / (interference + noise))          # nats/s
    power = (pk[g].sum() / params.eta + len(g) * p_cp_total / K
             + params.p_rd * np.sum(delta(to_gbps(rate), params.m)))
    return float(rate.sum() * LOG2E / power)


def _candidates(users, size, cap):
    n = len(users)
    count = math.comb(n, size)
    if count > cap:
        raise CombinatorialError(f"{count} candidate groups exceed the cap {cap}; "
                                 "use fewer users or a larger tau")
    return list(combinations(sorted(users), size))


def _pick(cands, scores, n_groups, taken):
    """Take the best disjoint groups; ties go to the lexicographically smaller group."""
    order = sorted(range(len(cands)), key=lambda i: (-scores[i], cands[i]))
    chosen = []
    for i in order:
        if len(chosen) == n_groups:
            break
        grp = cands[i]
        if taken.isdisjoint(grp):
            chosen.append(grp)
            taken.update(grp)
    return chosen


def _two_phase(k_total, tau, max_cell, score, cap):
    m_max, m_min, x_max, x_min = group_sizes(k_total, tau, max_cell)
    taken: set = set()
    groups = []
    if x_min > 0 and m_min > 0:
        cands = _candidates(range(k_total), m_min, cap)
        groups += _pick(cands, [score(c) for c in cands], x_min, taken)
    rest = [k for k in range(k_total) if k not in taken]
    cands = _candidates(rest, m_max, cap)
    groups += _pick(cands, [score(c) for c in cands], x_max, taken)
    alloc = PilotAllocation(tuple(groups), m_max, m_min, x_max, x_min)
    alloc.validate(k_total)
    return alloc


def allocate(path_gains, tau: int, params: PowerModelParams, config,
             cap: int = DEFAULT_CANDIDATE_CAP) -> PilotAllocation:
    """Energy-efficiency driven pilot grouping.

    Smaller groups are filled first from all users, then the larger groups
    from whoever is left; within each phase the highest-scoring disjoint
    candidates win.
    """
    zeta = np.asarray(path_gains, dtype=float)
    serving = config.serving
    p_cp_total = float(network_circuit_power(config, params).sum())

    def score(grp):
        return group_metric(grp, zeta, serving, params, config.alpha, config.noise_power,
                            p_cp_total)

    return _two_phase(zeta.shape[1], tau, config.L, score, cap)


def allocate_greedy(path_gains, tau: int, config,
                    cap: int = DEFAULT_CANDIDATE_CAP) -> PilotAllocation:
    """Same two phases, ranking groups by summed own-cell path gain."""
    zeta = np.asarray(path_gains, dtype=float)
    own = zeta[config.serving, np.arange(zeta.shape[1])]
    return _two_phase(zeta.shape[1], tau, config.L, lambda grp: float(own[list(grp)].sum()), cap)
