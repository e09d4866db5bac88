import math
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from eebeam.pilots import (CombinatorialError, InvalidTauError, PilotAllocation, allocate,
                           allocate_greedy, group_metric, group_sizes)
from eebeam.power import LOG2E, PowerModelParams, network_circuit_power
from eebeam.scenario import ScenarioConfig, make_drop

P = PowerModelParams()


def test_group_sizes_worked_cases():
    assert group_sizes(21, 12) == (2, 1, 9, 3)
    assert group_sizes(21, 15) == (2, 1, 6, 9)
    m_max, m_min, x_max, x_min = group_sizes(14, 14)
    assert (m_max, x_max, x_min) == (1, 14, 0)
    with pytest.raises(InvalidTauError):
        group_sizes(21, 22)
    with pytest.raises(InvalidTauError):
        group_sizes(21, 2, max_cell=3)


@given(st.integers(1, 60), st.data())
def test_group_sizes_cover_users(k_total, data):
    tau = data.draw(st.integers(1, k_total))
    m_max, m_min, x_max, x_min = group_sizes(k_total, tau)
    assert x_max + x_min == tau
    assert m_max * x_max + m_min * x_min == k_total
    assert m_max - m_min == 1 and x_max >= 1


def _config(B=2, L=2):
    return ScenarioConfig(B=B, L=L, N=2, wrap_around=False)


def test_singleton_metric_by_hand():
    cfg = _config()
    zeta = np.full((2, 4), 1e-9)
    p_cp = float(network_circuit_power(cfg, P).sum())
    val = group_metric([1], zeta, cfg.serving, P, cfg.alpha, cfg.noise_power, p_cp)
    pk = P.p_max / 2
    rate = cfg.alpha * np.log1p(pk * 1e-9 / cfg.noise_power)
    power = pk / P.eta + p_cp / 4 + P.p_rd * (rate * LOG2E / 1e9) ** P.m
    assert val == pytest.approx(rate * LOG2E / power, rel=1e-12)


def test_pair_metric_by_hand():
    cfg = _config()
    zeta = np.array([[4e-9, 1e-9, 2e-10, 3e-10], [2e-10, 3e-10, 4e-9, 1e-9]])
    p_cp = 10.0
    pk = P.p_max / 2
    # users 0 (BS 0) and 2 (BS 1) share a pilot
    r0 = cfg.alpha * np.log1p(pk * 4e-9 / (pk * zeta[1, 0] + cfg.noise_power))
    r2 = cfg.alpha * np.log1p(pk * 4e-9 / (pk * zeta[0, 2] + cfg.noise_power))
    power = 2 * pk / P.eta + 2 * p_cp / 4 + P.p_rd * ((r0 * LOG2E / 1e9) ** P.m
                                                      + (r2 * LOG2E / 1e9) ** P.m)
    val = group_metric([0, 2], zeta, cfg.serving, P, cfg.alpha, cfg.noise_power, p_cp)
    assert val == pytest.approx((r0 + r2) * LOG2E / power, rel=1e-10)


def test_zero_gain_member_contributes_no_rate():
    cfg = _config()
    zeta = np.full((2, 4), 1e-9)
    zeta[:, 3] = 0.0
    lone = group_metric([3], zeta, cfg.serving, P, cfg.alpha, cfg.noise_power, 10.0)
    assert lone == 0.0
    with pytest.raises(ValueError):
        group_metric([], zeta, cfg.serving, P, cfg.alpha, cfg.noise_power, 10.0)


def test_orthogonal_when_tau_equals_users():
    cfg = _config()
    zeta = make_drop(cfg, 0, seed=1).channels.path_gain
    for alloc in (allocate(zeta, 4, P, cfg), allocate_greedy(zeta, 4, cfg)):
        assert sorted(alloc.groups) == [(0,), (1,), (2,), (3,)]


def test_ee_allocation_matches_exhaustive_rule():
    cfg = _config()
    zeta = make_drop(cfg, 0, seed=7).channels.path_gain
    p_cp = float(network_circuit_power(cfg, P).sum())

    def score(g):
        return group_metric(g, zeta, cfg.serving, P, cfg.alpha, cfg.noise_power, p_cp)

    alloc = allocate(zeta, 3, P, cfg)
    assert group_sizes(4, 3) == (2, 1, 1, 2)
    singles = sorted(g for g in alloc.groups if len(g) == 1)
    ranked = sorted(range(4), key=lambda k: -score((k,)))
    assert singles == sorted((k,) for k in ranked[:2])
    assert [g for g in alloc.groups if len(g) == 2] == [tuple(sorted(ranked[2:]))]
    # the chosen singletons beat every alternative pair of singletons
    total = sum(score(g) for g in singles)
    assert all(total >= score((i,)) + score((j,)) for i, j in combinations(range(4), 2))


def test_greedy_singletons_have_largest_own_gain():
    cfg = ScenarioConfig(L=3, N=2)
    zeta = make_drop(cfg, 2, seed=0).channels.path_gain
    alloc = allocate_greedy(zeta, 12, cfg)
    own = zeta[cfg.serving, np.arange(cfg.n_users)]
    singles = sorted(k for g in alloc.groups if len(g) == 1 for k in g)
    assert singles == sorted(np.argsort(-own)[:3].tolist())


def test_allocators_differ_on_crafted_instance():
    # users 0 and 1 have the strongest links but hear each other's BS loudly;
    # every other cross link is negligible
    cfg = ScenarioConfig(B=4, L=1, N=2, wrap_around=False)
    zeta = np.full((4, 4), 1e-14)
    np.fill_diagonal(zeta, [1e-8, 1e-8, 1e-9, 1e-9])
    zeta[1, 0] = zeta[0, 1] = 1e-8
    greedy = allocate_greedy(zeta, 2, cfg)
    ee = allocate(zeta, 2, P, cfg)
    assert (0, 1) in greedy.groups
    assert (0, 1) not in ee.groups
    p_cp = float(network_circuit_power(cfg, P).sum())

    def total(alloc):
        return sum(group_metric(g, zeta, cfg.serving, P, cfg.alpha, cfg.noise_power, p_cp)
                   for g in alloc.groups)

    assert total(ee) > total(greedy)


@given(st.integers(0, 10 ** 6), st.integers(3, 12))
def test_allocation_invariants(seed, tau):
    cfg = ScenarioConfig(L=2, N=2)
    zeta = make_drop(cfg, 0, seed=seed).channels.path_gain
    for alloc in (allocate(zeta, tau, P, cfg), allocate_greedy(zeta, tau, cfg)):
        alloc.validate(cfg.n_users)
        assert alloc.tau == tau
        pilot = alloc.pilot_of(cfg.n_users)
        assert np.all(pilot >= 0)


def test_candidate_cap():
    cfg = ScenarioConfig(L=3, N=2)
    zeta = make_drop(cfg, 0, seed=0).channels.path_gain
    with pytest.raises(CombinatorialError):
        allocate(zeta, 7, P, cfg, cap=100)
    assert math.comb(21, 3) <= 10 ** 6
    allocate(zeta, 7, P, cfg)


def test_invalid_allocation_detected():
    bad = PilotAllocation(((0, 1), (1, 2)), 2, 1, 2, 0)
    with pytest.raises(ValueError):
        bad.validate(3)
