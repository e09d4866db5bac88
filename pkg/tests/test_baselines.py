import numpy as np
import pytest

from eebeam import baselines, metrics
from eebeam.baselines import BaselineConfig, mmse_directions, run_scheme
from eebeam.power import PowerModelParams, network_circuit_power
from eebeam.scenario import ScenarioConfig, make_drop
from eebeam.solvers import run

P = PowerModelParams()


def test_mmse_directions_unit_norm(small_drop, small_config):
    v = mmse_directions(small_drop.channels, small_config, P.p_max)
    assert np.allclose(np.linalg.norm(v, axis=1), 1.0)


def test_mmse_direction_is_mrt_without_interference():
    cfg = ScenarioConfig(B=1, L=1, N=3)
    ch = make_drop(cfg, 0, seed=2).channels
    v = mmse_directions(ch, cfg, P.p_max)[0]
    h = ch.h[0, 0]
    assert abs(np.vdot(h, v)) == pytest.approx(np.linalg.norm(h), rel=1e-12)


def test_mmse_direction_low_load_limit(small_drop, small_config):
    v = mmse_directions(small_drop.channels, small_config, 1e-30)
    own = small_drop.channels.h[small_drop.channels.serving, np.arange(small_drop.channels.K)]
    own /= np.linalg.norm(own, axis=1, keepdims=True)
    assert np.allclose(v, own, atol=1e-9)


def test_power_allocation_feasible_and_positive(small_drop, small_config):
    v = mmse_directions(small_drop.channels, small_config, P.p_max)
    for objective in ("netee", "single-cell"):
        p, w = baselines.ee_power_allocation(v, small_drop.channels, small_config, P, objective)
        tx = np.bincount(small_drop.channels.serving, weights=p)
        assert np.all(tx <= P.p_max * (1 + 1e-9))
        res = metrics.evaluate(small_drop.channels.h, w, small_drop.channels.serving,
                               small_config.noise_power, small_config.alpha,
                               network_circuit_power(small_config, P, q=1), P)
        assert res.network_ee > 0
    with pytest.raises(ValueError):
        baselines.ee_power_allocation(v, small_drop.channels, small_config, P, "other")


def test_uncoordinated_single_cell_matches_wsum():
    cfg = ScenarioConfig(B=1, L=2, N=3)
    ch = make_drop(cfg, 1, seed=0).channels
    unc = baselines.run_uncoordinated(ch, cfg, P)
    local_pcp = network_circuit_power(cfg, P, local_complexity=True)
    # with one cell the local and network complexity coincide
    assert np.allclose(local_pcp, network_circuit_power(cfg, P))
    ref = run(ch, cfg, P)
    assert unc.wsum_ee == pytest.approx(ref.wsum_ee, rel=1e-6)
    assert unc.backhaul == 0


def test_uncoordinated_sees_interference(small_drop, small_config):
    rep = baselines.run_uncoordinated(small_drop.channels, small_config, P)
    G = metrics.received_powers(small_drop.channels.h, rep.w, small_drop.channels.serving)
    interference = G.sum(axis=0) - np.diag(G)
    assert np.all(interference > 0)
    assert rep.backhaul == 0


def test_orthogonal_has_no_intercell_terms(small_drop, small_config):
    rep = baselines.run_orthogonal(small_drop.channels, small_config, P)
    sub = baselines.orthogonal_config(small_config)
    assert sub.bandwidth == pytest.approx(small_config.bandwidth / small_config.B)
    ch = small_drop.channels
    for b in range(ch.B):
        users = ch.users_of(b)
        h_cell = ch.h[b:b + 1, users]
        gamma = metrics.sinr_all(h_cell, rep.w[users], np.zeros(len(users), dtype=int),
                                 sub.noise_power)
        assert np.allclose(rep.sinr[users], gamma, rtol=1e-12)


def test_orthogonal_bandwidth_for_seven_cells():
    assert baselines.orthogonal_config(ScenarioConfig()).bandwidth == pytest.approx(20e6 / 7)


def test_orthogonal_single_cell_is_uncoordinated():
    cfg = ScenarioConfig(B=1, L=2, N=3)
    ch = make_drop(cfg, 1, seed=0).channels
    a = baselines.run_orthogonal(ch, cfg, P)
    b = baselines.run_uncoordinated(ch, cfg, P)
    assert a.network_ee == pytest.approx(b.network_ee, rel=1e-9)


def test_rate_agnostic_variants(small_drop, small_config):
    lin = P.with_(m=1.0)
    blind = baselines.run_rate_agnostic(small_drop.channels, small_config, lin, "netee")
    aware = run_scheme("netee", small_drop.channels, small_config, lin)
    assert np.allclose(blind.rates_user, aware.rates_user, rtol=1e-3,
                       atol=1e-3 * aware.rates_user.max())
    free = P.with_(p_rd=0.0)
    a = baselines.run_rate_agnostic(small_drop.channels, small_config, free, "wsum")
    b = run_scheme("wsum", small_drop.channels, small_config, free)
    assert a.objective == pytest.approx(b.objective, rel=1e-12)


def test_rate_aware_beats_agnostic_with_strong_rate_power(small_drop, small_config):
    params = P.with_(m=1.3, p_rd=40.0)
    blind = baselines.run_rate_agnostic(small_drop.channels, small_config, params, "netee")
    aware = run_scheme("netee", small_drop.channels, small_config, params)
    assert aware.network_ee >= blind.network_ee


@pytest.mark.parametrize("scheme", baselines.SCHEMES)
def test_every_scheme_runs_feasibly(small_drop, small_config, scheme):
    rep = run_scheme(scheme, small_drop.channels, small_config, P)
    assert rep.scheme == scheme
    tx = np.bincount(small_drop.channels.serving, weights=np.sum(np.abs(rep.w) ** 2, axis=1))
    assert np.all(tx <= P.p_max * (1 + 1e-9))
    assert rep.network_ee > 0


def test_baseline_config():
    assert BaselineConfig("mmse-multicell").charged_q == 1
    assert BaselineConfig("uncoordinated").charged_q is None
    assert BaselineConfig("mmse-singlecell", q=5).charged_q == 5
    with pytest.raises(ValueError):
        BaselineConfig("nonsense")
    with pytest.raises(ValueError):
        BaselineConfig(rounds=0)
