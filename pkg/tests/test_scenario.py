import numpy as np
import pytest
from hypothesis import given, strategies as st

from eebeam.pilots import allocate_greedy
from eebeam.scenario import (AllocationIncompleteError, ScenarioConfig, ScenarioError,
                             UnsupportedGeometryError, build_layout, contaminate, drop_users,
                             generate_channels, make_drop, path_gain_db)


def test_seven_cell_layout_center_and_ring():
    layout = build_layout(ScenarioConfig(inter_bs_distance=120.0))
    assert np.allclose(layout.bs_positions[0], 0.0)
    assert np.allclose(np.linalg.norm(layout.bs_positions[1:], axis=1), 120.0)


def test_wrap_distance_never_exceeds_direct():
    layout = build_layout(ScenarioConfig())
    for b1 in range(7):
        for b2 in range(7):
            direct = np.linalg.norm(layout.bs_positions[b1] - layout.bs_positions[b2])
            assert layout.bs_distance(b1, b2) <= direct + 1e-9


def test_wrapped_neighbours_all_at_one_hop():
    # on the torus every BS sees the other six at the inter-BS distance
    layout = build_layout(ScenarioConfig())
    for b1 in range(7):
        for b2 in range(7):
            if b1 != b2:
                assert layout.bs_distance(b1, b2) == pytest.approx(120.0)


def test_single_cell_layout():
    layout = build_layout(ScenarioConfig(B=1, wrap_around=True))
    assert layout.B == 1
    assert np.allclose(layout.bs_positions, 0.0)
    assert layout.wrap_shifts.shape == (1, 2)


def test_wrap_around_needs_seven_cells():
    with pytest.raises(UnsupportedGeometryError):
        build_layout(ScenarioConfig(B=3, wrap_around=True))


def test_users_on_cell_edge_circle():
    cfg = ScenarioConfig(L=3)
    layout = build_layout(cfg)
    pos = drop_users(layout, cfg, np.random.default_rng(0))
    for k, b in enumerate(cfg.serving):
        assert layout.distance(pos[k], b)[0] == pytest.approx(60.0)


def test_drop_users_deterministic_and_empty():
    cfg = ScenarioConfig()
    layout = build_layout(cfg)
    a = drop_users(layout, cfg, np.random.default_rng(4))
    b = drop_users(layout, cfg, np.random.default_rng(4))
    assert np.array_equal(a, b)
    assert drop_users(layout, cfg.with_(L=0), np.random.default_rng(4)).shape == (0, 2)


def test_path_loss_values():
    assert path_gain_db(1.0) == pytest.approx(35.0)
    assert path_gain_db(60.0) == pytest.approx(35 + 30 * np.log10(60.0))
    assert path_gain_db(120.0) - path_gain_db(60.0) == pytest.approx(30 * np.log10(2.0))
    with pytest.raises(ValueError):
        path_gain_db(0.0)


def test_zero_gain_gives_zero_channel():
    ch = generate_channels(np.zeros((1, 2)), np.array([0, 0]), 3, np.random.default_rng(0))
    assert np.all(ch.h == 0)


def test_unit_gain_channel_second_moment():
    ch = generate_channels(np.ones((1, 1)), np.array([0]), 100_000, np.random.default_rng(1))
    assert np.mean(np.abs(ch.h) ** 2) == pytest.approx(1.0, rel=0.02)


def test_same_seed_same_drop():
    cfg = ScenarioConfig()
    a, b = make_drop(cfg, 3, seed=9), make_drop(cfg, 3, seed=9)
    assert np.array_equal(a.channels.h, b.channels.h)
    assert a.seed == (9, 3)
    assert not np.array_equal(a.channels.h, make_drop(cfg, 4, seed=9).channels.h)


def test_antenna_count_does_not_move_users():
    a = make_drop(ScenarioConfig(N=2), 0, seed=1)
    b = make_drop(ScenarioConfig(N=5), 0, seed=1)
    assert np.array_equal(a.positions, b.positions)
    assert np.array_equal(a.channels.path_gain, b.channels.path_gain)


def test_effective_bandwidth():
    cfg = ScenarioConfig()
    assert cfg.n_users == 14
    assert cfg.alpha == pytest.approx(0.72 * 20e6)


def test_config_validation():
    with pytest.raises(ScenarioError):
        ScenarioConfig(L=2, tau_ul=1)
    with pytest.raises(ScenarioError):
        ScenarioConfig(tau_ul=60, tau_dl=60)


def test_orthogonal_pilots_leave_channels_unchanged(small_drop):
    groups = [(k,) for k in range(small_drop.channels.K)]
    obs = contaminate(small_drop.channels, groups)
    assert np.array_equal(obs.h, small_drop.channels.h)


def test_shared_pilot_adds_channels(small_drop):
    ch = small_drop.channels
    groups = [(0, 3)] + [(k,) for k in range(ch.K) if k not in (0, 3)]
    obs = contaminate(ch, groups)
    assert np.allclose(obs.h[:, 0], ch.h[:, 0] + ch.h[:, 3])
    assert np.allclose(obs.h[:, 0] - ch.h[:, 0], ch.h[:, 3])
    assert np.allclose(obs.h[:, 3] - ch.h[:, 3], ch.h[:, 0])
    assert obs.pilot_group[0] == obs.pilot_group[3] == 0


def test_incomplete_allocation_rejected(small_drop):
    with pytest.raises(AllocationIncompleteError):
        contaminate(small_drop.channels, [(0, 1), (2,)])
    with pytest.raises(AllocationIncompleteError):
        contaminate(small_drop.channels, [(0, 1), (1, 2, 3, 4, 5)])


@given(st.integers(0, 2 ** 31 - 1), st.integers(2, 6))
def test_contamination_is_symmetric_within_groups(seed, tau):
    cfg = ScenarioConfig(B=3, N=2, L=2, wrap_around=False)
    ch = make_drop(cfg, 0, seed=seed).channels
    alloc = allocate_greedy(ch.path_gain, tau, cfg)
    obs = contaminate(ch, alloc)
    for grp in alloc.groups:
        total = ch.h[:, list(grp)].sum(axis=1)
        for k in grp:
            assert np.allclose(obs.h[:, k], total)
