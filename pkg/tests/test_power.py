import numpy as np
import pytest
from hypothesis import given, strategies as st

from eebeam.power import (PowerModelParams, circuit_power, delta, delta_prime, iteration_power,
                          linear_processing_power, network_circuit_power, rate_power, to_gbps,
                          total_power, transceiver_power)
from eebeam.scenario import ScenarioConfig

P = PowerModelParams()


def test_delta_basics():
    assert delta(0.0, 1.2) == 0.0
    assert delta(3.7, 1.0) == pytest.approx(3.7)
    assert P.with_(m=1.2).p_rd * delta(1.0, 1.2) == pytest.approx(2.4)
    with pytest.raises(ValueError):
        delta(-1.0, 1.2)


@given(st.floats(1e-3, 50.0), st.floats(1.0, 3.0))
def test_delta_prime_matches_difference(y, m):
    h = 1e-6 * y
    fd = (delta(y + h, m) - delta(y - h, m)) / (2 * h)
    assert delta_prime(y, m) == pytest.approx(fd, rel=1e-6)


def test_rate_power_unit_conversion():
    # 1 Gbit/s expressed in nats/s
    rate = 1e9 / to_gbps(1e9) * 1.0
    assert rate_power(rate, P) == pytest.approx(P.p_rd)


def test_transceiver_power_example():
    assert transceiver_power(4, 2, P) == pytest.approx(2.8)


def test_empty_cell_circuit_power():
    val = circuit_power(0, 0, P, overhead_fraction=0.72, bandwidth=20e6, p_lp_c=0.0)
    assert val == pytest.approx(P.p_fix + P.p_syn + P.p_ce)


def test_linear_processing_first_term():
    val = linear_processing_power(4, 2, P, bandwidth=20e6, overhead_fraction=0.72)
    assert val == pytest.approx(0.72 * 20e6 * 16 / 12.8e9)
    assert val == pytest.approx(0.018)


def test_iteration_power_example():
    val = iteration_power(4, 21, 3, P, bandwidth=20e6, coherence_uses=100)
    assert val == pytest.approx(2e5 * (64 / 3 + 1008 + 96) / 12.8e9)
    assert val == pytest.approx(0.0176, abs=5e-5)


def test_iteration_power_scaling():
    base = iteration_power(4, 0, 0, P, 20e6, 100)
    assert base == pytest.approx(2e5 * 64 / 3 / 12.8e9)
    assert iteration_power(8, 0, 0, P, 20e6, 100) == pytest.approx(8 * base)


def test_network_circuit_power_charges_iterations():
    cfg = ScenarioConfig()
    p0 = network_circuit_power(cfg, P, q=0)
    p20 = network_circuit_power(cfg, P, q=20)
    per_iter = iteration_power(cfg.N, cfg.n_users, cfg.L, P, cfg.bandwidth, cfg.coherence_uses)
    assert p0.shape == (7,)
    assert np.allclose(p20 - p0, 20 * per_iter)
    local = network_circuit_power(cfg, P, q=20, local_complexity=True)
    assert np.all(local < p20)


def test_total_power_zero_beamformers():
    w = np.zeros((4, 2), dtype=complex)
    br = total_power(w, np.array([0, 0, 1, 1]), np.zeros(2), np.array([5.0, 6.0]), P)
    assert br.total == pytest.approx(11.0)


def test_transmit_chain_scaling():
    w = np.zeros((1, 2), dtype=complex)
    w[0, 0] = np.sqrt(0.5)
    br = total_power(w, np.array([0]), np.zeros(1), 0.0, P.with_(eta=0.2))
    assert br.per_bs[0] == pytest.approx(2.5)


@given(st.floats(0.0, 5e9), st.floats(0.0, 5e9), st.floats(0.0, 5.0))
def test_linear_delta_is_affine(r1, r2, prd):
    params = P.with_(m=1.0, p_rd=prd)
    w = np.zeros((1, 1), dtype=complex)

    def tot(r):
        return total_power(w, np.array([0]), np.array([r]), 1.0, params).total

    mid = tot(0.5 * (r1 + r2))
    assert mid == pytest.approx(0.5 * (tot(r1) + tot(r2)), rel=1e-12, abs=1e-12)
    assert tot(1e9 / to_gbps(1e9)) - tot(0.0) == pytest.approx(prd)


def test_parameter_validation():
    with pytest.raises(ValueError):
        PowerModelParams(eta=0.0)
    with pytest.raises(ValueError):
        PowerModelParams(m=0.5)
    with pytest.raises(ValueError):
        PowerModelParams(p_rd=-1.0)
