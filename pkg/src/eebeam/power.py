"""Power consumption model.

Per-BS consumption is ``||w||^2 / eta + P_CP,b + P_RD * delta(r_b)`` with
``delta(y) = y**m`` of the BS sum rate in Gbit/s. Rates elsewhere in the
package are in nats/s; :func:`to_gbps` is the single conversion point.
"""
from __future__ import annotations

from dataclasses import dataclass, asdict, replace

import numpy as np

LOG2E = 1.0 / np.log(2.0)
# nats/s -> Gbit/s
GBPS_PER_NATS = LOG2E / 1e9


def dbm_to_watt(dbm):
    return 10.0 ** (np.asarray(dbm, dtype=float) / 10.0) * 1e-3


@dataclass(frozen=True)
class PowerModelParams:
    eta: float = 0.2
    p_fix: float = 3.0
    p_bs: float = 0.4
    p_syn: float = 1.0
    p_ue: float = 0.1
    p_ce: float = 0.05
    l_bs: float = 12.8e9
    p_rd: float = 2.4
    m: float = 1.2
    q: int = 20
    c_lin: float = 0.0
    p_max: float = float(dbm_to_watt(27.0))

    def __post_init__(self):
        if not 0.0 < self.eta <= 1.0:
            raise ValueError("eta must lie in (0, 1]")
        if self.m < 1.0:
            raise ValueError("exponent m must be >= 1")
        for name in ("p_fix", "p_bs", "p_syn", "p_ue", "p_ce", "p_rd", "c_lin", "p_max"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.l_bs <= 0:
            raise ValueError("l_bs must be positive")
        if self.q < 0:
            raise ValueError("q must be nonnegative")

    def with_(self, **changes) -> "PowerModelParams":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)


def to_gbps(rate_nats):
    return np.asarray(rate_nats, dtype=float) * GBPS_PER_NATS


def delta(rate, m):
    """Rate-dependent power shape ``rate**m`` (rate in Gbit/s)."""
    rate = np.asarray(rate, dtype=float)
    if np.any(rate < 0):
        raise ValueError("rate must be nonnegative")
    out = rate ** m
    return float(out) if out.ndim == 0 else out


def delta_prime(rate, m):
    rate = np.asarray(rate, dtype=float)
    if m == 1.0:
        out = np.ones_like(rate)
    else:
        out = m * rate ** (m - 1.0)
    return float(out) if out.ndim == 0 else out


def rate_power(rate_nats, params: PowerModelParams):
    """``P_RD * delta(r)`` for rates given in nats/s."""
    return params.p_rd * delta(to_gbps(rate_nats), params.m)


def transceiver_power(n_antennas, n_users, params: PowerModelParams):
    return n_antennas * params.p_bs + params.p_syn + n_users * params.p_ue


def iteration_power(n_antennas, k_total, k_cell, params: PowerModelParams,
                    bandwidth: float, coherence_uses: float):
    """Per-BS power of one beamformer-optimization iteration.

    Cholesky-based solve of an N x N system plus the rank-one updates over
    all ``k_total`` users, executed once per coherence block.
    """
    N = n_antennas
    flops = N ** 3 / 3.0 + 3.0 * k_total * N ** 2 + 2.0 * N ** 2 * k_cell + params.c_lin * k_total
    return bandwidth / coherence_uses * flops / params.l_bs


def linear_processing_power(n_antennas, n_users, params: PowerModelParams,
                            bandwidth: float, overhead_fraction: float, p_lp_c: float = 0.0):
    return bandwidth * overhead_fraction * 2.0 * n_antennas * n_users / params.l_bs + p_lp_c


def circuit_power(n_antennas, n_users, params: PowerModelParams, overhead_fraction: float,
                  bandwidth: float, p_lp_c: float = 0.0):
    """Rate-independent circuit power ``P_FIX + P_TC + P_CE + P_LP`` of one BS."""
    return (params.p_fix + transceiver_power(n_antennas, n_users, params) + params.p_ce
            + linear_processing_power(n_antennas, n_users, params, bandwidth,
                                      overhead_fraction, p_lp_c))


def network_circuit_power(config, params: PowerModelParams, q: int | None = None,
                          local_complexity: bool = False) -> np.ndarray:
    """Per-BS ``P_CP,b`` for a scenario, shape (B,).

    ``q`` overrides the iteration count charged for beamformer computation.
    With ``local_complexity`` the per-iteration cost only scales with the
    BS's own users (uncoordinated schemes).
    """
    q = params.q if q is None else q
    k_cell = config.L
    k_total = k_cell if local_complexity else config.n_users
    p_iter = iteration_power(config.N, k_total, k_cell, params, config.bandwidth,
                             config.coherence_uses)
    p_cp = circuit_power(config.N, k_cell, params, config.overhead_fraction,
                         config.bandwidth, p_lp_c=q * p_iter)
    return np.full(config.B, p_cp)


@dataclass
class PowerBreakdown:
    transmit: np.ndarray      # (B,) radiated power sum ||w||^2
    circuit: np.ndarray       # (B,) P_CP,b
    rate_dependent: np.ndarray  # (B,) P_RD delta(r_b)
    eta: float

    @property
    def per_bs(self) -> np.ndarray:
        return self.transmit / self.eta + self.circuit + self.rate_dependent

    @property
    def total(self) -> float:
        return float(self.per_bs.sum())

    @property
    def rate_independent(self) -> np.ndarray:
        """``g_b(w)`` per BS; ``g(w)`` is its sum."""
        return self.transmit / self.eta + self.circuit


def total_power(w: np.ndarray, serving: np.ndarray, bs_rates_nats, p_cp,
                params: PowerModelParams) -> PowerBreakdown:
    """Power breakdown for beamformers ``w`` (K, N) and per-BS rates in nats/s."""
    bs_rates_nats = np.asarray(bs_rates_nats, dtype=float)
    B = len(bs_rates_nats)
    tx = np.bincount(serving, weights=np.sum(np.abs(w) ** 2, axis=1), minlength=B)
    return PowerBreakdown(transmit=tx,
                          circuit=np.broadcast_to(np.asarray(p_cp, dtype=float), (B,)).copy(),
                          rate_dependent=np.asarray(rate_power(bs_rates_nats, params), dtype=float).reshape(B),
                          eta=params.eta)
