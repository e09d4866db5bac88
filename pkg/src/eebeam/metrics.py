"""SINR, rate, MSE and energy-efficiency evaluation.

Conventions: channels ``h`` have shape (B, K, N) with ``h[b, k]`` the vector
from BS ``b`` to user ``k``; beamformers ``w`` have shape (K, N) and are
transmitted by ``serving[k]``. Rates are in nats/s, EE values in bit/J.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .power import LOG2E, PowerModelParams, rate_power, delta, to_gbps


class ShapeError(ValueError):
    pass


def _check(h, w, serving):
    if h.ndim != 3 or w.ndim != 2:
        raise ShapeError("expected h of shape (B, K, N) and w of shape (K, N)")
    if h.shape[1] != w.shape[0] or h.shape[2] != w.shape[1] or len(serving) != w.shape[0]:
        raise ShapeError(f"shape mismatch: h {h.shape}, w {w.shape}, serving {len(serving)}")


def cross_gains(h, w, serving) -> np.ndarray:
    """``G[j, k] = h_{b_j,k}^H w_j``: amplitude of stream ``j`` at user ``k``."""
    _check(h, w, serving)
    return np.einsum("jkn,jn->jk", h[serving].conj(), w)


def received_powers(h, w, serving) -> np.ndarray:
    return np.abs(cross_gains(h, w, serving)) ** 2


def sinr_all(h, w, serving, noise) -> np.ndarray:
    P = received_powers(h, w, serving)
    desired = np.diag(P)
    interference = P.sum(axis=0) - desired
    return desired / (noise + interference)


def sinr(k, h, w, serving, noise) -> float:
    return float(sinr_all(h, w, serving, noise)[k])


@dataclass
class RateVector:
    gamma: np.ndarray       # (K,) SINR
    r_user: np.ndarray      # (K,) nats/s
    r_bs: np.ndarray        # (B,) nats/s
    alpha: float

    @property
    def r_user_bits(self) -> np.ndarray:
        return self.r_user * LOG2E

    @property
    def r_bs_bits(self) -> np.ndarray:
        return self.r_bs * LOG2E


def rates_from_sinr(gamma, serving, alpha, B) -> RateVector:
    r_user = alpha * np.log1p(gamma)
    r_bs = np.bincount(serving, weights=r_user, minlength=B)
    return RateVector(gamma=gamma, r_user=r_user, r_bs=r_bs, alpha=alpha)


def rates(h, w, serving, noise, alpha) -> RateVector:
    return rates_from_sinr(sinr_all(h, w, serving, noise), serving, alpha, h.shape[0])


def mmse_receivers(h, w, serving, noise) -> np.ndarray:
    """``u_k = (sum_j |h_{b_j,k}^H w_j|^2 + N0)^{-1} h_{b_k,k}^H w_k`` for all k."""
    G = cross_gains(h, w, serving)
    total = np.sum(np.abs(G) ** 2, axis=0) + noise
    return np.diag(G) / total


def mmse_receiver(k, h, w, serving, noise) -> complex:
    return complex(mmse_receivers(h, w, serving, noise)[k])


def mse_all(h, w, serving, u, noise) -> np.ndarray:
    """MSE of every stream when user k estimates ``conj(u_k) * y_k``."""
    G = cross_gains(h, w, serving)
    total = np.sum(np.abs(G) ** 2, axis=0) + noise
    return np.abs(u) ** 2 * total - 2.0 * np.real(np.conj(u) * np.diag(G)) + 1.0


def mse(k, h, w, serving, u_k, noise) -> float:
    u = np.zeros(w.shape[0], dtype=complex)
    u[k] = u_k
    return float(mse_all(h, w, serving, u, noise)[k])


def _bs_power(w, serving, B):
    return np.bincount(serving, weights=np.sum(np.abs(w) ** 2, axis=1), minlength=B)


@dataclass
class EEResult:
    """Energy-efficiency evaluation of one beamformer set."""
    network_ee: float          # bit/J
    wsum_ee: float             # sum_b omega_b EE_b, bit/J
    cell_ee: np.ndarray        # (B,) bit/J
    rates: RateVector
    transmit_power: np.ndarray  # (B,) W, radiated
    bs_power: np.ndarray       # (B,) W, total consumption per BS

    @property
    def total_power(self) -> float:
        return float(self.bs_power.sum())


def evaluate(h, w, serving, noise, alpha, p_cp, params: PowerModelParams,
             weights=None) -> EEResult:
    """Network and weighted-sum EE, per-BS rate-dependent power model."""
    B = h.shape[0]
    rv = rates(h, w, serving, noise, alpha)
    tx = _bs_power(w, serving, B)
    p_cp = np.broadcast_to(np.asarray(p_cp, dtype=float), (B,))
    bs_power = tx / params.eta + p_cp + rate_power(rv.r_bs, params)
    weights = np.ones(B) if weights is None else np.asarray(weights, dtype=float)
    cell_ee = rv.r_bs * LOG2E / bs_power
    return EEResult(network_ee=float(rv.r_bs.sum() * LOG2E / bs_power.sum()),
                    wsum_ee=float(np.dot(weights, cell_ee)),
                    cell_ee=cell_ee, rates=rv, transmit_power=tx, bs_power=bs_power)


def network_ee(h, w, serving, noise, alpha, p_cp, params: PowerModelParams) -> float:
    return evaluate(h, w, serving, noise, alpha, p_cp, params).network_ee


def wsum_ee(h, w, serving, noise, alpha, p_cp, params: PowerModelParams, weights=None):
    """Weighted sum EE and the per-cell EE vector."""
    res = evaluate(h, w, serving, noise, alpha, p_cp, params, weights)
    return res.wsum_ee, res.cell_ee


@dataclass
class PerUserEE:
    network_ee: float
    wsum_ee: float
    cell_ee: np.ndarray


def per_user_ee_objectives(h, w, serving, noise, alpha, p_cp, params: PowerModelParams,
                           weights=None) -> PerUserEE:
    """Both objectives with the rate-dependent term summed per user.

    Evaluation only: ``P_RD * sum_{k in K_b} delta(r_k)`` replaces
    ``P_RD * delta(r_b)``.
    """
    B = h.shape[0]
    rv = rates(h, w, serving, noise, alpha)
    tx = _bs_power(w, serving, B)
    p_cp = np.broadcast_to(np.asarray(p_cp, dtype=float), (B,))
    rd = params.p_rd * np.bincount(serving, weights=delta(to_gbps(rv.r_user), params.m),
                                   minlength=B)
    bs_power = tx / params.eta + p_cp + rd
    weights = np.ones(B) if weights is None else np.asarray(weights, dtype=float)
    cell_ee = rv.r_bs * LOG2E / bs_power
    return PerUserEE(network_ee=float(rv.r_bs.sum() * LOG2E / bs_power.sum()),
                     wsum_ee=float(np.dot(weights, cell_ee)), cell_ee=cell_ee)


def jain_index(values) -> float:
    """Jain fairness index ``(sum x)^2 / (n sum x^2)``."""
    x = np.asarray(values, dtype=float)
    if x.size == 0 or np.any(x < 0):
        raise ValueError("values must be nonnegative")
    top = x.max()
    if top == 0:
        raise ValueError("fairness index undefined for all-zero input")
    x = x / top     # scale-free; avoids underflow of tiny values
    return float(x.sum() ** 2 / (x.size * np.sum(x ** 2)))
