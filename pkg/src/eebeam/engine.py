"""Closed-form KKT update engine for energy-efficient coordinated beamforming.

Both objectives (weighted sum EE and network EE) run through the same code.
Each BS ratio ``r_b^2 / z_b`` is lower-bounded by its tangent at the current
point, and every step maximizes a concave surrogate of that bound.

Execution modes
---------------
centralized
    A controller with all channels solves the surrogate exactly at every
    outer iteration. The default surrogate linearizes each SINR as a
    quadratic-over-linear bound and keeps the exact log; option ``"mse"``
    bounds the rate through the MMSE receiver instead. Either is solved
    through its smooth dual in log-prices, with the beamformers in closed
    form for given prices. Steps that lower the true objective are rejected,
    and accepted steps may be extended by a safeguarded line search.
decentralized
    One combined loop of closed-form updates in the MSE form: beamformers
    from the stationarity condition

        w_k = d_k u_k (sum_j d_j |u_j|^2 h_{b,j} h_{b,j}^H + (s_b + c_b/eta) I)^{-1} h_{b,k},

    then receivers, local SINR/rate/power variables and a damped update of
    the exchanged scalars ``d_k``.
low-overhead
    The same loop with ``inner_updates = s > 1`` beamformer updates per
    receiver refresh.

Internally rates are measured in Gnat/s (``alpha / RATE_UNIT``), so the
auxiliary ``r_b`` is the square root of the BS rate in Gnat/s. This leaves the
iterates unchanged and keeps the dual variables O(1).
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize

from . import metrics
from .power import LOG2E, PowerModelParams

log = logging.getLogger(__name__)

RATE_UNIT = 1e9
R_FLOOR = 1e-12
OFF_TOL = 1e-20          # streams below this share of the BS budget count as switched off

MODES = ("centralized", "decentralized", "low-overhead")
OBJECTIVES = ("wsum", "netee")


class SolverError(RuntimeError):
    pass


class SingularSystemError(SolverError):
    pass


class DivergenceError(SolverError):
    def __init__(self, msg, state=None):
        super().__init__(msg)
        self.state = state


@dataclass(frozen=True)
class SolverConfig:
    rho: float = 0.15
    xi: float = 1e-4
    window: int = 5
    max_iter: int = 200               # over-the-air iterations (receiver refreshes)
    inner_updates: int = 1            # beamformer updates per receiver refresh
    mode: str = "centralized"
    surrogate: str = "sinr"          # centralized surrogate: "sinr" or "mse"
    extrapolate: float = 32.0         # largest step multiplier tried after each centralized solve
    geometric: bool = True            # also extrapolate per-stream amplitudes and try switching fading streams off
    tight_refresh: bool = True        # exact SINR at receiver refreshes (decentralized modes)
    rate_continuation: bool = True    # solver entry points: warm start from the P_RD = 0 solution
    polish: bool = False              # centralized: solve the KKT system on the final active set
    inner_tol: float = 1e-13
    inner_max_iter: int = 5000
    root_tol: float = 1e-14

    def __post_init__(self):
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError("step sizes must lie in [0, 1]")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.inner_updates < 1:
            raise ValueError("inner_updates must be >= 1")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.surrogate not in ("sinr", "mse"):
            raise ValueError("surrogate must be 'sinr' or 'mse'")
        if self.extrapolate < 0:
            raise ValueError("extrapolate must be >= 0")

    def with_(self, **changes) -> "SolverConfig":
        return replace(self, **changes)


@dataclass
class Problem:
    """One beamforming instance as seen by the optimizer."""
    h: np.ndarray                  # (B, K, N)
    serving: np.ndarray            # (K,)
    noise: np.ndarray              # (K,) noise (plus any frozen interference)
    alpha: float                   # effective bandwidth, Hz
    p_max: np.ndarray              # (B,)
    p_cp: np.ndarray               # (B,)
    params: PowerModelParams
    weights: np.ndarray            # (B,)
    objective: str = "wsum"
    directions: np.ndarray | None = None   # (K, N) unit vectors: power-only mode

    def __post_init__(self):
        self.h = np.asarray(self.h, dtype=complex)
        B, K, _ = self.h.shape
        self.serving = np.asarray(self.serving, dtype=int)
        self.noise = np.broadcast_to(np.asarray(self.noise, dtype=float), (K,)).copy()
        self.p_max = np.broadcast_to(np.asarray(self.p_max, dtype=float), (B,)).copy()
        self.p_cp = np.broadcast_to(np.asarray(self.p_cp, dtype=float), (B,)).copy()
        self.weights = np.broadcast_to(np.asarray(self.weights, dtype=float), (B,)).copy()
        if self.objective not in OBJECTIVES:
            raise ValueError(f"objective must be one of {OBJECTIVES}")
        if np.any(self.weights < 0):
            raise ValueError("weights must be nonnegative")

    @property
    def B(self) -> int:
        return self.h.shape[0]

    @property
    def K(self) -> int:
        return self.h.shape[1]

    @property
    def N(self) -> int:
        return self.h.shape[2]

    @property
    def alpha_int(self) -> float:
        return self.alpha / RATE_UNIT

    @property
    def own_channels(self) -> np.ndarray:
        return self.h[self.serving, np.arange(self.K)]

    @property
    def users_per_bs(self) -> np.ndarray:
        return np.bincount(self.serving, minlength=self.B)

    def rd(self, r):
        """``P_RD * delta`` of the BS rate ``r**2`` (Gnat/s)."""
        if self.params.p_rd == 0.0:
            return np.zeros_like(r)
        return self.params.p_rd * (LOG2E * r ** 2) ** self.params.m

    def rd_prime(self, r):
        """Derivative of :meth:`rd` with respect to ``r``."""
        if self.params.p_rd == 0.0:
            return np.zeros_like(r)
        m = self.params.m
        y = LOG2E * r ** 2
        dy = m * y ** (m - 1.0) if m != 1.0 else np.ones_like(y)
        return self.params.p_rd * dy * LOG2E * 2.0 * r

    def evaluate(self, w, h=None) -> metrics.EEResult:
        h = self.h if h is None else h
        return metrics.evaluate(h, w, self.serving, self.noise, self.alpha, self.p_cp,
                                self.params, self.weights)

    def objective_value(self, w) -> float:
        res = self.evaluate(w)
        return res.network_ee if self.objective == "netee" else res.wsum_ee


@dataclass
class SolverState:
    w: np.ndarray
    u: np.ndarray
    gamma: np.ndarray
    r: np.ndarray
    z: np.ndarray
    t: np.ndarray
    p: float
    a: np.ndarray
    c: np.ndarray
    d: np.ndarray
    f: np.ndarray
    s: np.ndarray
    gamma_prev: np.ndarray
    r_prev: np.ndarray
    z_prev: np.ndarray
    p_prev: float
    c_prev: np.ndarray
    active: np.ndarray                # users with a nonzero own channel
    iteration: int = 0
    ota: int = 0
    backhaul: int = 0
    lam: np.ndarray | None = None      # SINR prices of the centralized surrogate

    def copy(self) -> "SolverState":
        out = {}
        for name, val in self.__dict__.items():
            out[name] = val.copy() if isinstance(val, np.ndarray) else val
        return SolverState(**out)

    def snapshot(self):
        """Freeze the current auxiliaries as the next linearization point."""
        self.gamma_prev = self.gamma.copy()
        self.r_prev = self.r.copy()
        self.z_prev = self.z.copy()
        self.p_prev = self.p
        self.c_prev = self.c.copy()


# -- initialization -----------------------------------------------------------

def mrt_beamformers(prob: Problem) -> np.ndarray:
    """Own-channel directions (or the fixed directions) at equal per-user power."""
    own = prob.own_channels if prob.directions is None else prob.directions
    norms = np.linalg.norm(own, axis=1)
    dirs = np.zeros_like(own)
    ok = norms > 0
    dirs[ok] = own[ok] / norms[ok, None]
    k_b = np.maximum(prob.users_per_bs, 1)
    per_user = prob.p_max[prob.serving] / k_b[prob.serving]
    return dirs * np.sqrt(per_user)[:, None]


def random_beamformers(prob: Problem, rng: np.random.Generator) -> np.ndarray:
    """Random complex Gaussian beamformers scaled to use the full BS budget."""
    K, N = prob.K, prob.N
    if prob.directions is None:
        w = rng.standard_normal((K, N)) + 1j * rng.standard_normal((K, N))
    else:
        amp = rng.uniform(0.05, 1.0, K) * np.exp(2j * np.pi * rng.uniform(size=K))
        w = amp[:, None] * prob.directions
    return scale_to_budget(prob, w)


def scale_to_budget(prob: Problem, w: np.ndarray) -> np.ndarray:
    w = np.array(w, dtype=complex)
    w[~_active_users(prob)] = 0.0
    tx = np.bincount(prob.serving, weights=np.sum(np.abs(w) ** 2, axis=1), minlength=prob.B)
    scale = np.where(tx > 0, np.sqrt(prob.p_max / np.where(tx > 0, tx, 1.0)), 0.0)
    return w * scale[prob.serving][:, None]


def _active_users(prob: Problem) -> np.ndarray:
    own = prob.own_channels
    act = np.linalg.norm(own, axis=1) > 0
    if prob.directions is not None:
        act &= np.abs(np.einsum("kn,kn->k", prob.directions.conj(), own)) > 0
    return act


def _lin_coeffs(prob: Problem, r_prev, z_prev, p_prev):
    """Slope of the ratio bound per BS: ``r_prev/z_prev`` or ``r_prev/p_prev``."""
    if prob.objective == "netee":
        return r_prev / p_prev
    return r_prev / z_prev


def _c_from(prob: Problem, r_prev, z_prev, p_prev):
    q = _lin_coeffs(prob, r_prev, z_prev, p_prev)
    if prob.objective == "netee":
        return np.full(prob.B, np.sum(q ** 2))
    return prob.weights * q ** 2


def _f_from(prob: Problem, r, r_prev, z_prev, p_prev, c_used):
    q = _lin_coeffs(prob, r_prev, z_prev, p_prev)
    a = np.ones(prob.B) if prob.objective == "netee" else prob.weights
    rr = np.maximum(r, R_FLOOR)
    f = (2.0 * a * q - c_used * prob.rd_prime(rr)) / (2.0 * rr)
    return np.maximum(f, 0.0)


def true_locals(prob: Problem, w):
    """``(gamma, r, z, p)`` evaluated exactly at ``w`` (MMSE receivers)."""
    gamma = metrics.sinr_all(prob.h, w, prob.serving, prob.noise)
    r = np.sqrt(prob.alpha_int * np.bincount(prob.serving, weights=np.log1p(gamma),
                                             minlength=prob.B))
    tx = np.bincount(prob.serving, weights=np.sum(np.abs(w) ** 2, axis=1), minlength=prob.B)
    z = tx / prob.params.eta + prob.p_cp + prob.rd(r)
    return gamma, r, z, float(z.sum())


def init_state(prob: Problem, w0: np.ndarray | None = None) -> SolverState:
    """Feasible starting point.

    Beamformers default to MRT at equal per-user power; the auxiliaries are
    set to their tight values and ``d`` to its fixed-point value at the start.
    """
    active = _active_users(prob)
    if np.any(~active):
        log.warning("users %s have zero channel; serving them with zero beamformers",
                    np.flatnonzero(~active).tolist())
    w = mrt_beamformers(prob) if w0 is None else np.array(w0, dtype=complex)
    w[~active] = 0.0
    u = metrics.mmse_receivers(prob.h, w, prob.serving, prob.noise)
    gamma, r, z, p = true_locals(prob, w)
    c = _c_from(prob, r, z, p)
    f = _f_from(prob, r, r, z, p, c)
    d = np.where(active, f[prob.serving] * prob.alpha_int * (1.0 + gamma), 0.0)
    q = _lin_coeffs(prob, r, z, p)
    t = q * r if prob.objective == "netee" else r ** 2 / z
    a = np.ones(prob.B) if prob.objective == "netee" else prob.weights.copy()
    return SolverState(w=w, u=u, gamma=gamma, r=r, z=z, t=t, p=p, a=a, c=c, d=d, f=f,
                       s=np.zeros(prob.B), gamma_prev=gamma.copy(), r_prev=r.copy(),
                       z_prev=z.copy(), p_prev=p, c_prev=c.copy(), active=active)


# -- beamformer update ----------------------------------------------------------

def _power_root(lam, coef, p_max, tol, max_iter=200):
    """Smallest ``s >= 0`` with ``sum_i coef_i / (lam_i + s)^2 <= p_max`` per row.

    Rows are BSs. Newton steps on ``1/sqrt(power(s))``, which is concave and
    increasing in ``s``, approach the root monotonically from the left;
    a bracket guards against round-off.
    """
    B = lam.shape[0]
    s = np.zeros(B)
    # modes carrying no energy do not constrain the root
    lam = np.where(coef > 0, lam, np.inf)
    energy = coef.sum(axis=1)
    need = energy > 0
    if not need.any():
        return s
    lam_min = lam.min(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        p0 = np.where(lam_min > 0, np.sum(coef / np.where(lam > 0, lam, 1.0) ** 2, axis=1), np.inf)
    need &= p0 > p_max
    if not need.any():
        return s
    idx = np.flatnonzero(need)
    lam_i, c_i, pm = lam[idx], coef[idx], p_max[idx]
    if np.any(pm <= 0):
        raise SolverError("zero power budget with nonzero beamformer demand")
    # bracket: power(hi) <= pm with hi = sqrt(energy/pm) - lam_min
    lo = np.maximum(-lam_i.min(axis=1), 0.0)
    hi = np.sqrt(c_i.sum(axis=1) / pm) - lam_i.min(axis=1)
    hi = np.maximum(hi, lo)
    # with a singular system the power blows up at -lam_min; start just right of it
    x = np.where(lam_i.min(axis=1) <= 0, lo + 1e-12 * np.maximum(hi - lo, 1e-300), lo)
    target = 1.0 / np.sqrt(pm)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        x = _newton_power(x, lo, hi, lam_i, c_i, pm, target, tol, max_iter)
        # final iterate may sit a hair left of the root; step to the feasible side
        den = lam_i + x[:, None]
        pw = np.sum(c_i / den ** 2, axis=1)
        x = np.where(pw > pm, x * (1 + 1e-15) + (pw / pm - 1.0) * 0.5 * (lam_i.min(axis=1) + x), x)
    s[idx] = x
    return s


def _newton_power(x, lo, hi, lam_i, c_i, pm, target, tol, max_iter):
    for _ in range(max_iter):
        den = lam_i + x[:, None]
        pw = np.sum(c_i / den ** 2, axis=1)
        done = np.abs(pw / pm - 1.0) <= tol
        if done.all():
            break
        phi = 1.0 / np.sqrt(pw) - target
        dphi = np.sum(c_i / den ** 3, axis=1) / pw ** 1.5
        step = phi / dphi
        x_new = x - step
        lo = np.where(phi < 0, x, lo)
        hi = np.where(phi > 0, x, hi)
        bad = ~((x_new > lo) & (x_new < hi)) | ~np.isfinite(x_new)
        x_new = np.where(bad, 0.5 * (lo + hi), x_new)
        x = np.where(done, x, x_new)
    return x


def update_beamformers(state: SolverState, prob: Problem, cfg: SolverConfig) -> np.ndarray:
    if prob.directions is not None:
        return _update_power_only(state, prob, cfg)
    B, K, N = prob.h.shape
    weights = state.d * np.abs(state.u) ** 2
    A = np.einsum("bkn,k,bkm->bnm", prob.h, weights, prob.h.conj())
    A = 0.5 * (A + A.conj().transpose(0, 2, 1))
    A += (state.c / prob.params.eta)[:, None, None] * np.eye(N)
    lam, V = np.linalg.eigh(A)
    rhs = (state.d * state.u)[:, None] * prob.own_channels
    rhs[~state.active] = 0.0
    proj = np.einsum("kni,kn->ki", V[prob.serving].conj(), rhs)
    coef = np.zeros((B, N))
    np.add.at(coef, prob.serving, np.abs(proj) ** 2)
    if np.any((lam.min(axis=1) <= 0) & (coef.sum(axis=1) > 0) & (prob.p_max <= 0)):
        raise SingularSystemError("beamformer system is singular")
    s = _power_root(lam, coef, prob.p_max, cfg.root_tol)
    den = lam[prob.serving] + s[prob.serving][:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        coeff = np.where(np.abs(proj) > 0, proj / den, 0.0)
    w = np.einsum("kni,ki->kn", V[prob.serving], coeff)
    state.w, state.s = w, s
    return w


def _update_power_only(state: SolverState, prob: Problem, cfg: SolverConfig) -> np.ndarray:
    """Scalar version of the beamformer update along fixed directions."""
    v = prob.directions
    weights = state.d * np.abs(state.u) ** 2
    # |h_{b_k,j}^H v_k|^2 for every stream k and receiver j
    g = np.abs(np.einsum("kjn,kn->kj", prob.h[prob.serving].conj(), v)) ** 2
    a = g @ weights + state.c[prob.serving] / prob.params.eta
    rhs = state.d * state.u * np.einsum("kn,kn->k", v.conj(), prob.own_channels)
    rhs[~state.active] = 0.0
    counts = prob.users_per_bs
    M = max(int(counts.max()), 1)
    lam = np.ones((prob.B, M))
    coef = np.zeros((prob.B, M))
    slot = np.zeros(prob.K, dtype=int)
    for b in range(prob.B):
        ks = np.flatnonzero(prob.serving == b)
        slot[ks] = np.arange(len(ks))
    lam[prob.serving, slot] = a
    coef[prob.serving, slot] = np.abs(rhs) ** 2
    s = _power_root(lam, coef, prob.p_max, cfg.root_tol)
    with np.errstate(divide="ignore", invalid="ignore"):
        x = np.where(np.abs(rhs) > 0, rhs / (a + s[prob.serving]), 0.0)
    state.w, state.s = x[:, None] * v, s
    return state.w


# -- receiver, local and dual updates -------------------------------------------

def update_receivers(state: SolverState, prob: Problem) -> np.ndarray:
    state.u = metrics.mmse_receivers(prob.h, state.w, prob.serving, prob.noise)
    state.u[~state.active] = 0.0
    return state.u


def update_locals(state: SolverState, prob: Problem, tight: bool = False):
    """Local SINR, rate and power variables from the current beamformers.

    With ``tight`` the receivers are assumed to be MMSE for ``state.w`` and
    the SINR is read off the MSE exactly instead of through its tangent.
    """
    eps = metrics.mse_all(prob.h, state.w, prob.serving, state.u, prob.noise)
    gp = state.gamma_prev
    if tight:
        with np.errstate(divide="ignore"):
            gamma = 1.0 / eps - 1.0
    else:
        gamma = -eps * (1.0 + gp) ** 2 + (1.0 + 2.0 * gp)
    gamma = np.where(state.active, np.maximum(gamma, 0.0), 0.0)
    r = np.sqrt(prob.alpha_int * np.bincount(prob.serving, weights=np.log1p(gamma),
                                             minlength=prob.B))
    tx = np.bincount(prob.serving, weights=np.sum(np.abs(state.w) ** 2, axis=1),
                     minlength=prob.B)
    z = tx / prob.params.eta + prob.p_cp + prob.rd(r)
    p = float(z.sum())
    q = _lin_coeffs(prob, state.r_prev, state.z_prev, state.p_prev)
    if prob.objective == "netee":
        t = 2.0 * q * r - q ** 2 * p
    else:
        t = 2.0 * q * r - q ** 2 * z
    state.gamma, state.r, state.z, state.p, state.t = gamma, r, z, p, t
    return gamma, r, z, t


def update_duals(state: SolverState, prob: Problem, rho: float):
    c_used = state.c_prev if prob.objective == "netee" else _c_from(
        prob, state.r_prev, state.z_prev, state.p_prev)
    f = _f_from(prob, state.r, state.r_prev, state.z_prev, state.p_prev, c_used)
    target = f[prob.serving] * prob.alpha_int * (1.0 + state.gamma_prev) ** 2 / (state.gamma + 1.0)
    target = np.where(state.active, target, 0.0)
    d = state.d + rho * (target - state.d)
    state.f, state.d = f, d
    state.c = _c_from(prob, state.r_prev, state.z_prev, state.p_prev)
    state.a = np.ones(prob.B) if prob.objective == "netee" else prob.weights.copy()
    return f, d, state.c


def surrogate_value(state: SolverState, prob: Problem) -> float:
    if prob.objective == "netee":
        return float(state.t.sum())
    return float(np.dot(prob.weights, state.t))


def refresh_linearization(state: SolverState, prob: Problem):
    """Receivers and linearization point at the current beamformers."""
    update_receivers(state, prob)
    gamma, r, z, p = true_locals(prob, state.w)
    gamma = np.where(state.active, gamma, 0.0)
    state.gamma, state.r, state.z, state.p = gamma, r, z, p
    state.snapshot()
    state.c = _c_from(prob, r, z, p)
    state.c_prev = state.c.copy()


# -- diagnostics -------------------------------------------------------------------

def objective_gradient(prob: Problem, w) -> np.ndarray:
    """Wirtinger gradient ``dF/dw_k^*`` of the true objective, shape (K, N).

    Also returns the per-BS slope ``psi_b`` of the objective in transmit power.
    """
    w = np.asarray(w, dtype=complex)
    G = metrics.cross_gains(prob.h, w, prob.serving)      # G[j, k]: stream j at user k
    P = np.abs(G) ** 2
    T = P.sum(axis=0) + prob.noise
    beta = T - np.diag(P)
    R = prob.alpha * np.bincount(prob.serving, weights=np.log1p(np.diag(P) / beta),
                                 minlength=prob.B)
    tx = np.bincount(prob.serving, weights=np.sum(np.abs(w) ** 2, axis=1), minlength=prob.B)
    pr = prob.params
    y = LOG2E * R / RATE_UNIT
    Z = tx / pr.eta + prob.p_cp + pr.p_rd * y ** pr.m
    dy = pr.m * y ** (pr.m - 1.0) if pr.m != 1.0 else np.ones_like(y)
    dZ = pr.p_rd * dy * LOG2E / RATE_UNIT
    if prob.objective == "netee":
        Rt, Zt = R.sum(), Z.sum()
        phi = LOG2E * (Zt - Rt * dZ) / Zt ** 2
        psi = np.full(prob.B, LOG2E * Rt / (pr.eta * Zt ** 2))
    else:
        phi = prob.weights * LOG2E * (Z - R * dZ) / Z ** 2
        psi = prob.weights * LOG2E * R / (pr.eta * Z ** 2)
    D = prob.alpha * phi[prob.serving]
    C = D[None, :] * G * (1.0 / T[None, :] - (1.0 - np.eye(prob.K)) / beta[None, :])
    grad = np.einsum("jk,jkn->jn", C, prob.h[prob.serving]) - psi[prob.serving, None] * w
    return grad, psi


@dataclass
class KKTCheck:
    residual: np.ndarray      # per-BS relative stationarity residual
    multiplier: np.ndarray    # per-BS power price, in units of the transmit power cost slope
    slackness: np.ndarray     # multiplier * (P_b - power), watts

    @property
    def max_residual(self) -> float:
        return float(self.residual.max()) if self.residual.size else 0.0


def kkt_check(prob: Problem, w, active_tol: float = 1e-6, off_tol: float = OFF_TOL) -> KKTCheck:
    """First-order optimality of ``w`` for the true problem.

    The power price of BS ``b`` is the least-squares multiplier when its
    budget is (within ``active_tol``) exhausted and zero otherwise, so
    complementary slackness holds by construction and the residual of
    ``grad_b F = s_b w_b`` measures stationarity. Residuals are relative to
    the size of the two gradient parts (desired signal and power cost).
    Streams that are switched off contribute a zero gradient; streams whose
    power is below ``off_tol * P_b`` are taken to be off, which is where the
    iterates of a fading stream converge to.
    """
    w = switch_off_faded(prob, w, off_tol)
    grad, psi = objective_gradient(prob, w)
    tx = np.bincount(prob.serving, weights=np.sum(np.abs(w) ** 2, axis=1), minlength=prob.B)
    inner = np.bincount(prob.serving, weights=np.real(np.sum(w.conj() * grad, axis=1)),
                        minlength=prob.B)
    active = tx >= prob.p_max * (1.0 - active_tol)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(active & (tx > 0), np.maximum(inner / tx, 0.0), 0.0)
    res_k = np.sum(np.abs(grad - s[prob.serving, None] * w) ** 2, axis=1)
    cost_k = np.sum(np.abs((psi[prob.serving] + s[prob.serving])[:, None] * w) ** 2, axis=1)
    res_b = np.sqrt(np.bincount(prob.serving, weights=res_k, minlength=prob.B))
    # the signal part balances the cost part at a stationary point
    scale = 2.0 * np.sqrt(np.bincount(prob.serving, weights=cost_k, minlength=prob.B))
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(scale > 0, res_b / scale, np.where(res_b > 0, np.inf, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        s_rel = np.where(psi > 0, s / psi, 0.0)
    return KKTCheck(residual=rel, multiplier=s_rel, slackness=s_rel * (prob.p_max - tx))


def switch_off_faded(prob: Problem, w, off_tol: float = OFF_TOL) -> np.ndarray:
    """Copy of ``w`` with streams below ``off_tol * P_b`` set to exactly zero."""
    w = np.array(w, dtype=complex)
    w[np.sum(np.abs(w) ** 2, axis=1) < off_tol * prob.p_max[prob.serving]] = 0.0
    return w


def polish_stationary(prob: Problem, w, active_tol: float = 1e-6, drop_tol: float = 1e-10):
    """Refine an SCA end point by solving its KKT equations directly.

    Near the optimum the objective is flat to machine precision, so
    objective-driven steps stop while the gradient residual can still be
    ~1e-4. With the switched-off streams and the exhausted budgets fixed
    from ``w``, Levenberg-Marquardt solves ``grad_k F = s_b w_k`` and
    ``||W_b||^2 = P_b``. The result is kept only if it is feasible, has a
    smaller residual and does not lower the objective by more than
    ``drop_tol`` (relative). Returns ``(w, accepted)``.
    """
    w = switch_off_faded(prob, w)
    on = np.sum(np.abs(w) ** 2, axis=1) > 0
    n = int(on.sum()) * prob.N
    if n == 0:
        return w, False
    tx = np.bincount(prob.serving, weights=np.sum(np.abs(w) ** 2, axis=1), minlength=prob.B)
    act = np.flatnonzero(tx >= prob.p_max * (1.0 - active_tol))
    grad, psi = objective_gradient(prob, w)
    inner = np.bincount(prob.serving, weights=np.real(np.sum(w.conj() * grad, axis=1)),
                        minlength=prob.B)
    s0 = np.maximum(inner[act] / tx[act], 0.0)
    scale = np.sqrt(np.sum(np.abs(psi[prob.serving, None] * w) ** 2))
    if not scale > 0:
        return w, False

    def unpack(x):
        v = np.zeros_like(w)
        v[on] = (x[:n] + 1j * x[n:2 * n]).reshape(-1, prob.N)
        s = np.zeros(prob.B)
        s[act] = x[2 * n:]
        return v, s

    def equations(x):
        v, s = unpack(x)
        g, _ = objective_gradient(prob, v)
        r = (g - s[prob.serving, None] * v)[on] / scale
        t = np.bincount(prob.serving, weights=np.sum(np.abs(v) ** 2, axis=1), minlength=prob.B)
        return np.concatenate([r.real.ravel(), r.imag.ravel(),
                               (t[act] - prob.p_max[act]) / prob.p_max[act]])

    x0 = np.concatenate([w[on].real.ravel(), w[on].imag.ravel(), s0])
    try:
        with np.errstate(all="ignore"):
            sol = optimize.least_squares(equations, x0, method="lm",
                                         xtol=1e-15, ftol=1e-15, gtol=1e-15)
    except (ValueError, np.linalg.LinAlgError):
        return w, False
    v, s = unpack(sol.x)
    if not np.all(np.isfinite(v)) or np.any(s < 0):
        return w, False
    v = _project_budget(prob, v)
    f_old, f_new = prob.objective_value(w), prob.objective_value(v)
    if not f_new >= f_old - drop_tol * abs(f_old):
        return w, False
    if kkt_check(prob, v, active_tol).max_residual >= kkt_check(prob, w, active_tol).max_residual:
        return w, False
    return v, True


def max_power_slack(w, prob: Problem) -> float:
    """``max_b (sum ||w_k||^2 - P_b) / P_b``; nonpositive when feasible."""
    tx = np.bincount(prob.serving, weights=np.sum(np.abs(w) ** 2, axis=1), minlength=prob.B)
    return float(np.max((tx - prob.p_max) / prob.p_max))


# -- main loop ------------------------------------------------------------------------

@dataclass
class TraceRow:
    iteration: int
    objective: float
    ota: int
    backhaul: int
    max_power_slack: float
    surrogate: float = float("nan")


@dataclass
class EngineResult:
    w: np.ndarray
    state: SolverState
    trace: list[TraceRow]
    converged: bool
    wall_time: float
    inner_iterations: list[int] = field(default_factory=list)

    @property
    def objective(self) -> float:
        return self.trace[-1].objective

    @property
    def objective_trace(self) -> np.ndarray:
        return np.array([row.objective for row in self.trace])


def _stalled(values, cfg: SolverConfig) -> bool:
    if len(values) <= cfg.window:
        return False
    now, then = values[-1], values[-1 - cfg.window]
    return abs(now - then) <= cfg.xi * max(abs(now), 1e-300)


def _check_finite(state: SolverState, value: float):
    if not np.isfinite(value) or not np.all(np.isfinite(state.w)):
        raise DivergenceError("objective or beamformers became non-finite", state)


def _backhaul_per_update(prob: Problem) -> int:
    # d_k of every user, plus (r_b/p)^2 and z_b per BS for the network objective
    return prob.K + (2 * prob.B if prob.objective == "netee" else 0)


def _rate_from_price(prob: Problem, aq, c, mu):
    """Maximizer over ``r >= 0`` of ``2 aq r - c rd(r) - mu r^2``.

    The stationarity condition ``aq = c m P k^m r^(2m-1) + mu r`` has an
    increasing convex right-hand side, so Newton from above is monotone.
    """
    P, m = prob.params.p_rd, prob.params.m
    k = c * m * P * LOG2E ** m
    if m == 1.0:
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(aq > 0, aq / (k + mu), 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        r_mu = np.where(mu > 0, aq / mu, np.inf)
        r_k = np.where(k > 0, (aq / k) ** (1.0 / (2 * m - 1)), np.inf)
    r = np.where(aq > 0, np.minimum(r_mu, r_k), 0.0)
    r = np.where(np.isfinite(r), r, 1e150)
    for _ in range(200):
        g = k * r ** (2 * m - 1) + mu * r - aq
        dg = k * (2 * m - 1) * r ** (2 * m - 2) + mu
        step = np.where(dg > 0, g / np.where(dg > 0, dg, 1.0), 0.0)
        r = np.maximum(r - step, 0.0)
        if np.all(np.abs(step) <= 1e-15 * np.maximum(r, 1e-300)):
            break
    return r


class _SurrogateDual:
    """Dual of the per-iteration convex surrogate in the per-BS rate prices.

    The surrogate keeps the ratio bound and the rate-dependent power of each
    BS but lower-bounds every user rate by
    ``log(1+g0) + 1 - (1+g0) * mse(w, u0)``, which is tight with matching
    gradient at the linearization point. For fixed prices ``mu_b`` the
    beamformers follow in closed form (``d_k = mu_b alpha (1+g0_k)``) and the
    price gradient is ``alpha sum_k bound_k - r_b^2``.
    """

    def __init__(self, state: SolverState, prob: Problem, cfg: SolverConfig):
        self.state, self.prob, self.cfg = state, prob, cfg
        q = _lin_coeffs(prob, state.r_prev, state.z_prev, state.p_prev)
        a = np.ones(prob.B) if prob.objective == "netee" else prob.weights
        self.aq = a * q
        self.c = _c_from(prob, state.r_prev, state.z_prev, state.p_prev)
        self.g1 = 1.0 + state.gamma_prev
        self.const = np.log(self.g1) + 1.0
        self.evals = 0

    def rate_bound(self, w):
        prob = self.prob
        eps = metrics.mse_all(prob.h, w, prob.serving, self.state.u, prob.noise)
        per_user = np.where(self.state.active, self.const - self.g1 * eps, 0.0)
        return prob.alpha_int * np.bincount(prob.serving, weights=per_user, minlength=prob.B)

    def beamformers(self, mu):
        st, prob = self.state, self.prob
        st.d = np.where(st.active, mu[prob.serving] * prob.alpha_int * self.g1, 0.0)
        st.c = self.c
        return update_beamformers(st, prob, self.cfg).copy()

    def __call__(self, x):
        self.evals += 1
        prob = self.prob
        mu = np.exp(x)
        w = self.beamformers(mu)
        rhat = self.rate_bound(w)
        r = _rate_from_price(prob, self.aq, self.c, mu)
        tx = np.bincount(prob.serving, weights=np.sum(np.abs(w) ** 2, axis=1), minlength=prob.B)
        val = (np.sum(2 * self.aq * r - self.c * prob.rd(r) - mu * r ** 2) + np.dot(mu, rhat)
               - np.dot(self.c, tx / prob.params.eta + prob.p_cp))
        grad = (rhat - r ** 2) * mu
        return val, grad

    def primal_value(self, w) -> float:
        """Surrogate objective at ``w`` with the best admissible ``r``."""
        prob = self.prob
        rhat = np.maximum(self.rate_bound(w), 0.0)
        r_free = _rate_from_price(prob, self.aq, self.c, np.zeros(prob.B))
        r = np.minimum(np.sqrt(rhat), r_free)
        tx = np.bincount(prob.serving, weights=np.sum(np.abs(w) ** 2, axis=1), minlength=prob.B)
        return float(np.sum(2 * self.aq * r - self.c * (tx / prob.params.eta + prob.p_cp + prob.rd(r))))


class _SinrDual:
    """Dual of the SINR-form surrogate in per-BS rate and per-user SINR prices.

    Each SINR is lower-bounded by linearizing ``|h^H w_k|^2 / beta_k`` at the
    current point (:func:`eebeam.approx.qol_bound`) with ``beta_k`` the
    interference-plus-noise, which gives the concave quadratic

        g_k(w) = 2 Re(conj(e_k) h^H w_k) - theta_k (I_k(w) + N0),
        e_k = a_k / beta_k,  theta_k = |a_k|^2 / beta_k^2.

    The rate constraint keeps the exact ``log(1 + g_k)``. With prices ``mu_b``
    on the rate constraints and ``lam_k`` on the SINR constraints, every piece
    of the Lagrangian maximizes in closed form: the auxiliary rate ``r_b``, the
    SINR ``gamma_k = mu alpha / lam - 1`` and the beamformers, which solve
    ``(sum_{j != k} lam_j theta_j h h^H + (c_b/eta + s_b) I) w_k = lam_k e_k h_k``.
    """

    def __init__(self, state: SolverState, prob: Problem, cfg: SolverConfig):
        self.state, self.prob, self.cfg = state, prob, cfg
        q = _lin_coeffs(prob, state.r_prev, state.z_prev, state.p_prev)
        a = np.ones(prob.B) if prob.objective == "netee" else prob.weights
        self.aq = a * q
        self.c = _c_from(prob, state.r_prev, state.z_prev, state.p_prev)
        G = metrics.cross_gains(prob.h, state.w, prob.serving)
        P = np.abs(G) ** 2
        a0 = np.diag(G).copy()
        beta0 = P.sum(axis=0) - np.diag(P) + prob.noise
        self.e = a0 / beta0
        self.theta = np.abs(a0) ** 2 / beta0 ** 2
        self.gamma0 = np.abs(a0) ** 2 / beta0
        self.live = state.active & (np.abs(a0) > 0)
        own = prob.own_channels
        self.hh_own = np.einsum("kn,km->knm", own, own.conj())
        self.hh_all = np.einsum("bkn,bkm->bknm", prob.h, prob.h.conj())
        counts = prob.users_per_bs
        self.slot = np.zeros(prob.K, dtype=int)
        for b in range(prob.B):
            ks = np.flatnonzero(prob.serving == b)
            self.slot[ks] = np.arange(len(ks))
        self.M = max(int(counts.max()), 1)
        self.evals = 0

    def sinr_bound(self, w):
        prob = self.prob
        G = metrics.cross_gains(prob.h, w, prob.serving)
        P = np.abs(G) ** 2
        interf = P.sum(axis=0) - np.diag(P)
        g = 2.0 * np.real(np.conj(self.e) * np.diag(G)) - self.theta * (interf + prob.noise)
        return np.where(self.live, g, 0.0)

    def beamformers(self, lam):
        prob, st = self.prob, self.state
        N = prob.N
        wt = np.where(self.live, lam * self.theta, 0.0)
        A = np.einsum("k,bknm->bnm", wt, self.hh_all)
        Mk = A[prob.serving] - wt[:, None, None] * self.hh_own
        Mk = 0.5 * (Mk + Mk.conj().transpose(0, 2, 1))
        Mk += (self.c[prob.serving] / prob.params.eta)[:, None, None] * np.eye(N)
        rhs = np.where(self.live, lam, 0.0)[:, None] * self.e[:, None] * prob.own_channels
        if prob.directions is None:
            ev, V = np.linalg.eigh(Mk)
        else:
            # power-only: the system restricted to the fixed direction is scalar
            v = prob.directions
            ev = np.real(np.einsum("kn,knm,km->k", v.conj(), Mk, v))[:, None]
            V = v[:, :, None]
        n_col = ev.shape[1]
        proj = np.einsum("kni,kn->ki", V.conj(), rhs)
        lam_b = np.ones((prob.B, self.M * n_col))
        coef = np.zeros((prob.B, self.M * n_col))
        cols = self.slot[:, None] * n_col + np.arange(n_col)[None, :]
        lam_b[prob.serving[:, None], cols] = ev
        coef[prob.serving[:, None], cols] = np.abs(proj) ** 2
        # a vanishing price leaves the system singular; the power root still
        # bounds it as long as there is a budget
        if np.any((ev.min(axis=1) <= 0) & (np.abs(proj).sum(axis=1) > 0)
                  & (prob.p_max[prob.serving] <= 0)):
            raise SingularSystemError("beamformer system is singular")
        s = _power_root(lam_b, coef, prob.p_max, self.cfg.root_tol)
        with np.errstate(divide="ignore", invalid="ignore"):
            coeff = np.where(np.abs(proj) > 0, proj / (ev + s[prob.serving][:, None]), 0.0)
        w = np.einsum("kni,ki->kn", V, coeff)
        st.s = s
        return w

    def __call__(self, x):
        self.evals += 1
        prob = self.prob
        B = prob.B
        mu = np.exp(x[:B])
        lam = np.exp(x[B:])
        al = prob.alpha_int
        r = _rate_from_price(prob, self.aq, self.c, mu)
        phi = 2 * self.aq * r - self.c * prob.rd(r) - mu * r ** 2
        ma = mu[prob.serving] * al
        gam = ma / lam - 1.0
        psi = np.where(self.live, ma * np.log(ma / lam) - ma + lam, 0.0)
        w = self.beamformers(lam)
        g = self.sinr_bound(w)
        tx = np.bincount(prob.serving, weights=np.sum(np.abs(w) ** 2, axis=1), minlength=B)
        omega = np.dot(np.where(self.live, lam, 0.0), g) - np.dot(self.c, tx) / prob.params.eta
        val = phi.sum() + psi.sum() + omega - np.dot(self.c, prob.p_cp)
        log_terms = np.where(self.live, np.log(ma / lam), 0.0)
        g_mu = (al * np.bincount(prob.serving, weights=log_terms, minlength=B) - r ** 2) * mu
        g_lam = np.where(self.live, (g - gam) * lam, 0.0)
        self._w = w
        return val, np.concatenate([g_mu, g_lam])

    def primal_value(self, w) -> float:
        prob = self.prob
        g = self.sinr_bound(w)
        if np.any(g[self.live] <= -1.0):
            return -np.inf
        rate = prob.alpha_int * np.bincount(prob.serving, weights=np.log1p(g), minlength=prob.B)
        r_free = _rate_from_price(prob, self.aq, self.c, np.zeros(prob.B))
        r = np.minimum(np.sqrt(np.maximum(rate, 0.0)), r_free)
        tx = np.bincount(prob.serving, weights=np.sum(np.abs(w) ** 2, axis=1), minlength=prob.B)
        return float(np.sum(2 * self.aq * r - self.c * (tx / prob.params.eta + prob.p_cp + prob.rd(r))))

    def start(self):
        st, prob = self.state, self.prob
        r0 = np.maximum(st.r_prev, R_FLOOR)
        mu = np.where(st.f > 0, st.f, (2 * self.aq - self.c * prob.rd_prime(r0)) / (2 * r0))
        mu = np.maximum(mu, 1e-300)
        lam = mu[prob.serving] * prob.alpha_int / (1.0 + self.gamma0)
        if getattr(st, "lam", None) is not None and st.lam.shape == lam.shape:
            lam = np.where(st.lam > 0, st.lam, lam)
        return np.concatenate([np.log(mu), np.log(np.maximum(lam, 1e-300))])


def _project_budget(prob: Problem, w):
    tx = np.bincount(prob.serving, weights=np.sum(np.abs(w) ** 2, axis=1), minlength=prob.B)
    shrink = np.sqrt(np.minimum(1.0, prob.p_max / np.maximum(tx, 1e-300)))
    return w * shrink[prob.serving][:, None]


def _line_search(prob: Problem, make, best, f_best, max_factor):
    kappa = 2.0
    while kappa <= max_factor:
        w = _project_budget(prob, make(kappa))
        val = prob.objective_value(w)
        if not val > f_best:
            break
        best, f_best = w, val
        kappa *= 2.0
    return best, f_best


def _extrapolate(prob: Problem, w_prev, w_new, f_new, max_factor, geometric=False):
    """Safeguarded acceleration of one SCA step.

    First a doubling line search along ``w_new - w_prev``; then, from the best
    point, the per-user amplitude change is extrapolated geometrically, which
    speeds up streams whose power decays towards zero. Candidates are scaled
    back onto the power budget and only accepted if the objective improves.
    """
    step = w_new - w_prev
    best, f_best = _line_search(prob, lambda k: w_prev + k * step, w_new, f_new, max_factor)
    if not geometric:
        return best
    n_prev = np.linalg.norm(w_prev, axis=1)
    n_new = np.linalg.norm(w_new, axis=1)
    ok = (n_prev > 0) & (n_new > 0)
    ratio = np.where(ok, n_new / np.where(ok, n_prev, 1.0), 1.0)
    base = best
    best, f_best = _line_search(prob, lambda k: base * (ratio ** (k - 1.0))[:, None],
                                best, f_best, max_factor)
    # streams that are fading out: try switching them off outright
    for k in np.argsort(ratio):
        if ratio[k] >= 1.0:
            break
        trial = best.copy()
        trial[k] = 0.0
        val = prob.objective_value(trial)
        if val > f_best:
            best, f_best = trial, val
    return best


def _solve_surrogate(state: SolverState, prob: Problem, cfg: SolverConfig) -> int:
    """Maximize the convex surrogate at the current point through its dual.

    The dual is smooth and convex in log-prices; L-BFGS drives it down and the
    beamformers are recovered from the final prices. A step that would lower
    the true objective is rejected (it can only happen from round-off near
    convergence) and the iterate stays put.
    """
    if cfg.surrogate == "mse":
        dual = _SurrogateDual(state, prob, cfg)
        x0 = np.log(np.where(state.f > 0, state.f, 1.0))
    else:
        dual = _SinrDual(state, prob, cfg)
        x0 = dual.start()
    scale = max(abs(dual.primal_value(state.w)), 1e-300)
    fun = lambda x: tuple(v / scale for v in dual(x))
    B = prob.B
    s_prev, lam_prev = state.s.copy(), state.lam
    w_prev = state.w
    try:
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            res = optimize.minimize(fun, x0, jac=True, method="L-BFGS-B",
                                    options={"maxiter": cfg.inner_max_iter, "ftol": cfg.inner_tol,
                                             "gtol": cfg.inner_tol, "maxcor": 30})
        x = res.x
        mu = np.exp(x[:B])
        if cfg.surrogate == "mse":
            w = dual.beamformers(mu)
        else:
            state.lam = np.exp(x[B:])
            w = dual.beamformers(state.lam)
        ok = np.all(np.isfinite(x)) and np.all(np.isfinite(w))
    except np.linalg.LinAlgError:
        ok = False
    f_prev = prob.objective_value(w_prev)
    if not ok:
        log.debug("surrogate dual failed numerically; step rejected")
        w, mu, state.lam = w_prev, state.f, lam_prev
    f_new = prob.objective_value(w)
    if not f_new >= f_prev:
        w, state.s = w_prev, s_prev
    elif cfg.extrapolate:
        w = _extrapolate(prob, w_prev, w, f_new, cfg.extrapolate, cfg.geometric)
    state.w = w
    state.f = mu
    state.c = _c_from(prob, state.r_prev, state.z_prev, state.p_prev)
    gamma = metrics.sinr_all(prob.h, w, prob.serving, prob.noise)
    # duals of the MSE form implied by the prices at the new point
    state.d = np.where(state.active, mu[prob.serving] * prob.alpha_int * (1.0 + gamma), 0.0)
    update_receivers(state, prob)
    update_locals(state, prob)
    return dual.evals


def _rd_free_equivalent(prob: Problem):
    """Network EE with a linear rate-dependent power has the same maximizers
    as without it: ``1/EE`` only shifts by ``P_RD`` per Gbit. Returns the
    equivalent problem and the map from its objective to the true one, or
    ``None`` when the shortcut does not apply."""
    pr = prob.params
    if prob.objective != "netee" or pr.m != 1.0 or pr.p_rd == 0.0:
        return None
    shift = pr.p_rd / 1e9             # J per bit

    def to_true(ee):
        return 1.0 / (1.0 / ee + shift) if ee > 0 else 0.0

    return replace(prob, params=pr.with_(p_rd=0.0)), to_true


def run_engine(prob: Problem, cfg: SolverConfig | None = None, w0=None,
               state: SolverState | None = None) -> EngineResult:
    """Run the update loop until the objective stalls or ``max_iter`` is reached."""
    cfg = SolverConfig() if cfg is None else cfg
    equivalent = _rd_free_equivalent(prob)
    if equivalent is None:
        return _run_loop(prob, cfg, w0, state)
    reduced, to_true = equivalent
    res = _run_loop(reduced, cfg, w0, state)
    res.trace = [replace(row, objective=to_true(row.objective)) for row in res.trace]
    st = res.state
    st.gamma, st.r, st.z, st.p = true_locals(prob, st.w)
    return res


def _run_loop(prob: Problem, cfg: SolverConfig, w0, state) -> EngineResult:
    start = time.perf_counter()
    state = init_state(prob, w0) if state is None else state
    value = prob.objective_value(state.w)
    trace = [TraceRow(0, value, state.ota, state.backhaul, max_power_slack(state.w, prob),
                      surrogate_value(state, prob))]
    values = [value]
    inner_counts = []
    converged = False
    mode = cfg.mode
    if mode == "centralized":
        # every BS ships its full CSI to a controller once per channel realization
        state.backhaul += 2 * (prob.B - 1) * prob.K * prob.N
        for n in range(1, cfg.max_iter + 1):
            state.w = switch_off_faded(prob, state.w)
            refresh_linearization(state, prob)
            state.ota += 1
            inner_counts.append(_solve_surrogate(state, prob, cfg))
            state.iteration = n
            value = prob.objective_value(state.w)
            _check_finite(state, value)
            values.append(value)
            trace.append(TraceRow(n, value, state.ota, state.backhaul,
                                  max_power_slack(state.w, prob), surrogate_value(state, prob)))
            if _stalled(values, cfg):
                converged = True
                break
        if cfg.polish:
            state.w, accepted = polish_stationary(prob, state.w)
            if accepted:
                state.iteration += 1
                refresh_linearization(state, prob)
                value = prob.objective_value(state.w)
                trace.append(TraceRow(state.iteration, value, state.ota, state.backhaul,
                                      max_power_slack(state.w, prob), surrogate_value(state, prob)))
    else:
        s = cfg.inner_updates
        per_update = _backhaul_per_update(prob)
        n = 0
        while state.ota < cfg.max_iter:
            for j in range(s):
                n += 1
                update_beamformers(state, prob, cfg)
                if j == s - 1:
                    update_receivers(state, prob)
                    state.ota += 1
                update_locals(state, prob, tight=cfg.tight_refresh and j == s - 1)
                update_duals(state, prob, cfg.rho)
                state.snapshot()
                state.backhaul += per_update
                state.iteration = n
                value = prob.objective_value(state.w)
                _check_finite(state, value)
                values.append(value)
                trace.append(TraceRow(n, value, state.ota, state.backhaul,
                                      max_power_slack(state.w, prob), surrogate_value(state, prob)))
            if _stalled(values, cfg.with_(window=cfg.window * s)):
                converged = True
                break
    return EngineResult(w=state.w, state=state, trace=trace, converged=converged,
                        wall_time=time.perf_counter() - start, inner_iterations=inner_counts)
