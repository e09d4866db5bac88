"""Network geometry, user drops and channel generation.

The default deployment is a 7-cell hexagonal layout on a torus (wrap-around),
users on the cell edge, 35 + 30 log10(d) path loss with log-normal shadowing
and i.i.d. Rayleigh fading per antenna.
"""
from __future__ import annotations

from dataclasses import dataclass, field, asdict, replace

import numpy as np


class ScenarioError(ValueError):
    pass


class UnsupportedGeometryError(ScenarioError):
    pass


class AllocationIncompleteError(ScenarioError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    """Deployment and frame parameters.

    ``tau_ul`` / ``tau_dl`` default to the total number of users, i.e. one
    orthogonal pilot per user in both directions.
    """
    B: int = 7
    N: int = 4
    L: int = 2
    inter_bs_distance: float = 120.0
    cell_radius: float = 60.0
    bandwidth: float = 20e6
    coherence_uses: int = 100
    tau_ul: int | None = None
    tau_dl: int | None = None
    noise_power: float = 10 ** (-98 / 10) * 1e-3
    shadowing_std_db: float = 8.0
    wrap_around: bool = True
    seed: int = 0

    def __post_init__(self):
        errors = self.validate()
        if errors:
            raise ScenarioError("; ".join(errors))

    @property
    def n_users(self) -> int:
        return self.B * self.L

    @property
    def pilots_ul(self) -> int:
        return self.n_users if self.tau_ul is None else self.tau_ul

    @property
    def pilots_dl(self) -> int:
        return self.n_users if self.tau_dl is None else self.tau_dl

    @property
    def overhead_fraction(self) -> float:
        """Share of the coherence block left for data, 1 - (tau_ul + tau_dl)/U."""
        return 1.0 - (self.pilots_ul + self.pilots_dl) / self.coherence_uses

    @property
    def alpha(self) -> float:
        """Effective bandwidth in Hz after pilot overhead."""
        return self.overhead_fraction * self.bandwidth

    @property
    def serving(self) -> np.ndarray:
        return np.repeat(np.arange(self.B), self.L)

    def validate(self) -> list[str]:
        errors = []
        if self.B < 1:
            errors.append("B must be >= 1")
        if self.N < 1:
            errors.append("N must be >= 1")
        if self.L < 0:
            errors.append("L must be >= 0")
        if self.bandwidth <= 0:
            errors.append("bandwidth must be > 0")
        if self.noise_power <= 0:
            errors.append("noise_power must be > 0")
        if self.L >= 1:
            if self.pilots_ul < self.L:
                errors.append("tau_ul must be >= users per cell")
            if self.pilots_dl < self.L:
                errors.append("tau_dl must be >= users per cell")
        if self.pilots_ul + self.pilots_dl >= self.coherence_uses:
            errors.append("tau_ul + tau_dl must be < coherence_uses")
        return errors

    def with_(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Layout:
    bs_positions: np.ndarray          # (B, 2) meters
    wrap_shifts: np.ndarray           # (S, 2) torus translations, row 0 is the origin

    @property
    def B(self) -> int:
        return len(self.bs_positions)

    def displacement(self, points: np.ndarray, b: int) -> np.ndarray:
        """Nearest-image displacement from BS ``b`` to each point, shape (P, 2)."""
        points = np.atleast_2d(points)
        cands = points[:, None, :] - (self.bs_positions[b] + self.wrap_shifts)[None, :, :]
        idx = np.argmin(np.einsum("psi,psi->ps", cands, cands), axis=1)
        return cands[np.arange(len(points)), idx]

    def distance(self, points: np.ndarray, b: int) -> np.ndarray:
        return np.linalg.norm(self.displacement(points, b), axis=1)

    def bs_distance(self, b1: int, b2: int) -> float:
        return float(self.distance(self.bs_positions[b1], b2)[0])


@dataclass(frozen=True)
class ChannelSet:
    """Channels ``h[b, k]`` (length-N complex vectors) from every BS to every user."""
    h: np.ndarray                     # (B, K, N) complex
    path_gain: np.ndarray             # (B, K) linear
    serving: np.ndarray               # (K,) serving BS index

    @property
    def B(self) -> int:
        return self.h.shape[0]

    @property
    def K(self) -> int:
        return self.h.shape[1]

    @property
    def N(self) -> int:
        return self.h.shape[2]

    def users_of(self, b: int) -> np.ndarray:
        return np.flatnonzero(self.serving == b)

    def own_gain(self) -> np.ndarray:
        """Path gain from each user's serving BS, shape (K,)."""
        return self.path_gain[self.serving, np.arange(self.K)]


@dataclass(frozen=True)
class ObservedChannelSet(ChannelSet):
    pilot_group: np.ndarray = field(default=None)   # (K,) pilot resource index


def hex_positions(d: float) -> np.ndarray:
    angles = np.deg2rad(np.arange(6) * 60.0)
    ring = d * np.column_stack([np.cos(angles), np.sin(angles)])
    return np.vstack([np.zeros((1, 2)), ring])


def build_layout(config: ScenarioConfig) -> Layout:
    d = config.inter_bs_distance
    if config.B == 1:
        return Layout(np.zeros((1, 2)), np.zeros((1, 2)))
    if config.wrap_around:
        if config.B != 7:
            raise UnsupportedGeometryError(
                f"wrap-around is defined for 7 cells only, got B={config.B}")
        # translations of the 7-cell cluster on the hexagonal lattice (i=2, j=1)
        a1 = np.array([d, 0.0])
        a2 = np.array([d / 2, d * np.sqrt(3) / 2])
        t1 = 2 * a1 + a2
        t2 = -a1 + 3 * a2
        shifts = np.array([[0.0, 0.0], t1, -t1, t2, -t2, t1 - t2, t2 - t1])
        return Layout(hex_positions(d), shifts)
    if config.B > 7:
        raise UnsupportedGeometryError("at most 7 cells are supported")
    return Layout(hex_positions(d)[: config.B], np.zeros((1, 2)))


def drop_users(layout: Layout, config: ScenarioConfig, rng: np.random.Generator) -> np.ndarray:
    """Place ``L`` users per cell uniformly on the circle of radius ``cell_radius``.

    Returns positions of shape (B*L, 2), ordered cell by cell.
    """
    if config.L == 0:
        return np.zeros((0, 2))
    theta = rng.uniform(0.0, 2 * np.pi, size=(layout.B, config.L))
    offsets = config.cell_radius * np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    return (layout.bs_positions[:, None, :] + offsets).reshape(-1, 2)


def path_gain_db(distance_m, shadow_db=0.0):
    """Path loss in dB, ``35 + 30 log10(d) + shadow``."""
    distance_m = np.asarray(distance_m, dtype=float)
    if np.any(distance_m <= 0):
        raise ValueError("distance must be positive")
    return 35.0 + 30.0 * np.log10(distance_m) + shadow_db


def link_gains(layout: Layout, positions: np.ndarray, config: ScenarioConfig,
               rng: np.random.Generator) -> np.ndarray:
    """Linear path gains (B, K) including per-link log-normal shadowing."""
    K = len(positions)
    dist = np.stack([layout.distance(positions, b) for b in range(layout.B)]) if K else np.zeros((layout.B, 0))
    shadow = rng.normal(0.0, config.shadowing_std_db, size=(layout.B, K))
    return 10.0 ** (-path_gain_db(dist, shadow) / 10.0) if K else dist


def generate_channels(path_gain: np.ndarray, serving: np.ndarray, n_antennas: int,
                      rng: np.random.Generator) -> ChannelSet:
    B, K = path_gain.shape
    g = rng.standard_normal((B, K, n_antennas)) + 1j * rng.standard_normal((B, K, n_antennas))
    h = np.sqrt(path_gain / 2.0)[:, :, None] * g
    return ChannelSet(h=h, path_gain=path_gain, serving=np.asarray(serving))


@dataclass(frozen=True)
class Drop:
    config: ScenarioConfig
    layout: Layout
    positions: np.ndarray
    channels: ChannelSet
    seed: tuple


def drop_seed(seed: int, index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed), int(index)])


def make_drop(config: ScenarioConfig, index: int = 0, seed: int | None = None) -> Drop:
    """One independent network realization.

    Geometry, shadowing and fading use separate child streams of
    ``SeedSequence([seed, index])`` so that e.g. changing ``N`` does not
    move the users.
    """
    seed = config.seed if seed is None else seed
    ss_geo, ss_shadow, ss_fade = drop_seed(seed, index).spawn(3)
    layout = build_layout(config)
    positions = drop_users(layout, config, np.random.default_rng(ss_geo))
    gains = link_gains(layout, positions, config, np.random.default_rng(ss_shadow))
    channels = generate_channels(gains, config.serving, config.N, np.random.default_rng(ss_fade))
    return Drop(config, layout, positions, channels, (int(seed), int(index)))


def contaminate(channels: ChannelSet, alloc) -> ObservedChannelSet:
    """Channels seen by the BSs when uplink pilots are reused.

    ``alloc`` is a :class:`~eebeam.pilots.PilotAllocation` or any sequence of
    user groups. Every user must appear in exactly one group.
    """
    groups = getattr(alloc, "groups", alloc)
    K = channels.K
    pilot_group = np.full(K, -1)
    for i, grp in enumerate(groups):
        for k in grp:
            if pilot_group[k] != -1:
                raise AllocationIncompleteError(f"user {k} is assigned twice")
            pilot_group[k] = i
    missing = np.flatnonzero(pilot_group < 0)
    if missing.size:
        raise AllocationIncompleteError(f"users without pilot: {missing.tolist()}")
    n_groups = len(groups)
    # sum channels per pilot group, then scatter back to members
    membership = np.zeros((K, n_groups))
    membership[np.arange(K), pilot_group] = 1.0
    group_sum = np.einsum("bkn,kg->bgn", channels.h, membership)
    h_tilde = group_sum[:, pilot_group, :]
    return ObservedChannelSet(h=h_tilde, path_gain=channels.path_gain,
                              serving=channels.serving, pilot_group=pilot_group)
