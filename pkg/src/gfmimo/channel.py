"""Cell-free topology, large-scale fading, and sparse channel realizations.

N access points (APs) sit on a square mesh over an ``area_side_m`` square;
M single-antenna users drop uniformly at random.  Large-scale gain per
AP-user link follows the urban-microcell pathloss 30.5 + 36.7 log10(d) dB
on the 3-D distance (AP height 10 m, user height 1.65 m) plus independent
log-normal shadowing.  Each user is active for a whole frame independently
with probability ``lambda``; an active user's channel vector is complex
Gaussian with per-AP variances gamma, an inactive user's is exactly zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.constants import k as _BOLTZMANN

AP_HEIGHT_M = 10.0
USER_HEIGHT_M = 1.65
SHADOWING_STD_DB = 4.0


@dataclass
class Topology:
    """AP and user positions (meters) inside the service square."""

    ap_positions: np.ndarray  # (N, 2)
    user_positions: np.ndarray  # (M, 2)
    area_side_m: float
    ap_height_m: float = AP_HEIGHT_M
    user_height_m: float = USER_HEIGHT_M

    def __post_init__(self):
        self.ap_positions = np.asarray(self.ap_positions, dtype=float)
        self.user_positions = np.asarray(self.user_positions, dtype=float)
        for name, pos in (("ap", self.ap_positions), ("user", self.user_positions)):
            if pos.ndim != 2 or pos.shape[1] != 2 or pos.shape[0] < 1:
                raise ValueError(f"{name} positions must be (count, 2) with count >= 1")
            if np.any(pos < -1e-9) or np.any(pos > self.area_side_m + 1e-9):
                raise ValueError(f"{name} positions must lie in the service square")

    @property
    def n_aps(self) -> int:
        return self.ap_positions.shape[0]

    @property
    def m_users(self) -> int:
        return self.user_positions.shape[0]


@dataclass
class LargeScale:
    """Per-link pathloss (dB) and linear variance gamma = 10^(-beta/10)."""

    gamma: np.ndarray  # (N, M)
    beta_db: np.ndarray  # (N, M)

    def __post_init__(self):
        self.gamma = np.asarray(self.gamma, dtype=float)
        self.beta_db = np.asarray(self.beta_db, dtype=float)
        if self.gamma.shape != self.beta_db.shape:
            raise ValueError("gamma and beta_db shapes differ")
        if np.any(self.gamma <= 0.0):
            raise ValueError("gamma must be strictly positive")


@dataclass
class ChannelRealization:
    """One frame's worth of truth: channel matrix, activity, noise power."""

    h: np.ndarray  # (N, M) complex
    active: np.ndarray  # (M,) bool
    activity_factor: float
    noise_power_n0: float

    def __post_init__(self):
        # zero is allowed so noiseless sanity checks can share the pipeline
        if self.noise_power_n0 < 0.0:
            raise ValueError("noise_power_n0 must be non-negative")
        if not 0.0 < self.activity_factor <= 1.0:
            raise ValueError("activity factor must lie in (0, 1]")
        # inactive columns are exactly zero by construction; freeze the truth
        self.h.setflags(write=False)
        self.active.setflags(write=False)


def build_topology(n_aps: int, m_users: int, area_side_m: float, seed: int) -> Topology:
    """APs on a cell-centered square mesh, users uniform i.i.d.

    For non-square ``n_aps`` the smallest ceil(sqrt(N)) grid is used and the
    surplus points dropped row-major.
    """
    if n_aps < 1 or m_users < 1:
        raise ValueError("need at least one AP and one user")
    if area_side_m <= 0.0:
        raise ValueError("area side must be positive")
    g = int(np.ceil(np.sqrt(n_aps)))
    centers = (np.arange(g) + 0.5) * (area_side_m / g)
    xx, yy = np.meshgrid(centers, centers, indexing="xy")
    grid = np.column_stack([xx.ravel(), yy.ravel()])[:n_aps]
    rng = np.random.default_rng(seed)
    users = rng.uniform(0.0, area_side_m, size=(m_users, 2))
    return Topology(grid, users, area_side_m)


def pathloss_db(distance_m) -> np.ndarray:
    """Median urban-microcell pathloss 30.5 + 36.7 log10(d) in dB."""
    return 30.5 + 36.7 * np.log10(np.asarray(distance_m, dtype=float))


def pathloss(
    t: Topology, shadowing_seed: int, shadowing_std_db: float = SHADOWING_STD_DB
) -> LargeScale:
    """Urban-microcell pathloss on 3-D distance plus i.i.d. shadowing."""
    diff = t.ap_positions[:, None, :] - t.user_positions[None, :, :]
    d_h2 = np.sum(diff**2, axis=-1)
    dz = t.ap_height_m - t.user_height_m
    d3 = np.sqrt(d_h2 + dz**2)
    rng = np.random.default_rng(shadowing_seed)
    shadow = shadowing_std_db * rng.standard_normal(d3.shape)
    beta = pathloss_db(d3) + shadow
    return LargeScale(gamma=10.0 ** (-beta / 10.0), beta_db=beta)


def sample_channel(
    ls: LargeScale, activity_factor: float, seed: int, noise_power_w: float
) -> ChannelRealization:
    """Bernoulli user activity and CN(0, gamma) coefficients for active users.

    Activity and fading are drawn in a fixed order from one seeded generator,
    so a given seed reproduces the realization bit for bit.
    """
    if not 0.0 < activity_factor <= 1.0:
        raise ValueError("activity factor must lie in (0, 1]")
    n, m = ls.gamma.shape
    rng = np.random.default_rng(seed)
    active = rng.random(m) < activity_factor
    re = rng.standard_normal((n, m))
    im = rng.standard_normal((n, m))
    h = np.sqrt(ls.gamma / 2.0) * (re + 1j * im)
    h[:, ~active] = 0.0
    return ChannelRealization(
        h=h,
        active=active,
        activity_factor=float(activity_factor),
        noise_power_n0=float(noise_power_w),
    )


def noise_floor_dbm(
    subcarrier_bandwidth_hz: float,
    nf_db: float = 5.0,
    temperature_k: float = 293.15,
) -> float:
    """Thermal noise power over one subcarrier in dBm: kTB plus noise figure."""
    if subcarrier_bandwidth_hz <= 0.0:
        raise ValueError("bandwidth must be positive")
    return (
        10.0 * np.log10(1000.0 * _BOLTZMANN * temperature_k)
        + nf_db
        + 10.0 * np.log10(subcarrier_bandwidth_hz)
    )


def dbm_to_watt(p_dbm: float) -> float:
    return 10.0 ** ((p_dbm - 30.0) / 10.0)
