# -----------------------------------------------------------------------------
# --- channel_walkthrough.py ---
"""Link budget for a cell-free uplink: geometry, pathloss, noise, activity.

Access points and users are dropped uniformly over a square service area.
Each user-to-AP link gets a median urban-microcell pathloss on the 3-D
distance plus log-normal shadowing; small-scale fading is Rayleigh with
that large-scale variance. The numbers printed at the end explain why the
sweeps elsewhere in this repo run single-digit-negative dBm transmit
powers: a 15 kHz subcarrier has a -127 dBm noise floor, and the strongest
few APs per user sit 90-110 dB of pathloss away.
"""
import numpy as np

from gfmimo import (
    build_topology,
    dbm_to_watt,
    noise_floor_dbm,
    pathloss,
    pathloss_db,
    sample_channel,
)

N_APS = 100
M_USERS = 100
AREA_SIDE_M = 1000.0
ACTIVITY = 0.5
SUBCARRIER_HZ = 15e3
TX_POWER_DBM = -6.0
SEED = 7

t = build_topology(N_APS, M_USERS, AREA_SIDE_M, seed=SEED)
print(f"{N_APS} APs / {M_USERS} users over a {AREA_SIDE_M:.0f} m square")
print(f"  AP height {t.ap_height_m} m, user height {t.user_height_m} m")

for d in (10.0, 100.0, 1000.0):
    print(f"  median pathloss at {d:6.0f} m horizontal-ish range: "
          f"{pathloss_db(np.hypot(d, t.ap_height_m - t.user_height_m)):6.1f} dB")

ls = pathloss(t, shadowing_seed=SEED + 1)
best_db = (-10.0 * np.log10(ls.gamma)).min(axis=0)  # strongest AP per user
print("large-scale fading (pathloss + 4 dB shadowing):")
print(f"  strongest-AP loss per user: median {np.median(best_db):.1f} dB, "
      f"worst user {best_db.max():.1f} dB")

n0_dbm = noise_floor_dbm(SUBCARRIER_HZ)
n0_w = dbm_to_watt(n0_dbm)
print(f"noise floor over {SUBCARRIER_HZ / 1e3:.0f} kHz: {n0_dbm:.2f} dBm")

snr_best = TX_POWER_DBM - best_db - n0_dbm
print(f"per-user SNR at the strongest AP for {TX_POWER_DBM:+.0f} dBm transmit:")
print(f"  median {np.median(snr_best):.1f} dB, "
      f"5th pct {np.percentile(snr_best, 5):.1f} dB, "
      f"95th pct {np.percentile(snr_best, 95):.1f} dB")

ch = sample_channel(ls, ACTIVITY, seed=SEED + 2, noise_power_w=n0_w)
n_active = int(ch.active.sum())
print(f"one frame realization: {n_active}/{M_USERS} users active "
      f"(activity factor {ACTIVITY})")

# Column energy of the channel matrix tracks the summed large-scale gain.
e_col = np.sum(np.abs(ch.h) ** 2, axis=0)
g_col = np.sum(ls.gamma, axis=0)
ratio = e_col[ch.active] / g_col[ch.active]
print("  active-column energy / expected energy: "
      f"mean {ratio.mean():.3f} (Rayleigh fading around the mean)")
