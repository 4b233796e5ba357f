# -----------------------------------------------------------------------------
# --- pilot_design.py ---
"""Design a short low-coherence pilot frame and compare it with random picks.

Eight pilot symbols must distinguish 32 users, so the 32 pilot sequences
live in an 8-dimensional space and cannot be orthogonal. What we can
control is how close to orthogonal the worst pair gets: the mutual
coherence. The Welch bound says how low it can possibly go; the designer
below gets within ~20% of that bound, while i.i.d. Gaussian and random
masked-DFT pilots land at 2-3x the bound.
"""
import numpy as np

from gfmimo import (
    CsidcoConfig,
    csidco_design,
    dft_frame,
    frame_bounds,
    gaussian_frame,
    load_frame,
    mutual_coherence,
    save_frame,
    tighten,
    welch_bound,
)

J, L = 8, 32         # pilot length x user count
SEED = 0
TIGHTEN_ROUNDS = 50
OUT_PATH = "/tmp/pilots_8x32.frm"

wb = welch_bound(J, L)
print(f"frame size {J} x {L}; Welch bound on coherence = {wb:.4f}")

for name, f in [
    ("gaussian", gaussian_frame(J, L, seed=SEED)),
    ("masked-DFT", dft_frame(J, L, seed=SEED)),
]:
    mu = mutual_coherence(f)
    print(f"  {name:10s}: mu = {mu:.4f}  ({mu / wb:.2f}x bound)")

print("running the coherence optimizer ...")
designed = csidco_design(J, L, CsidcoConfig(seed=SEED))
mu0 = mutual_coherence(designed)
hist = designed.coherence_history
print(f"  designed  : mu = {mu0:.4f}  ({mu0 / wb:.2f}x bound)")
print(f"  optimizer trace (best-so-far): {hist[0]:.4f} -> {hist[-1]:.4f} "
      f"over {len(hist)} outer rounds")

# Polar tightening flattens the frame spectrum so the pilots also act as a
# near-tight analysis operator (every user direction is covered evenly).
tightened = tighten(designed, TIGHTEN_ROUNDS)
alpha, beta = frame_bounds(tightened)
mu1 = mutual_coherence(tightened)
print(f"after tightening: mu = {mu1:.4f}, frame bounds "
      f"alpha = {alpha:.4f}, beta = {beta:.4f} (spread {beta - alpha:.2e})")

save_frame(OUT_PATH, tightened)
back = load_frame(OUT_PATH)
assert np.array_equal(back.entries, tightened.entries)
print(f"saved to {OUT_PATH} and verified a bit-exact round trip")
