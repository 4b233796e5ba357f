# -----------------------------------------------------------------------------
# --- sweep_and_report.py ---
"""Drive a small power sweep through the command-line interface.

The `gfmimo` console script is the reproducibility surface of this repo:
design-pilots writes the frame artifact, sweep fills a per-trial CSV
(resumable: re-running it skips finished trials), report condenses the CSV
into one row per (power, receiver). This script calls the same entry point
in-process and prints the artifacts, so it doubles as a template for the
shell equivalent:

  gfmimo design-pilots --j 4 --l 16 --seed 0 --out pilots.frm
  gfmimo sweep --config sweep.cfg --out rows.csv
  gfmimo report --in rows.csv
"""
import pathlib
import tempfile

from gfmimo.cli import main

CONFIG = """\
scenario_id = demo_sweep
n_aps = 16
m_users = 16
k_total = 28
k_pilot = 4
lambda = 0.5
tx_power_dbm_sweep = -10, -4, 2
receivers = bigabp, gabp_mmvamp, zf_mmvamp, genie_gabp
trials = 4
master_seed = 0
frame = {frame}
"""

work = pathlib.Path(tempfile.mkdtemp(prefix="gfmimo_demo_"))
pilots = work / "pilots.frm"
cfg = work / "sweep.cfg"
rows = work / "rows.csv"

print(f"working under {work}")
assert main(["design-pilots", "--j", "4", "--l", "16",
             "--seed", "0", "--out", str(pilots)]) == 0
print("pilot sidecar:", (work / "pilots.frm.json").read_text().strip())

cfg.write_text(CONFIG.format(frame=pilots))
assert main(["sweep", "--config", str(cfg), "--out", str(rows)]) == 0
n_rows = len(rows.read_text().splitlines()) - 1
print(f"sweep wrote {n_rows} trial rows "
      "(3 powers x 4 trials x 4 receivers); re-running would be a no-op")

print("\nper-(power, receiver) summary:")
assert main(["report", "--in", str(rows)]) == 0
