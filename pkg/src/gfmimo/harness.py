"""Scenario configuration, seeded Monte-Carlo sweeps, and CSV persistence.

One trial is a fully deterministic function of (scenario, power, seed):
topology -> pathloss/shadowing -> activity/fading -> payload bits -> noise,
then every requested receiver consumes that same realization (witnessed by
a content hash carried on each result row).  Receivers all operate in a
noise-normalized domain -- received samples and the true channel are
rescaled so the per-sample noise power is exactly one -- which leaves BER,
NMSE, and activity decisions invariant while keeping the estimators'
numerics well-conditioned across the whole transmit-power sweep.

Sweep seeds derive from the master seed through a splitmix64 chain keyed
by (power index, trial index), so results are independent of execution
order and of which receivers are enabled.  Output rows serialize to a
canonically sorted CSV with a fixed column set; re-running a sweep against
an existing file skips the (power, seed) pairs already present.
"""

from __future__ import annotations

import csv
import hashlib
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import baselines, bigabp, channel, init_ce, metrics, signal
from .exceptions import ConfigError, NumericError, SolverError
from .frames import FrameMatrix

CSV_COLUMNS = (
    "scenario_id",
    "seed",
    "tx_power_dbm",
    "receiver",
    "ber",
    "nmse",
    "md",
    "fa",
    "throughput_bits",
    "iterations_run",
)

RECEIVERS = (
    "bigabp",
    "genie_gabp",
    "gabp_mmvamp",
    "zf_mmvamp",
    "mmvamp",
    "mns",
    "genie_mmse",
)

_MASK64 = (1 << 64) - 1


@dataclass
class Scenario:
    """Complete system configuration for one sweep.

    Defaults are the reference full-scale setup: 100 APs and 100 users on
    a 1 km square, activity factor 0.5, K_p = 14 pilot slots out of
    K = 140 total at 15 kHz subcarrier spacing, 32 message-passing sweeps
    with damping 0.5, and transmit powers capped at 16 dBm.
    """

    scenario_id: str = "default"
    n_aps: int = 100
    m_users: int = 100
    activity_factor: float = 0.5
    k_total: int = 140
    k_pilot: int = 14
    subcarrier_khz: float = 15.0
    tx_power_dbm_sweep: tuple = (-16.0, -10.0, -4.0, 2.0, 8.0, 16.0)
    t_max: int = 32
    eta: float = 0.5
    receivers: tuple = RECEIVERS
    trials: int = 10
    master_seed: int = 0
    area_side_m: float = 1000.0
    shadowing_std_db: float = 4.0

    def __post_init__(self):
        self.tx_power_dbm_sweep = tuple(float(p) for p in self.tx_power_dbm_sweep)
        self.receivers = tuple(self.receivers)
        if self.n_aps < 1 or self.m_users < 1:
            raise ConfigError("need at least one AP and one user")
        if not 0.0 < self.activity_factor <= 1.0:
            raise ConfigError("activity factor must lie in (0, 1]")
        if self.k_pilot < 1 or self.k_pilot >= self.k_total:
            raise ConfigError("need 1 <= k_pilot < k_total")
        if self.subcarrier_khz <= 0.0:
            raise ConfigError("subcarrier spacing must be positive")
        if not self.tx_power_dbm_sweep:
            raise ConfigError("power sweep must be non-empty")
        if max(self.tx_power_dbm_sweep) > 16.0:
            raise ConfigError("transmit power is capped at 16 dBm")
        if self.t_max < 1:
            raise ConfigError("t_max must be >= 1")
        if not 0.0 < self.eta <= 1.0:
            raise ConfigError("damping factor must lie in (0, 1]")
        if not self.receivers:
            raise ConfigError("receiver list must be non-empty")
        unknown = [r for r in self.receivers if r not in RECEIVERS]
        if unknown:
            raise ConfigError(
                f"unknown receivers {unknown}; known: {list(RECEIVERS)}"
            )
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.area_side_m <= 0.0:
            raise ConfigError("area side must be positive")
        if self.shadowing_std_db < 0.0:
            raise ConfigError("shadowing std must be non-negative")
        if not 0 <= int(self.master_seed) <= _MASK64:
            raise ConfigError("master seed must fit in 64 bits")

    @property
    def k_data(self) -> int:
        return self.k_total - self.k_pilot


@dataclass
class TrialOutcome:
    """One receiver's metrics on one realization.

    Metrics a receiver does not produce (e.g. BER for a pure channel
    estimator) are NaN.  ``realization_hash`` ties the row to the exact
    channel/bits/noise draw; every receiver in a trial must share it.
    ``failure`` records a numeric error message when the receiver raised
    instead of producing metrics (its metric fields are then NaN).
    """

    scenario_id: str
    seed: int
    tx_power_dbm: float
    receiver: str
    ber: float
    nmse: float
    md: float
    fa: float
    throughput_bits: float
    iterations_run: int
    realization_hash: str = ""
    failure: str = ""


@dataclass
class SweepResult:
    """All rows of a sweep plus a provenance snapshot (scenario fields,
    package version, pilot-frame content hash)."""

    rows: list
    provenance: dict


def splitmix64(x: int) -> int:
    """One splitmix64 scrambling round (stable 64-bit mixing)."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def trial_seed(master_seed: int, power_index: int, trial_index: int) -> int:
    """Per-trial seed: chained splitmix64 over (master, power, trial).

    Each index is absorbed raw into the already-mixed state, which keeps
    the three key roles asymmetric (seeds collide across two keys only if
    a 64-bit mix output collision occurs, never by swapping fields).
    Receivers are deliberately not part of the key, so enabling more of
    them never perturbs the channel/noise draws.
    """
    h = splitmix64(int(master_seed) & _MASK64)
    h = splitmix64(h ^ (power_index & _MASK64))
    return splitmix64(h ^ (trial_index & _MASK64))


def frame_hash(f: FrameMatrix) -> str:
    """Content hash of a pilot frame (shape + entry bytes)."""
    ent = np.ascontiguousarray(f.entries)
    digest = hashlib.sha256()
    digest.update(str(ent.shape).encode())
    digest.update(ent.tobytes())
    return digest.hexdigest()


@dataclass
class _Trial:
    """Everything one trial's receivers share, in noise-normalized units."""

    scenario: Scenario
    power_dbm: float
    seed: int
    y: np.ndarray  # (N, K), unit noise power
    h_eff: np.ndarray  # (N, M) true channel, receiver units
    gamma_eff: np.ndarray  # (N, M) prior variances, receiver units
    active: np.ndarray  # (M,) true activity
    bits: np.ndarray  # (M, K_d * b) payload bits
    x_p_unit: np.ndarray  # (M, K_p) unit-power pilot block
    x_d_unit: np.ndarray  # (M, K_d) unit-power data symbols (true)
    constellation: signal.Constellation
    realization_hash: str
    init: init_ce.InitialEstimate | None = field(default=None)

    @property
    def y_data(self) -> np.ndarray:
        return self.y[:, self.scenario.k_pilot :]

    def initial_estimate(self) -> init_ce.InitialEstimate:
        """Pilot-stage estimate, computed once and shared by all receivers
        that start from it (fairness and speed)."""
        if self.init is None:
            self.init = init_ce.mmv_amp(
                self.y[:, : self.scenario.k_pilot],
                self.x_p_unit.T,
                self.gamma_eff,
                self.scenario.activity_factor,
                1.0,
            )
        return self.init


def _prepare_trial(s: Scenario, power_dbm: float, seed: int, frame: FrameMatrix) -> _Trial:
    """Draw one realization and rescale it to unit noise power."""
    stage = [splitmix64((seed + i) & _MASK64) for i in range(1, 6)]
    topo = channel.build_topology(s.n_aps, s.m_users, s.area_side_m, stage[0])
    ls = channel.pathloss(topo, stage[1], s.shadowing_std_db)
    n0_w = channel.dbm_to_watt(channel.noise_floor_dbm(s.subcarrier_khz * 1e3))
    ch = channel.sample_channel(ls, s.activity_factor, stage[2], n0_w)

    constellation = signal.qpsk_gray()
    b = constellation.bits_per_symbol
    bits = np.random.default_rng(stage[3]).integers(
        0, 2, size=(s.m_users, s.k_data * b), dtype=np.uint8
    )
    tx = signal.assemble_tx(frame, bits, ch.active, power_dbm)
    rx = signal.transmit(tx, ch, stage[4])

    digest = hashlib.sha256()
    for part in (ch.h, ch.active, tx.data_bits, rx.y):
        digest.update(np.ascontiguousarray(part).tobytes())

    amp = np.sqrt(channel.dbm_to_watt(power_dbm))
    scale = amp / np.sqrt(n0_w)
    return _Trial(
        scenario=s,
        power_dbm=float(power_dbm),
        seed=int(seed),
        y=rx.y / np.sqrt(n0_w),
        h_eff=ch.h * scale,
        gamma_eff=ls.gamma * scale**2,
        active=ch.active,
        bits=bits,
        x_p_unit=signal.pilot_block(frame),
        x_d_unit=tx.x_data / amp,
        constellation=constellation,
        realization_hash=digest.hexdigest(),
    )


def _detection_metrics(t: _Trial, x_hard, active_hat) -> dict:
    """BER / MD / FA / throughput shared by all data-detecting receivers."""
    bits_hat = t.constellation.demap_bits(x_hard)
    ber = metrics.ber_with_lost_bits(t.bits, bits_hat, t.active, active_hat)
    md, fa = metrics.detection_errors(t.active, active_hat)
    p_e = metrics.block_error_rate(t.bits, bits_hat, t.active, active_hat)
    if math.isnan(p_e):
        throughput = float("nan")
    else:
        throughput = metrics.effective_throughput(
            p_e, t.scenario.k_data, t.constellation.bits_per_symbol
        )
    return {
        "ber": float("nan") if ber.undefined else ber.ber,
        "md": float(md),
        "fa": float(fa),
        "throughput_bits": throughput,
    }


def _run_bigabp(t: _Trial) -> dict:
    s = t.scenario
    state = bigabp.run_belief_consensus(
        t.y,
        t.x_p_unit,
        t.initial_estimate(),
        t.gamma_eff,
        s.activity_factor,
        n0=1.0,
        t_max=s.t_max,
        eta=s.eta,
    )
    det = bigabp.hard_decision(t.y, state, t.gamma_eff, s.activity_factor, n0=1.0)
    out = _detection_metrics(t, det.x_hard, det.active_hat)
    out["nmse"] = metrics.nmse(t.h_eff, det.h_final)
    out["iterations_run"] = s.t_max
    return out


def _run_genie_gabp(t: _Trial) -> dict:
    s = t.scenario
    x_hard = bigabp.gabp_detect(
        t.y_data, t.h_eff, t.active, n0=1.0, t_max=s.t_max, eta=s.eta
    )
    out = _detection_metrics(t, x_hard, t.active)
    out["nmse"] = float("nan")
    out["iterations_run"] = s.t_max
    return out


def _run_gabp_mmvamp(t: _Trial) -> dict:
    s = t.scenario
    init = t.initial_estimate()
    active_hat = init.active_posterior > 0.5
    x_hard = bigabp.gabp_detect(
        t.y_data,
        init.h_hat,
        active_hat,
        n0=1.0,
        psi_h=init.psi_h,
        t_max=s.t_max,
        eta=s.eta,
    )
    out = _detection_metrics(t, x_hard, active_hat)
    out["nmse"] = metrics.nmse(t.h_eff, init.h_hat)
    out["iterations_run"] = s.t_max
    return out


def _run_zf_mmvamp(t: _Trial) -> dict:
    init = t.initial_estimate()
    active_hat = init.active_posterior > 0.5
    x_hard = baselines.zf_detect(t.y_data, init.h_hat, active_hat, t.constellation)
    out = _detection_metrics(t, x_hard, active_hat)
    out["nmse"] = metrics.nmse(t.h_eff, init.h_hat)
    out["iterations_run"] = 1
    return out


def _run_mmvamp(t: _Trial) -> dict:
    init = t.initial_estimate()
    active_hat = init.active_posterior > 0.5
    md, fa = metrics.detection_errors(t.active, active_hat)
    return {
        "ber": float("nan"),
        "nmse": metrics.nmse(t.h_eff, init.h_hat),
        "md": float(md),
        "fa": float(fa),
        "throughput_bits": float("nan"),
        "iterations_run": init.iterations_run,
    }


def _run_mns(t: _Trial) -> dict:
    h_hat = init_ce.mns_estimate(t.y[:, : t.scenario.k_pilot], t.x_p_unit.T)
    return {
        "ber": float("nan"),
        "nmse": metrics.nmse(t.h_eff, h_hat),
        "md": float("nan"),
        "fa": float("nan"),
        "throughput_bits": float("nan"),
        "iterations_run": 1,
    }


def _run_genie_mmse(t: _Trial) -> dict:
    x_full = np.concatenate(
        [t.x_p_unit * t.active[:, None], t.x_d_unit], axis=1
    )
    h_hat = init_ce.mmse_genie(t.y, x_full, t.gamma_eff, 1.0)
    return {
        "ber": float("nan"),
        "nmse": metrics.nmse(t.h_eff, h_hat),
        "md": float("nan"),
        "fa": float("nan"),
        "throughput_bits": float("nan"),
        "iterations_run": 1,
    }


_RECEIVER_FNS = {
    "bigabp": _run_bigabp,
    "genie_gabp": _run_genie_gabp,
    "gabp_mmvamp": _run_gabp_mmvamp,
    "zf_mmvamp": _run_zf_mmvamp,
    "mmvamp": _run_mmvamp,
    "mns": _run_mns,
    "genie_mmse": _run_genie_mmse,
}


def run_trial(s: Scenario, power_dbm: float, seed: int, frame: FrameMatrix) -> list:
    """One realization pushed through every requested receiver.

    Returns one TrialOutcome per receiver.  A receiver that raises a
    numeric error yields a row with NaN metrics and the message in
    ``failure``; other receivers still run.
    """
    if frame.j != s.k_pilot or frame.l != s.m_users:
        raise ConfigError(
            f"pilot frame is {frame.j}x{frame.l}, scenario needs "
            f"{s.k_pilot}x{s.m_users}"
        )
    t = _prepare_trial(s, power_dbm, seed, frame)
    nan = float("nan")
    rows = []
    for name in s.receivers:
        try:
            vals = _RECEIVER_FNS[name](t)
            failure = ""
        except (NumericError, SolverError, np.linalg.LinAlgError) as exc:
            vals = {
                "ber": nan,
                "nmse": nan,
                "md": nan,
                "fa": nan,
                "throughput_bits": nan,
                "iterations_run": 0,
            }
            failure = f"{type(exc).__name__}: {exc}"
        rows.append(
            TrialOutcome(
                scenario_id=s.scenario_id,
                seed=int(seed),
                tx_power_dbm=float(power_dbm),
                receiver=name,
                realization_hash=t.realization_hash,
                failure=failure,
                **vals,
            )
        )
    return rows


def _trial_task(args):
    s, power_dbm, seed, frame = args
    return run_trial(s, power_dbm, seed, frame)


def sort_rows(rows: list) -> list:
    """Canonical result order: scenario, power, receiver, seed."""
    return sorted(
        rows, key=lambda r: (r.scenario_id, r.tx_power_dbm, r.receiver, r.seed)
    )


def run_sweep(s: Scenario, frame: FrameMatrix, out_csv=None) -> SweepResult:
    """All (power, trial) points through run_trial, canonically sorted.

    When ``out_csv`` names an existing file, (power, seed) pairs already
    present there are skipped and the merged, re-sorted table is written
    back -- an interrupted sweep resumes where it stopped.  The
    environment variable GFREE_THREADS (default 1 = serial) caps the
    worker-process pool; scheduling never affects the output because rows
    are reduced in canonical order.
    """
    existing = []
    done = set()
    if out_csv is not None and os.path.exists(out_csv):
        existing = read_csv(out_csv)
        done = {(r.tx_power_dbm, r.seed) for r in existing}

    tasks = []
    for p_idx, power in enumerate(s.tx_power_dbm_sweep):
        for t_idx in range(s.trials):
            seed = trial_seed(s.master_seed, p_idx, t_idx)
            if (float(power), seed) in done:
                continue
            tasks.append((s, float(power), seed, frame))

    workers = int(os.environ.get("GFREE_THREADS", "1"))
    rows = list(existing)
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for out in pool.map(_trial_task, tasks):
                rows.extend(out)
    else:
        for task in tasks:
            rows.extend(_trial_task(task))

    rows = sort_rows(rows)
    if out_csv is not None:
        write_csv(out_csv, rows)
    provenance = {
        "package": "gfmimo",
        "scenario": {f.name: getattr(s, f.name) for f in fields(s)},
        "frame_hash": frame_hash(frame),
        "rows": len(rows),
    }
    return SweepResult(rows=rows, provenance=provenance)


def _format_value(name: str, value) -> str:
    if name in ("scenario_id", "receiver"):
        return str(value)
    if name in ("seed", "iterations_run"):
        return str(int(value))
    v = float(value)
    if math.isnan(v):
        return "nan"
    if name in ("md", "fa") and v == int(v):
        return str(int(v))
    return format(v, ".12g")


def write_csv(path, rows: list) -> None:
    """Serialize rows (already or not yet sorted) canonically to ``path``."""
    rows = sort_rows(rows)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for r in rows:
            writer.writerow([_format_value(c, getattr(r, c)) for c in CSV_COLUMNS])


def read_csv(path) -> list:
    """Parse a results CSV back into TrialOutcome rows (hash/failure empty)."""
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != CSV_COLUMNS:
            raise ConfigError(f"unexpected CSV columns in {path}")
        for rec in reader:
            out.append(
                TrialOutcome(
                    scenario_id=rec["scenario_id"],
                    seed=int(rec["seed"]),
                    tx_power_dbm=float(rec["tx_power_dbm"]),
                    receiver=rec["receiver"],
                    ber=float(rec["ber"]),
                    nmse=float(rec["nmse"]),
                    md=float(rec["md"]),
                    fa=float(rec["fa"]),
                    throughput_bits=float(rec["throughput_bits"]),
                    iterations_run=int(rec["iterations_run"]),
                )
            )
    return out


# ---------------------------------------------------------------------------
# key-value config files
# ---------------------------------------------------------------------------

_LIST_KEYS = {"tx_power_dbm_sweep", "receivers"}
_INT_KEYS = {"n_aps", "m_users", "k_total", "k_pilot", "t_max", "trials", "master_seed"}
_FLOAT_KEYS = {
    "activity_factor",
    "subcarrier_khz",
    "eta",
    "area_side_m",
    "shadowing_std_db",
}
_ALIASES = {"lambda": "activity_factor"}


def parse_config(text: str) -> dict:
    """Parse ``key = value`` lines (# comments allowed) into raw values.

    Lists are comma-separated.  ``lambda`` is accepted as an alias for
    ``activity_factor``.  The special key ``frame`` (a pilot-frame file
    path) is passed through untouched.
    """
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in stripped.split("=", 1))
        key = _ALIASES.get(key, key)
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        known = (
            {f.name for f in fields(Scenario)} | _LIST_KEYS | {"frame", "scenario_id"}
        )
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            if key in _LIST_KEYS:
                items = [v.strip() for v in value.split(",") if v.strip()]
                if key == "tx_power_dbm_sweep":
                    raw[key] = tuple(float(v) for v in items)
                else:
                    raw[key] = tuple(items)
            elif key in _INT_KEYS:
                raw[key] = int(value)
            elif key in _FLOAT_KEYS:
                raw[key] = float(value)
            else:
                raw[key] = value
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from exc
    return raw


def scenario_from_config(text: str) -> tuple:
    """(Scenario, frame path or None) from config-file text."""
    raw = parse_config(text)
    frame_path = raw.pop("frame", None)
    try:
        scenario = Scenario(**raw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    return scenario, frame_path


def single_power_scenario(s: Scenario, power_dbm: float) -> Scenario:
    """Copy of ``s`` restricted to one transmit power (used by `run`)."""
    if power_dbm not in s.tx_power_dbm_sweep:
        raise ConfigError(f"power {power_dbm} not in the scenario sweep")
    return replace(s, tx_power_dbm_sweep=(float(power_dbm),))
