"""Command-line front end: pilot design, sweeps, and result summaries.

Subcommands
-----------
design-pilots   design a low-coherence pilot frame and write it with a
                JSON sidecar (shape, coherence, Welch bound, frame bounds).
run             execute a scenario once, overwriting the output CSV.
sweep           execute a scenario, resuming a partial output CSV.
report          aggregate a results CSV to one summary row per
                (scenario, power, receiver).

Exit codes: 0 success, 2 configuration/usage error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import frames, harness
from .exceptions import (
    ConfigError,
    FrameFormatError,
    NumericError,
    SolverError,
)

_EXIT_OK = 0
_EXIT_CONFIG = 2
_EXIT_NUMERIC = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gfmimo",
        description="grant-free cell-free MIMO link simulation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    d = sub.add_parser("design-pilots", help="design a low-coherence pilot frame")
    d.add_argument("--j", type=int, required=True, help="pilot length (rows)")
    d.add_argument("--l", type=int, required=True, help="user count (columns)")
    d.add_argument("--seed", type=int, required=True, help="design seed")
    d.add_argument("--out", required=True, help="output frame file")
    d.add_argument(
        "--tighten-rounds",
        type=int,
        default=50,
        help="polar-decomposition rounds after the coherence descent",
    )

    r = sub.add_parser("run", help="run a scenario once (overwrite output)")
    r.add_argument("--config", required=True, help="key-value scenario file")
    r.add_argument("--out", required=True, help="output results CSV")

    w = sub.add_parser("sweep", help="run a scenario, resuming existing output")
    w.add_argument("--config", required=True, help="key-value scenario file")
    w.add_argument("--out", required=True, help="output results CSV")

    p = sub.add_parser("report", help="summarize a results CSV")
    p.add_argument("--in", dest="in_csv", required=True, help="results CSV")
    p.add_argument("--out", help="summary CSV (default: stdout)")
    return parser


def _design_pilots(args) -> int:
    cfg = frames.CsidcoConfig(seed=args.seed)
    f = frames.csidco_design(args.j, args.l, cfg)
    if args.tighten_rounds > 0:
        f = frames.tighten(f, args.tighten_rounds)
    frames.save_frame(args.out, f)
    alpha, beta = frames.frame_bounds(f)
    sidecar = {
        "j": args.j,
        "l": args.l,
        "coherence": frames.mutual_coherence(f),
        "welch_bound": frames.welch_bound(args.j, args.l),
        "alpha": alpha,
        "beta": beta,
    }
    with open(args.out + ".json", "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(
        f"designed {args.j}x{args.l} frame: coherence {sidecar['coherence']:.6f} "
        f"(Welch bound {sidecar['welch_bound']:.6f}) -> {args.out}"
    )
    return _EXIT_OK


def _load_scenario(config_path):
    try:
        with open(config_path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {config_path}: {exc}") from exc
    return harness.scenario_from_config(text)


def _resolve_frame(scenario, frame_path):
    """Load the referenced pilot frame, or design one from the master seed."""
    if frame_path is not None:
        f = frames.load_frame(frame_path)
        if f.j != scenario.k_pilot or f.l != scenario.m_users:
            raise ConfigError(
                f"frame file is {f.j}x{f.l}, scenario needs "
                f"{scenario.k_pilot}x{scenario.m_users}"
            )
        return f
    cfg = frames.CsidcoConfig(seed=scenario.master_seed)
    return frames.tighten(
        frames.csidco_design(scenario.k_pilot, scenario.m_users, cfg), 50
    )


def _execute(args, resume: bool) -> int:
    scenario, frame_path = _load_scenario(args.config)
    frame = _resolve_frame(scenario, frame_path)
    if not resume and os.path.exists(args.out):
        os.remove(args.out)
    result = harness.run_sweep(scenario, frame, out_csv=args.out)
    failures = sum(1 for r in result.rows if r.failure)
    print(
        f"wrote {len(result.rows)} rows to {args.out}"
        + (f" ({failures} receiver failures recorded)" if failures else "")
    )
    return _EXIT_OK


def _report(args) -> int:
    rows = harness.read_csv(args.in_csv)
    if not rows:
        raise ConfigError(f"no rows in {args.in_csv}")
    groups: dict = {}
    for r in rows:
        groups.setdefault((r.scenario_id, r.tx_power_dbm, r.receiver), []).append(r)

    def _q(vals, q):
        finite = [v for v in vals if v == v]
        return format(float(np.quantile(finite, q)), ".6g") if finite else "nan"

    header = (
        "scenario_id,tx_power_dbm,receiver,trials,"
        "ber_median,ber_q25,ber_q75,"
        "nmse_median,nmse_q25,nmse_q75,"
        "md_mean,fa_mean,throughput_median"
    )
    lines = [header]
    for (sid, power, receiver), grp in sorted(groups.items()):
        bers = [g.ber for g in grp]
        nmses = [g.nmse for g in grp]
        thr = [g.throughput_bits for g in grp]
        mds = [g.md for g in grp if g.md == g.md]
        fas = [g.fa for g in grp if g.fa == g.fa]
        lines.append(
            ",".join(
                [
                    sid,
                    format(power, ".12g"),
                    receiver,
                    str(len(grp)),
                    _q(bers, 0.5),
                    _q(bers, 0.25),
                    _q(bers, 0.75),
                    _q(nmses, 0.5),
                    _q(nmses, 0.25),
                    _q(nmses, 0.75),
                    format(float(np.mean(mds)), ".6g") if mds else "nan",
                    format(float(np.mean(fas)), ".6g") if fas else "nan",
                    _q(thr, 0.5),
                ]
            )
        )
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        print(f"wrote {len(lines) - 1} summary rows to {args.out}")
    else:
        sys.stdout.write(text)
    return _EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors and 0 on --help; keep its code
        return int(exc.code) if exc.code is not None else _EXIT_CONFIG
    try:
        if args.command == "design-pilots":
            return _design_pilots(args)
        if args.command == "run":
            return _execute(args, resume=False)
        if args.command == "sweep":
            return _execute(args, resume=True)
        if args.command == "report":
            return _report(args)
        raise ConfigError(f"unknown command {args.command!r}")
    except (ConfigError, FrameFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_CONFIG
    except (NumericError, SolverError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return _EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
