"""Command-line entry point.

``cellfree-pgi simulate`` runs one sweep and writes two artifacts into the
output directory: the sweep table (``sweep_<axis>.csv``) and a run manifest
recording the config snapshot, the master seed, and content digests, which
together allow an exact re-run.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

from .config import SystemConfig, load_config
from .harness import SCHEMES, SWEEP_AXES, run_sweep
from .sweep_io import render_sweep

__all__ = ["main"]

_FULL_SCALE_TRIALS = 1000


def _git_blob_digest(data: bytes) -> str:
    header = f"blob {len(data)}\0".encode()
    return hashlib.sha1(header + data).hexdigest()


def _parse_baselines(raw: str) -> tuple[str, ...]:
    names = tuple(part.strip() for part in raw.split(",") if part.strip())
    if names == ("none",):
        return ()
    return names


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cellfree-pgi",
        description="Dominating path-gain feedback simulations for cell-free downlink.")
    sub = parser.add_subparsers(dest="command", required=True)
    sim = sub.add_parser(
        "simulate", help="run a parameter sweep and persist the results")
    sim.add_argument("--config", type=Path, default=None,
                     help="JSON config file (defaults apply when omitted)")
    sim.add_argument("--sweep", required=True, choices=SWEEP_AXES,
                     metavar="AXIS", help=f"sweep axis, one of {', '.join(SWEEP_AXES)}")
    sim.add_argument("--values", required=True,
                     help="comma-separated axis values, e.g. 0,5,10,15")
    sim.add_argument("--trials", type=int, default=None,
                     help="trials per axis value (default: config value)")
    sim.add_argument("--seed", type=int, default=None,
                     help="master seed (default: config value)")
    sim.add_argument("--out", required=True, type=Path,
                     help="output directory for the sweep table and manifest")
    sim.add_argument("--full-scale", action="store_true",
                     help=f"raise the default trial count to {_FULL_SCALE_TRIALS}")
    sim.add_argument("--baselines", default=None,
                     help="comma-separated baselines from "
                          f"{', '.join(s for s in SCHEMES if s != 'proposed')}; "
                          "'none' disables them")
    sim.add_argument("--estimated-aods", action="store_true",
                     help="estimate departure angles from synthetic uplink "
                          "snapshots instead of using the scenario angles")
    sim.add_argument("--workers", type=int, default=1,
                     help="trial processes to run in parallel")
    return parser


def _simulate(args: argparse.Namespace) -> int:
    config = load_config(args.config) if args.config else SystemConfig()
    if args.baselines is not None:
        config = config.replace(baselines=_parse_baselines(args.baselines))
    if args.estimated_aods:
        config = config.replace(use_estimated_aods=True)
    try:
        values = [float(v) for v in args.values.split(",") if v.strip()]
    except ValueError:
        raise ValueError(f"--values must be numeric, got {args.values!r}")
    trials = args.trials
    if trials is None:
        trials = _FULL_SCALE_TRIALS if args.full_scale else config.trials
    master_seed = args.seed if args.seed is not None else config.master_seed

    result = run_sweep(config, args.sweep, values, trials=trials,
                       master_seed=master_seed, workers=args.workers)
    args.out.mkdir(parents=True, exist_ok=True)
    table_text = render_sweep(result.to_table())
    table_path = args.out / f"sweep_{args.sweep}.csv"
    table_path.write_text(table_text)

    run_record = {
        "config": config.to_dict(),
        "axis": args.sweep,
        "values": values,
        "trials": trials,
        "master_seed": master_seed,
        "schemes": list(result.schemes),
    }
    record_bytes = json.dumps(run_record, sort_keys=True).encode()
    manifest = "\n".join([
        "pgi-run-manifest v1",
        f"axis: {args.sweep}",
        f"values: {','.join('%.12g' % v for v in values)}",
        f"trials: {trials}",
        f"master_seed: {master_seed}",
        f"schemes: {','.join(result.schemes)}",
        f"inputs_digest: {_git_blob_digest(record_bytes)}",
        f"output: {table_path.name} sha256="
        + hashlib.sha256(table_text.encode()).hexdigest(),
        f"config: {json.dumps(config.to_dict(), sort_keys=True)}",
    ]) + "\n"
    (args.out / "manifest.txt").write_text(manifest)

    for scheme in result.schemes:
        pieces = [f"{v:g}: {m:.3f}±{c:.3f}" for v, m, c in
                  zip(result.values, result.mean[scheme], result.ci95[scheme])]
        print(f"{scheme:12s} " + "  ".join(pieces))
    total_failed = int(result.failed.sum())
    if total_failed:
        print(f"warning: {total_failed} failed trials excluded", file=sys.stderr)
    print(f"wrote {table_path} and {args.out / 'manifest.txt'}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            return _simulate(args)
        raise ValueError(f"unknown command {args.command!r}")
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
