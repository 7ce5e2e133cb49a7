"""Command-line front end: generate scenes, track, evaluate, benchmark."""

from __future__ import annotations

import argparse
import dataclasses
import sys

import numpy as np

from . import convnet, evaluation, synth
from .cftracker import TrackerParams, parse_trajectory, track, write_trajectory
from .errors import EvtrackError
from .events import (
    GroundTruthEntry,
    parse_events,
    parse_ground_truth,
    write_events,
    write_ground_truth,
)
from .ratecode import POLARITY_MODES
from .segmentation import SegmentationPolicy, segment


def _policy(text: str) -> SegmentationPolicy:
    try:
        return SegmentationPolicy.parse(text)
    except (ValueError, EvtrackError) as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _taps(text: str) -> tuple[str, ...]:
    taps = tuple(t.strip() for t in text.split(",") if t.strip())
    if not taps:
        raise argparse.ArgumentTypeError("empty tap list")
    return taps


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _bbox(text: str) -> tuple[int, int, int, int]:
    parts = text.split(",")
    if len(parts) != 4:
        raise argparse.ArgumentTypeError("expected x,y,w,h")
    try:
        x, y, w, h = (int(p) for p in parts)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))
    return (x, y, w, h)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="evtrack", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a synthetic event scene + ground truth")
    gen.add_argument("--preset", required=True, choices=sorted(synth.PRESETS))
    gen.add_argument("--out", required=True, help="event file path")
    gen.add_argument("--gt", required=True, help="ground-truth file path")
    gen.add_argument("--policy", type=_policy, default=SegmentationPolicy.into_k(100),
                     help="segmentation used to time-stamp ground-truth rows (default into_k:100)")
    gen.add_argument("--seed", type=int, default=None)
    gen.add_argument("--noise-rate", type=float, default=None, help="background events/s")
    gen.add_argument("--duration", type=float, default=None, help="seconds")

    tr = sub.add_parser("track", help="run the correlation-filter tracker")
    tr.add_argument("--events", required=True)
    tr.add_argument("--gt", help="ground-truth file; row 0 initializes the tracker")
    tr.add_argument("--init", type=_bbox, help="x,y,w,h when no --gt is given")
    tr.add_argument("--policy", type=_policy, required=True)
    tr.add_argument("--out", required=True, help="trajectory file path")
    tr.add_argument("--taps", type=_taps, default=("raw",),
                    help="comma list: raw and/or conv tap names (default raw)")
    tr.add_argument("--weights", help="EVTW weight file (needed for conv taps)")
    tr.add_argument("--fusion", type=_floats, default=None, help="comma list parallel to --taps")
    tr.add_argument("--lambda", dest="lam", type=float, default=1e-4)
    tr.add_argument("--eta", type=float, default=0.01)
    tr.add_argument("--sigma-factor", type=float, default=0.1)
    tr.add_argument("--padding", type=float, default=2.0)
    tr.add_argument("--polarity", default="both", choices=POLARITY_MODES)
    tr.add_argument("--no-window", action="store_true", help="disable the Hann taper")
    tr.add_argument("--min-psr", type=float, default=6.0,
                    help="hold position when peak-to-sidelobe falls below this (0 disables)")
    tr.add_argument("--per-channel", action="store_true",
                    help="independent per-channel denominators instead of the shared one")

    ev = sub.add_parser("eval", help="compare a trajectory against ground truth")
    ev.add_argument("--traj", required=True)
    ev.add_argument("--gt", required=True)
    ev.add_argument("--csv", help="write per-segment CLE rows here")
    ev.add_argument("--precision-csv", help="write the tau=1..50 precision curve here")

    be = sub.add_parser("bench", help="time the tracking loop")
    be.add_argument("--events", required=True)
    be.add_argument("--gt", required=True)
    be.add_argument("--policy", type=_policy, required=True)
    be.add_argument("--taps", type=str, action="append", required=True,
                    help="one config per flag; the value is the config label")
    be.add_argument("--weights")
    be.add_argument("--reps", type=int, default=3)
    be.add_argument("--lambda", dest="lam", type=float, default=1e-4)
    be.add_argument("--eta", type=float, default=0.01)
    return parser


def cmd_gen(args) -> int:
    factory = synth.PRESETS[args.preset]
    spec = factory(args.seed) if args.seed is not None else factory()
    if args.noise_rate is not None:
        if args.noise_rate < 0:
            raise argparse.ArgumentTypeError("--noise-rate must be >= 0")
        spec = dataclasses.replace(spec, noise_rate=args.noise_rate)
    if args.duration is not None:
        if args.duration <= 0:
            raise argparse.ArgumentTypeError("--duration must be > 0")
        spec = dataclasses.replace(spec, duration_us=int(round(args.duration * synth.US)))
    stream, template = synth.generate_scene(spec)
    write_events(stream, args.out)
    entries = []
    occluded = []
    for seg in segment(stream, args.policy):
        entries.append(template.entry(seg.index, seg.t_mid))
        if template.occluded(seg.t_mid):
            occluded.append(seg.index)
    write_ground_truth(entries, args.gt, occluded=occluded)
    return 0


def _tracker_params(args) -> TrackerParams:
    taps = tuple(args.taps) if not isinstance(args.taps, tuple) else args.taps
    network = None
    if any(t != "raw" for t in taps):
        if not args.weights:
            raise EvtrackError(f"taps {[t for t in taps if t != 'raw']} need --weights")
        network = convnet.load_network(args.weights)
    return TrackerParams(
        taps=taps,
        network=network,
        fusion_weights=args.fusion,
        lam=args.lam,
        eta=args.eta,
        sigma_factor=args.sigma_factor,
        padding=args.padding,
        polarity_mode=args.polarity,
        window=not args.no_window,
        min_psr=args.min_psr,
        per_channel=args.per_channel,
    )


def _init_entry(args) -> GroundTruthEntry:
    if args.gt:
        entries, _ = parse_ground_truth(args.gt)
        if not entries:
            raise EvtrackError(f"{args.gt}: no ground-truth rows")
        return entries[0]
    if args.init:
        return GroundTruthEntry(0, args.init)
    raise EvtrackError("either --gt or --init is required")


def cmd_track(args) -> int:
    stream = parse_events(args.events)
    params = _tracker_params(args)
    trajectory = track(stream, args.policy, _init_entry(args), params)
    write_trajectory(trajectory, args.out)
    return 0


def cmd_eval(args) -> int:
    trajectory = parse_trajectory(args.traj)
    entries, _ = parse_ground_truth(args.gt)
    report = evaluation.evaluate(trajectory, entries)
    if args.csv:
        evaluation.write_cle_csv(report, trajectory, args.csv)
    if args.precision_csv:
        evaluation.write_precision_csv(report, args.precision_csv)
    for line in evaluation.summary_lines(report):
        print(line)
    return 0


def cmd_bench(args) -> int:
    if args.reps < 1:
        raise argparse.ArgumentTypeError("--reps must be >= 1")
    stream = parse_events(args.events)
    entries, _ = parse_ground_truth(args.gt)
    if not entries:
        raise EvtrackError(f"{args.gt}: no ground-truth rows")
    network = convnet.load_network(args.weights) if args.weights else None
    for label in args.taps:
        taps = _taps(label)
        if any(t != "raw" for t in taps) and network is None:
            raise EvtrackError(f"config {label!r} needs --weights")
        params = TrackerParams(taps=taps, network=network, lam=args.lam, eta=args.eta)
        result = evaluation.bench(stream, args.policy, entries[0], params,
                                  reps=args.reps, label=label)
        median_s = float(np.median(result.seconds))
        print(
            f"taps={result.label} segments={result.segments} "
            f"median_seconds={median_s!r} segments_per_second={result.segments_per_second!r}"
        )
    return 0


_COMMANDS = {"gen": cmd_gen, "track": cmd_track, "eval": cmd_eval, "bench": cmd_bench}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except argparse.ArgumentTypeError as exc:
        parser.error(str(exc))
    except EvtrackError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
