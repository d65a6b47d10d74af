"""Command-line surface: track, eval, and synth subcommands.

Exit codes: 0 success, 1 input error, 2 config error. Every tracking run
writes a manifest next to the result file recording the full config
snapshot, input paths, seed, and per-stage wall-clock timings; re-running
from the same snapshot reproduces the result byte-identically.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from pathlib import Path

from . import io as tio
from . import plots
from .errors import ConfigError, InputError, TrackkitError
from .metrics import evaluate, throughput, track_set_from_rows
from .motion import NoiseConfig
from .pipeline import Tracker, TrackerConfig

_NOISE_KEYS = {f.name for f in dataclasses.fields(NoiseConfig)}
_CONFIG_KEYS = {f.name for f in dataclasses.fields(TrackerConfig)} - {"noise", "lambda_"}
_BOOL_KEYS = {"association_enabled", "boost_enabled", "appearance_enabled"}
_INT_KEYS = {"tau_l", "n_max", "max_misses", "ghost_limit", "association_period",
             "boost_min_gap", "emission_delay"}


def parse_config_file(path) -> TrackerConfig:
    """Parse the flat key = value config format (keys match TrackerConfig fields)."""
    cfg = TrackerConfig()
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise InputError(f"cannot read config: {exc}") from None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        try:
            if key == "lambda":
                cfg.lambda_ = float(value)
            elif key.startswith("noise."):
                sub = key[len("noise."):]
                if sub not in _NOISE_KEYS:
                    raise ConfigError(f"config line {lineno}: unknown noise field '{sub}'")
                setattr(cfg.noise, sub, float(value))
            elif key in _BOOL_KEYS:
                if value.lower() not in ("true", "false"):
                    raise ConfigError(f"config line {lineno}: {key} must be true or false")
                setattr(cfg, key, value.lower() == "true")
            elif key in _INT_KEYS:
                setattr(cfg, key, int(value))
            elif key in _CONFIG_KEYS:
                setattr(cfg, key, float(value))
            else:
                raise ConfigError(f"config line {lineno}: unknown key '{key}'")
        except ValueError:
            raise ConfigError(f"config line {lineno}: bad value for '{key}'") from None
    return cfg


def _apply_flag_overrides(cfg: TrackerConfig, args) -> TrackerConfig:
    if args.lambda_ is not None:
        cfg.lambda_ = args.lambda_
    if args.no_appearance:
        cfg.appearance_enabled = False
    if args.boost:
        cfg.boost_enabled = True
    if args.no_association:
        cfg.association_enabled = False
    if args.emission_delay is not None:
        cfg.emission_delay = args.emission_delay
    return cfg


def cmd_track(args) -> int:
    cfg = parse_config_file(args.config) if args.config else TrackerConfig()
    cfg = _apply_flag_overrides(cfg, args)
    cfg.validate()

    t0 = time.perf_counter()
    if args.scenario:
        scenario = tio.load_scenario(args.scenario)
        data = tio.generate_scenario(scenario, args.seed)
        frames, provider = data.detections, data.provider
        lo, hi = data.frame_range
    elif args.detections:
        det_data = tio.read_detections(args.detections)
        frames = det_data.frames
        if not frames:
            lo, hi = 1, 0
        else:
            lo, hi = min(frames), max(frames)
        if not cfg.appearance_enabled:
            provider = tio.NullProvider()
        elif args.embeddings:
            provider = tio.SidecarProvider.from_files(det_data, args.embeddings)
        else:
            raise InputError("missing embedding sidecar: pass --embeddings "
                             "or disable appearance with --no-appearance")
    else:
        raise InputError("one of --detections or --scenario is required")
    read_s = time.perf_counter() - t0

    t0 = time.perf_counter()
    tracker = Tracker(cfg, provider)
    results = []
    for frame in range(lo, hi + 1):
        results.append(tracker.process_frame(frame, frames.get(frame, [])))
    results.extend(tracker.finalize())
    track_s = time.perf_counter() - t0
    frame_count = max(hi - lo + 1, 0)

    t0 = time.perf_counter()
    tio.write_tracks(results, args.output)
    if args.dump_overlay:
        _write_overlay(results, args.dump_overlay)
        figure = str(Path(args.dump_overlay).with_suffix(".png"))
        tracks = track_set_from_rows(
            (r.frame, r.track_id, r.box) for res in results for r in res.tracks)
        plots.save_track_figure(tracks, figure, title=Path(args.output).stem)
    write_s = time.perf_counter() - t0

    manifest = {
        "config": cfg.to_dict(),
        "inputs": {"detections": args.detections, "embeddings": args.embeddings,
                   "scenario": args.scenario, "config_file": args.config,
                   "seed": args.seed},
        "outputs": {"result": args.output, "overlay": args.dump_overlay},
        "timings": {"read_s": read_s, "track_s": track_s, "write_s": write_s,
                    "frames": frame_count,
                    "fps": throughput(frame_count, track_s) if track_s > 0 else None},
    }
    manifest_path = args.manifest or f"{args.output}.manifest.json"
    with open(manifest_path, "w") as handle:
        json.dump(manifest, handle, indent=2)
    print(f"tracked {frame_count} frames -> {args.output} "
          f"({manifest['timings']['fps'] and round(manifest['timings']['fps'], 1)} fps)")
    return 0


def _write_overlay(results, path):
    with open(path, "w") as handle:
        for res in results:
            for rec in sorted(res.tracks, key=lambda r: (r.frame, r.track_id)):
                b = rec.box
                handle.write(f"{rec.frame},{rec.track_id},{b.x:.2f},{b.y:.2f},"
                             f"{b.w:.2f},{b.h:.2f},{rec.origin.value}\n")


def cmd_eval(args) -> int:
    gt = tio.read_ground_truth(args.gt)
    hyp = tio.read_track_file(args.result)
    report = evaluate(gt, hyp, args.iou_threshold)

    manifest_path = args.manifest or f"{args.result}.manifest.json"
    if Path(manifest_path).exists():
        with open(manifest_path) as handle:
            fps = json.load(handle).get("timings", {}).get("fps")
        report.fps = fps

    fps_text = f"{report.fps:.1f}" if report.fps is not None else "-"
    print(f"{'MOTA':>8} {'FP':>8} {'FN':>8} {'IDs':>8} {'GT':>8} {'FPS':>8}")
    print(f"{report.mota:>8.3f} {report.fp:>8d} {report.fn:>8d} "
          f"{report.ids:>8d} {report.gt_count:>8d} {fps_text:>8}")

    report_path = args.report or f"{args.result}.report.json"
    with open(report_path, "w") as handle:
        json.dump(report.as_dict(), handle, indent=2)
    figure_path = args.figure or str(Path(report_path).with_suffix(".png"))
    plots.save_eval_figure(report, figure_path, title=Path(args.result).name)
    return 0


def cmd_synth(args) -> int:
    scenario = tio.load_scenario(args.spec)
    data = tio.generate_scenario(scenario, args.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    det_data = data.detection_data()
    tio.write_detections(det_data, out / "detections.txt")
    table = {}
    for frame, dets in data.detections.items():
        embeddings = data.provider.embed_detections(frame, dets)
        for det, emb in zip(dets, embeddings):
            table[(frame, det.index)] = emb
    tio.write_embeddings(table, out / "embeddings.csv")
    tio.write_ground_truth(data.ground_truth, out / "gt.txt")
    print(f"wrote detections.txt, embeddings.csv, gt.txt to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trackkit",
                                     description="appearance-aware multi-object tracking")
    sub = parser.add_subparsers(dest="command", required=True)

    track = sub.add_parser("track", help="run the tracker over a sequence")
    track.add_argument("--detections", help="MOT detection file")
    track.add_argument("--embeddings", help="embedding sidecar CSV")
    track.add_argument("--scenario", help="synthetic scenario JSON (alternative input)")
    track.add_argument("--config", help="flat key = value config file")
    track.add_argument("--output", required=True, help="MOT result file to write")
    track.add_argument("--manifest", help="manifest path (default <output>.manifest.json)")
    track.add_argument("--lambda", dest="lambda_", type=float, default=None,
                       help="appearance/motion blend in [0, 1]")
    track.add_argument("--no-appearance", action="store_true",
                       help="disable appearance modelling entirely")
    track.add_argument("--boost", action="store_true", help="enable detection boosting")
    track.add_argument("--no-association", action="store_true",
                       help="disable tracklet association")
    track.add_argument("--emission-delay", type=int, default=None)
    track.add_argument("--seed", type=int, default=0, help="scenario generation seed")
    track.add_argument("--dump-overlay",
                       help="write per-frame overlay CSV (a trajectory figure "
                            "is rendered alongside)")
    track.set_defaults(func=cmd_track)

    ev = sub.add_parser("eval", help="CLEAR MOT evaluation of a result file")
    ev.add_argument("--gt", required=True, help="ground-truth MOT file")
    ev.add_argument("--result", required=True, help="tracker result MOT file")
    ev.add_argument("--manifest", help="run manifest (for FPS reporting)")
    ev.add_argument("--report", help="report JSON path (default <result>.report.json)")
    ev.add_argument("--figure", help="metrics figure path (default <report>.png)")
    ev.add_argument("--iou-threshold", type=float, default=0.5)
    ev.set_defaults(func=cmd_eval)

    synth = sub.add_parser("synth", help="generate a synthetic sequence")
    synth.add_argument("--spec", required=True, help="scenario JSON file")
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--out-dir", required=True)
    synth.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (InputError, TrackkitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
