"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .classify import evaluate, format_report, predict, train_model
from .config import PipelineConfig, load_config
from .detect import detect_sstip
from .exceptions import DataError, NumericError
from .formats import (
    fmt_float,
    read_points,
    read_signatures,
    write_descriptors,
    write_points,
    write_signatures,
)
from .persistence import load_model, save_model
from .pipeline import clip_signature, default_threads, featurize_entries
from .sift3d import describe_keypoints
from .video_io import (
    PATTERNS,
    ClipAnnotation,
    extract_clip,
    generate_synthetic,
    load_frames,
    parse_manifest,
    split_dataset,
    write_frames,
    write_synthetic_dataset,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("flyact")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_config_opts(p):
    p.add_argument("--config", type=Path, help="flat 'section.key = value' config file")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override one config key, e.g. --set detector.kappa=0.05")


def _add_partition(p, default):
    p.add_argument("--partition", choices=("all", "train", "test"), default=default,
                   help="use the whole manifest or one side of the seeded split (default: %(default)s)")


def _add_range(p):
    p.add_argument("--start", type=int, default=None, help="first frame (inclusive)")
    p.add_argument("--end", type=int, default=None, help="last frame (inclusive)")


def build_parser():
    parser = _Parser(prog="flyact", description="Spatio-temporal interest point action classifier.")
    parser.add_argument("--version", action="version", version=f"flyact {__version__}")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker threads across clips (default: $FLYACT_THREADS or 1)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    p = sub.add_parser("detect", help="detect interest points in a frame directory")
    p.add_argument("--frames", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True, help="points CSV")
    _add_range(p)
    _add_config_opts(p)

    p = sub.add_parser("describe", help="3D-SIFT descriptors for a point list")
    p.add_argument("--frames", type=Path, required=True)
    p.add_argument("--points", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True, help="binary descriptor file")
    _add_range(p)
    _add_config_opts(p)

    p = sub.add_parser("featurize", help="detect + describe + pool every clip of a manifest")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True, help="signature matrix (sidecar: OUT.csv)")
    _add_partition(p, "all")
    _add_config_opts(p)

    p = sub.add_parser("train", help="train an SR-KDA nearest-centre model")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--model", type=Path, required=True, help="output model file")
    p.add_argument("--signatures", type=Path, help="precomputed signature matrix for the manifest")
    _add_partition(p, "all")
    _add_config_opts(p)

    p = sub.add_parser("predict", help="classify clips with a trained model")
    p.add_argument("--model", type=Path, required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--frames", type=Path, help="single frame directory")
    group.add_argument("--manifest", type=Path)
    p.add_argument("--out", type=Path, help="predictions CSV (manifest mode)")
    _add_range(p)

    p = sub.add_parser("evaluate", help="confusion matrix and report on a labelled manifest")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--report", type=Path, required=True)
    p.add_argument("--signatures", type=Path, help="precomputed signature matrix for the manifest")
    _add_partition(p, "all")

    p = sub.add_parser("synth", help="render synthetic blob clips")
    p.add_argument("--out", type=Path, required=True, help="frame directory, or dataset root with --dataset")
    p.add_argument("--pattern", choices=PATTERNS, default="orbiting_blob")
    p.add_argument("--dataset", action="store_true", help="write a labelled dataset with manifest.csv")
    p.add_argument("--patterns", default="orbiting_blob,oscillating_blob",
                   help="comma-separated classes for --dataset")
    p.add_argument("--per-class", type=int, default=50)
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--frames", type=int, default=60)
    p.add_argument("--noise", type=float, default=0.0, help="pixel noise sigma")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--truth", type=Path, help="ground-truth trajectory CSV (single clip)")
    return parser


# ---------------------------------------------------------------------------

def _volume(args):
    vol = load_frames(args.frames)
    if args.start is None and args.end is None:
        return vol
    start = args.start or 0
    end = vol.num_frames - 1 if args.end is None else args.end
    return extract_clip(vol, ClipAnnotation(args.frames.name, "", start, end))


def _partition(manifest, partition, cfg):
    if partition == "all":
        return manifest
    train, test = split_dataset(manifest, cfg.split)
    return train if partition == "train" else test


def _signatures_for(args, manifest, cfg, threads):
    """Signatures for ``manifest``: from ``--signatures`` if given, else computed."""
    if args.signatures is None:
        return featurize_entries(manifest.entries, cfg.detector, cfg.descriptor, threads)
    sigs, ids, _ = read_signatures(args.signatures)
    by_id = dict(zip(ids, sigs))
    missing = [e.clip_id for e in manifest if e.clip_id not in by_id]
    if missing:
        raise DataError(f"{args.signatures} lacks clips {missing[:5]}")
    return [by_id[e.clip_id] for e in manifest]


def cmd_detect(args, cfg, threads):
    points = detect_sstip(_volume(args), cfg.detector)
    write_points(points, args.out)
    print(f"detect: {len(points)} points -> {args.out}")


def cmd_describe(args, cfg, threads):
    described = describe_keypoints(_volume(args), read_points(args.points), cfg.descriptor)
    write_descriptors(described, args.out, cfg.descriptor.dimension)
    print(f"describe: {len(described)} descriptors -> {args.out}")


def cmd_featurize(args, cfg, threads):
    manifest = _partition(parse_manifest(args.manifest), args.partition, cfg)
    sigs = featurize_entries(manifest.entries, cfg.detector, cfg.descriptor, threads)
    write_signatures(sigs, [e.clip_id for e in manifest], manifest.labels, args.out,
                     cfg.descriptor.dimension)
    failed = sum(s is None for s in sigs)
    print(f"featurize: {len(sigs) - failed} signatures, {failed} clips without features -> {args.out}")


def cmd_train(args, cfg, threads):
    manifest = _partition(parse_manifest(args.manifest), args.partition, cfg)
    sigs = _signatures_for(args, manifest, cfg, threads)
    keep = [i for i, s in enumerate(sigs) if s is not None]
    if len(keep) < len(sigs):
        log.warning("training without %d clips that produced no features", len(sigs) - len(keep))
    X = np.stack([sigs[i] for i in keep]) if keep else np.empty((0, cfg.descriptor.dimension))
    labels = [manifest.entries[i].label for i in keep]
    model = train_model(X, labels, cfg.kernel, cfg.to_flat())
    save_model(model, args.model)
    print(f"train: {len(keep)} clips, classes {','.join(model.class_names)} -> {args.model}")


def _model_config(model):
    return PipelineConfig.from_flat(model.pipeline_config)


def cmd_predict(args, cfg, threads):
    model = load_model(args.model)
    mcfg = _model_config(model)
    if args.frames is not None:
        sig = clip_signature(_volume(args), mcfg.detector, mcfg.descriptor)
        label, dist = predict(model, sig)
        detail = " ".join(f"{n}={fmt_float(d)}" for n, d in zip(model.class_names, dist))
        print(f"predict: {label} ({detail})")
        return
    manifest = parse_manifest(args.manifest)
    sigs = featurize_entries(manifest.entries, mcfg.detector, mcfg.descriptor, threads)
    rows = []
    for entry, sig in zip(manifest, sigs):
        if sig is None:
            rows.append([entry.clip_id, "", *["nan"] * len(model.class_names)])
            continue
        label, dist = predict(model, sig)
        rows.append([entry.clip_id, label, *map(fmt_float, dist)])
    out = sys.stdout if args.out is None else open(args.out, "w", newline="", encoding="utf-8")
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["clip_id", "predicted", *(f"distance.{n}" for n in model.class_names)])
        w.writerows(rows)
    finally:
        if args.out is not None:
            out.close()
    if args.out is not None:
        print(f"predict: {len(rows)} clips -> {args.out}")


def cmd_evaluate(args, cfg, threads):
    model = load_model(args.model)
    mcfg = _model_config(model)
    manifest = _partition(parse_manifest(args.manifest), args.partition, mcfg)
    sigs = _signatures_for(args, manifest, mcfg, threads)
    ev = evaluate(model, sigs, manifest.labels, [e.clip_id for e in manifest])
    args.report.write_text(format_report(ev, model.pipeline_config), encoding="utf-8")
    cm = ev.confusion
    print(f"evaluate: accuracy={fmt_float(cm.accuracy)} ({cm.correct}/{cm.total}) -> {args.report}")


def cmd_synth(args, cfg, threads):
    kwargs = dict(width=args.width, height=args.height, num_frames=args.frames,
                  noise_sigma=args.noise)
    if args.dataset:
        patterns = [p.strip() for p in args.patterns.split(",") if p.strip()]
        unknown = set(patterns) - set(PATTERNS)
        if unknown:
            raise DataError(f"unknown patterns {sorted(unknown)}")
        m = write_synthetic_dataset(args.out, patterns, args.per_class, args.seed, **kwargs)
        print(f"synth: {len(m)} clips -> {args.out / 'manifest.csv'}")
        return
    vol, truth = generate_synthetic(args.pattern, seed=args.seed, **kwargs)
    write_frames(vol, args.out)
    if args.truth is not None:
        with open(args.truth, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "y", "t"])
            w.writerows([fmt_float(x), fmt_float(y), int(t)] for x, y, t in truth)
    print(f"synth: {args.pattern} {vol.width}x{vol.height}x{vol.num_frames} -> {args.out}")


COMMANDS = {
    "detect": cmd_detect,
    "describe": cmd_describe,
    "featurize": cmd_featurize,
    "train": cmd_train,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "synth": cmd_synth,
}


def run_command(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    threads = args.threads if args.threads is not None else default_threads()
    if threads < 1:
        print("flyact: error: --threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = load_config(getattr(args, "config", None), getattr(args, "overrides", ()))
    except (KeyError, ValueError) as exc:
        print(f"flyact: error: bad configuration: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"flyact: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    try:
        COMMANDS[args.command](args, cfg, threads)
    except NumericError as exc:
        print(f"flyact: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, OSError) as exc:
        print(f"flyact: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def main():
    sys.exit(run_command())
