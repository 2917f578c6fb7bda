"""Command-line interface.

Exit codes: 0 on success, 2 when matching failed (fewer than four
consistent matches), 1 for any other error including bad usage.
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

from . import __version__
from .errors import RiftError
from .evaluate import GroundTruth, dumps, evaluate, result_to_dict, rotation_sweep
from .imgproc import load_grayscale
from .pipeline import RiftConfig, extract_features, match_features
from .render import dump_debug, render_matches, write_keypoints_csv

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_FAILED = 2

log = logging.getLogger("rift")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _write(text: str, path) -> None:
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _load_config(args) -> RiftConfig:
    cfg = RiftConfig.load(args.config) if args.config else RiftConfig()
    return cfg


def _run_pair(args, keep: bool = False):
    cfg = _load_config(args)
    ref_img = load_grayscale(args.reference)
    tgt_img = load_grayscale(args.target)
    t0 = time.perf_counter()
    ref = extract_features(ref_img, cfg, all_variants=False, keep_intermediates=keep)
    tgt = extract_features(tgt_img, cfg, all_variants=True, keep_intermediates=keep)
    result = match_features(ref, tgt, cfg)
    runtime = time.perf_counter() - t0
    log.info("%d/%d keypoints, %d candidates, %d inliers", len(ref.keypoints), len(tgt.keypoints),
             len(result.correspondences), result.inlier_count)
    return ref_img, tgt_img, ref, tgt, result, runtime


def cmd_match(args) -> int:
    keep = bool(args.dump)
    ref_img, tgt_img, ref, tgt, result, _ = _run_pair(args, keep=keep)
    if args.dump:
        dump_dir = Path(args.dump_dir)
        dump_debug(ref, dump_dir, "reference", args.dump)
        dump_debug(tgt, dump_dir, "target", args.dump)
    if args.keypoints_csv:
        stem = Path(args.keypoints_csv)
        write_keypoints_csv(ref.keypoints, stem.with_name(stem.name + "_reference.csv"))
        write_keypoints_csv(tgt.keypoints, stem.with_name(stem.name + "_target.csv"))
    if args.render:
        render_matches(ref_img, tgt_img, result, args.render)
    _write(dumps(result_to_dict(result)), args.out_json)
    return EXIT_OK if result.success else EXIT_FAILED


def cmd_eval(args) -> int:
    gt = GroundTruth.load(args.gt)
    ref_img, tgt_img, _, _, result, runtime = _run_pair(args)
    report = evaluate(result, gt, args.threshold, runtime)
    if args.render:
        render_matches(ref_img, tgt_img, result, args.render)
    _write(dumps(report.to_dict()), args.out_json)
    return EXIT_OK if report.success else EXIT_FAILED


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    sweep = rotation_sweep(args.reference, cfg, step=args.step, workers=args.workers,
                           threshold=args.threshold)
    for r in sweep.reports:
        log.info("angle %6.1f  NCM %4d  %s", r.angle, r.ncm, "ok" if r.success else "FAILED")
    _write(dumps(sweep.to_dict()), args.out_json)
    return EXIT_OK if sweep.success_rate == 1.0 else EXIT_FAILED


def cmd_config(args) -> int:
    _write(RiftConfig().to_toml(), args.output)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rift", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS,
                        help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def pair_args(p):
        p.add_argument("reference", help="reference image (described once per keypoint)")
        p.add_argument("target", help="target image (described once per channel order)")
        p.add_argument("--config", help="TOML config file")
        p.add_argument("--out-json", help="write the JSON report here instead of stdout")
        p.add_argument("--render", help="write a PNG match overlay")

    p = sub.add_parser("match", parents=[common], help="match an image pair")
    pair_args(p)
    p.add_argument("--dump", nargs="+", choices=("pc", "mim", "moments"), default=[],
                   help="export intermediate rasters as PNG")
    p.add_argument("--dump-dir", default=".", help="directory for --dump output")
    p.add_argument("--keypoints-csv", help="prefix for keypoint CSV files")
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("eval", parents=[common], help="match a pair and score it against ground truth")
    pair_args(p)
    p.add_argument("--gt", required=True, help="ground-truth JSON (affine or five point pairs)")
    p.add_argument("--threshold", type=float, default=3.0, help="correct-match residual, pixels")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", parents=[common], help="rotation sweep of one image against itself")
    p.add_argument("reference")
    p.add_argument("--step", type=float, default=5.0, help="angle step in degrees")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--threshold", type=float, default=3.0)
    p.add_argument("--config", help="TOML config file")
    p.add_argument("--out-json", help="write the JSON report here instead of stdout")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("config", parents=[common], help="print the default configuration")
    p.add_argument("-o", "--output", help="write to this file instead of stdout")
    p.set_defaults(func=cmd_config)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (RiftError, OSError, ValueError) as exc:
        print(f"rift: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
