"""Command-line driver: ``track``, ``eval``, ``synth`` and ``sweep``.

Exit codes: 0 ok, 2 missing or unreadable input, 3 parse error, 4 undefined
metric, 5 invalid scenario.  Every failure prints exactly one line to stderr.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import sys
import time

from .gmphd import FilterParams
from .hda import TrackerConfig, run_sequence
from .metrics import UndefinedMetricError, evaluate
from .motio import (MotParseError, parse_detections, parse_ground_truth, parse_results,
                    parse_seqinfo, write_detections, write_ground_truth, write_results)
from .synth import generate, parse_scenario

EXIT_OK = 0
EXIT_MISSING = 2
EXIT_PARSE = 3
EXIT_METRIC = 4
EXIT_SPEC = 5

DEFAULT_GRID_TAU = (1, 2, 3)
DEFAULT_GRID_THETA = (5, 10, 20, 30, 50, 70, 100)
SWEEP_VARIANTS = (
    ("HDA", dict(ogm_enabled=False)),
    ("OGM-IOU", dict(merge_metric="iou")),
    ("OGM-SIOA", dict(merge_metric="sioa")),
)
SWEEP_COLUMNS = ("variant", "tau", "theta", "MOTA", "MOTP", "MT", "ML",
                 "FP", "FN", "IDS", "Frag", "GT")


class CliError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(EXIT_MISSING, f"{self.prog}: {message}")


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _int_list(text):
    try:
        values = [_positive_int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("grid must not be empty")
    return values


def build_parser():
    parser = _Parser(prog="gmphd-ogm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def tracker_flags(p):
        p.add_argument("--sigma-m", type=float, default=0.5, help="merge threshold")
        p.add_argument("--tau-t2t", type=_positive_int, default=2,
                       help="minimum tracklet length for T2TA")
        p.add_argument("--theta-t2t", type=_positive_int, default=30,
                       help="maximum frame gap bridged by T2TA")
        p.add_argument("--merge-metric", choices=("iou", "sioa"), default="sioa")
        p.add_argument("--no-ogm", action="store_true", help="disable merging and OGEM")
        p.add_argument("--interpolate", action="store_true",
                       help="fill track gaps linearly after the run")
        p.add_argument("--conf-floor", type=float, default=float("-inf"),
                       help="drop detections scoring below this value")
        p.add_argument("--seqinfo", help="seqinfo.ini giving the sequence length")

    p = sub.add_parser("track", help="track a detection file")
    p.add_argument("--det", required=True)
    p.add_argument("--out", required=True)
    tracker_flags(p)

    p = sub.add_parser("eval", help="score a result file against ground truth")
    p.add_argument("--gt", required=True)
    p.add_argument("--out", required=True, help="result file to score")

    p = sub.add_parser("synth", help="generate a synthetic sequence")
    p.add_argument("--spec", required=True, help="scenario file")
    p.add_argument("--det", required=True, help="detection file to write")
    p.add_argument("--gt", required=True, help="ground-truth file to write")
    p.add_argument("--seed", type=int, help="override the scenario seed")

    p = sub.add_parser("sweep", help="ablation grid over tau and theta")
    p.add_argument("--det", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--out", help="CSV file (stdout when omitted)")
    p.add_argument("--grid-tau", type=_int_list, default=list(DEFAULT_GRID_TAU))
    p.add_argument("--grid-theta", type=_int_list, default=list(DEFAULT_GRID_THETA))
    tracker_flags(p)
    return parser


def _read(path, parse, *args):
    try:
        with open(path, newline="") as fh:
            return parse(fh, *args)
    except OSError as exc:
        raise CliError(EXIT_MISSING, f"cannot read {path}: {exc.strerror or exc}") from None
    except MotParseError as exc:
        raise CliError(EXIT_PARSE, f"{path}: {exc}") from None


def tracker_config(args, **overrides):
    values = dict(sigma_m=args.sigma_m, tau_t2t=args.tau_t2t, theta_t2t=args.theta_t2t,
                  merge_metric=args.merge_metric, ogm_enabled=not args.no_ogm,
                  interpolate=args.interpolate)
    values.update(overrides)
    try:
        return TrackerConfig(FilterParams(), **values)
    except ValueError as exc:
        raise CliError(EXIT_MISSING, f"invalid tracker setting: {exc}") from None


def _last_frame(args, detections):
    if args.seqinfo:
        return _read(args.seqinfo, parse_seqinfo).length
    return max(detections, default=0)


def cmd_track(args, stdout):
    detections = _read(args.det, parse_detections, args.conf_floor)
    last = _last_frame(args, detections)
    config = tracker_config(args)
    start = time.perf_counter()
    tracks = run_sequence(detections, config, 1, last)
    elapsed = time.perf_counter() - start
    try:
        with open(args.out, "w", newline="") as fh:
            rows = write_results(tracks, fh)
    except OSError as exc:
        raise CliError(EXIT_MISSING, f"cannot write {args.out}: {exc.strerror or exc}") from None
    fps = last / elapsed if elapsed > 0 else float("inf")
    print(f"tracked {last} frames, {rows} boxes in {elapsed:.3f} s ({fps:.1f} frames/s)",
          file=stdout)
    return EXIT_OK


def _score(gt, results):
    try:
        return evaluate(gt, results)
    except UndefinedMetricError as exc:
        raise CliError(EXIT_METRIC, f"undefined metric: {exc}") from None


def cmd_eval(args, stdout):
    gt = _read(args.gt, parse_ground_truth)
    results = _read(args.out, parse_results)
    report = _score(gt, results)
    print(report.table(), file=stdout)
    print(report.key_values(), file=stdout)
    return EXIT_OK


def cmd_synth(args, stdout):
    try:
        with open(args.spec) as fh:
            spec = parse_scenario(fh)
    except OSError as exc:
        raise CliError(EXIT_MISSING, f"cannot read {args.spec}: {exc.strerror or exc}") from None
    except ValueError as exc:
        raise CliError(EXIT_SPEC, f"{args.spec}: {exc}") from None
    if args.seed is not None:
        spec = dataclasses.replace(spec, seed=args.seed)
    gt, det = generate(spec)
    try:
        with open(args.det, "w", newline="") as fh:
            n_det = write_detections(det, fh)
        with open(args.gt, "w", newline="") as fh:
            n_gt = write_ground_truth(gt, fh)
    except OSError as exc:
        raise CliError(EXIT_MISSING, f"cannot write output: {exc.strerror or exc}") from None
    print(f"wrote {n_det} detections and {n_gt} ground-truth rows over {spec.length} frames",
          file=stdout)
    return EXIT_OK


def sweep_rows(detections, gt, args, last_frame):
    """One dict per (variant, tau, theta) cell, in grid order."""
    rows = []
    for name, variant in SWEEP_VARIANTS:
        for tau in args.grid_tau:
            for theta in args.grid_theta:
                config = tracker_config(args, tau_t2t=tau, theta_t2t=theta, **variant)
                report = _score(gt, run_sequence(detections, config, 1, last_frame))
                d = report.as_dict()
                rows.append({"variant": name, "tau": tau, "theta": theta,
                             "MOTA": f"{d['MOTA']:.4f}", "MOTP": f"{d['MOTP']:.4f}",
                             "MT": report.MT, "ML": report.ML, "FP": report.FP,
                             "FN": report.FN, "IDS": report.IDS, "Frag": report.Frag,
                             "GT": report.gt_total})
    return rows


def cmd_sweep(args, stdout):
    detections = _read(args.det, parse_detections, args.conf_floor)
    gt = _read(args.gt, parse_ground_truth)
    last = max(_last_frame(args, detections), max(gt, default=0))
    rows = sweep_rows(detections, gt, args, last)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    if args.out:
        try:
            with open(args.out, "w", newline="") as fh:
                fh.write(buf.getvalue())
        except OSError as exc:
            raise CliError(EXIT_MISSING, f"cannot write {args.out}: {exc.strerror or exc}") from None
        print(f"wrote {len(rows)} sweep rows to {args.out}", file=stdout)
    else:
        stdout.write(buf.getvalue())
    return EXIT_OK


COMMANDS = {"track": cmd_track, "eval": cmd_eval, "synth": cmd_synth, "sweep": cmd_sweep}


def main(argv=None, stdout=None, stderr=None):
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args, stdout)
    except CliError as exc:
        print(f"error: {exc}", file=stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
