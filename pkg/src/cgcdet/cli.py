"""Command-line interface: ``cgcdet <subcommand> ...``.

Subcommands:

    iou      IoU of two inline boxes (4 fields: horizontal, 5 fields: oriented)
    o2mer    axis-aligned enclosing box of an inline oriented box
    convert  DOTA label files -> canonical box CSV
    assign   oriented-center-prior and classic anchor assignment
    bench    consistency regression experiment, CGC on vs off
    hist     proposal IoU histogram against DOTA ground truth

Angles on the command line and in every file are degrees.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import __version__
from .anchors import generate_anchors
from .assignment import GroundTruthObject, assign_classic, assign_ocp
from .bench import (
    DEFAULT_BIN_EDGES,
    compare_reports,
    proposal_histogram,
    run_bench,
)
from .config import RunConfig, load_config
from .consistency import ProposalPair
from .dota import read_dota
from .errors import CGCError, InvalidInputError
from .geometry import HorizontalBox, OrientedBox, canonicalize, hbb_iou, o2mer, obb_iou

CONVERT_COLUMNS = ["index", "category", "difficult", "obb_cx", "obb_cy", "obb_w", "obb_h",
                   "obb_theta_deg", "hbb_cx", "hbb_cy", "hbb_w", "hbb_h"]
ASSIGN_COLUMNS = ["anchor_index", "label", "gt_id", "d_gh", "d_go", "t_g"]
PROPOSAL_COLUMNS = ["hbb_cx", "hbb_cy", "hbb_w", "hbb_h",
                    "obb_cx", "obb_cy", "obb_w", "obb_h", "obb_theta_deg"]
HIST_COLUMNS = ["bin_lo", "bin_hi", "count_hbb", "count_obb"]


def fmt(value: float) -> str:
    """Six-decimal fixed point with trailing zeros trimmed (``1.000000`` -> ``1``)."""
    text = f"{value:.6f}".rstrip("0").rstrip(".")
    return "0" if text in ("-0", "") else text


def fixed(value) -> str:
    """Six-decimal fixed point for file columns; ``None`` becomes an empty cell."""
    if value is None:
        return ""
    text = f"{value:.6f}"
    return "0.000000" if text == "-0.000000" else text


def parse_box(text: str):
    """Parse ``"cx,cy,w,h"`` into a HorizontalBox or ``"cx,cy,w,h,deg"`` into an OrientedBox."""
    try:
        values = [float(v) for v in text.split(",")]
    except ValueError:
        raise InvalidInputError(f"box {text!r}: fields must be numbers") from None
    if len(values) == 4:
        return HorizontalBox(*values)
    if len(values) == 5:
        cx, cy, w, h, deg = values
        return canonicalize(cx, cy, w, h, math.radians(deg))
    raise InvalidInputError(f"box {text!r}: expected 4 or 5 comma-separated fields, got {len(values)}")


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _json_text(data) -> str:
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def read_converted(path) -> list[tuple[OrientedBox, HorizontalBox, str, int]]:
    """Read a CSV written by ``convert`` back into boxes."""
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            obb = canonicalize(float(row["obb_cx"]), float(row["obb_cy"]), float(row["obb_w"]),
                               float(row["obb_h"]), math.radians(float(row["obb_theta_deg"])))
            hbb = HorizontalBox(float(row["hbb_cx"]), float(row["hbb_cy"]),
                                float(row["hbb_w"]), float(row["hbb_h"]))
            out.append((obb, hbb, row["category"], int(row["difficult"])))
    return out


def read_proposals(path) -> list[ProposalPair]:
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(PROPOSAL_COLUMNS) - set(reader.fieldnames or [])
        if missing:
            raise InvalidInputError(f"{path}: missing column(s) {sorted(missing)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                v = [float(row[c]) for c in PROPOSAL_COLUMNS]
                out.append(ProposalPair(
                    HorizontalBox(*v[:4]),
                    canonicalize(v[4], v[5], v[6], v[7], math.radians(v[8]))))
            except (ValueError, CGCError) as exc:
                raise InvalidInputError(f"{path}:{lineno}: {exc}") from None
    return out


def _load_gts(path) -> list[GroundTruthObject]:
    return [GroundTruthObject(obj.hbb, obj.obb, obj.category, i)
            for i, obj in enumerate(read_dota(path))]


def cmd_iou(args, cfg: RunConfig) -> int:
    a, b = parse_box(args.a), parse_box(args.b)
    if type(a) is not type(b):
        raise InvalidInputError("--a and --b must both be horizontal (4 fields) or oriented (5 fields)")
    value = hbb_iou(a, b) if isinstance(a, HorizontalBox) else obb_iou(a, b)
    print(f"{value:.6f}")
    return 0


def cmd_o2mer(args, cfg: RunConfig) -> int:
    box = parse_box(args.box)
    if not isinstance(box, OrientedBox):
        raise InvalidInputError("--box needs 5 fields: cx,cy,w,h,theta_deg")
    mer = o2mer(box)
    print(",".join(fmt(v) for v in mer.as_tuple()))
    return 0


def cmd_convert(args, cfg: RunConfig) -> int:
    out_dir = Path(args.out_dir or cfg.io.out_dir)
    for src in args.files:
        objects = read_dota(src)
        rows = []
        for i, obj in enumerate(objects):
            o, h = obj.obb, obj.hbb
            rows.append([i, obj.category, obj.difficult, fixed(o.cx), fixed(o.cy), fixed(o.w),
                         fixed(o.h), fixed(o.theta_deg), fixed(h.cx), fixed(h.cy),
                         fixed(h.w), fixed(h.h)])
        dest = out_dir / f"{Path(src).stem}.csv"
        write_atomic(dest, _csv_text(CONVERT_COLUMNS, rows))
        print(f"{src}: {len(objects)} object(s) -> {dest}")
    return 0


def _assign_rows(result):
    return [[r.anchor_index, r.label.value, "" if r.gt_id is None else r.gt_id,
             fixed(r.d_gh), fixed(r.d_go), fixed(r.t_g)] for r in result.records]


def cmd_assign(args, cfg: RunConfig) -> int:
    out_dir = Path(args.out_dir or cfg.io.out_dir)
    width, height = args.image_size or cfg.io.image_size
    anchors = generate_anchors(width, height, cfg.anchor_grid)
    if not anchors:
        raise InvalidInputError(
            f"image {width}x{height} is smaller than one anchor stride ({cfg.anchor_grid.stride})")
    summary = {"config": cfg.to_dict(), "image_size": [width, height],
               "num_anchors": len(anchors), "files": {}}
    for src in args.files:
        gts = _load_gts(src)
        ocp = assign_ocp(anchors, gts, cfg.assignment)
        classic = assign_classic(anchors, gts, cfg.assignment.threshold, cfg.assignment.candidate_iou)
        stem = Path(src).stem
        write_atomic(out_dir / f"{stem}_ocp.csv", _csv_text(ASSIGN_COLUMNS, _assign_rows(ocp)))
        write_atomic(out_dir / f"{stem}_classic.csv", _csv_text(ASSIGN_COLUMNS, _assign_rows(classic)))
        summary["files"][stem] = {
            "source": str(src),
            "num_gts": len(gts),
            "ocp": ocp.counts(),
            "classic": classic.counts(),
        }
        print(f"{src}: ocp {ocp.counts()['positive']} positive, "
              f"classic {classic.counts()['positive']} positive")
    write_atomic(out_dir / "assign_summary.json", _json_text(summary))
    return 0


def cmd_bench(args, cfg: RunConfig) -> int:
    out_dir = Path(args.out_dir or cfg.io.out_dir)
    bench = cfg.bench
    overrides = {"seed": args.seed}
    for name in ("trials", "steps", "step_size", "lambda_cgc"):
        value = getattr(args, name)
        if value is not None:
            overrides[name] = value
    on_cfg = replace(bench, **overrides)
    if on_cfg.lambda_cgc == 0:
        raise InvalidInputError("lambda_cgc must be > 0 for the CGC-on run")
    off_cfg = replace(on_cfg, lambda_cgc=0.0)
    on, off = run_bench(on_cfg), run_bench(off_cfg)
    comparison = compare_reports(on, off)
    write_atomic(out_dir / "bench_cgc_on.json", _json_text(on.to_dict()))
    write_atomic(out_dir / "bench_cgc_off.json", _json_text(off.to_dict()))
    write_atomic(out_dir / "bench_summary.json",
                 _json_text({"config": cfg.to_dict() | {"bench": asdict(on_cfg)},
                             "comparison": comparison}))
    print(f"consistency IoU: on {comparison['mean_consistency_iou_on']:.6f} "
          f"off {comparison['mean_consistency_iou_off']:.6f} "
          f"win-rate {comparison['win_rate']:.3f}")
    return 0


def jitter_proposals(gts, per_gt: int, jitter: float, seed: int) -> list[ProposalPair]:
    """Random proposals scattered around each ground truth (for histogram demos)."""
    rng = np.random.default_rng(seed)
    out = []
    for g in gts:
        o, h = g.obb, g.hbb
        for _ in range(per_gt):
            z = rng.standard_normal(9) * jitter
            hbb = HorizontalBox(h.cx + z[0] * h.w, h.cy + z[1] * h.h,
                                h.w * math.exp(z[2]), h.h * math.exp(z[3]))
            obb = canonicalize(o.cx + z[4] * o.w, o.cy + z[5] * o.h, o.w * math.exp(z[6]),
                               o.h * math.exp(z[7]), o.theta + z[8])
            out.append(ProposalPair(hbb, obb))
    return out


def cmd_hist(args, cfg: RunConfig) -> int:
    out_dir = Path(args.out_dir or cfg.io.out_dir)
    gts = _load_gts(args.ann)
    if args.proposals:
        proposals = read_proposals(args.proposals)
    else:
        proposals = jitter_proposals(gts, args.per_gt, args.jitter, args.seed)
    if not proposals:
        raise InvalidInputError("no proposals to histogram")
    hist = proposal_histogram(proposals, gts, DEFAULT_BIN_EDGES)
    rows = [[fixed(lo), fixed(hi), ch, co] for lo, hi, ch, co in
            zip(hist.bin_edges, hist.bin_edges[1:], hist.counts_hbb, hist.counts_obb)]
    dest = out_dir / f"{Path(args.ann).stem}_hist.csv"
    write_atomic(dest, _csv_text(HIST_COLUMNS, rows))
    print(f"{len(proposals)} proposal(s) -> {dest}")
    return 0


def _positive_float(text):
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="seed for every random draw")
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--out-dir", help="output directory (default: io.out_dir from config)")

    parser = argparse.ArgumentParser(prog="cgcdet", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("iou", parents=[common], help="IoU of two inline boxes")
    p.add_argument("--a", required=True, help='"cx,cy,w,h" or "cx,cy,w,h,theta_deg"')
    p.add_argument("--b", required=True)
    p.set_defaults(func=cmd_iou)

    p = sub.add_parser("o2mer", parents=[common], help="enclosing axis-aligned box")
    p.add_argument("--box", required=True, help='"cx,cy,w,h,theta_deg"')
    p.set_defaults(func=cmd_o2mer)

    p = sub.add_parser("convert", parents=[common], help="DOTA labels -> canonical box CSV")
    p.add_argument("files", nargs="+")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("assign", parents=[common], help="label anchors for DOTA files")
    p.add_argument("files", nargs="+")
    p.add_argument("--image-size", nargs=2, type=_positive_float, metavar=("W", "H"))
    p.set_defaults(func=cmd_assign)

    p = sub.add_parser("bench", parents=[common], help="CGC on/off regression experiment")
    p.add_argument("--trials", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--step-size", dest="step_size", type=float)
    p.add_argument("--lambda-cgc", dest="lambda_cgc", type=float)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("hist", parents=[common], help="proposal IoU histogram")
    p.add_argument("--ann", required=True, help="DOTA label file with ground truth")
    p.add_argument("--proposals", help="proposal CSV; default: jittered copies of each GT")
    p.add_argument("--per-gt", type=int, default=20)
    p.add_argument("--jitter", type=float, default=0.1)
    p.set_defaults(func=cmd_hist)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        return args.func(args, cfg)
    except (CGCError, OSError) as exc:
        print(f"cgcdet {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
