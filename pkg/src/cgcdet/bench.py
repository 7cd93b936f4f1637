"""Desk-scale experiments: Monte Carlo IoU, consistency regression, IoU histograms.

The regression experiment is a toy stand-in for detector training. Each trial
fits a horizontal proposal, an oriented proposal and its angle to one ground
truth by plain gradient descent on

    smoothL1(hbb) + smoothL1(obb center/size) + smoothL1(angle) + lambda * cgc

and records how well the final proposals agree with the ground truth and with
each other. Running it with ``lambda_cgc`` on and off on the same seeds shows
what the consistency term buys.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .assignment import GroundTruthObject
from .consistency import (
    ProposalPair,
    cgc_value_and_grad,
    smooth_l1,
    smooth_l1_angle,
    smooth_l1_angle_grad,
    smooth_l1_grad,
)
from .errors import InvalidInputError
from .geometry import (
    HorizontalBox,
    OrientedBox,
    canonicalize,
    enclosing_size,
    hbb_iou,
    o2mer,
    obb_iou,
    points_in_obb,
    wrap_angle,
)

DEFAULT_BIN_EDGES = tuple(round(0.5 + 0.05 * i, 2) for i in range(11))
MIN_SIDE = 1e-6
_MC_CHUNK = 1 << 18


def mc_iou_oracle(a: OrientedBox, b: OrientedBox, samples: int = 1_000_000, seed: int = 0) -> float:
    """Monte Carlo IoU of two oriented boxes.

    Points are drawn uniformly over the axis-aligned rectangle covering both
    boxes and classified with a point-in-rotated-rectangle test. Deterministic
    for a fixed seed; the standard error is about ``1/sqrt(samples)``.
    """
    if samples < 10_000:
        raise InvalidInputError(f"samples must be >= 10000, got {samples}")
    ha, hb = o2mer(a), o2mer(b)
    ax1, ay1, ax2, ay2 = ha.xyxy
    bx1, by1, bx2, by2 = hb.xyxy
    x1, y1 = min(ax1, bx1), min(ay1, by1)
    x2, y2 = max(ax2, bx2), max(ay2, by2)
    rng = np.random.default_rng(seed)
    inter = union = 0
    remaining = samples
    while remaining > 0:
        m = min(remaining, _MC_CHUNK)
        xs = rng.uniform(x1, x2, m)
        ys = rng.uniform(y1, y2, m)
        in_a = points_in_obb(a, xs, ys)
        in_b = points_in_obb(b, xs, ys)
        inter += int(np.count_nonzero(in_a & in_b))
        union += int(np.count_nonzero(in_a | in_b))
        remaining -= m
    return inter / union if union else 0.0


@dataclass(frozen=True)
class BenchConfig:
    seed: int = 0
    trials: int = 200
    steps: int = 500
    step_size: float = 1e-2
    lambda_cgc: float = 1.0
    noise_scale: float = 0.15
    gt_aspect_range: tuple[float, float] = (1.5, 6.0)
    gt_angle_range: tuple[float, float] = (-90.0, 90.0)

    def __post_init__(self):
        object.__setattr__(self, "gt_aspect_range", tuple(float(v) for v in self.gt_aspect_range))
        object.__setattr__(self, "gt_angle_range", tuple(float(v) for v in self.gt_angle_range))
        problems = []
        if self.seed < 0:
            problems.append("seed must be >= 0")
        if self.trials < 1:
            problems.append("trials must be >= 1")
        if self.steps < 0:
            problems.append("steps must be >= 0")
        if not self.step_size > 0:
            problems.append("step_size must be > 0")
        if not self.lambda_cgc >= 0:
            problems.append("lambda_cgc must be >= 0")
        if not 0 < self.noise_scale <= 0.5:
            problems.append("noise_scale must be in (0, 0.5]")
        lo, hi = self.gt_aspect_range
        if not 1 <= lo <= hi:
            problems.append("gt_aspect_range must satisfy 1 <= lo <= hi")
        lo, hi = self.gt_angle_range
        if not -90 <= lo <= hi <= 90:
            problems.append("gt_angle_range must lie within [-90, 90] degrees")
        if problems:
            raise InvalidInputError("; ".join(problems))


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    hbb_iou: float
    obb_iou: float
    consistency_iou: float
    angle_error_deg: float


@dataclass(frozen=True)
class BenchReport:
    config: BenchConfig
    records: tuple[TrialRecord, ...] = field(default_factory=tuple)

    def mean(self, name: str) -> float:
        return float(np.mean([getattr(r, name) for r in self.records]))

    @property
    def aggregates(self) -> dict[str, float]:
        return {
            "mean_hbb_iou": self.mean("hbb_iou"),
            "mean_obb_iou": self.mean("obb_iou"),
            "mean_consistency_iou": self.mean("consistency_iou"),
            "mean_angle_error_deg": self.mean("angle_error_deg"),
        }

    def to_dict(self) -> dict:
        return {
            "config": asdict(self.config),
            "aggregates": self.aggregates,
            "trials": [asdict(r) for r in self.records],
        }


def compare_reports(with_cgc: BenchReport, without_cgc: BenchReport) -> dict[str, float]:
    """Paired comparison of two runs over the same trial seeds."""
    if len(with_cgc.records) != len(without_cgc.records):
        raise InvalidInputError("reports have different trial counts")
    on = np.array([r.consistency_iou for r in with_cgc.records])
    off = np.array([r.consistency_iou for r in without_cgc.records])
    return {
        "trials": len(on),
        "mean_consistency_iou_on": float(on.mean()),
        "mean_consistency_iou_off": float(off.mean()),
        "win_rate": float(np.mean(on > off)),
        "mean_hbb_iou_on": with_cgc.mean("hbb_iou"),
        "mean_hbb_iou_off": without_cgc.mean("hbb_iou"),
        "mean_obb_iou_on": with_cgc.mean("obb_iou"),
        "mean_obb_iou_off": without_cgc.mean("obb_iou"),
    }


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng([seed, trial])


def sample_trial(cfg: BenchConfig, trial: int) -> tuple[OrientedBox, list[float]]:
    """Ground truth and a perturbed 9-parameter starting point for one trial.

    Returns ``(gt_obb, params)`` where ``params`` is hbb (cx, cy, w, h) followed
    by obb (cx, cy, w, h, theta). Noise is redrawn until the starting horizontal
    proposal overlaps the enclosing box of the starting oriented proposal, which
    keeps the consistency loss off its flat disjoint plateau.
    """
    rng = trial_rng(cfg.seed, trial)
    cx, cy = rng.uniform(0.0, 1.0, 2)
    aspect = rng.uniform(*cfg.gt_aspect_range)
    theta = math.radians(rng.uniform(*cfg.gt_angle_range))
    gt = canonicalize(cx, cy, 1.0, 1.0 / aspect, theta)
    gh = o2mer(gt)
    s = cfg.noise_scale
    for _ in range(1000):
        z = np.clip(rng.standard_normal(9), -2.0, 2.0)
        params = [
            gh.cx + s * gh.w * z[0],
            gh.cy + s * gh.h * z[1],
            max(gh.w * (1 + s * z[2]), 0.05 * gh.w),
            max(gh.h * (1 + s * z[3]), 0.05 * gh.h),
            gt.cx + s * gh.w * z[4],
            gt.cy + s * gh.h * z[5],
            max(gt.w * (1 + s * z[6]), 0.05 * gt.w),
            max(gt.h * (1 + s * z[7]), 0.05 * gt.h),
            gt.theta + s * z[8],
        ]
        if cgc_value_and_grad(params[:4], params[4:])[0] < 1.0:
            return gt, [float(v) for v in params]
    raise RuntimeError("could not draw an overlapping initialization")  # pragma: no cover


def total_loss_and_grad(params: Sequence[float], gt: OrientedBox, lambda_cgc: float):
    """Combined regression loss of the toy experiment and its gradient."""
    gh = o2mer(gt)
    targets = (gh.cx, gh.cy, gh.w, gh.h, gt.cx, gt.cy, gt.w, gt.h)
    loss = 0.0
    grad = [0.0] * 9
    for i, target in enumerate(targets):
        delta = params[i] - target
        loss += smooth_l1(delta)
        grad[i] = smooth_l1_grad(delta)
    loss += smooth_l1_angle(params[8], gt.theta)
    grad[8] = smooth_l1_angle_grad(params[8], gt.theta)
    if lambda_cgc > 0:
        value, g = cgc_value_and_grad(params[:4], params[4:])
        loss += lambda_cgc * value
        for i in range(9):
            grad[i] += lambda_cgc * g[i]
    return loss, grad


def descend(params: Sequence[float], gt: OrientedBox, cfg: BenchConfig, losses: list | None = None):
    """Run ``cfg.steps`` fixed-size gradient steps; optionally log the loss per step."""
    p = list(params)
    for _ in range(cfg.steps):
        loss, grad = total_loss_and_grad(p, gt, cfg.lambda_cgc)
        if losses is not None:
            losses.append(loss)
        for i in range(9):
            p[i] -= cfg.step_size * grad[i]
        for i in (2, 3, 6, 7):
            p[i] = max(p[i], MIN_SIDE)
    if losses is not None:
        losses.append(total_loss_and_grad(p, gt, cfg.lambda_cgc)[0])
    return p


def evaluate(params: Sequence[float], gt: OrientedBox, trial: int = 0) -> TrialRecord:
    hbb = HorizontalBox(*params[:4])
    obb = canonicalize(*params[4:])
    ww, hh = enclosing_size(params[6], params[7], params[8])
    consistency = hbb_iou(hbb, HorizontalBox(params[4], params[5], ww, hh))
    angle_err = abs(wrap_angle(params[8] - gt.theta, math.pi))
    return TrialRecord(
        trial=trial,
        hbb_iou=hbb_iou(hbb, o2mer(gt)),
        obb_iou=obb_iou(obb, gt),
        consistency_iou=consistency,
        angle_error_deg=math.degrees(angle_err),
    )


def run_bench(cfg: BenchConfig) -> BenchReport:
    """Run every trial of the consistency regression experiment."""
    records = []
    for trial in range(cfg.trials):
        gt, init = sample_trial(cfg, trial)
        final = descend(init, gt, cfg)
        records.append(evaluate(final, gt, trial))
    return BenchReport(cfg, tuple(records))


@dataclass(frozen=True)
class IoUHistogram:
    bin_edges: tuple[float, ...]
    counts_hbb: tuple[int, ...]
    counts_obb: tuple[int, ...]

    @property
    def bins(self) -> int:
        return len(self.bin_edges) - 1


def _bucket(value: float, edges: Sequence[float]) -> int | None:
    if value < edges[0]:
        return None
    return min(bisect.bisect_right(edges, value) - 1, len(edges) - 2)


def proposal_histogram(
    proposals: Sequence[ProposalPair],
    gts: Sequence[GroundTruthObject],
    bin_edges: Sequence[float] = DEFAULT_BIN_EDGES,
) -> IoUHistogram:
    """Count proposals by their best IoU with any ground truth, per track.

    Values below the first edge are dropped; values at or above the last edge
    land in the last bin.
    """
    if not proposals:
        raise InvalidInputError("proposal list is empty")
    edges = tuple(float(e) for e in bin_edges)
    if len(edges) < 2 or any(b <= a for a, b in zip(edges, edges[1:])):
        raise InvalidInputError(f"bin edges must be strictly increasing, got {edges}")
    counts_h = [0] * (len(edges) - 1)
    counts_o = [0] * (len(edges) - 1)
    for prop in proposals:
        best_h = max((hbb_iou(prop.hbb, g.hbb) for g in gts), default=0.0)
        best_o = max((obb_iou(prop.obb, g.obb) for g in gts), default=0.0)
        k = _bucket(best_h, edges)
        if k is not None:
            counts_h[k] += 1
        k = _bucket(best_o, edges)
        if k is not None:
            counts_o[k] += 1
    return IoUHistogram(edges, tuple(counts_h), tuple(counts_o))
