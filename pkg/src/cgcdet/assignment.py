"""Anchor label assignment guided by the oriented ground truth.

Two assigners share one result type:

* :func:`assign_ocp` scores each candidate anchor by the mean of its IoU with
  the horizontal ground truth and the fraction of the oriented ground truth it
  covers, so anchors sitting on the object itself beat anchors sitting in the
  empty corners of a tilted object's horizontal box;
* :func:`assign_classic` is the usual max-IoU rule on horizontal boxes only.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import InvalidInputError, InvalidValueError
from .geometry import (
    HorizontalBox,
    OrientedBox,
    corners,
    hbb_iou,
    o2mer,
    pairwise_hbb_iou,
    rect_overlap_areas,
)

GT_CONSISTENCY_TOL = 1e-6
# scores closer than this are treated as tied, so that roundoff from moving or
# scaling a scene cannot change which anchor or ground truth wins a tie
TIE_TOL = 1e-12


class Label(str, enum.Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    IGNORED = "ignored"


@dataclass(frozen=True)
class GroundTruthObject:
    """Ground truth with both its oriented box and horizontal enclosing box."""

    hbb: HorizontalBox
    obb: OrientedBox
    category: str = "object"
    id: int = 0

    def __post_init__(self):
        ref = o2mer(self.obb)
        for name in ("cx", "cy", "w", "h"):
            if abs(getattr(self.hbb, name) - getattr(ref, name)) > GT_CONSISTENCY_TOL:
                raise InvalidValueError(
                    f"gt {self.id}: hbb.{name}={getattr(self.hbb, name)!r} does not match "
                    f"the enclosing box of obb ({getattr(ref, name)!r})")

    @classmethod
    def from_obb(cls, obb: OrientedBox, category: str = "object", id: int = 0):
        return cls(o2mer(obb), obb, category, id)


@dataclass(frozen=True)
class AssignmentConfig:
    candidate_iou: float = 0.3
    threshold: float = 0.7
    force_best_per_gt: bool = True

    def __post_init__(self):
        if not 0.0 <= self.candidate_iou < self.threshold <= 1.0:
            raise InvalidInputError(
                "need 0 <= candidate_iou < threshold <= 1, got "
                f"candidate_iou={self.candidate_iou}, threshold={self.threshold}")


@dataclass(frozen=True)
class AnchorAssignment:
    anchor_index: int
    label: Label
    gt_id: int | None = None
    t_g: float | None = None
    d_gh: float | None = None
    d_go: float | None = None


LABELS = (Label.POSITIVE, Label.NEGATIVE, Label.IGNORED)
_POS, _NEG, _IGN = range(3)
NO_GT = -1


def _optional(x: float) -> float | None:
    return None if x != x else x


@dataclass(frozen=True, eq=False)
class AssignmentResult:
    """Per-anchor labels stored column-wise.

    ``codes`` index into :data:`LABELS`; ``gt_id`` is ``NO_GT`` and the score
    columns are NaN where a field does not apply. :attr:`records` gives the
    same data as one :class:`AnchorAssignment` per anchor.
    """

    codes: np.ndarray
    gt_id: np.ndarray
    t_g: np.ndarray
    d_gh: np.ndarray
    d_go: np.ndarray

    def __len__(self):
        return len(self.codes)

    @cached_property
    def records(self) -> tuple[AnchorAssignment, ...]:
        gt_id = [None if g == NO_GT else g for g in self.gt_id.tolist()]
        columns = zip(self.codes.tolist(), gt_id, self.t_g.tolist(),
                      self.d_gh.tolist(), self.d_go.tolist())
        return tuple(AnchorAssignment(i, LABELS[c], g, _optional(t), _optional(h), _optional(o))
                     for i, (c, g, t, h, o) in enumerate(columns))

    def indices(self, label: Label) -> list[int]:
        return np.flatnonzero(self.codes == LABELS.index(label)).tolist()

    @property
    def positives(self) -> list[int]:
        return self.indices(Label.POSITIVE)

    @property
    def negatives(self) -> list[int]:
        return self.indices(Label.NEGATIVE)

    @property
    def ignored(self) -> list[int]:
        return self.indices(Label.IGNORED)

    def labels(self) -> list[Label]:
        return [LABELS[c] for c in self.codes.tolist()]

    def counts(self) -> dict[str, int]:
        tally = np.bincount(self.codes, minlength=len(LABELS))
        return {lab.value: int(tally[LABELS.index(lab)]) for lab in Label}


def _all_negative(n: int) -> AssignmentResult:
    nan = np.full(n, np.nan)
    return AssignmentResult(np.full(n, _NEG, dtype=np.int8), np.full(n, NO_GT, dtype=np.int64),
                            nan, np.zeros(n), nan.copy())


def d_gh(candidate: HorizontalBox, gt: GroundTruthObject) -> float:
    """Spatial overlap: IoU between the candidate and the horizontal ground truth."""
    return hbb_iou(candidate, gt.hbb)


def d_go(candidate: HorizontalBox, gt: GroundTruthObject) -> float:
    """Fraction of the oriented ground truth covered by the candidate.

    Normalized by the oriented box area rather than the union, so an anchor that
    fully contains the object scores 1 regardless of its own size.
    """
    return float(_coverage(gt, np.array([candidate.xyxy]))[0])


def _coverage(gt: GroundTruthObject, boxes_xyxy: np.ndarray) -> np.ndarray:
    inter = rect_overlap_areas(corners(gt.obb).vertices, boxes_xyxy)
    return np.minimum(1.0, inter / gt.obb.area)


def pair_label(gh: float, go: float, cfg: AssignmentConfig | None = None) -> Label:
    """Label of one anchor against a single ground truth from its two scores.

    This is the per-pair rule without conflict resolution or forced matches:
    positive when the anchor is a candidate (``gh > candidate_iou``) and
    ``(gh + go) / 2 > threshold``; negative when ``gh < candidate_iou``;
    ignored otherwise.
    """
    cfg = cfg or AssignmentConfig()
    if gh > cfg.candidate_iou:
        return Label.POSITIVE if 0.5 * (gh + go) > cfg.threshold else Label.IGNORED
    if gh < cfg.candidate_iou:
        return Label.NEGATIVE
    return Label.IGNORED


def anchor_array(anchors: Sequence[HorizontalBox]) -> np.ndarray:
    """``(N, 4)`` array of ``cx, cy, w, h``; pass it to the assigners to reuse a grid."""
    return np.array([a.as_tuple() for a in anchors], dtype=np.float64).reshape(-1, 4)


def _anchor_array(anchors) -> np.ndarray:
    if len(anchors) == 0:
        raise InvalidInputError("anchor list is empty")
    if not isinstance(anchors, np.ndarray):
        return anchor_array(anchors)
    boxes = np.asarray(anchors, dtype=np.float64)
    if boxes.ndim != 2 or boxes.shape[1] != 4:
        raise InvalidInputError(f"anchor array must have shape (N, 4), got {boxes.shape}")
    if not (np.isfinite(boxes).all() and (boxes[:, 2:] > 0).all()):
        raise InvalidInputError("anchor array needs finite centers and positive sizes")
    return boxes


def _check_unique_ids(gts):
    ids = [g.id for g in gts]
    if len(set(ids)) != len(ids):
        raise InvalidInputError(f"ground-truth ids must be unique, got {ids}")


def assign_ocp(
    anchors: Sequence[HorizontalBox] | np.ndarray,
    gts: Sequence[GroundTruthObject],
    cfg: AssignmentConfig | None = None,
) -> AssignmentResult:
    """Label anchors with the oriented-center-prior rule.

    For every ground truth, anchors with IoU strictly above
    ``cfg.candidate_iou`` are candidates; a candidate becomes positive when
    ``t_g = (d_gh + d_go) / 2`` strictly exceeds ``cfg.threshold``. Anchors whose
    best IoU over all ground truths is strictly below ``cfg.candidate_iou`` are
    negative; everything else is ignored. Conflicts go to the ground truth with
    the highest ``t_g`` (lower id on ties, scores within ``TIE_TOL`` tie).

    With ``cfg.force_best_per_gt`` every ground truth that ends up with no
    positive promotes its best-scoring candidate that is not already positive
    (lowest anchor index on ties).

    ``anchors`` may also be an ``(N, 4)`` array from :func:`anchor_array`.

    Raises:
        InvalidInputError: ``anchors`` is empty or malformed, or ground-truth
            ids repeat.
    """
    cfg = cfg or AssignmentConfig()
    boxes = _anchor_array(anchors)
    n = len(boxes)
    if not gts:
        return _all_negative(n)
    _check_unique_ids(gts)

    gts = sorted(gts, key=lambda g: g.id)
    ids = np.array([g.id for g in gts], dtype=np.int64)
    ious = pairwise_hbb_iou(boxes, np.array([g.hbb.as_tuple() for g in gts]))
    max_iou = ious.max(axis=1)

    # (n, G) scores; only candidate pairs get a coverage and a t_g
    half = 0.5 * boxes[:, 2:]
    xyxy = np.hstack([boxes[:, :2] - half, boxes[:, :2] + half])
    is_cand = ious > cfg.candidate_iou
    go = np.full(ious.shape, np.nan)
    for k, gt in enumerate(gts):
        cands = np.flatnonzero(is_cand[:, k])
        if len(cands):
            go[cands, k] = _coverage(gt, xyxy[cands])
    t = np.where(is_cand, 0.5 * (ious + go), -np.inf)
    is_pos = is_cand & (t > cfg.threshold)

    best = _tie_argmax(t)
    positive = _tie_argmax(np.where(is_pos, t, -np.inf))
    matched = is_pos.any(axis=1)
    pick = np.where(matched, positive, best)

    if cfg.force_best_per_gt:
        covered = np.zeros(len(gts), dtype=bool)
        covered[pick[matched]] = True
        for k in np.flatnonzero(~covered).tolist():
            free = is_cand[:, k] & ~matched
            if not free.any():
                continue
            scores = np.where(free, t[:, k], -np.inf)
            # argmax returns the lowest anchor index among the tied maxima
            i = int(np.argmax(scores >= scores.max() - TIE_TOL))
            matched[i], pick[i] = True, k

    rows = np.arange(n)
    candidate = is_cand.any(axis=1)
    codes = np.where(matched, _POS, np.where(
        candidate | (max_iou >= cfg.candidate_iou), _IGN, _NEG)).astype(np.int8)
    return AssignmentResult(
        codes,
        np.where(matched, ids[pick], NO_GT),
        np.where(candidate, t[rows, pick], np.nan),
        np.where(candidate, ious[rows, pick], max_iou),
        np.where(candidate, go[rows, pick], np.nan),
    )


def _tie_argmax(scores: np.ndarray) -> np.ndarray:
    """Per row, the first column whose score is within ``TIE_TOL`` of the row max."""
    top = scores.max(axis=1, keepdims=True)
    return np.argmax(scores >= top - TIE_TOL, axis=1)


def assign_classic(
    anchors: Sequence[HorizontalBox] | np.ndarray,
    gts: Sequence[GroundTruthObject],
    pos_iou: float = 0.7,
    neg_iou: float = 0.3,
) -> AssignmentResult:
    """Max-IoU assignment on horizontal boxes only.

    An anchor is positive when its best IoU reaches ``pos_iou`` or when it is
    the best anchor of some ground truth (all tied anchors count), negative when
    its best IoU is below ``neg_iou``, otherwise ignored.
    """
    boxes = _anchor_array(anchors)
    n = len(boxes)
    if not 0.0 <= neg_iou <= pos_iou <= 1.0:
        raise InvalidInputError(f"need 0 <= neg_iou <= pos_iou <= 1, got {neg_iou}, {pos_iou}")
    if not gts:
        return _all_negative(n)
    _check_unique_ids(gts)
    gts = sorted(gts, key=lambda g: g.id)
    ids = np.array([g.id for g in gts], dtype=np.int64)
    ious = pairwise_hbb_iou(boxes, np.array([g.hbb.as_tuple() for g in gts]))
    # argmax picks the lowest GT id among ties
    match = ious.argmax(axis=1)
    rows = np.arange(n)
    max_iou = ious[rows, match]

    is_pos = max_iou >= pos_iou
    pick = match.copy()
    forced = np.zeros(n, dtype=bool)
    gt_best = ious.max(axis=0)
    for k in np.flatnonzero(gt_best > 0).tolist():
        tied = (ious[:, k] >= gt_best[k] - TIE_TOL) & ~is_pos & ~forced
        pick[tied], forced[tied] = k, True

    positive = is_pos | forced
    codes = np.where(positive, _POS, np.where(max_iou < neg_iou, _NEG, _IGN)).astype(np.int8)
    nan = np.full(n, np.nan)
    return AssignmentResult(codes, np.where(positive, ids[pick], NO_GT), nan,
                            np.where(positive, ious[rows, pick], max_iou), nan.copy())
