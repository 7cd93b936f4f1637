"""Box representations, convex clipping and overlap measures.

Angles are radians everywhere in this module. An oriented box follows the
long-side convention: ``w >= h`` and ``theta`` is the angle between the long
side and the x-axis, wrapped into ``[-pi/2, pi/2)``. Squares have no long side,
so their angle is wrapped into ``[-pi/4, pi/4)`` instead.

Vertices are always stored counter-clockwise in a y-up frame, which keeps the
signed shoelace area nonnegative.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidDimensionError, InvalidValueError

EPS = 1e-9
HALF_PI = 0.5 * math.pi
QUARTER_PI = 0.25 * math.pi

Point = tuple[float, float]


def _check_finite(**fields):
    for name, value in fields.items():
        if not math.isfinite(value):
            raise InvalidValueError(f"{name} must be finite, got {value!r}")


def _check_positive(**fields):
    for name, value in fields.items():
        if not value > 0:
            raise InvalidDimensionError(f"{name} must be > 0, got {value!r}")


def wrap_angle(theta: float, period: float = math.pi) -> float:
    """Wrap ``theta`` into ``[-period/2, period/2)``."""
    half = 0.5 * period
    t = (theta + half) % period - half
    # float modulo can land exactly on the excluded upper bound
    if t >= half:
        t -= period
    if t < -half:
        t = -half
    return t


@dataclass(frozen=True)
class HorizontalBox:
    """Axis-aligned box given by center and size."""

    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self):
        # fast path first; the helpers only run to build the error message
        if not (math.isfinite(self.cx) and math.isfinite(self.cy) and math.isfinite(self.w)
                and math.isfinite(self.h) and self.w > 0 and self.h > 0):
            _check_finite(cx=self.cx, cy=self.cy, w=self.w, h=self.h)
            _check_positive(w=self.w, h=self.h)

    @classmethod
    def from_xyxy(cls, x1, y1, x2, y2) -> "HorizontalBox":
        return cls(0.5 * (x1 + x2), 0.5 * (y1 + y2), x2 - x1, y2 - y1)

    @property
    def xyxy(self) -> tuple[float, float, float, float]:
        hw, hh = 0.5 * self.w, 0.5 * self.h
        return (self.cx - hw, self.cy - hh, self.cx + hw, self.cy + hh)

    @property
    def area(self) -> float:
        return self.w * self.h

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.cx, self.cy, self.w, self.h)


@dataclass(frozen=True)
class OrientedBox:
    """Rotated rectangle in canonical long-side form.

    The constructor only validates; use :func:`canonicalize` (or
    :meth:`from_degrees`) to build a box from arbitrary parameters.
    """

    cx: float
    cy: float
    w: float
    h: float
    theta: float

    def __post_init__(self):
        _check_finite(cx=self.cx, cy=self.cy, w=self.w, h=self.h, theta=self.theta)
        _check_positive(w=self.w, h=self.h)
        if self.w < self.h:
            raise InvalidValueError(
                f"w must be the long side (w={self.w!r} < h={self.h!r}); use canonicalize()")
        lo = -QUARTER_PI if self.w == self.h else -HALF_PI
        if not lo <= self.theta < -lo:
            raise InvalidValueError(
                f"theta={self.theta!r} outside canonical range [{lo}, {-lo}); use canonicalize()")

    @classmethod
    def from_degrees(cls, cx, cy, w, h, theta_deg) -> "OrientedBox":
        return canonicalize(cx, cy, w, h, math.radians(theta_deg))

    @property
    def theta_deg(self) -> float:
        return math.degrees(self.theta)

    @property
    def area(self) -> float:
        return self.w * self.h

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.cx, self.cy, self.w, self.h, self.theta)


@dataclass(frozen=True)
class ConvexPolygon:
    """Convex polygon with counter-clockwise vertices.

    An empty vertex tuple stands for the empty region.
    """

    vertices: tuple[Point, ...] = ()

    def __post_init__(self):
        if 0 < len(self.vertices) < 3:
            raise InvalidValueError(
                f"a polygon needs 0 or >= 3 vertices, got {len(self.vertices)}")

    @classmethod
    def from_points(cls, points: Iterable[Sequence[float]]) -> "ConvexPolygon":
        return cls(tuple((float(x), float(y)) for x, y in points))

    def __len__(self):
        return len(self.vertices)

    @property
    def is_empty(self) -> bool:
        return not self.vertices

    def is_convex(self, eps: float = EPS) -> bool:
        """True when every turn is a left turn (or straight, within ``eps``)."""
        pts = self.vertices
        n = len(pts)
        for i in range(n):
            (ax, ay), (bx, by), (cx, cy) = pts[i - 2], pts[i - 1], pts[i]
            if (bx - ax) * (cy - by) - (by - ay) * (cx - bx) < -eps:
                return False
        return True


def canonicalize(cx: float, cy: float, w: float, h: float, theta: float) -> OrientedBox:
    """Return the canonical long-side representation of a rotated rectangle.

    The result describes the same point set as the input. If ``w < h`` the sides
    are swapped and the angle advanced by a quarter turn before wrapping.

    Raises:
        InvalidValueError: a field is not finite.
        InvalidDimensionError: ``w`` or ``h`` is not positive.
    """
    _check_finite(cx=cx, cy=cy, w=w, h=h, theta=theta)
    _check_positive(w=w, h=h)
    if w < h:
        w, h = h, w
        theta = theta + HALF_PI
    if w == h:
        theta = wrap_angle(theta, HALF_PI)
    else:
        theta = wrap_angle(theta, math.pi)
    return OrientedBox(float(cx), float(cy), float(w), float(h), float(theta))


def corners(box: OrientedBox | HorizontalBox) -> ConvexPolygon:
    """Four corners of a box, counter-clockwise."""
    if isinstance(box, HorizontalBox):
        x1, y1, x2, y2 = box.xyxy
        return ConvexPolygon(((x2, y2), (x1, y2), (x1, y1), (x2, y1)))
    c, s = math.cos(box.theta), math.sin(box.theta)
    # half-extent vectors along the long and short sides
    ux, uy = 0.5 * box.w * c, 0.5 * box.w * s
    vx, vy = -0.5 * box.h * s, 0.5 * box.h * c
    x, y = box.cx, box.cy
    return ConvexPolygon((
        (x + ux + vx, y + uy + vy),
        (x - ux + vx, y - uy + vy),
        (x - ux - vx, y - uy - vy),
        (x + ux - vx, y + uy - vy),
    ))


def enclosing_size(w: float, h: float, theta: float) -> tuple[float, float]:
    """Width and height of the axis-aligned hull of a ``w x h`` box at ``theta``.

    Valid for any angle; on the canonical range ``cos(theta) >= 0`` so the
    absolute value on the cosine is a no-op there.
    """
    c, s = abs(math.cos(theta)), abs(math.sin(theta))
    return w * c + h * s, w * s + h * c


def o2mer(box: OrientedBox) -> HorizontalBox:
    """Minimum axis-aligned rectangle enclosing an oriented box."""
    ww, hh = enclosing_size(box.w, box.h, box.theta)
    return HorizontalBox(box.cx, box.cy, ww, hh)


def hbb_iou(a: HorizontalBox, b: HorizontalBox) -> float:
    """Intersection over union of two axis-aligned boxes."""
    if a == b:
        return 1.0
    ax1, ay1, ax2, ay2 = a.xyxy
    bx1, by1, bx2, by2 = b.xyxy
    iw = min(ax2, bx2) - max(ax1, bx1)
    ih = min(ay2, by2) - max(ay1, by1)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = a.w * a.h + b.w * b.h - inter
    return min(1.0, inter / union)


def pairwise_hbb_iou(boxes_a: np.ndarray, boxes_b: np.ndarray) -> np.ndarray:
    """IoU matrix between two ``(N, 4)`` / ``(M, 4)`` arrays of (cx, cy, w, h).

    Uses the same operation order as :func:`hbb_iou`, so entries agree with the
    scalar version bit for bit.
    """
    a = np.asarray(boxes_a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(boxes_b, dtype=np.float64).reshape(-1, 4)
    ax1 = (a[:, 0] - 0.5 * a[:, 2])[:, None]
    ay1 = (a[:, 1] - 0.5 * a[:, 3])[:, None]
    ax2 = (a[:, 0] + 0.5 * a[:, 2])[:, None]
    ay2 = (a[:, 1] + 0.5 * a[:, 3])[:, None]
    bx1 = (b[:, 0] - 0.5 * b[:, 2])[None, :]
    by1 = (b[:, 1] - 0.5 * b[:, 3])[None, :]
    bx2 = (b[:, 0] + 0.5 * b[:, 2])[None, :]
    by2 = (b[:, 1] + 0.5 * b[:, 3])[None, :]
    iw = np.minimum(ax2, bx2) - np.maximum(ax1, bx1)
    ih = np.minimum(ay2, by2) - np.maximum(ay1, by1)
    overlap = (iw > 0) & (ih > 0)
    inter = np.where(overlap, iw * ih, 0.0)
    union = (a[:, 2] * a[:, 3])[:, None] + (b[:, 2] * b[:, 3])[None, :] - inter
    same = np.all(a[:, None, :] == b[None, :, :], axis=2)
    return np.where(same, 1.0, np.where(overlap, np.minimum(1.0, inter / union), 0.0))


def area(poly: ConvexPolygon) -> float:
    """Shoelace area; 0 for the empty polygon."""
    pts = poly.vertices
    if len(pts) < 3:
        return 0.0
    total = 0.0
    x0, y0 = pts[-1]
    for x1, y1 in pts:
        total += x0 * y1 - x1 * y0
        x0, y0 = x1, y1
    return max(0.0, 0.5 * total)


def _dedupe(points: list[Point], eps: float) -> list[Point]:
    out: list[Point] = []
    for p in points:
        if not out or math.hypot(p[0] - out[-1][0], p[1] - out[-1][1]) >= eps:
            out.append(p)
    while len(out) > 1 and math.hypot(out[0][0] - out[-1][0], out[0][1] - out[-1][1]) < eps:
        out.pop()
    return out


def clip(subject: ConvexPolygon, window: ConvexPolygon, eps: float = EPS) -> ConvexPolygon:
    """Intersection of two convex polygons by successive half-plane clipping.

    Each edge of ``window`` defines a half-plane; points whose signed distance
    to the edge line is ``>= -eps`` count as inside. Consecutive output vertices
    closer than ``eps`` are merged, and results with fewer than three vertices
    collapse to the empty polygon.
    """
    pts = list(subject.vertices)
    win = window.vertices
    if not pts or not win:
        return ConvexPolygon()
    ex0, ey0 = win[-1]
    for ex1, ey1 in win:
        dx, dy = ex1 - ex0, ey1 - ey0
        norm = math.hypot(dx, dy)
        if norm < eps:
            ex0, ey0 = ex1, ey1
            continue
        dist = [(dx * (py - ey0) - dy * (px - ex0)) / norm for px, py in pts]
        out: list[Point] = []
        prev, dprev = pts[-1], dist[-1]
        for cur, dcur in zip(pts, dist):
            if dcur >= -eps:
                if dprev < -eps:
                    t = dprev / (dprev - dcur)
                    out.append((prev[0] + t * (cur[0] - prev[0]), prev[1] + t * (cur[1] - prev[1])))
                out.append(cur)
            elif dprev >= -eps:
                t = dprev / (dprev - dcur)
                out.append((prev[0] + t * (cur[0] - prev[0]), prev[1] + t * (cur[1] - prev[1])))
            prev, dprev = cur, dcur
        pts = _dedupe(out, eps)
        if len(pts) < 3:
            return ConvexPolygon()
        ex0, ey0 = ex1, ey1
    return ConvexPolygon(tuple(pts))


def rect_overlap_areas(vertices: Sequence[Point], boxes_xyxy: np.ndarray) -> np.ndarray:
    """Area of one convex polygon inside each of ``M`` axis-aligned windows.

    Vectorized over windows via Green's theorem: the overlap area is the sum of
    ``(x dy - y dx) / 2`` over the part of each polygon edge inside the window
    plus the part of each window edge inside the polygon. Each part is a single
    parameter interval (Cyrus-Beck clipping). An edge shared by both boundaries
    is counted once, from the polygon side, when the two regions lie on the
    same side of it, and not at all when they only touch.

    Args:
        vertices: counter-clockwise convex polygon.
        boxes_xyxy: ``(M, 4)`` array of ``x1, y1, x2, y2``.
    """
    v = np.asarray(vertices, dtype=np.float64)
    b = np.asarray(boxes_xyxy, dtype=np.float64).reshape(-1, 4)
    m = len(b)
    if len(v) < 3 or m == 0:
        return np.zeros(m)
    nxt = np.concatenate([v[1:], v[:1]])
    lo, hi = b[:, None, :2], b[:, None, 2:]                     # (M, 1, 2)

    with np.errstate(divide="ignore", invalid="ignore"):
        # polygon edges p + t d clipped to each window: (M, K, 2) per-axis slabs
        p, d = v[None], (nxt - v)[None]
        ta, tb = (lo - p) / d, (hi - p) / d
        enter, leave = np.minimum(ta, tb), np.maximum(ta, tb)
        # an edge parallel to a pair of window sides is kept when strictly
        # between them, or when lying on a side with the window to its left
        other = d[..., ::-1] * np.array([-1.0, 1.0])
        on_side = ((p > lo) & (p < hi)) | ((p == lo) & (other > 0)) | ((p == hi) & (other < 0))
        flat = d == 0
        enter = np.where(flat, np.where(on_side, -np.inf, np.inf), enter)
        leave = np.where(flat, np.inf, leave)
        t0 = np.maximum(enter.max(axis=2), 0.0)
        t1 = np.minimum(leave.min(axis=2), 1.0)
        a = p + t0[..., None] * d
        c = p + t1[..., None] * d
        part = np.where(t1 > t0, a[..., 0] * c[..., 1] - c[..., 0] * a[..., 1], 0.0).sum(axis=1)

        # window edges q + s e (counter-clockwise) clipped strictly inside the
        # polygon: for polygon edge k, cross(edge_k, q + s e - v_k) > 0
        x1, y1, x2, y2 = b.T
        qx = np.stack([x1, x2, x2, x1], axis=1)[..., None]          # (M, 4, 1)
        qy = np.stack([y1, y1, y2, y2], axis=1)[..., None]
        ex = np.stack([x2 - x1, 0 * x1, x1 - x2, 0 * x1], axis=1)[..., None]
        ey = np.stack([0 * y1, y2 - y1, 0 * y1, y1 - y2], axis=1)[..., None]
        kx, ky = nxt[:, 0] - v[:, 0], nxt[:, 1] - v[:, 1]           # (K,)
        lin = kx * (qy - v[:, 1]) - ky * (qx - v[:, 0])              # (M, 4, K)
        slope = kx * ey - ky * ex
        root = -lin / slope
        s0 = np.maximum(np.where(slope > 0, root, 0.0).max(axis=2), 0.0)
        s1 = np.minimum(np.where(slope < 0, root, 1.0).min(axis=2), 1.0)
        s1 = np.where(((slope == 0) & (lin <= 0)).any(axis=2), -1.0, s1)
        qx, qy, ex, ey = qx[..., 0], qy[..., 0], ex[..., 0], ey[..., 0]
        ax, ay = qx + s0 * ex, qy + s0 * ey
        cx, cy = qx + s1 * ex, qy + s1 * ey
        part += np.where(s1 > s0, ax * cy - cx * ay, 0.0).sum(axis=1)

    poly_area = area(ConvexPolygon(tuple(map(tuple, v.tolist()))))
    box_area = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    return np.clip(0.5 * part, 0.0, np.minimum(poly_area, box_area))


def obb_iou(a: OrientedBox, b: OrientedBox) -> float:
    """Intersection over union of two oriented boxes via exact polygon clipping."""
    if a == b:
        return 1.0
    # circumscribed circles disjoint -> boxes disjoint
    reach = 0.5 * (math.hypot(a.w, a.h) + math.hypot(b.w, b.h))
    if math.hypot(a.cx - b.cx, a.cy - b.cy) > reach:
        return 0.0
    inter = area(clip(corners(a), corners(b)))
    inter = min(inter, a.area, b.area)
    union = a.area + b.area - inter
    return min(1.0, max(0.0, inter / union))


def points_in_obb(box: OrientedBox, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Boolean mask of points falling inside (or on the boundary of) ``box``."""
    c, s = math.cos(box.theta), math.sin(box.theta)
    dx = np.asarray(xs) - box.cx
    dy = np.asarray(ys) - box.cy
    u = dx * c + dy * s
    v = -dx * s + dy * c
    return (np.abs(u) <= 0.5 * box.w) & (np.abs(v) <= 0.5 * box.h)
