"""DOTA v1.0 annotation reading and quadrilateral fitting.

A DOTA label file optionally starts with ``imagesource:...`` and ``gsd:...``
header lines, followed by one object per line::

    x1 y1 x2 y2 x3 y3 x4 y4 category difficult
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .errors import DegenerateGeometryError, DotaParseError, InvalidValueError
from .geometry import HorizontalBox, OrientedBox, canonicalize, o2mer

METADATA_PREFIXES = ("imagesource:", "gsd:")


@dataclass(frozen=True)
class AnnotatedObject:
    quad: tuple[tuple[float, float], ...]
    category: str
    difficult: int
    obb: OrientedBox
    hbb: HorizontalBox

    @classmethod
    def from_quad(cls, quad, category: str, difficult: int = 0) -> "AnnotatedObject":
        pts = tuple((float(x), float(y)) for x, y in quad)
        obb = quad_to_obb(pts)
        return cls(pts, category, difficult, obb, o2mer(obb))


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(points: Sequence[Sequence[float]]) -> list[tuple[float, float]]:
    """Monotone-chain convex hull, counter-clockwise, collinear points dropped."""
    pts = sorted(set((float(x), float(y)) for x, y in points))
    if len(pts) <= 2:
        return pts
    lower: list[tuple[float, float]] = []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[tuple[float, float]] = []
    for p in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


def min_area_rect(points: Sequence[Sequence[float]]) -> tuple[float, float, float, float, float]:
    """Minimum-area enclosing rectangle by rotating calipers.

    Returns raw ``(cx, cy, side_along_edge, side_across_edge, edge_angle)``;
    one side of the optimal rectangle is flush with a hull edge, and the three
    other supporting vertices advance monotonically as the edge index grows.

    Raises:
        DegenerateGeometryError: the points are (nearly) collinear.
    """
    hull = convex_hull(points)
    n = len(hull)
    if n < 3:
        raise DegenerateGeometryError("points are collinear or coincident")
    xs = [p[0] for p in hull]
    ys = [p[1] for p in hull]
    scale = max(max(xs) - min(xs), max(ys) - min(ys))
    hull_area = 0.5 * sum(_cross(hull[0], hull[i], hull[i + 1]) for i in range(1, n - 1))
    if hull_area <= 1e-12 * scale * scale:
        raise DegenerateGeometryError("points are collinear or coincident")

    def dot(p, ux, uy):
        return p[0] * ux + p[1] * uy

    best = None
    right = top = left = None
    for i in range(n):
        p, q = hull[i], hull[(i + 1) % n]
        length = math.hypot(q[0] - p[0], q[1] - p[1])
        ex, ey = (q[0] - p[0]) / length, (q[1] - p[1]) / length
        nx, ny = -ey, ex
        if right is None:
            right = (i + 1) % n
        for _ in range(n):
            nxt = (right + 1) % n
            if dot(hull[nxt], ex, ey) > dot(hull[right], ex, ey):
                right = nxt
            else:
                break
        if top is None:
            top = right
        for _ in range(n):
            nxt = (top + 1) % n
            if dot(hull[nxt], nx, ny) > dot(hull[top], nx, ny):
                top = nxt
            else:
                break
        if left is None:
            left = top
        for _ in range(n):
            nxt = (left + 1) % n
            if dot(hull[nxt], ex, ey) < dot(hull[left], ex, ey):
                left = nxt
            else:
                break
        e_hi, e_lo = dot(hull[right], ex, ey), dot(hull[left], ex, ey)
        n_lo, n_hi = dot(p, nx, ny), dot(hull[top], nx, ny)
        rect_area = (e_hi - e_lo) * (n_hi - n_lo)
        if best is None or rect_area < best[0]:
            em, nm = 0.5 * (e_hi + e_lo), 0.5 * (n_hi + n_lo)
            best = (rect_area, em * ex + nm * nx, em * ey + nm * ny,
                    e_hi - e_lo, n_hi - n_lo, math.atan2(ey, ex))
    return best[1:]


def quad_to_obb(quad: Sequence[Sequence[float]]) -> OrientedBox:
    """Fit the minimum-area rectangle around a quadrilateral and canonicalize it."""
    if len(quad) != 4:
        raise InvalidValueError(f"a quad needs 4 points, got {len(quad)}")
    for x, y in quad:
        if not (math.isfinite(x) and math.isfinite(y)):
            raise InvalidValueError(f"quad point ({x!r}, {y!r}) is not finite")
    return canonicalize(*min_area_rect(quad))


def parse_dota(text: str, source: str = "<string>") -> list[AnnotatedObject]:
    """Parse the contents of a DOTA v1.0 label file.

    Raises:
        DotaParseError: on a malformed object line; carries the line number.
    """
    objects = []
    in_header = True
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if in_header and line.startswith(METADATA_PREFIXES):
            continue
        in_header = False
        tokens = line.split()
        if len(tokens) != 10:
            raise DotaParseError(
                f"expected 10 tokens (8 coordinates, category, difficult), got {len(tokens)}",
                lineno, source)
        try:
            coords = [float(t) for t in tokens[:8]]
        except ValueError:
            raise DotaParseError(f"non-numeric coordinate in {tokens[:8]}", lineno, source) from None
        if not all(math.isfinite(c) for c in coords):
            raise DotaParseError("coordinates must be finite", lineno, source)
        if tokens[9] not in ("0", "1"):
            raise DotaParseError(f"difficult must be 0 or 1, got {tokens[9]!r}", lineno, source)
        quad = tuple(zip(coords[0::2], coords[1::2]))
        try:
            objects.append(AnnotatedObject.from_quad(quad, tokens[8], int(tokens[9])))
        except (DegenerateGeometryError, InvalidValueError) as exc:
            raise DotaParseError(str(exc), lineno, source) from None
    return objects


def read_dota(path) -> list[AnnotatedObject]:
    path = Path(path)
    return parse_dota(path.read_text(), source=str(path))


def format_dota_line(obj: AnnotatedObject) -> str:
    coords = " ".join(f"{v:.6f}" for pt in obj.quad for v in pt)
    return f"{coords} {obj.category} {obj.difficult}"
