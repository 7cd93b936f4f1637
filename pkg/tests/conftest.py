"""Shared oracles and random generators.

The oracles here deliberately avoid the library's own clipping code paths:
polygon areas come from Monte Carlo point tests or shapely, enclosing boxes from
explicit rotation matrices.
"""
import functools
import math

import numpy as np
import pytest
from shapely.geometry import Polygon

from cgcdet.geometry import HorizontalBox, canonicalize, corners


def rotation_corners(cx, cy, w, h, theta):
    """Corners of a rotated rectangle by an explicit rotation matrix."""
    rot = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
    local = np.array([[w / 2, h / 2], [-w / 2, h / 2], [-w / 2, -h / 2], [w / 2, -h / 2]])
    return local @ rot.T + np.array([cx, cy])


def corner_mer(cx, cy, w, h, theta):
    """Axis-aligned min/max box of the rotated corners, as (cx, cy, w, h)."""
    pts = rotation_corners(cx, cy, w, h, theta)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    return ((lo[0] + hi[0]) / 2, (lo[1] + hi[1]) / 2, hi[0] - lo[0], hi[1] - lo[1])


def as_set(points, ndigits=9):
    return sorted((round(x, ndigits) + 0.0, round(y, ndigits) + 0.0) for x, y in points)


def shapely_area(box):
    return Polygon(corners(box).vertices)


def shapely_iou(a, b):
    pa, pb = shapely_area(a), shapely_area(b)
    inter = pa.intersection(pb).area
    return inter / (pa.area + pb.area - inter)


def mc_polygon_area(vertices, samples, seed):
    """Monte Carlo area of a convex CCW polygon via half-plane membership."""
    v = np.asarray(vertices, dtype=float)
    lo, hi = v.min(axis=0), v.max(axis=0)
    rng = np.random.default_rng(seed)
    pts = rng.uniform(lo, hi, size=(samples, 2))
    inside = np.ones(samples, dtype=bool)
    for a, b in zip(v, np.roll(v, -1, axis=0)):
        inside &= (b[0] - a[0]) * (pts[:, 1] - a[1]) - (b[1] - a[1]) * (pts[:, 0] - a[0]) >= 0
    return inside.mean() * np.prod(hi - lo)


def random_obb(rng, center_scale=10.0, size_range=(0.5, 10.0), aspect_range=(1.0, 5.0)):
    w = rng.uniform(*size_range)
    aspect = rng.uniform(*aspect_range)
    return canonicalize(rng.uniform(-center_scale, center_scale),
                        rng.uniform(-center_scale, center_scale),
                        w, w / aspect, rng.uniform(-math.pi, math.pi))


def random_overlapping_pair(rng):
    """Two oriented boxes whose centers are close enough to usually overlap."""
    a = random_obb(rng, center_scale=5.0, size_range=(1.0, 8.0))
    b = random_obb(rng, center_scale=0.0, size_range=(1.0, 8.0))
    shift = rng.uniform(-0.5, 0.5, 2) * (a.w + b.w) / 2
    b = canonicalize(a.cx + shift[0], a.cy + shift[1], b.w, b.h, b.theta)
    return a, b


def random_hbb(rng, center_scale=10.0, size_range=(0.5, 10.0)):
    return HorizontalBox(rng.uniform(-center_scale, center_scale),
                         rng.uniform(-center_scale, center_scale),
                         rng.uniform(*size_range), rng.uniform(*size_range))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def _edges(hbb, obb):
    from cgcdet.geometry import o2mer
    m = o2mer(obb)
    return hbb.xyxy, m.xyxy


def is_generic(pair, margin=1e-4):
    """No coincident edges, angle away from 0 and +-90 degrees, partial overlap."""
    from cgcdet.consistency import cgc_loss
    a, b = _edges(pair.hbb, pair.obb)
    if any(abs(x - y) < margin for x, y in zip(a, b)):
        return False
    # an edge of one box meeting the opposite edge of the other (touching)
    if abs(a[2] - b[0]) < margin or abs(b[2] - a[0]) < margin:
        return False
    if abs(a[3] - b[1]) < margin or abs(b[3] - a[1]) < margin:
        return False
    t = pair.obb.theta
    if min(abs(math.sin(t)), abs(math.cos(t))) < 1e-3:
        return False
    return 0.0 < cgc_loss(pair) < 1.0


def random_generic_pair(rng):
    from cgcdet.consistency import ProposalPair
    from cgcdet.geometry import o2mer
    while True:
        obb = random_obb(rng, center_scale=2.0, size_range=(1.0, 6.0), aspect_range=(1.0, 6.0))
        mer = o2mer(obb)
        hbb = HorizontalBox(mer.cx + rng.normal(0, 0.3) * mer.w, mer.cy + rng.normal(0, 0.3) * mer.h,
                            mer.w * math.exp(rng.normal(0, 0.3)), mer.h * math.exp(rng.normal(0, 0.3)))
        pair = ProposalPair(hbb, obb)
        if is_generic(pair):
            return pair


def pair_params(pair):
    return [*pair.hbb.as_tuple(), *pair.obb.as_tuple()]


def raw_loss(params):
    from cgcdet.consistency import cgc_value_and_grad
    return cgc_value_and_grad(params[:4], params[4:])[0]


def central_difference(params, step=1e-6):
    out = []
    for i in range(len(params)):
        hi, lo = list(params), list(params)
        hi[i] += step
        lo[i] -= step
        out.append((raw_loss(hi) - raw_loss(lo)) / (2 * step))
    return out


# FD quotients of exactly-flat directions carry ~1e-10 roundoff; this floor keeps
# such components from reading as large relative errors.
REL_ERR_FLOOR = 1e-5


def relative_errors(analytic, numeric):
    return [abs(a - n) / max(abs(a), abs(n), REL_ERR_FLOOR) for a, n in zip(analytic, numeric)]


def obb_with_enclosing(cx, cy, big_w, big_h, theta):
    """Oriented box at ``theta`` whose enclosing rectangle is ``big_w x big_h``.

    Solves the 2x2 system of the enclosing-size formula; returns None when the
    solution has a non-positive side.
    """
    c, s = abs(math.cos(theta)), abs(math.sin(theta))
    det = c * c - s * s
    if abs(det) < 1e-6:
        return None
    w = (big_w * c - big_h * s) / det
    h = (big_h * c - big_w * s) / det
    if w <= 0 or h <= 0:
        return None
    return canonicalize(cx, cy, w, h, theta)


@functools.lru_cache(maxsize=None)
def _scene_anchors(image, stride):
    from cgcdet.anchors import AnchorGrid, generate_anchors
    return tuple(generate_anchors(image, image, AnchorGrid(stride, (8.0, 16.0), (0.5, 1.0, 2.0))))


def random_scene(rng, image=48.0, stride=4.0, max_gts=3):
    """Anchors on a small grid plus 1..max_gts tilted ground truths."""
    from cgcdet.assignment import GroundTruthObject
    anchors = _scene_anchors(image, stride)
    gts = []
    for k in range(int(rng.integers(1, max_gts + 1))):
        long = rng.uniform(8.0, 24.0)
        obb = canonicalize(rng.uniform(8, image - 8), rng.uniform(8, image - 8),
                           long, long / rng.uniform(1.0, 6.0), rng.uniform(-math.pi / 2, math.pi / 2))
        gts.append(GroundTruthObject.from_obb(obb, id=k))
    return anchors, gts


def brute_force_min_rect_area(points):
    """Smallest bounding-rectangle area over all hull-edge orientations."""
    from scipy.spatial import ConvexHull
    pts = np.asarray(points, dtype=float)
    hull = pts[ConvexHull(pts).vertices]
    best = math.inf
    for a, b in zip(hull, np.roll(hull, -1, axis=0)):
        e = (b - a) / np.linalg.norm(b - a)
        n = np.array([-e[1], e[0]])
        u, v = hull @ e, hull @ n
        best = min(best, (u.max() - u.min()) * (v.max() - v.min()))
    return best


def random_quad(rng):
    """A jittered rotated rectangle, the typical shape of a hand-drawn label."""
    w, h = rng.uniform(2, 50), rng.uniform(2, 50)
    t = rng.uniform(-math.pi, math.pi)
    pts = rotation_corners(*rng.uniform(-100, 100, 2), w, h, t)
    return [tuple(p) for p in pts + rng.normal(0, 0.1 * min(w, h), pts.shape)]


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def record_acceptance(number, title, passed, detail, seconds):
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:>2}: {title} -- {detail} ({seconds:.2f} s)"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
