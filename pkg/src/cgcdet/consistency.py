"""Geometric consistency loss between a horizontal and an oriented proposal.

The loss is ``1 - IoU(hbb, o2mer(obb))``: an oriented proposal and the
horizontal proposal of the same object must agree once the oriented one is
converted to its axis-aligned enclosing rectangle. Gradients are analytic.

Subgradient conventions at kinks (edge ties, ``sin(theta) == 0``):

* when an edge of the horizontal proposal coincides with the matching edge of
  the enclosing rectangle, the intersection edge is credited to the
  horizontal proposal;
* at ``sin(theta) == 0`` the derivative of ``|sin(theta)|`` is taken from the
  ``theta > 0`` side, i.e. ``+cos(theta)``;
* where the two rectangles are disjoint, touching, or identical the loss is
  locally flat or at its minimum and the gradient is reported as all zeros.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .geometry import HorizontalBox, OrientedBox, hbb_iou, o2mer, wrap_angle


@dataclass(frozen=True)
class ProposalPair:
    """A horizontal proposal and an oriented proposal for the same object."""

    hbb: HorizontalBox
    obb: OrientedBox


@dataclass(frozen=True)
class LossGradient:
    """Loss value and its partial derivatives.

    ``d_hbb`` is ordered (cx, cy, w, h); ``d_obb`` is (cx, cy, w, h, theta).
    """

    value: float
    d_hbb: tuple[float, float, float, float]
    d_obb: tuple[float, float, float, float, float]

    def as_list(self) -> list[float]:
        return [*self.d_hbb, *self.d_obb]


def cgc_loss(pair: ProposalPair) -> float:
    """Consistency loss ``1 - IoU(hbb, o2mer(obb))``, in ``[0, 1]``."""
    return 1.0 - hbb_iou(pair.hbb, o2mer(pair.obb))


def _interval_overlap_grad(a1, a2, b1, b2):
    """Overlap length of [a1, a2] and [b1, b2] with d/d(a1, a2, b1, b2).

    Ties are credited to the first interval.
    """
    if a2 <= b2:
        hi, da2, db2 = a2, 1.0, 0.0
    else:
        hi, da2, db2 = b2, 0.0, 1.0
    if a1 >= b1:
        lo, da1, db1 = a1, -1.0, 0.0
    else:
        lo, da1, db1 = b1, 0.0, -1.0
    return hi - lo, da1, da2, db1, db2


def cgc_value_and_grad(hbb: Sequence[float], obb: Sequence[float]):
    """Loss and 9-component gradient on raw parameters.

    Args:
        hbb: (cx, cy, w, h) of the horizontal proposal.
        obb: (cx, cy, w, h, theta) of the oriented proposal; any angle and any
            side order are accepted, which lets optimizers step freely without
            re-canonicalizing.

    Returns:
        ``(loss, grad)`` where ``grad`` is a list of 9 floats ordered as
        hbb (cx, cy, w, h) followed by obb (cx, cy, w, h, theta).
    """
    hx, hy, hw, hh = hbb
    ox, oy, ow, oh, th = obb
    c, s = math.cos(th), math.sin(th)
    ac, as_ = abs(c), abs(s)
    sgn_c = 1.0 if c >= 0 else -1.0
    sgn_s = 1.0 if s >= 0 else -1.0
    big_w = ow * ac + oh * as_
    big_h = ow * as_ + oh * ac
    if (hx, hy, hw, hh) == (ox, oy, big_w, big_h):
        return 0.0, [0.0] * 9

    iw, dx_a1, dx_a2, dx_b1, dx_b2 = _interval_overlap_grad(
        hx - 0.5 * hw, hx + 0.5 * hw, ox - 0.5 * big_w, ox + 0.5 * big_w)
    ih, dy_a1, dy_a2, dy_b1, dy_b2 = _interval_overlap_grad(
        hy - 0.5 * hh, hy + 0.5 * hh, oy - 0.5 * big_h, oy + 0.5 * big_h)
    zero = [0.0] * 9
    if iw <= 0 or ih <= 0:
        return 1.0, zero
    inter = iw * ih
    union = hw * hh + big_w * big_h - inter
    iou = inter / union
    if iou >= 1.0:
        return 0.0, zero

    # L = 1 - I/U with U = A_h + A_o - I
    g_inter = -(union + inter) / (union * union)
    g_area = inter / (union * union)

    d_hx = g_inter * ih * (dx_a1 + dx_a2)
    d_hy = g_inter * iw * (dy_a1 + dy_a2)
    d_hw = g_inter * ih * 0.5 * (dx_a2 - dx_a1) + g_area * hh
    d_hh = g_inter * iw * 0.5 * (dy_a2 - dy_a1) + g_area * hw
    d_ox = g_inter * ih * (dx_b1 + dx_b2)
    d_oy = g_inter * iw * (dy_b1 + dy_b2)
    d_bw = g_inter * ih * 0.5 * (dx_b2 - dx_b1) + g_area * big_h
    d_bh = g_inter * iw * 0.5 * (dy_b2 - dy_b1) + g_area * big_w

    # chain through the enclosing-rectangle transform
    dabs_c = -sgn_c * s
    dabs_s = sgn_s * c
    d_ow = d_bw * ac + d_bh * as_
    d_oh = d_bw * as_ + d_bh * ac
    d_th = d_bw * (ow * dabs_c + oh * dabs_s) + d_bh * (ow * dabs_s + oh * dabs_c)
    return 1.0 - iou, [d_hx, d_hy, d_hw, d_hh, d_ox, d_oy, d_ow, d_oh, d_th]


def cgc_gradient(pair: ProposalPair) -> LossGradient:
    """Analytic gradient of :func:`cgc_loss` w.r.t. all nine proposal parameters."""
    value, g = cgc_value_and_grad(pair.hbb.as_tuple(), pair.obb.as_tuple())
    # report the exact same value cgc_loss would
    value = cgc_loss(pair)
    return LossGradient(value, tuple(g[:4]), tuple(g[4:]))


def smooth_l1(x: float, beta: float = 1.0) -> float:
    ax = abs(x)
    if ax < beta:
        return 0.5 * ax * ax / beta
    return ax - 0.5 * beta


def smooth_l1_grad(x: float, beta: float = 1.0) -> float:
    if abs(x) < beta:
        return x / beta
    return 1.0 if x > 0 else -1.0


def smooth_l1_angle(pred_theta: float, gt_theta: float, beta: float = 1.0) -> float:
    """Smooth-L1 on the angle difference wrapped into ``[-pi/2, pi/2)``.

    Orientation is periodic with period pi under the long-side convention, so
    -89 and +89 degrees are two degrees apart.
    """
    return smooth_l1(wrap_angle(pred_theta - gt_theta, math.pi), beta)


def smooth_l1_angle_grad(pred_theta: float, gt_theta: float, beta: float = 1.0) -> float:
    """Derivative of :func:`smooth_l1_angle` w.r.t. ``pred_theta``."""
    return smooth_l1_grad(wrap_angle(pred_theta - gt_theta, math.pi), beta)
