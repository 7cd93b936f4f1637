"""Geometry, consistency loss and label assignment for oriented object detection."""

__version__ = "0.1.0"

from .assignment import (
    AssignmentConfig,
    AssignmentResult,
    GroundTruthObject,
    Label,
    anchor_array,
    assign_classic,
    assign_ocp,
    pair_label,
    d_gh,
    d_go,
)
from .consistency import (
    LossGradient,
    ProposalPair,
    cgc_gradient,
    cgc_loss,
    smooth_l1_angle,
)
from .geometry import (
    ConvexPolygon,
    HorizontalBox,
    OrientedBox,
    area,
    canonicalize,
    clip,
    corners,
    hbb_iou,
    o2mer,
    obb_iou,
)
