"""Regular anchor grids."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InvalidInputError
from .geometry import HorizontalBox


@dataclass(frozen=True)
class AnchorGrid:
    """Anchor layout: one box per (cell, scale, ratio).

    ``scale`` is the square root of the anchor area and ``ratio`` is h / w.
    """

    stride: float = 8.0
    scales: tuple[float, ...] = (32.0,)
    ratios: tuple[float, ...] = (0.5, 1.0, 2.0)

    def __post_init__(self):
        object.__setattr__(self, "scales", tuple(float(s) for s in self.scales))
        object.__setattr__(self, "ratios", tuple(float(r) for r in self.ratios))
        if not self.stride > 0:
            raise InvalidInputError(f"stride must be > 0, got {self.stride}")
        if not self.scales or min(self.scales) <= 0:
            raise InvalidInputError(f"scales must be non-empty and positive, got {self.scales}")
        if not self.ratios or min(self.ratios) <= 0:
            raise InvalidInputError(f"ratios must be non-empty and positive, got {self.ratios}")


def generate_anchors(image_w: float, image_h: float, grid: AnchorGrid) -> list[HorizontalBox]:
    """Anchors centered at ``(i + 0.5) * stride`` over the image.

    Ordering is row-major over cells (y outer, x inner), then scale, then ratio.
    """
    if not (image_w > 0 and image_h > 0):
        raise InvalidInputError(f"image size must be positive, got {image_w}x{image_h}")
    cols = int(image_w // grid.stride)
    rows = int(image_h // grid.stride)
    shapes = []
    for scale in grid.scales:
        for ratio in grid.ratios:
            root = math.sqrt(ratio)
            shapes.append((scale / root, scale * root))
    anchors = []
    for j in range(rows):
        cy = (j + 0.5) * grid.stride
        for i in range(cols):
            cx = (i + 0.5) * grid.stride
            anchors.extend(HorizontalBox(cx, cy, w, h) for w, h in shapes)
    return anchors
