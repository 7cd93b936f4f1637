"""Run configuration loaded from a JSON file.

Layout::

    {
      "assignment": {"candidate_iou": 0.3, "threshold": 0.7, "force_best_per_gt": true},
      "bench": {"trials": 200, "steps": 500, ...},
      "anchor_grid": {"stride": 8, "scales": [32], "ratios": [0.5, 1, 2]},
      "io": {"image_size": [1024, 1024], "out_dir": "out"}
    }

Every section and key is optional.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .anchors import AnchorGrid
from .assignment import AssignmentConfig
from .bench import BenchConfig
from .errors import InvalidInputError


@dataclass(frozen=True)
class IOConfig:
    image_size: tuple[float, float] = (1024.0, 1024.0)
    out_dir: str = "out"

    def __post_init__(self):
        size = tuple(float(v) for v in self.image_size)
        if len(size) != 2 or min(size) <= 0:
            raise InvalidInputError(f"image_size must be two positive numbers, got {self.image_size}")
        object.__setattr__(self, "image_size", size)


@dataclass(frozen=True)
class RunConfig:
    assignment: AssignmentConfig = field(default_factory=AssignmentConfig)
    bench: BenchConfig = field(default_factory=BenchConfig)
    anchor_grid: AnchorGrid = field(default_factory=AnchorGrid)
    io: IOConfig = field(default_factory=IOConfig)

    def to_dict(self) -> dict:
        return asdict(self)


_SECTIONS = {
    "assignment": AssignmentConfig,
    "bench": BenchConfig,
    "anchor_grid": AnchorGrid,
    "io": IOConfig,
}


def _build(cls, section: str, data):
    if not isinstance(data, dict):
        raise InvalidInputError(f"config section {section!r} must be an object")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise InvalidInputError(f"unknown key(s) in config section {section!r}: {', '.join(unknown)}")
    try:
        return cls(**data)
    except TypeError as exc:
        raise InvalidInputError(f"bad config section {section!r}: {exc}") from None


def config_from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise InvalidInputError("config root must be an object")
    unknown = sorted(set(data) - set(_SECTIONS))
    if unknown:
        raise InvalidInputError(f"unknown config section(s): {', '.join(unknown)}")
    parts = {name: _build(cls, name, data[name]) for name, cls in _SECTIONS.items() if name in data}
    return RunConfig(**parts)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"{path}: invalid JSON: {exc}") from None
    return config_from_dict(data)
