"""
Training masks for the lithography problem.

Every mask starts from the two-squares pattern and receives a few rectangle
edits anchored at control points of the left square. Each edit is applied
together with its left-right, up-down and point mirror images, so every mask
keeps both mirror symmetries of the base.
"""
from dataclasses import dataclass
from typing import Literal

import numpy as np

from core.fields import BinaryImage
from pipeline.datagen.schemas import MaskConfig
from pipeline.litho.model import TWO_SQUARES, two_squares_mask


@dataclass(frozen=True)
class MaskEdit:
    point_id: int
    action: Literal["add", "remove"]
    rect_width: int
    rect_height: int

    @property
    def aspect_ratio(self) -> float:
        return self.rect_height / self.rect_width


@dataclass(frozen=True)
class MaskSpec:
    edits: tuple[MaskEdit, ...]


def control_points(config: MaskConfig) -> list[tuple[int, int]]:
    """Twelve (row, col) points of the left square: corners, edge midpoints, outer offsets."""
    size = config.size
    top_f, bottom_f, left_f, right_f = TWO_SQUARES[0]
    top, bottom = round(top_f * size), round(bottom_f * size) - 1
    left, right = round(left_f * size), round(right_f * size) - 1
    mid_row, mid_col = (top + bottom + 1) // 2, (left + right + 1) // 2
    d = config.outer_offset
    return [
        (top, left), (top, right), (bottom, left), (bottom, right),
        (top, mid_col), (bottom, mid_col), (mid_row, left), (mid_row, right),
        (top - d, mid_col), (bottom + d, mid_col), (mid_row, left - d), (mid_row, right + d),
    ]


def draw_mask_spec(rng: np.random.Generator, config: MaskConfig) -> MaskSpec:
    point_count = len(control_points(config))
    edit_count = int(rng.integers(config.min_edits, config.max_edits + 1))
    edits = []
    for _ in range(edit_count):
        point_id = int(rng.integers(point_count))
        action = "add" if rng.random() < 0.5 else "remove"
        rect_width = int(rng.integers(config.rect_min, config.rect_max + 1))
        aspect = float(np.exp(rng.uniform(np.log(config.aspect_min), np.log(config.aspect_max))))
        low = int(np.ceil(config.aspect_min * rect_width))
        high = int(np.floor(config.aspect_max * rect_width))
        rect_height = int(np.clip(round(aspect * rect_width), max(low, 1), high))
        edits.append(MaskEdit(point_id, action, rect_width, rect_height))
    return MaskSpec(tuple(edits))


def render_mask(spec: MaskSpec, config: MaskConfig) -> BinaryImage:
    size = config.size
    mask = two_squares_mask(size, size).data.copy()
    points = control_points(config)

    for edit in spec.edits:
        row, col = points[edit.point_id]
        top = max(row - edit.rect_height // 2, 0)
        bottom = min(row - edit.rect_height // 2 + edit.rect_height, size)
        left = max(col - edit.rect_width // 2, 0)
        right = min(col - edit.rect_width // 2 + edit.rect_width, size)

        region = np.zeros((size, size), dtype=bool)
        region[top:bottom, left:right] = True
        region |= region[:, ::-1] | region[::-1, :] | region[::-1, ::-1]
        mask[region] = 1.0 if edit.action == "add" else 0.0
    return BinaryImage(mask)


def sample_mask_with_spec(seed: int, config: MaskConfig) -> tuple[BinaryImage, MaskSpec]:
    spec = draw_mask_spec(np.random.default_rng(seed), config)
    return render_mask(spec, config), spec


def sample_mask(seed: int, config: MaskConfig) -> BinaryImage:
    return sample_mask_with_spec(seed, config)[0]
