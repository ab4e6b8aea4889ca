import logging
from dataclasses import dataclass

import numpy as np

from core.fields import BinaryImage
from pipeline.datagen.errors import GenerationExhausted, datagen_errors
from pipeline.datagen.schemas import TrenchConfig

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Trench:
    left: int
    width: int
    depth: int

    @property
    def right(self) -> int:
        return self.left + self.width


@dataclass(frozen=True)
class TrenchSpec:
    surface_row: int
    trenches: tuple[Trench, ...]

    @property
    def count(self) -> int:
        return len(self.trenches)


def _fits(trenches: list[Trench], cell_width: int, gap: int) -> bool:
    ordered = sorted(trenches, key=lambda t: t.left)
    for first, second in zip(ordered, ordered[1:]):
        if second.left - first.right < gap:
            return False
    # flat surface across the periodic edge
    wrap = cell_width - ordered[-1].right + ordered[0].left
    return len(ordered) == 1 or wrap >= gap


def draw_trench_spec(rng: np.random.Generator, config: TrenchConfig) -> TrenchSpec:
    """Draw trench count and sizes, redrawing positions until the trenches keep their gap."""
    count = int(rng.integers(config.count_min, config.count_max + 1))
    widths = rng.integers(config.width_min, config.width_max + 1, size=count)
    depths = rng.integers(config.depth_min, config.depth_max + 1, size=count)

    for attempt in range(config.max_retries + 1):
        lefts = [int(rng.integers(0, config.width - w + 1)) for w in widths]
        trenches = [Trench(left, int(w), int(d)) for left, w, d in zip(lefts, widths, depths)]
        if _fits(trenches, config.width, config.min_gap):
            if attempt:
                logger.debug("Trench placement succeeded after %d retries", attempt)
            return TrenchSpec(config.surface_row, tuple(sorted(trenches, key=lambda t: t.left)))

    raise GenerationExhausted(
        datagen_errors[400].TrenchOverlap.value.format(
            count=count, widths=[int(w) for w in widths], gap=config.min_gap
        )
    )


def render_trench_cell(spec: TrenchSpec, config: TrenchConfig) -> BinaryImage:
    cell = np.zeros((config.height, config.width))
    cell[spec.surface_row:, :] = 1.0
    for trench in spec.trenches:
        cell[spec.surface_row:spec.surface_row + trench.depth, trench.left:trench.right] = 0.0
    return BinaryImage(cell)


def sample_trench_cell(seed: int, config: TrenchConfig) -> BinaryImage:
    return render_trench_cell(draw_trench_spec(np.random.default_rng(seed), config), config)
