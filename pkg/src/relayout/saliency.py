"""Salient block extraction from grayscale saliency maps.

Blocks are scored with an integral image over the binarized map: a
rectangle's score is its white density mapped to [-1, 1]. Candidates are
the bounding rectangles of white connected components, shrunk edge by edge
while the score improves, and chosen greedily without overlap.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy import ndimage

from .geometry import BBox

MAX_BLOCKS = 4
DEFAULT_TAU_BIN = 0.5
DEFAULT_S_MIN = 0.3
MIN_AREA_FRAC = 0.001

_EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True, eq=False)
class SaliencyMap:
    values: np.ndarray  # (height, width), floats in [0, 1]

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.size == 0:
            raise ValueError(f"saliency map must be a non-empty 2-D array, got {v.shape}")
        if not np.all(np.isfinite(v)) or v.min() < 0 or v.max() > 1:
            raise ValueError("saliency values must lie in [0, 1]")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_flat(cls, width: int, height: int, values) -> SaliencyMap:
        values = np.asarray(values, dtype=np.float64)
        if values.size != width * height:
            raise ValueError(f"{values.size} values for a {width}x{height} map")
        return cls(values.reshape(height, width))

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


class PixelRect(NamedTuple):
    """Half-open pixel rectangle ``[x0, x1) x [y0, y1)``."""

    x0: int
    y0: int
    x1: int
    y1: int

    @property
    def area(self) -> int:
        return max(self.x1 - self.x0, 0) * max(self.y1 - self.y0, 0)

    def overlaps(self, other: PixelRect) -> bool:
        return (min(self.x1, other.x1) > max(self.x0, other.x0)
                and min(self.y1, other.y1) > max(self.y0, other.y0))


@dataclass(frozen=True)
class SalientBlock:
    bbox: BBox
    score: float | None = None  # None when parsed back from a sequence


class IntegralImage:
    """Summed-area table with a zero first row and column."""

    def __init__(self, values: np.ndarray):
        values = np.asarray(values, dtype=np.float64)
        table = np.zeros((values.shape[0] + 1, values.shape[1] + 1))
        table[1:, 1:] = values.cumsum(axis=0).cumsum(axis=1)
        self.table = table

    @property
    def width(self) -> int:
        return self.table.shape[1] - 1

    @property
    def height(self) -> int:
        return self.table.shape[0] - 1

    def rect_sum(self, rect: PixelRect) -> float:
        t = self.table
        x0, y0, x1, y1 = rect
        return float(t[y1, x1] - t[y0, x1] - t[y1, x0] + t[y0, x0])


def integral_image(smap: SaliencyMap | np.ndarray) -> IntegralImage:
    values = smap.values if isinstance(smap, SaliencyMap) else smap
    return IntegralImage(values)


def binarize(smap: SaliencyMap, tau_bin: float = DEFAULT_TAU_BIN) -> np.ndarray:
    return smap.values >= tau_bin


def block_score(binarized_ii: IntegralImage, rect: PixelRect) -> float:
    """(white - black) / area inside ``rect``, i.e. 2 * white density - 1."""
    area = rect.area
    if area <= 0:
        raise ValueError(f"zero-area rectangle {rect}")
    x0, y0, x1, y1 = rect
    if x0 < 0 or y0 < 0 or x1 > binarized_ii.width or y1 > binarized_ii.height:
        raise ValueError(f"rectangle {rect} outside the map")
    white = binarized_ii.rect_sum(rect)
    return (2.0 * white - area) / area


def refine(binarized_ii: IntegralImage, rect: PixelRect) -> tuple[PixelRect, float]:
    """Shrink one edge at a time while that strictly raises the score."""
    best = block_score(binarized_ii, rect)
    while True:
        x0, y0, x1, y1 = rect
        moves = []
        if x1 - x0 > 1:
            moves += [PixelRect(x0 + 1, y0, x1, y1), PixelRect(x0, y0, x1 - 1, y1)]
        if y1 - y0 > 1:
            moves += [PixelRect(x0, y0 + 1, x1, y1), PixelRect(x0, y0, x1, y1 - 1)]
        scored = [(block_score(binarized_ii, m), m) for m in moves]
        if not scored:
            return rect, best
        score, move = max(scored, key=lambda t: t[0])  # first max wins ties
        if score <= best:
            return rect, best
        rect, best = move, score


def _candidates(mask: np.ndarray, min_pixels: float) -> list[PixelRect]:
    labels, _ = ndimage.label(mask, structure=_EIGHT_CONNECTED)
    sizes = np.bincount(labels.ravel())
    rects = []
    for k, sl in enumerate(ndimage.find_objects(labels), start=1):
        if sl is None or sizes[k] < min_pixels:
            continue
        rects.append(PixelRect(sl[1].start, sl[0].start, sl[1].stop, sl[0].stop))
    return rects


def extract_blocks(smap: SaliencyMap, tau_bin: float = DEFAULT_TAU_BIN,
                   s_min: float = DEFAULT_S_MIN, max_blocks: int = MAX_BLOCKS,
                   min_area_frac: float = MIN_AREA_FRAC) -> list[SalientBlock]:
    """Pick up to ``max_blocks`` disjoint salient rectangles.

    Each round relabels the remaining white pixels, refines every component's
    bounding rectangle, and keeps the best one scoring at least ``s_min``
    that does not touch an earlier pick; its pixels are then cleared. The
    result is ordered by descending score, ties going to the top-left rect.
    """
    if not 0 <= max_blocks <= MAX_BLOCKS:
        raise ValueError(f"max_blocks must be in [0, {MAX_BLOCKS}]")
    mask = binarize(smap, tau_bin).astype(np.float64)
    min_pixels = max(1.0, min_area_frac * mask.size)
    chosen: list[tuple[PixelRect, float]] = []
    while len(chosen) < max_blocks:
        ii = IntegralImage(mask)
        best = None
        for rect in _candidates(mask > 0, min_pixels):
            rect, score = refine(ii, rect)
            if score < s_min or rect.area < min_pixels:
                continue
            if any(rect.overlaps(c) for c, _ in chosen):
                continue
            key = (-score, rect.y0, rect.x0, rect.y1, rect.x1)
            if best is None or key < best[0]:
                best = (key, rect, score)
        if best is None:
            break
        _, rect, score = best
        chosen.append((rect, score))
        mask[rect.y0:rect.y1, rect.x0:rect.x1] = 0.0

    chosen.sort(key=lambda t: (-t[1], t[0].y0, t[0].x0))
    W, H = smap.width, smap.height
    return [SalientBlock(BBox(r.x0 / W, r.y0 / H, (r.x1 - r.x0) / W, (r.y1 - r.y0) / H), s)
            for r, s in chosen]


def load_saliency_map(path: str | Path) -> SaliencyMap:
    """Read an 8-bit grayscale image (PNG, PGM, ...) into [0, 1] values."""
    from PIL import Image

    with Image.open(path) as img:
        arr = np.asarray(img.convert("L"), dtype=np.float64)
    return SaliencyMap(arr / 255.0)


def blocks_to_json(blocks: list[SalientBlock]) -> list[dict]:
    return [{"box": b.bbox.as_list(), "score": b.score} for b in blocks]


def blocks_from_json(data: list[dict]) -> list[SalientBlock]:
    return [SalientBlock(BBox(*d["box"]), d.get("score")) for d in data]
