"""Boxes, intervals, overlap ratios and the layout record format.

All coordinates are fractions of the canvas: ``x``/``w`` are relative to the
canvas width, ``y``/``h`` to its height.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

logger = logging.getLogger(__name__)

MAX_ELEMENTS = 20
_EDGE_TOL = 1e-6


class DegenerateBoxWarning(RuntimeWarning):
    """Both operands of an IoU have zero area."""


@dataclass(frozen=True)
class BBox:
    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if self.w < 0 or self.h < 0:
            raise ValueError(f"negative box size: {self}")

    @property
    def x2(self) -> float:
        return self.x + self.w

    @property
    def y2(self) -> float:
        return self.y + self.h

    @property
    def cx(self) -> float:
        return self.x + self.w / 2

    @property
    def cy(self) -> float:
        return self.y + self.h / 2

    @property
    def area(self) -> float:
        return self.w * self.h

    def as_list(self) -> list[float]:
        return [self.x, self.y, self.w, self.h]

    def intersection_area(self, other: BBox) -> float:
        iw = min(self.x2, other.x2) - max(self.x, other.x)
        ih = min(self.y2, other.y2) - max(self.y, other.y)
        if iw <= 0 or ih <= 0:
            return 0.0
        return iw * ih

    def is_within_canvas(self) -> bool:
        return (self.x >= 0 and self.y >= 0
                and self.x2 <= 1 + _EDGE_TOL and self.y2 <= 1 + _EDGE_TOL)


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"interval with lo > hi: {self}")

    @property
    def length(self) -> float:
        return self.hi - self.lo

    def intersection_length(self, other: Interval) -> float:
        return max(0.0, min(self.hi, other.hi) - max(self.lo, other.lo))


@dataclass(frozen=True)
class Element:
    category: str
    bbox: BBox
    text: str | None = None


@dataclass(frozen=True)
class Layout:
    canvas_w_px: int
    canvas_h_px: int
    elements: tuple[Element, ...] = ()
    saliency_ref: str | None = None
    canvas_ref: str | None = None

    def __post_init__(self):
        if self.canvas_w_px <= 0 or self.canvas_h_px <= 0:
            raise ValueError("canvas size must be positive")
        object.__setattr__(self, "elements", tuple(self.elements))

    @property
    def boxes(self) -> list[BBox]:
        return [e.bbox for e in self.elements]

    def __len__(self) -> int:
        return len(self.elements)


def union_box(boxes: Iterable[BBox]) -> BBox:
    boxes = list(boxes)
    if not boxes:
        raise ValueError("union of no boxes")
    x0 = min(b.x for b in boxes)
    y0 = min(b.y for b in boxes)
    x1 = max(b.x2 for b in boxes)
    y1 = max(b.y2 for b in boxes)
    return BBox(x0, y0, x1 - x0, y1 - y0)


def iou(a: BBox, b: BBox) -> float:
    inter = a.intersection_area(b)
    union = a.area + b.area - inter
    if union <= 0:
        warnings.warn(f"IoU of two zero-area boxes {a}, {b}; returning 0",
                      DegenerateBoxWarning, stacklevel=2)
        return 0.0
    return min(inter / union, 1.0)


Measurable = Union[BBox, Interval]


def iod(a: Measurable, b: Measurable) -> float:
    """Intersection over the measure of ``a`` (the detection operand).

    Works on boxes (area) and intervals (length); both operands must be of
    the same kind.
    """
    if isinstance(a, Interval) and isinstance(b, Interval):
        if a.length <= 0:
            raise ValueError(f"IoD undefined for zero-length interval {a}")
        return min(a.intersection_length(b) / a.length, 1.0)
    if isinstance(a, BBox) and isinstance(b, BBox):
        if a.area <= 0:
            raise ValueError(f"IoD undefined for zero-area box {a}")
        # edge arithmetic can overshoot the stored size by an ulp
        return min(a.intersection_area(b) / a.area, 1.0)
    raise TypeError("iod operands must both be BBox or both be Interval")


def project(boxes: Sequence[BBox], axis: str) -> list[Interval]:
    if axis == "x":
        return [Interval(b.x, b.x2) for b in boxes]
    if axis == "y":
        return [Interval(b.y, b.y2) for b in boxes]
    raise ValueError(f"axis must be 'x' or 'y', got {axis!r}")


class UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))
        self.rank = [0] * n

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, x: int, y: int) -> None:
        rx, ry = self.find(x), self.find(y)
        if rx == ry:
            return
        if self.rank[rx] < self.rank[ry]:
            rx, ry = ry, rx
        self.parent[ry] = rx
        if self.rank[rx] == self.rank[ry]:
            self.rank[rx] += 1


def connected_components(n: int, edges: Iterable[tuple[int, int]]) -> list[list[int]]:
    """Partition ``range(n)`` into components of the undirected edge graph.

    Components are sorted by their smallest member; members ascend.
    """
    uf = UnionFind(n)
    for i, j in edges:
        if not (0 <= i < n and 0 <= j < n):
            raise IndexError(f"edge ({i}, {j}) out of range for n={n}")
        uf.union(i, j)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(uf.find(i), []).append(i)
    return sorted(groups.values(), key=lambda g: g[0])


def symmetric_iod(a: Interval, b: Interval) -> float:
    """max(IoD(a, b), IoD(b, a)) for grouping edges.

    A zero-length interval counts as fully covered when it lies inside the
    other operand, so point-like projections still join their neighbours.
    """
    def one_way(p: Interval, q: Interval) -> float:
        if p.length <= 0:
            return 1.0 if q.lo <= p.lo <= q.hi else 0.0
        return min(p.intersection_length(q) / p.length, 1.0)
    return max(one_way(a, b), one_way(b, a))


# -- layout record JSON -----------------------------------------------------

def _clamp_box(x: float, y: float, w: float, h: float) -> tuple[BBox, bool]:
    x0, y0 = min(max(x, 0.0), 1.0), min(max(y, 0.0), 1.0)
    x1, y1 = min(max(x + w, 0.0), 1.0), min(max(y + h, 0.0), 1.0)
    clamped = (x0, y0, x1, y1) != (x, y, x + w, y + h)
    return BBox(x0, y0, max(x1 - x0, 0.0), max(y1 - y0, 0.0)), clamped


def layout_from_record(record: dict, *, allow_empty: bool = False,
                       max_elements: int = MAX_ELEMENTS) -> Layout:
    """Build a :class:`Layout` from a JSON record with pixel boxes.

    Pixel boxes are divided by the canvas size and clamped into the canvas;
    every clamp is logged.
    """
    try:
        canvas_w, canvas_h = (int(v) for v in record["canvas"])
        raw_elements = record["elements"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed layout record: {exc}") from exc
    if not allow_empty and not raw_elements:
        raise ValueError("layout record has no elements")
    if len(raw_elements) > max_elements:
        raise ValueError(f"{len(raw_elements)} elements exceeds cap of {max_elements}")
    if canvas_w <= 0 or canvas_h <= 0:
        raise ValueError(f"non-positive canvas {canvas_w}x{canvas_h}")

    elements = []
    for k, raw in enumerate(raw_elements):
        px, py, pw, ph = (float(v) for v in raw["box_px"])
        if pw < 0 or ph < 0:
            raise ValueError(f"element {k} has negative size")
        box, clamped = _clamp_box(px / canvas_w, py / canvas_h,
                                  pw / canvas_w, ph / canvas_h)
        if clamped:
            logger.info("clamped element %d box %s into canvas -> %s",
                        k, raw["box_px"], box.as_list())
        elements.append(Element(str(raw["category"]), box, raw.get("text")))
    return Layout(canvas_w, canvas_h, tuple(elements),
                  saliency_ref=record.get("saliency"),
                  canvas_ref=record.get("canvas_image"))


def layout_to_record(layout: Layout) -> dict:
    W, H = layout.canvas_w_px, layout.canvas_h_px
    return {
        "canvas": [W, H],
        "elements": [
            {"category": e.category,
             "box_px": [e.bbox.x * W, e.bbox.y * H, e.bbox.w * W, e.bbox.h * H],
             "text": e.text}
            for e in layout.elements
        ],
        "saliency": layout.saliency_ref,
        "canvas_image": layout.canvas_ref,
    }
