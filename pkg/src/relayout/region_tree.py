"""Recursive region decomposition of flat layouts.

A layout is split by projecting its boxes onto both axes, grouping the
projections by overlap and picking the axis whose grouping is most regular.
Each group is decomposed again until single elements remain. Regions are
then enriched with margins, cross-axis alignment and a parallel flag.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .geometry import (BBox, Element, Interval, Layout, connected_components,
                       project, symmetric_iod, union_box)

ROW, COLUMN = "row", "column"
START, CENTER, END = "start", "center", "end"

DEFAULT_PHI = 0.5
DEFAULT_EPS_PAR = 0.05
DEFAULT_ALIGN_TOL = 0.01
MARGIN_OVERLAP_TOL = 1e-4

UNSPLITTABLE = "unsplittable"
NEGATIVE_MARGIN = "negative_margin"


@dataclass(frozen=True)
class RegionNode:
    """A node of the relation tree.

    ``kind`` is ``"region"`` or ``"leaf"``. Leaves carry ``element_index``;
    regions carry ``direction``, ``align``, ``is_parallel`` and children.
    ``margin`` is the gap to the previous sibling (or the parent's leading
    edge) along the parent's direction.
    """

    kind: str
    bbox: BBox
    children: tuple[RegionNode, ...] = ()
    direction: str | None = None
    align: str | None = None
    is_parallel: bool = False
    element_index: int | None = None
    margin: float = 0.0
    flags: frozenset = frozenset()

    @classmethod
    def leaf(cls, element_index: int, bbox: BBox, margin: float = 0.0) -> RegionNode:
        return cls("leaf", bbox, element_index=element_index, margin=margin)

    @classmethod
    def region(cls, direction: str, children: Sequence[RegionNode],
               align: str = CENTER, is_parallel: bool = False,
               margin: float = 0.0, flags=frozenset()) -> RegionNode:
        if direction not in (ROW, COLUMN):
            raise ValueError(f"bad direction {direction!r}")
        children = tuple(children)
        if not children:
            raise ValueError("region without children")
        return cls("region", union_box(c.bbox for c in children), children,
                   direction=direction, align=align, is_parallel=is_parallel,
                   margin=margin, flags=frozenset(flags))

    @property
    def is_leaf(self) -> bool:
        return self.kind == "leaf"

    def iter_nodes(self):
        """Pre-order traversal."""
        yield self
        for child in self.children:
            yield from child.iter_nodes()

    def regions(self) -> list[RegionNode]:
        return [n for n in self.iter_nodes() if not n.is_leaf]

    def leaves(self) -> list[RegionNode]:
        return [n for n in self.iter_nodes() if n.is_leaf]

    def depth(self) -> int:
        if self.is_leaf:
            return 0
        return 1 + max(c.depth() for c in self.children)


@dataclass(frozen=True)
class DirectionEstimate:
    direction: str
    groups: list[list[int]]


def group_by_overlap(intervals: Sequence[Interval], phi: float) -> list[list[int]]:
    if not 0 < phi <= 1:
        raise ValueError(f"phi must lie in (0, 1], got {phi}")
    n = len(intervals)
    edges = [(i, j) for i in range(n) for j in range(i + 1, n)
             if symmetric_iod(intervals[i], intervals[j]) >= phi]
    return connected_components(n, edges)


def group_variance(groups: Sequence[Sequence[int]]) -> float:
    return float(np.var([len(g) for g in groups]))


def estimate_direction(boxes: Sequence[BBox], phi: float = DEFAULT_PHI) -> DirectionEstimate:
    if len(boxes) < 2:
        raise ValueError("direction needs at least two boxes")
    gx = group_by_overlap(project(boxes, "x"), phi)
    gy = group_by_overlap(project(boxes, "y"), phi)
    if len(gx) == 1 and len(gy) > 1:
        return DirectionEstimate(COLUMN, gy)
    if len(gy) == 1 and len(gx) > 1:
        return DirectionEstimate(ROW, gx)
    if group_variance(gx) <= group_variance(gy):
        return DirectionEstimate(ROW, gx)
    return DirectionEstimate(COLUMN, gy)


def _lead(box: BBox, direction: str) -> float:
    return box.x if direction == ROW else box.y


def _trail(box: BBox, direction: str) -> float:
    return box.x2 if direction == ROW else box.y2


def _order_key(node: RegionNode, direction: str):
    first_index = min(leaf.element_index for leaf in node.leaves())
    cross = node.bbox.y if direction == ROW else node.bbox.x
    return (_lead(node.bbox, direction), cross, first_index)


def compute_margins(node: RegionNode) -> RegionNode:
    """Set each child's margin along the region direction.

    The first child is measured from the region's leading edge, later ones
    from the previous child's trailing edge. Overlaps under 1e-4 clamp to 0;
    larger ones keep the negative value and flag the child.
    """
    if node.is_leaf:
        return node
    d = node.direction
    prev_edge = _lead(node.bbox, d)
    children = []
    for child in node.children:
        gap = _lead(child.bbox, d) - prev_edge
        flags = child.flags - {NEGATIVE_MARGIN}
        if gap < 0:
            if gap > -MARGIN_OVERLAP_TOL:
                gap = 0.0
            else:
                flags = flags | {NEGATIVE_MARGIN}
        children.append(replace(child, margin=gap, flags=frozenset(flags)))
        prev_edge = _trail(child.bbox, d)
    return replace(node, children=tuple(children))


def infer_align(node: RegionNode, tol: float = DEFAULT_ALIGN_TOL) -> RegionNode:
    if node.is_leaf:
        return node
    boxes = [c.bbox for c in node.children]
    if node.direction == ROW:
        lead = [b.y for b in boxes]
        trail = [b.y2 for b in boxes]
        mid = [b.cy for b in boxes]
    else:
        lead = [b.x for b in boxes]
        trail = [b.x2 for b in boxes]
        mid = [b.cx for b in boxes]

    def agree(values):
        return max(values) - min(values) <= tol

    if agree(lead):
        align = START
    elif agree(mid):
        align = CENTER
    elif agree(trail):
        align = END
    else:
        align = CENTER
    return replace(node, align=align)


def _sizes_agree(values: Sequence[float], eps: float) -> bool:
    top = max(values)
    if top <= 0:
        return True
    return (top - min(values)) / top <= eps


def detect_parallel(node: RegionNode, eps_par: float = DEFAULT_EPS_PAR) -> RegionNode:
    if node.is_leaf:
        return node
    kids = node.children
    parallel = (len(kids) >= 2 and all(c.is_leaf for c in kids)
                and _sizes_agree([c.bbox.w for c in kids], eps_par)
                and _sizes_agree([c.bbox.h for c in kids], eps_par))
    return replace(node, is_parallel=parallel)


def enrich(node: RegionNode, eps_par: float = DEFAULT_EPS_PAR,
           align_tol: float = DEFAULT_ALIGN_TOL) -> RegionNode:
    return detect_parallel(infer_align(compute_margins(node), align_tol), eps_par)


def build_region_tree(layout: Layout, phi: float = DEFAULT_PHI,
                      eps_par: float = DEFAULT_EPS_PAR,
                      align_tol: float = DEFAULT_ALIGN_TOL) -> RegionNode:
    boxes = layout.boxes
    if not boxes:
        raise ValueError("cannot build a tree for an empty layout")

    def build(indices: list[int]) -> RegionNode:
        if len(indices) == 1:
            return RegionNode.leaf(indices[0], boxes[indices[0]])
        est = estimate_direction([boxes[i] for i in indices], phi)
        d = est.direction
        if len(est.groups) == 1:
            # every projection overlaps on both axes: keep the elements as
            # leaves in reading order along the chosen direction
            leaves = [RegionNode.leaf(i, boxes[i]) for i in indices]
            leaves.sort(key=lambda n: _order_key(n, d))
            node = RegionNode.region(d, leaves, flags={UNSPLITTABLE})
        else:
            children = [build([indices[k] for k in g]) for g in est.groups]
            children.sort(key=lambda n: _order_key(n, d))
            node = RegionNode.region(d, children)
        return enrich(node, eps_par, align_tol)

    return build(list(range(len(boxes))))


def render_tree(node: RegionNode) -> list[tuple[int, BBox]]:
    out = [(leaf.element_index, leaf.bbox) for leaf in node.leaves()]
    indices = [i for i, _ in out]
    if len(set(indices)) != len(indices):
        raise ValueError("duplicate element index in tree")
    return sorted(out, key=lambda t: t[0])


def is_hard(layout: Layout, tree: RegionNode) -> bool:
    if len(layout.elements) > 4:
        return True
    for node in tree.regions():
        if node.is_parallel:
            return True
        if any(not c.is_leaf for c in node.children):
            return True
    return False


def layout_from_tree(tree: RegionNode, categories: Sequence[str] | None = None,
                     canvas: tuple[int, int] = (1000, 1000)) -> Layout:
    """Rebuild a layout from a tree's leaves, ordered by element index."""
    elements = [Element(categories[idx] if categories is not None else "element", box)
                for idx, box in render_tree(tree)]
    return Layout(canvas[0], canvas[1], tuple(elements))


# -- JSON export --------------------------------------------------------------

def tree_to_json(node: RegionNode) -> dict:
    out = {"kind": node.kind}
    if node.is_leaf:
        out["element"] = node.element_index
    else:
        out["direction"] = node.direction
        out["align"] = node.align
        out["parallel"] = node.is_parallel
    out["margin"] = node.margin
    out["box"] = node.bbox.as_list()
    if node.flags:
        out["flags"] = sorted(node.flags)
    if not node.is_leaf:
        out["children"] = [tree_to_json(c) for c in node.children]
    return out


def tree_from_json(data: dict) -> RegionNode:
    box = BBox(*data["box"])
    flags = frozenset(data.get("flags", ()))
    if data["kind"] == "leaf":
        return RegionNode("leaf", box, element_index=int(data["element"]),
                          margin=float(data["margin"]), flags=flags)
    if data["kind"] != "region":
        raise ValueError(f"unknown node kind {data['kind']!r}")
    return RegionNode("region", box,
                      tuple(tree_from_json(c) for c in data["children"]),
                      direction=data["direction"], align=data["align"],
                      is_parallel=bool(data["parallel"]),
                      margin=float(data["margin"]), flags=flags)
