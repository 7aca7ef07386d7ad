"""Seeded synthetic layouts with known structure.

Used by the test suite, the acceptance checks and the fixture script.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Sequence

import numpy as np

from .geometry import BBox, Element, Layout
from .region_tree import COLUMN, ROW, RegionNode, enrich

CATEGORIES = ("text", "logo", "underlay", "embellishment")
# keeps every coordinate at or below 0.999 so per-mille codes never clip
CANVAS_BOX = BBox(0.0, 0.0, 0.999, 0.999)

HARD_KINDS = ("parallel_row", "nested", "many")
EASY_KINDS = ("flat_column", "flat_row")


def _split_span(rng, lo: float, length: float, k: int, gap_frac: float = 0.15):
    """Cut [lo, lo + length] into k slots separated by random gaps."""
    weights = rng.uniform(0.5, 1.5, size=k)
    gaps = rng.uniform(0.0, gap_frac, size=k + 1) * length / (k + 1)
    usable = length - gaps.sum()
    sizes = usable * weights / weights.sum()
    slots, pos = [], lo + gaps[0]
    for s, g in zip(sizes, gaps[1:]):
        slots.append((pos, s))
        pos += s + g
    return slots


def random_tree(rng: np.random.Generator, max_depth: int = 4, max_elements: int = 20,
                categories: Sequence[str] = CATEGORIES,
                area: BBox = CANVAS_BOX) -> tuple[RegionNode, Layout]:
    """A random, well-formed relation tree and the layout of its leaves.

    Element indices are a random permutation of leaf positions.
    """
    leaves: list[BBox] = []

    def gen(box: BBox, depth: int, budget: int) -> RegionNode:
        make_leaf = (depth >= max_depth or budget < 2
                     or (depth > 0 and rng.random() < 0.35))
        if make_leaf:
            w = box.w * rng.uniform(0.4, 1.0)
            h = box.h * rng.uniform(0.4, 1.0)
            leaf_box = BBox(box.x + rng.uniform(0, box.w - w), box.y + rng.uniform(0, box.h - h), w, h)
            leaves.append(leaf_box)
            return RegionNode.leaf(len(leaves) - 1, leaf_box)
        direction = ROW if rng.random() < 0.5 else COLUMN
        k = int(rng.integers(2, min(4, budget) + 1))
        shares = np.full(k, 1)
        for _ in range(budget - k):
            if rng.random() < 0.5:
                shares[rng.integers(k)] += 1
        if direction == ROW:
            slots = [BBox(p, box.y, s, box.h) for p, s in _split_span(rng, box.x, box.w, k)]
        else:
            slots = [BBox(box.x, p, box.w, s) for p, s in _split_span(rng, box.y, box.h, k)]
        children = [gen(slot, depth + 1, int(n)) for slot, n in zip(slots, shares)]
        return enrich(RegionNode.region(direction, children))

    budget = int(rng.integers(1, max_elements + 1))
    tree = gen(area, 0, budget)
    perm = rng.permutation(len(leaves))

    def relabel(node: RegionNode) -> RegionNode:
        if node.is_leaf:
            return RegionNode("leaf", node.bbox, element_index=int(perm[node.element_index]),
                              margin=node.margin, flags=node.flags)
        return RegionNode("region", node.bbox, tuple(relabel(c) for c in node.children),
                          node.direction, node.align, node.is_parallel, None, node.margin, node.flags)

    tree = relabel(tree)
    elements = [None] * len(leaves)
    for pos, box in enumerate(leaves):
        elements[int(perm[pos])] = Element(str(rng.choice(list(categories))), box)
    return tree, Layout(1000, 1000, tuple(elements))


def axis_separable_layout(rng: np.random.Generator, axis: str = "x",
                          max_elements: int = 20) -> tuple[Layout, str, list[list[int]]]:
    """Groups laid out along one axis, every box overlapping on the other.

    Boxes in a group share at least 70% of the group span along ``axis``;
    groups are disjoint. Returns the layout, the expected direction and the
    expected groups (sorted by smallest member).
    """
    k = int(rng.integers(2, 6))
    sizes = [int(rng.integers(1, 4)) for _ in range(k)]
    while sum(sizes) > max_elements:
        sizes[int(np.argmax(sizes))] -= 1
    along = _split_span(rng, 0.02, 0.96, k, gap_frac=0.4)
    c_lo = rng.uniform(0.05, 0.4)
    c_len = rng.uniform(0.2, 0.5)
    spans = []  # (along_lo, along_hi, cross_lo, cross_hi, group)
    for g, ((lo, length), m) in enumerate(zip(along, sizes)):
        for _ in range(m):
            a0 = lo + rng.uniform(0, 0.15) * length
            a1 = lo + length - rng.uniform(0, 0.15) * length
            c0 = c_lo + rng.uniform(0, 0.15) * c_len
            c1 = c_lo + c_len - rng.uniform(0, 0.15) * c_len
            spans.append((a0, a1, c0, c1, g))
    order = rng.permutation(len(spans))
    elements, membership = [], [[] for _ in range(k)]
    for new_idx, old in enumerate(order):
        a0, a1, c0, c1, g = spans[old]
        box = BBox(a0, c0, a1 - a0, c1 - c0) if axis == "x" else BBox(c0, a0, c1 - c0, a1 - a0)
        elements.append(Element("text", box))
        membership[g].append(new_idx)
    groups = sorted((sorted(m) for m in membership), key=lambda m: m[0])
    return Layout(1000, 1000, tuple(elements)), (ROW if axis == "x" else COLUMN), groups


def _distinct_sizes(rng, n: int, lo: float, hi: float) -> list[float]:
    # successive sizes differ by >= 15% so no run of them is uniform
    base = rng.uniform(lo, hi / 1.15 ** (n - 1))
    sizes = [base * 1.15 ** i * rng.uniform(1.0, 1.02) for i in range(n)]
    rng.shuffle(sizes)
    return sizes


def planted_layout(rng: np.random.Generator, kind: str) -> tuple[Layout, bool]:
    """A layout whose hard-split status is known from construction.

    ``flat_column`` / ``flat_row``: 2-4 leaves of distinct sizes (not hard).
    ``parallel_row``: 2-4 equal boxes in a row (hard: parallel).
    ``nested``: a wide header over a row of 2-3 distinct items (hard: nesting).
    ``many``: 5-8 stacked distinct leaves (hard: element count).
    """
    cats = list(CATEGORIES)

    def cat():
        return str(rng.choice(cats))

    boxes: list[BBox] = []
    if kind in ("flat_column", "many"):
        n = int(rng.integers(2, 5)) if kind == "flat_column" else int(rng.integers(5, 9))
        widths = _distinct_sizes(rng, n, 0.2, 0.8)
        x0 = rng.uniform(0.02, 0.15)
        for (y, h), w in zip(_split_span(rng, 0.02, 0.96, n, gap_frac=0.5), widths):
            boxes.append(BBox(x0, y, w, h * rng.uniform(0.6, 1.0)))
    elif kind == "flat_row":
        n = int(rng.integers(2, 5))
        heights = _distinct_sizes(rng, n, 0.2, 0.8)
        y0 = rng.uniform(0.02, 0.15)
        for (x, w), h in zip(_split_span(rng, 0.02, 0.96, n, gap_frac=0.5), heights):
            boxes.append(BBox(x, y0, w * rng.uniform(0.6, 1.0), h))
    elif kind == "parallel_row":
        n = int(rng.integers(2, 5))
        slot = 0.96 / n
        w = slot * rng.uniform(0.5, 0.9)
        h = rng.uniform(0.1, 0.4)
        y0 = rng.uniform(0.05, 0.5)
        for i in range(n):
            boxes.append(BBox(0.02 + i * slot, y0, w, h))
    elif kind == "nested":
        n = int(rng.integers(2, 4))
        boxes.append(BBox(0.05, rng.uniform(0.02, 0.1), 0.9, rng.uniform(0.08, 0.15)))
        cy = rng.uniform(0.5, 0.7)
        heights = _distinct_sizes(rng, n, 0.08, 0.25)
        slots = _split_span(rng, 0.06, 0.88, n, gap_frac=0.5)
        for (x, w), h in zip(slots, heights):
            boxes.append(BBox(x, cy - h / 2, w * rng.uniform(0.5, 0.9), h))
    else:
        raise ValueError(f"unknown kind {kind!r}")
    order = rng.permutation(len(boxes))
    layout = Layout(1000, 1000, tuple(Element(cat(), boxes[i]) for i in order))
    return layout, kind in HARD_KINDS


def blob_map(rng: np.random.Generator, width: int, height: int, n_blobs: int = 2,
             noise: float = 0.05) -> np.ndarray:
    """Dark map with a few bright rectangles plus mild noise, values in [0, 1]."""
    values = rng.uniform(0.0, noise, size=(height, width))
    for _ in range(n_blobs):
        w = int(rng.integers(width // 8, width // 3))
        h = int(rng.integers(height // 8, height // 3))
        x = int(rng.integers(0, width - w))
        y = int(rng.integers(0, height - h))
        values[y:y + h, x:x + w] = rng.uniform(0.7, 1.0)
    return np.clip(values, 0.0, 1.0)


def _save_gray(path: Path, values: np.ndarray) -> None:
    from PIL import Image

    Image.fromarray(np.round(values * 255).astype(np.uint8), mode="L").save(path)


def make_fixture(out_dir: str | Path, n: int = 100, seed: int = 0, corrupt: int = 0,
                 canvas: tuple[int, int] = (120, 160)) -> Path:
    """Write ``records.jsonl`` plus saliency and canvas PNGs under ``out_dir``.

    The last ``corrupt`` lines are malformed. Some records pair a text with
    a nearly identical underlay so banner merging is exercised.
    """
    out = Path(out_dir)
    (out / "saliency").mkdir(parents=True, exist_ok=True)
    (out / "canvas").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    W, H = canvas
    kinds = EASY_KINDS + HARD_KINDS
    lines = []
    for i in range(n - corrupt):
        layout, _ = planted_layout(rng, kinds[i % len(kinds)])
        elements = [{"category": e.category,
                     "box_px": [round(e.bbox.x * W, 2), round(e.bbox.y * H, 2),
                                round(e.bbox.w * W, 2), round(e.bbox.h * H, 2)],
                     "text": "sample" if e.category == "text" else None}
                    for e in layout.elements]
        if i % 7 == 3 and any(e["category"] == "text" for e in elements):
            t = next(e for e in elements if e["category"] == "text")
            x, y, w, h = t["box_px"]
            elements.append({"category": "underlay", "box_px": [x, y, w, h * 1.02], "text": None})
        rec_id = f"poster_{i:04d}"
        smap = blob_map(rng, W, H, n_blobs=int(rng.integers(1, 4)))
        _save_gray(out / "saliency" / f"{rec_id}.png", smap)
        gray = np.clip(rng.uniform(0.2, 0.8) + rng.normal(0, 0.05, size=(H, W)), 0, 1)
        _save_gray(out / "canvas" / f"{rec_id}.png", gray)
        lines.append(json.dumps({"id": rec_id, "canvas": [W, H], "elements": elements,
                                 "saliency": f"saliency/{rec_id}.png",
                                 "canvas_image": f"canvas/{rec_id}.png"}))
    for j in range(corrupt):
        if j % 2 == 0:
            lines.append('{"id": "broken_%d", "canvas": [120, ' % j)
        else:
            lines.append(json.dumps({"id": f"broken_{j}", "elements": []}))
    path = out / "records.jsonl"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
